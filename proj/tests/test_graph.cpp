#include <doctest.h>

#include "graph.hpp"

using namespace slimdet;

namespace {

std::string conv(int filters, int size, int stride, const char* extra = "") {
    return "[convolutional]\nbatch_normalize=1\nfilters=" + std::to_string(filters) +
           "\nsize=" + std::to_string(size) + "\nstride=" + std::to_string(stride) +
           "\npad=1\nactivation=leaky\n" + extra;
}

}  // namespace

TEST_CASE("five stride-2 convs bring 480x320 to a 15x10 grid") {
    std::string text = "[net]\nwidth=480\nheight=320\nchannels=3\n";
    for (int i = 0; i < 5; ++i) text += conv(8, 3, 2);
    NetworkDef net = parse_cfg(text);
    ShapeTable shapes = infer_shapes(net);
    CHECK(shapes.back() == Shape{8, 10, 15});
}

TEST_CASE("spatial pyramid pooling quadruples channels and keeps H and W") {
    std::string text =
        "[net]\nwidth=416\nheight=416\nchannels=3\n" + conv(512, 3, 32) +
        "[maxpool]\nsize=5\nstride=1\n"
        "[route]\nlayers=-2\n"
        "[maxpool]\nsize=9\nstride=1\n"
        "[route]\nlayers=-4\n"
        "[maxpool]\nsize=13\nstride=1\n"
        "[route]\nlayers=-1,-3,-5,-6\n";
    NetworkDef net = parse_cfg(text);
    ShapeTable shapes = infer_shapes(net);
    Shape base = shapes[0];
    CHECK(base.c == 512);
    for (size_t i = 1; i + 1 < shapes.size(); ++i) {
        CHECK(shapes[i].h == base.h);
        CHECK(shapes[i].w == base.w);
    }
    CHECK(shapes.back() == Shape{2048, base.h, base.w});
}

TEST_CASE("stride-2 maxpool and upsample shapes") {
    NetworkDef net = parse_cfg("[net]\nwidth=416\nheight=416\nchannels=3\n" + conv(16, 3, 16) +
                               "[maxpool]\nsize=2\nstride=2\n"
                               "[upsample]\nstride=2\n");
    ShapeTable shapes = infer_shapes(net);
    CHECK(shapes[0] == Shape{16, 26, 26});
    CHECK(shapes[1] == Shape{16, 13, 13});
    CHECK(shapes[2] == Shape{16, 26, 26});
}

TEST_CASE("conv parameter formula") {
    NetworkDef net = parse_cfg("[net]\nwidth=64\nheight=64\nchannels=3\n" + conv(16, 1, 1) +
                               conv(32, 3, 1) + "[maxpool]\nsize=2\nstride=2\n");
    std::vector<uint64_t> counts = parameter_counts(net);
    CHECK(counts[0] == 16 * 3 + 4 * 16);
    CHECK(counts[1] == 32 * 16 * 3 * 3 + 4 * 32);  // 4608 + 128 = 4736
    CHECK(counts[1] == 4736);
    CHECK(counts[2] == 0);
    CHECK(count_parameters(net) == counts[0] + counts[1]);
    CHECK(count_parameters(net) == weight_float_count(net));
}

TEST_CASE("parameter count survives a serialize round-trip") {
    std::string text = "[net]\nwidth=416\nheight=416\nchannels=3\n" + conv(32, 3, 1) + conv(64, 3, 2) +
                       conv(64, 1, 1) + "[shortcut]\nfrom=-2\n" + conv(24, 1, 1, "") +
                       "[yolo]\nanchors=10,14,23,27,37,58\nmask=0,1,2\nclasses=3\n";
    NetworkDef net = parse_cfg(text);
    CHECK(count_parameters(net) == count_parameters(parse_cfg(serialize_cfg(net))));
}

TEST_CASE("shortcut adds tie producers into one dependency group") {
    // conv0 -> conv1 -> conv2 -> shortcut(conv2 + conv0 output), all 8ch
    std::string text = "[net]\nwidth=64\nheight=64\nchannels=3\n" + conv(8, 3, 1) + conv(8, 3, 1) +
                       conv(8, 3, 1) + "[shortcut]\nfrom=0\n";
    NetworkDef net = parse_cfg(text);
    std::vector<DependencyGroup> groups = dependency_groups(net);
    REQUIRE(groups.size() == 1);
    CHECK(groups[0].members == std::vector<int>{0, 2});
    CHECK(groups[0].reason == GroupReason::shortcut_add);

    PruneAnalysis a = analyze_pruning(net);
    CHECK(a.group_of[0] == a.group_of[2]);
    CHECK(a.group_of[1] != a.group_of[0]);
    CHECK(a.prunable[0]);
    CHECK(a.prunable[1]);
    CHECK(a.prunable[2]);
}

TEST_CASE("chained residual adds merge transitively") {
    std::string text = "[net]\nwidth=64\nheight=64\nchannels=3\n" + conv(8, 3, 1) + conv(8, 3, 1) +
                       "[shortcut]\nfrom=0\n" + conv(8, 3, 1) + "[shortcut]\nfrom=2\n";
    NetworkDef net = parse_cfg(text);
    std::vector<DependencyGroup> groups = dependency_groups(net);
    REQUIRE(groups.size() == 1);
    CHECK(groups[0].members == std::vector<int>{0, 1, 3});
}

TEST_CASE("a net without shortcuts has no groups and all BN convs prunable") {
    std::string text = "[net]\nwidth=64\nheight=64\nchannels=3\n" + conv(8, 3, 1) + conv(16, 3, 2) +
                       conv(32, 3, 2);
    NetworkDef net = parse_cfg(text);
    CHECK(dependency_groups(net).empty());
    PruneAnalysis a = analyze_pruning(net);
    for (int i = 0; i < 3; ++i) CHECK(a.prunable[i]);
}

TEST_CASE("head, grouped-route, and BN-less convs are unprunable") {
    std::string text = "[net]\nwidth=64\nheight=64\nchannels=3\n" + conv(8, 3, 1) +
                       "[route]\nlayers=-1\ngroups=2\ngroup_id=1\n" + conv(16, 3, 1) +
                       "[convolutional]\nfilters=24\nsize=1\nstride=1\nactivation=linear\n"
                       "[yolo]\nanchors=10,14,23,27,37,58\nmask=0,1,2\nclasses=3\n";
    NetworkDef net = parse_cfg(text);
    PruneAnalysis a = analyze_pruning(net);
    CHECK_FALSE(a.prunable[0]);  // sliced by grouped route
    CHECK(a.reason[0].find("grouped route") != std::string::npos);
    CHECK(a.prunable[2]);
    CHECK_FALSE(a.prunable[3]);  // BN-less head conv
    CHECK_FALSE(a.reason[3].empty());
}

TEST_CASE("unprunability spreads through a group") {
    // conv1 feeds the head; shortcut ties conv0 and conv1 together
    std::string text = "[net]\nwidth=64\nheight=64\nchannels=3\n" + conv(24, 3, 1) + conv(24, 3, 1) +
                       "[shortcut]\nfrom=0\n"
                       "[yolo]\nanchors=10,14,23,27,37,58\nmask=0,1,2\nclasses=3\n";
    NetworkDef net = parse_cfg(text);
    PruneAnalysis a = analyze_pruning(net);
    CHECK_FALSE(a.prunable[0]);
    CHECK_FALSE(a.prunable[1]);
    CHECK(a.reason[0].find("grouped with") != std::string::npos);
}

TEST_CASE("validate flags head channel and shortcut shape conflicts") {
    NetworkDef bad_head = parse_cfg(
        "[net]\nwidth=64\nheight=64\nchannels=3\n"
        "[convolutional]\nfilters=30\nsize=1\nstride=1\nactivation=linear\n"
        "[yolo]\nanchors=10,14,23,27,37,58\nmask=0,1,2\nclasses=3\n");
    std::vector<std::string> errors = validate(bad_head);
    REQUIRE(errors.size() == 1);
    CHECK(errors[0].find("expects 24") != std::string::npos);

    NetworkDef bad_add = parse_cfg("[net]\nwidth=64\nheight=64\nchannels=3\n" + conv(128, 3, 1) +
                                   conv(256, 3, 1) + "[shortcut]\nfrom=0\n");
    errors = validate(bad_add);
    REQUIRE(errors.size() == 1);
    CHECK(errors[0].find("adds") != std::string::npos);
    CHECK_THROWS_AS(infer_shapes(bad_add), Error);

    CHECK(validate(parse_cfg("[net]\nwidth=64\nheight=64\nchannels=3\n" + conv(8, 3, 1))).empty());
}
