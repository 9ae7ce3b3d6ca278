#include <doctest.h>

#include <cmath>
#include <cstring>

#include "network.hpp"
#include "parallel.hpp"
#include "rng.hpp"

using namespace slimdet;

namespace {

// Small net exercising every layer kind: conv/BN/mish, pool, conv, shortcut,
// upsample, grouped route, concat route, head conv, yolo.
const char* kToyCfg =
    "[net]\nwidth=32\nheight=32\nchannels=3\n"
    "[convolutional]\nbatch_normalize=1\nfilters=8\nsize=3\nstride=1\npad=1\nactivation=mish\n"
    "[maxpool]\nsize=2\nstride=2\n"
    "[convolutional]\nbatch_normalize=1\nfilters=8\nsize=3\nstride=1\npad=1\nactivation=leaky\n"
    "[convolutional]\nbatch_normalize=1\nfilters=8\nsize=3\nstride=1\npad=1\nactivation=leaky\n"
    "[shortcut]\nfrom=-2\n"
    "[route]\nlayers=-1\ngroups=2\ngroup_id=1\n"
    "[convolutional]\nbatch_normalize=1\nfilters=8\nsize=3\nstride=2\npad=1\nactivation=leaky\n"
    "[upsample]\nstride=2\n"
    "[route]\nlayers=-1,-4\n"
    "[convolutional]\nfilters=24\nsize=1\nstride=1\npad=1\nactivation=linear\n"
    "[yolo]\nanchors=10,14,23,27,37,58\nmask=0,1,2\nclasses=3\n";

Tensor random_input(uint64_t seed, uint32_t c, uint32_t h, uint32_t w) {
    Rng rng(seed);
    Tensor t(c, h, w);
    for (float& v : t.data) v = rng.uniform(-1.f, 1.f);
    return t;
}

}  // namespace

TEST_CASE("network forward produces the inferred shapes") {
    Network net = Network::random(parse_cfg(kToyCfg), 42);
    Tensor x = random_input(1, 3, 32, 32);
    ForwardTrace t = net.forward(x);
    REQUIRE(t.out.size() == net.def().layers.size());
    for (size_t i = 0; i < t.out.size(); ++i) {
        CHECK(t.out[i].c() == net.shapes()[i].c);
        CHECK(t.out[i].h() == net.shapes()[i].h);
        CHECK(t.out[i].w() == net.shapes()[i].w);
    }
    CHECK(net.head_layers() == std::vector<int>{10});
    for (float v : t.out.back().data) CHECK(std::isfinite(v));
}

TEST_CASE("forward is bitwise deterministic across thread counts") {
    Network net = Network::random(parse_cfg(kToyCfg), 7);
    Tensor x = random_input(2, 3, 32, 32);
    set_thread_count(1);
    ForwardTrace a = net.forward(x);
    set_thread_count(4);
    ForwardTrace b = net.forward(x);
    set_thread_count(1);
    for (size_t i = 0; i < a.out.size(); ++i)
        CHECK(std::memcmp(a.out[i].data.data(), b.out[i].data.data(),
                          a.out[i].data.size() * 4) == 0);
}

TEST_CASE("random init is reproducible and seed-sensitive") {
    NetworkDef def = parse_cfg(kToyCfg);
    Network a = Network::random(def, 5);
    Network b = Network::random(def, 5);
    Network c = Network::random(def, 6);
    CHECK(a.weights() == b.weights());
    CHECK(a.weights().blocks[0].kernel != c.weights().blocks[0].kernel);
    CHECK(a.weights().blocks[0].bn_gamma[0] == 0.5f);
}

TEST_CASE("backward requires a cached trace and fills every block") {
    Network net = Network::random(parse_cfg(kToyCfg), 9);
    Tensor x = random_input(3, 3, 32, 32);

    ForwardTrace cold = net.forward(x, false);
    std::vector<Tensor> seed(net.def().layers.size());
    seed.back() = Tensor::zeros_like(cold.out.back());
    for (float& v : seed.back().data) v = 0.01f;
    CHECK_THROWS_WITH_AS(net.backward(cold, seed), doctest::Contains("missing cache"), Error);

    ForwardTrace t = net.forward(x, true);
    WeightStore g = net.backward(t, seed);
    for (size_t i = 0; i < g.blocks.size(); ++i) {
        REQUIRE(g.blocks[i].kernel.size() == net.weights().blocks[i].kernel.size());
        if (net.def().layers[i].kind != LayerKind::convolutional) continue;
        float mag = 0.f;
        for (float v : g.blocks[i].kernel) mag += std::abs(v);
        CHECK(mag > 0.f);  // every conv is on the gradient path in this toy net
    }
}

TEST_CASE("backward gradients are bitwise deterministic across thread counts") {
    Network net = Network::random(parse_cfg(kToyCfg), 11);
    Tensor x = random_input(4, 3, 32, 32);
    ForwardTrace t = net.forward(x, true);
    std::vector<Tensor> seed(net.def().layers.size());
    seed.back() = Tensor::zeros_like(t.out.back());
    Rng rng(13);
    for (float& v : seed.back().data) v = rng.uniform(-1.f, 1.f);

    set_thread_count(1);
    WeightStore a = net.backward(t, seed);
    set_thread_count(5);
    WeightStore b = net.backward(t, seed);
    set_thread_count(1);
    CHECK(a == b);
}

TEST_CASE("weights loaded from a saved store run identically") {
    NetworkDef def = parse_cfg(kToyCfg);
    Network net = Network::random(def, 21);
    std::vector<uint8_t> bytes = save_weights(net.weights(), def);
    WeightStore loaded = load_weights(bytes, def);
    Network net2(def, loaded);
    Tensor x = random_input(5, 3, 32, 32);
    Tensor a = net.forward(x).out.back();
    Tensor b = net2.forward(x).out.back();
    CHECK(std::memcmp(a.data.data(), b.data.data(), a.data.size() * 4) == 0);
}
