#include "graph.hpp"

#include <algorithm>
#include <numeric>

namespace slimdet {

namespace {

// Shared walk: with `errors` null the first inconsistency throws; otherwise
// every complaint is recorded and the walk continues on a best-effort shape.
ShapeTable shape_walk(const NetworkDef& net, std::vector<std::string>* errors) {
    ShapeTable table(net.layers.size());
    auto complain = [&](size_t i, const std::string& msg) {
        std::string full = "layer " + std::to_string(i) + " (" +
                           layer_kind_name(net.layers[i].kind) + "): " + msg;
        if (errors)
            errors->push_back(full);
        else
            fail(ErrorKind::invalid, full);
    };
    auto shape_of = [&](size_t i, int idx) -> Shape {
        if (idx < 0) return {net.input_channels, net.input_height, net.input_width};
        return table[idx];
    };

    for (size_t i = 0; i < net.layers.size(); ++i) {
        const LayerSpec& l = net.layers[i];
        Shape in = shape_of(i, static_cast<int>(i) - 1);
        Shape& out = table[i];
        switch (l.kind) {
            case LayerKind::convolutional: {
                uint32_t p = l.pad ? l.size / 2 : 0;
                int64_t h = (static_cast<int64_t>(in.h) + 2 * p - l.size) / l.stride + 1;
                int64_t w = (static_cast<int64_t>(in.w) + 2 * p - l.size) / l.stride + 1;
                if (static_cast<int64_t>(in.h) + 2 * p < l.size ||
                    static_cast<int64_t>(in.w) + 2 * p < l.size) {
                    complain(i, "kernel " + std::to_string(l.size) + " exceeds padded input " +
                                    std::to_string(in.h) + "x" + std::to_string(in.w));
                    h = std::max<int64_t>(h, 1);
                    w = std::max<int64_t>(w, 1);
                }
                out = {l.filters, static_cast<uint32_t>(h), static_cast<uint32_t>(w)};
                break;
            }
            case LayerKind::maxpool: {
                // pads (size-1)/2 in front with -inf, so output is
                // (H-1)/stride + 1 for every size/stride combination
                out = {in.c, (in.h - 1) / l.stride + 1, (in.w - 1) / l.stride + 1};
                break;
            }
            case LayerKind::upsample:
                out = {in.c, in.h * l.factor, in.w * l.factor};
                break;
            case LayerKind::route: {
                uint32_t total = 0;
                Shape first = shape_of(i, l.route_layers[0]);
                for (int src : l.route_layers) {
                    Shape s = shape_of(i, src);
                    if (s.h != first.h || s.w != first.w)
                        complain(i, "source " + std::to_string(src) + " is " + std::to_string(s.h) +
                                        "x" + std::to_string(s.w) + ", expected " +
                                        std::to_string(first.h) + "x" + std::to_string(first.w));
                    if (s.c % l.route_groups != 0)
                        complain(i, "source " + std::to_string(src) + " channels " +
                                        std::to_string(s.c) + " not divisible by groups " +
                                        std::to_string(l.route_groups));
                    total += s.c / l.route_groups;
                }
                out = {total, first.h, first.w};
                break;
            }
            case LayerKind::shortcut: {
                Shape other = shape_of(i, l.from);
                if (!(other == in))
                    complain(i, "adds " + std::to_string(other.c) + "x" + std::to_string(other.h) +
                                    "x" + std::to_string(other.w) + " from layer " +
                                    std::to_string(l.from) + " onto " + std::to_string(in.c) + "x" +
                                    std::to_string(in.h) + "x" + std::to_string(in.w));
                out = in;
                break;
            }
            case LayerKind::yolo: {
                uint32_t want = (l.classes + 5) * static_cast<uint32_t>(l.mask.size());
                if (in.c != want)
                    complain(i, "head expects " + std::to_string(want) + " channels (" +
                                    std::to_string(l.classes) + " classes x " +
                                    std::to_string(l.mask.size()) + " anchors), got " +
                                    std::to_string(in.c));
                out = in;
                break;
            }
        }
    }
    return table;
}

}  // namespace

ShapeTable infer_shapes(const NetworkDef& net) { return shape_walk(net, nullptr); }

std::vector<uint64_t> parameter_counts(const NetworkDef& net) {
    std::vector<uint32_t> channels = layer_out_channels(net);
    std::vector<uint64_t> counts(net.layers.size(), 0);
    for (size_t i = 0; i < net.layers.size(); ++i) {
        const LayerSpec& l = net.layers[i];
        if (l.kind != LayerKind::convolutional) continue;
        uint64_t c = i == 0 ? net.input_channels : channels[i - 1];
        counts[i] = static_cast<uint64_t>(l.filters) * c * l.size * l.size +
                    (l.batch_normalize ? 4ull : 1ull) * l.filters;
    }
    return counts;
}

uint64_t count_parameters(const NetworkDef& net) {
    std::vector<uint64_t> counts = parameter_counts(net);
    return std::accumulate(counts.begin(), counts.end(), uint64_t{0});
}

namespace {

// Which convolutions define the channel layout a layer emits. Pass-through
// layers inherit; concatenations and grouped slices are composite.
struct ChannelTrace {
    bool uses_input = false;
    bool composite = false;
    bool via_route = false;
    std::vector<int> convs;
};

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

PruneAnalysis analyze_pruning(const NetworkDef& net) {
    size_t n = net.layers.size();
    std::vector<ChannelTrace> traces(n);
    auto trace_of = [&](size_t at, int idx) -> const ChannelTrace& {
        static const ChannelTrace input_trace{true, false, {}};
        (void)at;
        if (idx < 0) return input_trace;
        return traces[idx];
    };

    for (size_t i = 0; i < n; ++i) {
        const LayerSpec& l = net.layers[i];
        int prev = static_cast<int>(i) - 1;
        switch (l.kind) {
            case LayerKind::convolutional:
                traces[i].convs = {static_cast<int>(i)};
                break;
            case LayerKind::maxpool:
            case LayerKind::upsample:
            case LayerKind::yolo:
            case LayerKind::shortcut:
                traces[i] = trace_of(i, prev);
                break;
            case LayerKind::route:
                if (l.route_layers.size() == 1 && l.route_groups == 1) {
                    traces[i] = trace_of(i, l.route_layers[0]);
                    traces[i].via_route = true;
                } else {
                    traces[i].composite = true;
                    for (int src : l.route_layers) {
                        const ChannelTrace& t = trace_of(i, src);
                        traces[i].uses_input |= t.uses_input;
                        traces[i].convs.insert(traces[i].convs.end(), t.convs.begin(), t.convs.end());
                    }
                }
                break;
        }
    }

    UnionFind uf(n);
    std::vector<bool> routed_union(n, false);  // root saw a via-route union edge
    PruneAnalysis a;
    a.group_of.assign(n, -1);
    a.prunable.assign(n, false);
    a.reason.assign(n, "");
    auto block = [&](int conv, const std::string& why) {
        if (a.reason[conv].empty()) a.reason[conv] = why;
    };

    for (size_t i = 0; i < n; ++i) {
        const LayerSpec& l = net.layers[i];
        if (l.kind == LayerKind::shortcut) {
            const ChannelTrace& left = trace_of(i, static_cast<int>(i) - 1);
            const ChannelTrace& right = trace_of(i, l.from);
            bool plain = !left.composite && !right.composite && !left.uses_input &&
                         !right.uses_input && left.convs.size() == 1 && right.convs.size() == 1;
            if (plain) {
                bool routed = routed_union[uf.find(left.convs[0])] ||
                              routed_union[uf.find(right.convs[0])] || left.via_route ||
                              right.via_route;
                uf.unite(left.convs[0], right.convs[0]);
                routed_union[uf.find(left.convs[0])] = routed;
            } else {
                for (int c : left.convs)
                    block(c, "shortcut at layer " + std::to_string(i) + " ties it to a mixed source");
                for (int c : right.convs)
                    block(c, "shortcut at layer " + std::to_string(i) + " ties it to a mixed source");
            }
        } else if (l.kind == LayerKind::route && l.route_groups > 1) {
            for (int src : l.route_layers)
                for (int c : trace_of(i, src).convs)
                    block(c, "grouped route at layer " + std::to_string(i) + " slices its channels");
        } else if (l.kind == LayerKind::yolo) {
            for (int c : trace_of(i, static_cast<int>(i) - 1).convs)
                block(c, "feeds detection head at layer " + std::to_string(i));
        }
    }

    for (size_t i = 0; i < n; ++i) {
        if (net.layers[i].kind != LayerKind::convolutional) continue;
        if (!net.layers[i].batch_normalize) block(static_cast<int>(i), "no batch-norm scale");
    }

    // group ids in first-member order
    std::vector<int> root_to_group(n, -1);
    for (size_t i = 0; i < n; ++i) {
        if (net.layers[i].kind != LayerKind::convolutional) continue;
        int root = uf.find(static_cast<int>(i));
        if (root_to_group[root] < 0) {
            root_to_group[root] = static_cast<int>(a.groups.size());
            a.groups.emplace_back();
            a.group_reason.push_back(routed_union[root] ? GroupReason::shared_route_constraint
                                                        : GroupReason::shortcut_add);
        }
        a.group_of[i] = root_to_group[root];
        a.groups[root_to_group[root]].push_back(static_cast<int>(i));
    }

    for (const std::vector<int>& members : a.groups) {
        int bad = -1;
        for (int m : members)
            if (!a.reason[m].empty()) bad = m;
        for (int m : members) {
            if (bad < 0)
                a.prunable[m] = true;
            else if (a.reason[m].empty())
                a.reason[m] = "grouped with layer " + std::to_string(bad) + " (" + a.reason[bad] + ")";
        }
    }
    return a;
}

std::vector<DependencyGroup> dependency_groups(const NetworkDef& net) {
    PruneAnalysis a = analyze_pruning(net);
    std::vector<DependencyGroup> out;
    for (size_t g = 0; g < a.groups.size(); ++g)
        if (a.groups[g].size() > 1) out.push_back({a.groups[g], a.group_reason[g]});
    return out;
}

std::vector<std::string> validate(const NetworkDef& net) {
    std::vector<std::string> errors;
    if (net.layers.empty()) {
        errors.push_back("network has no layers");
        return errors;
    }
    if (net.input_width == 0 || net.input_height == 0 || net.input_channels == 0)
        errors.push_back("input dimensions must be positive");
    bool has_yolo = false;
    for (const LayerSpec& l : net.layers) has_yolo |= l.kind == LayerKind::yolo;
    if (has_yolo && (net.input_width % 32 != 0 || net.input_height % 32 != 0))
        errors.push_back("input width/height must be divisible by 32 for detection nets");
    for (size_t i = 1; i < net.layers.size(); ++i) {
        if (net.layers[i].kind != LayerKind::yolo) continue;
        const LayerSpec& prev = net.layers[i - 1];
        if (prev.kind == LayerKind::convolutional && !prev.batch_normalize &&
            prev.activation != Activation::linear)
            errors.push_back("layer " + std::to_string(i - 1) +
                             ": head convolution must use linear activation");
    }
    shape_walk(net, &errors);
    return errors;
}

}  // namespace slimdet
