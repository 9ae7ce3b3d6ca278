#pragma once

#include <string>
#include <vector>

#include "graph.hpp"
#include "netcfg.hpp"
#include "nnops.hpp"
#include "tensor.hpp"

namespace slimdet {

// Everything forward() produced, enough to run backward(). `out` is always
// populated; the pre-activation caches only when requested.
struct ForwardTrace {
    Tensor input;
    std::vector<Tensor> out;       // post-activation output per layer
    std::vector<Tensor> pre_bn;    // raw conv output, BN convs only
    std::vector<Tensor> pre_act;   // post-BN / post-bias, before activation
    std::vector<std::vector<uint32_t>> pool_argmax;
    bool cached = false;
};

// Runtime pairing of a definition with its parameters. Gradients reuse the
// WeightStore geometry so updates walk the two stores in lock step.
class Network {
  public:
    Network(NetworkDef def, WeightStore weights);

    static Network load(const std::string& cfg_path, const std::string& weights_path);
    // Deterministic scaled-normal init; BN gamma starts at `gamma_init`.
    static Network random(NetworkDef def, uint64_t seed, float gamma_init = 0.5f);

    const NetworkDef& def() const { return def_; }
    const ShapeTable& shapes() const { return shapes_; }
    WeightStore& weights() { return weights_; }
    const WeightStore& weights() const { return weights_; }
    std::vector<int> head_layers() const;  // yolo layer indices

    ForwardTrace forward(const Tensor& input, bool cache = false) const;

    // Seeds: per-layer dL/d(out). Returns gradients in WeightStore geometry;
    // requires a cached trace.
    WeightStore backward(const ForwardTrace& trace, const std::vector<Tensor>& seed) const;

    // Zero-filled store matching this network's geometry.
    WeightStore zero_grads() const;

  private:
    NetworkDef def_;
    WeightStore weights_;
    ShapeTable shapes_;
};

}  // namespace slimdet
