#include "network.hpp"

#include <cmath>

#include "error.hpp"
#include "rng.hpp"

namespace slimdet {

Network::Network(NetworkDef def, WeightStore weights)
    : def_(std::move(def)), weights_(std::move(weights)) {
    if (weights_.blocks.size() != def_.layers.size())
        fail(ErrorKind::weights, "misaligned store: " + std::to_string(weights_.blocks.size()) +
                                     " blocks for " + std::to_string(def_.layers.size()) + " layers");
    shapes_ = infer_shapes(def_);
}

Network Network::load(const std::string& cfg_path, const std::string& weights_path) {
    NetworkDef def = parse_cfg_file(cfg_path);
    WeightStore store = load_weights_file(weights_path, def);
    return Network(std::move(def), std::move(store));
}

Network Network::random(NetworkDef def, uint64_t seed, float gamma_init) {
    std::vector<uint32_t> channels = layer_out_channels(def);
    WeightStore store;
    store.blocks.resize(def.layers.size());
    Rng rng(seed);
    for (size_t i = 0; i < def.layers.size(); ++i) {
        const LayerSpec& l = def.layers[i];
        if (l.kind != LayerKind::convolutional) continue;
        uint32_t c = i == 0 ? def.input_channels : channels[i - 1];
        ConvWeights& w = store.blocks[i];
        size_t fan_in = static_cast<size_t>(c) * l.size * l.size;
        float scale = std::sqrt(2.0f / static_cast<float>(fan_in));
        w.kernel.resize(static_cast<size_t>(l.filters) * fan_in);
        for (float& v : w.kernel) v = scale * rng.normal();
        if (l.batch_normalize) {
            w.bn_beta.assign(l.filters, 0.0f);
            w.bn_gamma.assign(l.filters, gamma_init);
            w.bn_mean.assign(l.filters, 0.0f);
            w.bn_var.assign(l.filters, 1.0f);
        } else {
            w.bias.assign(l.filters, 0.0f);
        }
    }
    return Network(std::move(def), std::move(store));
}

std::vector<int> Network::head_layers() const {
    std::vector<int> heads;
    for (size_t i = 0; i < def_.layers.size(); ++i)
        if (def_.layers[i].kind == LayerKind::yolo) heads.push_back(static_cast<int>(i));
    return heads;
}

ForwardTrace Network::forward(const Tensor& input, bool cache) const {
    if (input.c() != def_.input_channels || input.h() != def_.input_height ||
        input.w() != def_.input_width)
        fail(ErrorKind::invalid, "input tensor does not match network geometry");

    size_t n = def_.layers.size();
    ForwardTrace t;
    t.cached = cache;
    t.input = input;
    t.out.resize(n);
    t.pre_bn.resize(cache ? n : 0);
    t.pre_act.resize(cache ? n : 0);
    t.pool_argmax.resize(n);

    auto out_of = [&](size_t i, int idx) -> const Tensor& {
        return idx < 0 ? t.input : t.out[idx];
    };

    for (size_t i = 0; i < n; ++i) {
        const LayerSpec& l = def_.layers[i];
        const Tensor& in = out_of(i, static_cast<int>(i) - 1);
        switch (l.kind) {
            case LayerKind::convolutional: {
                const ConvWeights& w = weights_.blocks[i];
                Tensor kernel;
                kernel.dims = {l.filters, in.c(), l.size, l.size};
                kernel.data = w.kernel;  // copy; kernels are small next to activations
                uint32_t pad = l.pad ? l.size / 2 : 0;
                Tensor conv = conv2d_forward(in, kernel, l.stride, pad);
                if (l.batch_normalize) {
                    if (cache) t.pre_bn[i] = conv;
                    BnParams p{w.bn_gamma, w.bn_beta, w.bn_mean, w.bn_var};
                    conv = batchnorm_forward(conv, p);
                } else {
                    add_bias(conv, w.bias);
                }
                if (cache) t.pre_act[i] = conv;
                t.out[i] = activate(conv, l.activation);
                break;
            }
            case LayerKind::maxpool:
                t.out[i] = maxpool_forward(in, l.size, l.stride, cache ? &t.pool_argmax[i] : nullptr);
                break;
            case LayerKind::upsample:
                t.out[i] = upsample_forward(in, l.factor);
                break;
            case LayerKind::route: {
                std::vector<Tensor> sliced;
                std::vector<const Tensor*> parts;
                for (int src : l.route_layers) {
                    const Tensor& s = out_of(i, src);
                    if (l.route_groups > 1) {
                        uint32_t width = s.c() / l.route_groups;
                        sliced.push_back(channel_slice(s, width * l.route_group_id, width));
                    } else {
                        parts.push_back(&s);
                    }
                }
                if (l.route_groups > 1)
                    for (const Tensor& s : sliced) parts.push_back(&s);
                t.out[i] = parts.size() == 1 ? *parts[0] : route_concat(parts);
                break;
            }
            case LayerKind::shortcut: {
                Tensor sum = shortcut_add(in, out_of(i, l.from));
                if (cache) t.pre_act[i] = sum;
                t.out[i] = activate(sum, l.activation);
                break;
            }
            case LayerKind::yolo:
                t.out[i] = in;
                break;
        }
    }
    return t;
}

WeightStore Network::zero_grads() const {
    WeightStore g;
    g.blocks.resize(def_.layers.size());
    for (size_t i = 0; i < def_.layers.size(); ++i) {
        const ConvWeights& w = weights_.blocks[i];
        ConvWeights& d = g.blocks[i];
        d.kernel.assign(w.kernel.size(), 0.0f);
        d.bias.assign(w.bias.size(), 0.0f);
        d.bn_beta.assign(w.bn_beta.size(), 0.0f);
        d.bn_gamma.assign(w.bn_gamma.size(), 0.0f);
        d.bn_mean.assign(w.bn_mean.size(), 0.0f);
        d.bn_var.assign(w.bn_var.size(), 0.0f);
    }
    return g;
}

WeightStore Network::backward(const ForwardTrace& trace, const std::vector<Tensor>& seed) const {
    if (!trace.cached)
        fail(ErrorKind::invalid, "missing cache: forward must run with cache=true before backward");
    size_t n = def_.layers.size();
    if (seed.size() != n) fail(ErrorKind::invalid, "seed gradients must align with layers");

    WeightStore grads = zero_grads();
    std::vector<Tensor> grad(n);
    auto bump = [&](int idx, const Tensor& g) {
        if (idx < 0) return;  // gradient w.r.t. network input is discarded
        if (grad[idx].data.empty()) grad[idx] = Tensor::zeros_like(trace.out[idx]);
        for (size_t k = 0; k < g.data.size(); ++k) grad[idx].data[k] += g.data[k];
    };

    for (size_t i = 0; i < n; ++i)
        if (!seed[i].data.empty()) bump(static_cast<int>(i), seed[i]);

    for (size_t ii = n; ii-- > 0;) {
        if (grad[ii].data.empty()) continue;
        const LayerSpec& l = def_.layers[ii];
        int prev = static_cast<int>(ii) - 1;
        const Tensor& in = prev < 0 ? trace.input : trace.out[prev];
        Tensor& dy = grad[ii];

        switch (l.kind) {
            case LayerKind::convolutional: {
                const ConvWeights& w = weights_.blocks[ii];
                Tensor dpre = activate_backward(trace.pre_act[ii], l.activation, dy);
                ConvWeights& d = grads.blocks[ii];
                Tensor dconv;
                if (l.batch_normalize) {
                    BnParams p{w.bn_gamma, w.bn_beta, w.bn_mean, w.bn_var};
                    BnGrads bg = batchnorm_backward(trace.pre_bn[ii], p, dpre);
                    d.bn_gamma = std::move(bg.dgamma);
                    d.bn_beta = std::move(bg.dbeta);
                    dconv = std::move(bg.dx);
                } else {
                    d.bias = bias_gradient(dpre);
                    dconv = std::move(dpre);
                }
                Tensor kernel;
                kernel.dims = {l.filters, in.c(), l.size, l.size};
                kernel.data = w.kernel;
                uint32_t pad = l.pad ? l.size / 2 : 0;
                ConvGrads cg = conv2d_backward(in, kernel, l.stride, pad, dconv);
                d.kernel = std::move(cg.dkernel.data);
                bump(prev, cg.dx);
                break;
            }
            case LayerKind::maxpool:
                bump(prev, maxpool_backward(in, l.size, l.stride, dy, trace.pool_argmax[ii]));
                break;
            case LayerKind::upsample:
                bump(prev, upsample_backward(in, l.factor, dy));
                break;
            case LayerKind::route: {
                uint32_t at = 0;
                for (int src : l.route_layers) {
                    const Tensor& s = trace.out[src];
                    uint32_t width = s.c() / l.route_groups;
                    Tensor part = channel_slice(dy, at, width);
                    if (grad[src].data.empty()) grad[src] = Tensor::zeros_like(s);
                    channel_slice_backward(grad[src], width * l.route_group_id, part);
                    at += width;
                }
                break;
            }
            case LayerKind::shortcut: {
                Tensor dsum = activate_backward(trace.pre_act[ii], l.activation, dy);
                bump(prev, dsum);
                bump(l.from, dsum);
                break;
            }
            case LayerKind::yolo:
                bump(prev, dy);
                break;
        }
        dy.data.clear();  // free as we go
    }
    return grads;
}

}  // namespace slimdet
