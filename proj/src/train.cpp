#include "train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "error.hpp"
#include "graph.hpp"
#include "rng.hpp"

namespace slimdet {

namespace {

void check_config(const TrainConfig& cfg) {
    if (cfg.epochs < 1) fail(ErrorKind::invalid, "epochs must be >= 1");
    if (!(cfg.base_lr > 0.0f)) fail(ErrorKind::invalid, "base_lr must be positive");
    if (cfg.lr_step_every < 1) fail(ErrorKind::invalid, "lr_step_every must be >= 1");
    if (!(cfg.lr_decay > 0.0f)) fail(ErrorKind::invalid, "lr_decay must be positive");
    if (!(cfg.momentum >= 0.0f && cfg.momentum < 1.0f))
        fail(ErrorKind::invalid, "momentum must lie in [0, 1)");
    if (cfg.batch < 1) fail(ErrorKind::invalid, "batch must be >= 1");
    if (cfg.sparsity.lambda < 0.0f) fail(ErrorKind::invalid, "negative sparsity coefficient");
}

void axpy(const std::vector<float>& x, std::vector<float>& y) {
    for (size_t i = 0; i < x.size(); ++i) y[i] += x[i];
}

void accumulate(const WeightStore& part, WeightStore& into) {
    for (size_t l = 0; l < part.blocks.size(); ++l) {
        axpy(part.blocks[l].bn_gamma, into.blocks[l].bn_gamma);
        axpy(part.blocks[l].bn_beta, into.blocks[l].bn_beta);
        axpy(part.blocks[l].bias, into.blocks[l].bias);
        axpy(part.blocks[l].kernel, into.blocks[l].kernel);
    }
}

void sgd_step(std::vector<float>& w, const std::vector<float>& g, std::vector<float>& v,
              float momentum, float lr) {
    for (size_t i = 0; i < w.size(); ++i) {
        v[i] = momentum * v[i] + g[i];
        w[i] -= lr * v[i];
    }
}

float small_gamma_fraction(const WeightStore& weights, const PruneAnalysis& analysis) {
    size_t small = 0, total = 0;
    for (size_t l = 0; l < weights.blocks.size(); ++l) {
        if (!analysis.prunable[l]) continue;
        for (float g : weights.blocks[l].bn_gamma) {
            ++total;
            if (std::fabs(g) < 0.01f) ++small;
        }
    }
    return total == 0 ? 0.0f : static_cast<float>(small) / static_cast<float>(total);
}

double prunable_l1(const WeightStore& weights, const PruneAnalysis& analysis, float lambda) {
    double sum = 0;
    for (size_t l = 0; l < weights.blocks.size(); ++l) {
        if (!analysis.prunable[l]) continue;
        for (float g : weights.blocks[l].bn_gamma) sum += std::fabs(g);
    }
    return lambda * sum;
}

}  // namespace

std::string format_history(const TrainHistory& history) {
    std::string out;
    char line[256];
    for (const EpochRecord& r : history.epochs) {
        std::snprintf(line, sizeof(line),
                      "epoch %u lr %.6g ciou %.6g obj %.6g noobj %.6g cls %.6g sparsity %.6g "
                      "total %.6g gamma_small %.4f\n",
                      r.epoch, r.lr, r.ciou, r.obj, r.noobj, r.cls, r.sparsity, r.total,
                      r.gamma_small);
        out += line;
    }
    return out;
}

float lr_schedule(uint32_t epoch, const TrainConfig& cfg) {
    uint32_t drops = epoch / cfg.lr_step_every;
    return static_cast<float>(cfg.base_lr * std::pow(static_cast<double>(cfg.lr_decay), drops));
}

std::vector<uint8_t> trainable_mask(const NetworkDef& net, const FreezePlan& plan) {
    std::vector<uint8_t> mask(net.layers.size(), 1);
    const std::vector<std::pair<uint32_t, uint32_t>>* ranges = nullptr;
    if (plan.mode == FreezeMode::backbone) ranges = &plan.backbone;
    if (plan.mode == FreezeMode::backbone_neck) ranges = &plan.backbone_neck;
    if (!ranges) return mask;
    for (auto [lo, hi] : *ranges) {
        if (lo >= hi || hi > net.layers.size())
            fail(ErrorKind::invalid, "freeze range [" + std::to_string(lo) + ", " +
                                         std::to_string(hi) + ") out of bounds");
        for (uint32_t i = lo; i < hi; ++i) mask[i] = 0;
    }
    return mask;
}

TrainHistory train_toy(Network& net, const TrainConfig& cfg, const std::vector<Sample>& dataset) {
    check_config(cfg);
    if (dataset.empty()) fail(ErrorKind::invalid, "empty dataset");

    const NetworkDef& def = net.def();
    std::vector<uint8_t> trainable = trainable_mask(def, cfg.freeze);
    PruneAnalysis analysis = analyze_pruning(def);

    std::vector<HeadRef> heads;
    std::vector<int> head_idx = net.head_layers();
    if (head_idx.empty()) fail(ErrorKind::invalid, "network has no yolo heads");
    for (int idx : head_idx)
        heads.push_back({&def.layers[idx], def.input_width / net.shapes()[idx].w});

    // Non-mosaic steps consume pre-letterboxed copies; mosaic builds its own
    // net-sized frames from the raw samples.
    std::vector<Sample> fitted;
    if (!cfg.mosaic) {
        fitted.reserve(dataset.size());
        for (const Sample& s : dataset) fitted.push_back(letterbox(s, def.input_width, def.input_height));
    }

    WeightStore velocity = net.zero_grads();
    Rng rng(cfg.seed);
    size_t n = dataset.size();
    size_t layer_count = def.layers.size();

    TrainHistory history;
    history.epochs.reserve(cfg.epochs);

    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;

    for (uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        float lr = lr_schedule(epoch, cfg);
        for (size_t i = 0; i + 1 < n; ++i)
            std::swap(order[i], order[i + rng.below(n - i)]);

        LossTerms epoch_sum;
        size_t images = 0;
        for (size_t start = 0; start < n; start += cfg.batch) {
            size_t count = std::min<size_t>(cfg.batch, n - start);
            float inv = 1.0f / static_cast<float>(count);
            WeightStore grads = net.zero_grads();
            LossTerms batch_terms;

            for (size_t b = 0; b < count; ++b) {
                Sample sample;
                if (cfg.mosaic) {
                    std::vector<Sample> tiles;
                    for (int t = 0; t < 4; ++t) tiles.push_back(dataset[rng.below(n)]);
                    sample = mosaic(tiles, def.input_width, def.input_height, rng.next_u64());
                } else {
                    sample = fitted[order[start + b]];
                }

                ForwardTrace trace = net.forward(sample.image, true);
                std::vector<Tensor> seeds(layer_count);
                for (size_t h = 0; h < heads.size(); ++h) {
                    int idx = head_idx[h];
                    Tensor df;
                    LossTerms t = head_loss(trace.out[idx], *heads[h].spec, heads[h].stride,
                                            sample.gts, &df);
                    batch_terms.ciou += t.ciou;
                    batch_terms.obj += t.obj;
                    batch_terms.noobj += t.noobj;
                    batch_terms.cls += t.cls;
                    for (float& v : df.data) v *= inv;
                    seeds[idx] = std::move(df);
                }
                accumulate(net.backward(trace, seeds), grads);
            }

            double flat = batch_terms.ciou + batch_terms.obj + batch_terms.noobj + batch_terms.cls;
            if (!std::isfinite(flat))
                fail(ErrorKind::runtime, "training diverged: non-finite loss at epoch " +
                                             std::to_string(epoch));

            if (cfg.sparsity.lambda > 0.0f)
                for (size_t l = 0; l < layer_count; ++l)
                    if (analysis.prunable[l])
                        add_l1_subgradient(net.weights().blocks[l].bn_gamma, cfg.sparsity.lambda,
                                           grads.blocks[l].bn_gamma);

            for (size_t l = 0; l < layer_count; ++l) {
                if (!trainable[l]) continue;
                ConvWeights& w = net.weights().blocks[l];
                ConvWeights& g = grads.blocks[l];
                ConvWeights& v = velocity.blocks[l];
                sgd_step(w.kernel, g.kernel, v.kernel, cfg.momentum, lr);
                sgd_step(w.bias, g.bias, v.bias, cfg.momentum, lr);
                sgd_step(w.bn_gamma, g.bn_gamma, v.bn_gamma, cfg.momentum, lr);
                sgd_step(w.bn_beta, g.bn_beta, v.bn_beta, cfg.momentum, lr);
                // bn_mean / bn_var stay put: inference-style BN throughout.
            }

            epoch_sum.ciou += batch_terms.ciou;
            epoch_sum.obj += batch_terms.obj;
            epoch_sum.noobj += batch_terms.noobj;
            epoch_sum.cls += batch_terms.cls;
            images += count;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = lr;
        rec.ciou = epoch_sum.ciou / images;
        rec.obj = epoch_sum.obj / images;
        rec.noobj = epoch_sum.noobj / images;
        rec.cls = epoch_sum.cls / images;
        rec.sparsity = prunable_l1(net.weights(), analysis, cfg.sparsity.lambda);
        rec.total = rec.ciou + rec.obj + rec.noobj + rec.cls + rec.sparsity;
        rec.gamma_small = small_gamma_fraction(net.weights(), analysis);
        history.epochs.push_back(rec);
    }
    return history;
}

TrainHistory fine_tune(Network& net, const TrainConfig& cfg, const std::vector<Sample>& dataset) {
    TrainConfig plain = cfg;
    plain.sparsity.lambda = 0.0f;
    return train_toy(net, plain, dataset);
}

}  // namespace slimdet
