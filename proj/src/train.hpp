#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "data.hpp"
#include "losses.hpp"
#include "netcfg.hpp"
#include "network.hpp"

namespace slimdet {

enum class FreezeMode { none, backbone, backbone_neck };

// Frozen layer-index ranges [lo, hi) per freeze mode. The defaults cover the
// standard 162-layer definition: the backbone runs through layer 104, and
// backbone+neck leaves only the three head conv stacks (plus their yolo
// layers) trainable. They are data, not logic — smaller nets supply their own.
struct FreezePlan {
    FreezeMode mode = FreezeMode::none;
    std::vector<std::pair<uint32_t, uint32_t>> backbone = {{0, 105}};
    std::vector<std::pair<uint32_t, uint32_t>> backbone_neck = {{0, 137}, {140, 148}, {151, 159}};
};

struct TrainConfig {
    uint32_t epochs = 1;
    float base_lr = 1e-3f;
    uint32_t lr_step_every = 200;  // epochs between LR drops
    float lr_decay = 0.1f;
    float momentum = 0.9f;
    uint32_t batch = 4;
    uint64_t seed = 0;
    bool mosaic = false;
    FreezePlan freeze;
    SparsityConfig sparsity{0.0f};  // lambda 0: penalty off
    std::string init_weights;       // empty: seeded scratch init (callers build the net)
};

struct EpochRecord {
    uint32_t epoch = 0;
    double ciou = 0, obj = 0, noobj = 0, cls = 0;  // per-image averages
    double sparsity = 0;                           // penalty at epoch end
    double total = 0;
    float lr = 0;
    float gamma_small = 0;  // fraction of prunable |gamma| < 0.01
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
};

std::string format_history(const TrainHistory& history);

// base_lr * decay^floor(epoch / step_every)
float lr_schedule(uint32_t epoch, const TrainConfig& cfg);

// Per-layer trainable flags (a layer's parameters all share one flag).
std::vector<uint8_t> trainable_mask(const NetworkDef& net, const FreezePlan& plan);

// SGD + momentum over the detection loss (plus the gamma L1 penalty when
// configured). Mutates the network weights in place; one history record per
// epoch. Deterministic under (seed, config, dataset). BN runs on its stored
// statistics even while training, so gamma/beta stay the only BN learnables.
TrainHistory train_toy(Network& net, const TrainConfig& cfg, const std::vector<Sample>& dataset);

// Same loop with the sparsity penalty forced off; for post-prune recovery.
TrainHistory fine_tune(Network& net, const TrainConfig& cfg, const std::vector<Sample>& dataset);

}  // namespace slimdet
