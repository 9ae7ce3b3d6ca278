#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "graph.hpp"
#include "netcfg.hpp"

namespace slimdet {

// One scored output channel of a prunable conv. Grouped convs carry the
// group-max |gamma| so a tied channel is only cheap when it is cheap in
// every member.
struct GammaScore {
    uint32_t layer = 0;
    uint32_t channel = 0;
    float score = 0;  // |gamma|, group-effective

    bool operator==(const GammaScore&) const = default;
};

std::vector<GammaScore> collect_gammas(const NetworkDef& net, const WeightStore& store,
                                       const PruneAnalysis& analysis);

// Kept-channel lists per layer; empty list = layer untouched (non-conv or
// unprunable). Prunable layers always keep at least the floor.
struct PruneMask {
    std::vector<std::vector<uint32_t>> kept;
    float ratio = 0;      // requested
    float threshold = 0;  // |gamma| cutoff actually applied
};

// Global r-quantile over all scores; a channel goes iff score < threshold.
// floor_count = 0 means the default per-layer floor max(1, ceil(0.05*filters)).
PruneMask select_mask(const NetworkDef& net, const PruneAnalysis& analysis,
                      const std::vector<GammaScore>& scores, float ratio,
                      uint32_t floor_count = 0);

struct PrunedModel {
    NetworkDef def;
    WeightStore store;
};

// Slices kept output channels, drops the matching input-channel slices from
// every consumer, rewrites filters= fields. The result passes validate().
PrunedModel apply_mask(const NetworkDef& net, const WeightStore& store, const PruneMask& mask);

struct LayerPruneRow {
    uint32_t layer = 0;
    uint32_t filters_before = 0;
    uint32_t filters_after = 0;
};

struct PruneReport {
    uint64_t params_before = 0;
    uint64_t params_after = 0;
    float ratio_requested = 0;
    float ratio_achieved = 0;  // pruned prunable channels / all prunable channels
    float threshold = 0;
    std::vector<LayerPruneRow> layers;       // prunable convs only
    std::vector<uint32_t> beta_warnings;     // layers whose pruned channels carry |beta| > 1e-3
};

PruneReport prune_report(const NetworkDef& before, const NetworkDef& after,
                         const PruneMask& mask, const WeightStore& before_store);

std::string format_prune_report(const PruneReport& report);

}  // namespace slimdet
