#include "prune.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "error.hpp"

namespace slimdet {

std::vector<GammaScore> collect_gammas(const NetworkDef& net, const WeightStore& store,
                                       const PruneAnalysis& analysis) {
    if (store.blocks.size() != net.layers.size())
        fail(ErrorKind::weights, "misaligned store");

    std::vector<GammaScore> scores;
    for (size_t i = 0; i < net.layers.size(); i++) {
        if (!analysis.prunable[i]) continue;
        const LayerSpec& spec = net.layers[i];
        const std::vector<float>& gamma = store.blocks[i].bn_gamma;
        if (gamma.size() != spec.filters) fail(ErrorKind::weights, "misaligned store");

        int gid = analysis.group_of[i];
        for (uint32_t c = 0; c < spec.filters; c++) {
            float s = std::fabs(gamma[c]);
            if (gid >= 0)
                for (int m : analysis.groups[gid])
                    s = std::max(s, std::fabs(store.blocks[m].bn_gamma[c]));
            scores.push_back({static_cast<uint32_t>(i), c, s});
        }
    }
    return scores;
}

PruneMask select_mask(const NetworkDef& net, const PruneAnalysis& analysis,
                      const std::vector<GammaScore>& scores, float ratio,
                      uint32_t floor_count) {
    if (!(ratio >= 0.0f && ratio < 1.0f))
        fail(ErrorKind::invalid, "prune ratio must lie in [0, 1)");

    PruneMask mask;
    mask.ratio = ratio;
    mask.kept.resize(net.layers.size());
    if (scores.empty()) return mask;

    std::vector<float> sorted;
    sorted.reserve(scores.size());
    for (const GammaScore& s : scores) sorted.push_back(s.score);
    std::sort(sorted.begin(), sorted.end());
    mask.threshold = sorted[static_cast<size_t>(ratio * sorted.size())];

    // regroup entries per layer
    std::vector<std::vector<float>> layer_scores(net.layers.size());
    for (const GammaScore& s : scores) {
        if (s.layer >= net.layers.size() || s.channel >= net.layers[s.layer].filters)
            fail(ErrorKind::invalid, "score entry out of range");
        auto& ls = layer_scores[s.layer];
        if (ls.empty()) ls.resize(net.layers[s.layer].filters, -1.0f);
        ls[s.channel] = s.score;
    }

    for (size_t i = 0; i < net.layers.size(); i++) {
        if (layer_scores[i].empty()) continue;
        if (!analysis.prunable[i])
            fail(ErrorKind::invalid, "scores given for unprunable layer " + std::to_string(i));
        uint32_t filters = net.layers[i].filters;
        uint32_t floor_n = floor_count ? floor_count
                                       : std::max(1u, static_cast<uint32_t>(
                                                          std::ceil(0.05 * filters)));
        floor_n = std::min(floor_n, filters);

        std::vector<uint32_t> kept;
        for (uint32_t c = 0; c < filters; c++)
            if (layer_scores[i][c] >= mask.threshold) kept.push_back(c);

        if (kept.size() < floor_n) {
            // keep the highest-scoring channels instead
            std::vector<uint32_t> order(filters);
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
                return layer_scores[i][a] > layer_scores[i][b];
            });
            kept.assign(order.begin(), order.begin() + floor_n);
            std::sort(kept.begin(), kept.end());
        }
        mask.kept[i] = std::move(kept);
    }
    return mask;
}

namespace {

std::vector<uint32_t> full_range(uint32_t n) {
    std::vector<uint32_t> v(n);
    std::iota(v.begin(), v.end(), 0);
    return v;
}

void check_kept_list(const std::vector<uint32_t>& kept, uint32_t filters, size_t layer) {
    if (kept.empty()) fail(ErrorKind::invalid, "empty kept list at layer " + std::to_string(layer));
    for (size_t k = 0; k < kept.size(); k++) {
        if (kept[k] >= filters || (k > 0 && kept[k] <= kept[k - 1]))
            fail(ErrorKind::invalid,
                 "kept list at layer " + std::to_string(layer) + " is not ascending in range");
    }
}

}  // namespace

PrunedModel apply_mask(const NetworkDef& net, const WeightStore& store, const PruneMask& mask) {
    if (mask.kept.size() != net.layers.size())
        fail(ErrorKind::invalid, "mask length does not match layer count");
    if (store.blocks.size() != net.layers.size()) fail(ErrorKind::weights, "misaligned store");

    PruneAnalysis analysis = analyze_pruning(net);
    std::vector<uint32_t> out_ch = layer_out_channels(net);

    // effective kept list per layer, group coherence enforced
    for (size_t g = 0; g < analysis.groups.size(); g++) {
        const std::vector<int>& members = analysis.groups[g];
        if (members.size() < 2) continue;
        std::vector<uint32_t> want;
        bool have = false;
        for (int m : members) {
            std::vector<uint32_t> eff =
                mask.kept[m].empty() ? full_range(net.layers[m].filters) : mask.kept[m];
            if (!have) {
                want = std::move(eff);
                have = true;
            } else if (eff != want) {
                fail(ErrorKind::invalid,
                     "grouped layers " + std::to_string(members[0]) + " and " +
                         std::to_string(m) + " carry different kept lists");
            }
        }
    }

    // surviving ORIGINAL output-channel indices per layer
    std::vector<std::vector<uint32_t>> live(net.layers.size());
    std::vector<uint32_t> input_live = full_range(net.input_channels);
    auto live_of = [&](int idx) -> const std::vector<uint32_t>& {
        return idx < 0 ? input_live : live[idx];
    };

    for (size_t i = 0; i < net.layers.size(); i++) {
        const LayerSpec& spec = net.layers[i];
        int prev = static_cast<int>(i) - 1;
        switch (spec.kind) {
            case LayerKind::convolutional:
                if (!mask.kept[i].empty()) {
                    if (!analysis.prunable[i])
                        fail(ErrorKind::invalid,
                             "mask prunes unprunable layer " + std::to_string(i) + " (" +
                                 analysis.reason[i] + ")");
                    check_kept_list(mask.kept[i], spec.filters, i);
                    live[i] = mask.kept[i];
                } else {
                    live[i] = full_range(spec.filters);
                }
                break;
            case LayerKind::maxpool:
            case LayerKind::upsample:
            case LayerKind::yolo:
                live[i] = live_of(prev);
                break;
            case LayerKind::route:
                if (spec.route_groups > 1) {
                    int src = spec.route_layers[0];
                    uint32_t slice = out_ch[src] / spec.route_groups;
                    if (live_of(src).size() != out_ch[src])
                        fail(ErrorKind::invalid, "grouped route source " + std::to_string(src) +
                                                     " was pruned");
                    live[i] = full_range(slice);
                } else {
                    uint32_t offset = 0;
                    for (int src : spec.route_layers) {
                        for (uint32_t c : live_of(src)) live[i].push_back(offset + c);
                        offset += out_ch[src];
                    }
                }
                break;
            case LayerKind::shortcut:
                if (live_of(prev) != live_of(spec.from))
                    fail(ErrorKind::invalid,
                         "shortcut at layer " + std::to_string(i) +
                             " mixes different kept lists");
                live[i] = live_of(prev);
                break;
        }
    }

    PrunedModel out;
    out.def = net;
    out.store.header = store.header;
    out.store.blocks.resize(net.layers.size());

    for (size_t i = 0; i < net.layers.size(); i++) {
        const LayerSpec& spec = net.layers[i];
        if (spec.kind != LayerKind::convolutional) continue;

        const std::vector<uint32_t>& rows = live[i];
        const std::vector<uint32_t>& cols =
            live_of(static_cast<int>(i) - 1);
        uint32_t orig_in = layer_in_channels(net, i);
        uint32_t kk = spec.size * spec.size;
        const ConvWeights& src = store.blocks[i];
        if (src.kernel.size() != static_cast<size_t>(spec.filters) * orig_in * kk)
            fail(ErrorKind::weights, "misaligned store");

        ConvWeights dst;
        dst.kernel.reserve(rows.size() * cols.size() * kk);
        for (uint32_t oc : rows)
            for (uint32_t ic : cols) {
                const float* from = src.kernel.data() +
                                    (static_cast<size_t>(oc) * orig_in + ic) * kk;
                dst.kernel.insert(dst.kernel.end(), from, from + kk);
            }
        auto slice = [&](const std::vector<float>& v) {
            std::vector<float> r;
            r.reserve(rows.size());
            for (uint32_t oc : rows) r.push_back(v[oc]);
            return r;
        };
        if (spec.batch_normalize) {
            dst.bn_beta = slice(src.bn_beta);
            dst.bn_gamma = slice(src.bn_gamma);
            dst.bn_mean = slice(src.bn_mean);
            dst.bn_var = slice(src.bn_var);
        } else {
            dst.bias = slice(src.bias);
        }
        out.store.blocks[i] = std::move(dst);
        out.def.layers[i].filters = static_cast<uint32_t>(rows.size());
    }

    std::vector<std::string> complaints = validate(out.def);
    if (!complaints.empty())
        fail(ErrorKind::invalid, "pruned definition fails validation: " + complaints.front());
    return out;
}

PruneReport prune_report(const NetworkDef& before, const NetworkDef& after,
                         const PruneMask& mask, const WeightStore& before_store) {
    if (before.layers.size() != after.layers.size() ||
        mask.kept.size() != before.layers.size())
        fail(ErrorKind::invalid, "report inputs disagree on layer count");

    PruneReport r;
    r.params_before = count_parameters(before);
    r.params_after = count_parameters(after);
    r.ratio_requested = mask.ratio;
    r.threshold = mask.threshold;

    uint64_t total = 0, pruned = 0;
    for (size_t i = 0; i < before.layers.size(); i++) {
        if (mask.kept[i].empty()) continue;
        uint32_t fb = before.layers[i].filters;
        uint32_t fa = after.layers[i].filters;
        r.layers.push_back({static_cast<uint32_t>(i), fb, fa});
        total += fb;
        pruned += fb - fa;

        const std::vector<float>& beta = before_store.blocks[i].bn_beta;
        std::vector<char> kept_flag(fb, 0);
        for (uint32_t c : mask.kept[i]) kept_flag[c] = 1;
        for (uint32_t c = 0; c < fb; c++)
            if (!kept_flag[c] && c < beta.size() && std::fabs(beta[c]) > 1e-3f) {
                r.beta_warnings.push_back(static_cast<uint32_t>(i));
                break;
            }
    }
    r.ratio_achieved = total ? static_cast<float>(pruned) / static_cast<float>(total) : 0.0f;
    return r;
}

std::string format_prune_report(const PruneReport& r) {
    std::string out;
    char line[160];
    snprintf(line, sizeof line, "%6s  %8s  %8s\n", "layer", "before", "after");
    out += line;
    for (const LayerPruneRow& row : r.layers) {
        snprintf(line, sizeof line, "%6u  %8u  %8u\n", row.layer, row.filters_before,
                 row.filters_after);
        out += line;
    }
    snprintf(line, sizeof line,
             "params %llu -> %llu (%.4f of original)\n",
             static_cast<unsigned long long>(r.params_before),
             static_cast<unsigned long long>(r.params_after),
             r.params_before ? static_cast<double>(r.params_after) / r.params_before : 0.0);
    out += line;
    snprintf(line, sizeof line, "ratio requested %.3f achieved %.3f, threshold %.6g\n",
             r.ratio_requested, r.ratio_achieved, r.threshold);
    out += line;
    for (uint32_t l : r.beta_warnings) {
        snprintf(line, sizeof line,
                 "warning: layer %u drops channels with |beta| > 1e-3; outputs will shift\n", l);
        out += line;
    }
    return out;
}

}  // namespace slimdet
