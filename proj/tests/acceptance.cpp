// Release gate. Each criterion is one self-contained check over the public
// library surface, printed as a single PASS/FAIL line with its measured
// numbers. Exit status is the count of failed criteria, so CI can gate on it
// while the log stays readable on its own.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "data.hpp"
#include "detect.hpp"
#include "error.hpp"
#include "eval.hpp"
#include "graph.hpp"
#include "losses.hpp"
#include "netcfg.hpp"
#include "network.hpp"
#include "prune.hpp"
#include "rng.hpp"
#include "train.hpp"

using namespace slimdet;
namespace fs = std::filesystem;

namespace {

std::string str(const char* fmt, ...) {
    char buf[512];
    va_list args;
    va_start(args, fmt);
    vsnprintf(buf, sizeof(buf), fmt, args);
    va_end(args);
    return buf;
}

std::string cfg_path(const char* name) {
    for (const char* root : {"cfg", "../cfg", "../../cfg"}) {
        std::string p = std::string(root) + "/" + name;
        if (fs::exists(p)) return p;
    }
    throw std::runtime_error(std::string("cannot locate cfg/") + name +
                             " (run from the repository root)");
}

// ---- shared toy definitions ----

const char* kToyCfg = R"(
[net]
width=32
height=32
channels=3

[convolutional]
batch_normalize=1
filters=8
size=3
stride=2
pad=1
activation=leaky

[convolutional]
batch_normalize=1
filters=12
size=3
stride=2
pad=1
activation=leaky

[convolutional]
batch_normalize=1
filters=12
size=3
stride=1
pad=1
activation=leaky

[shortcut]
from=-2
activation=linear

[convolutional]
filters=24
size=1
stride=1
pad=1
activation=linear

[yolo]
anchors=6,6, 10,10, 14,14
mask=0,1,2
classes=3
)";

// Wider variant: enough capacity to learn the synthetic shapes well.
const char* kRecoverCfg = R"(
[net]
width=32
height=32
channels=3

[convolutional]
batch_normalize=1
filters=16
size=3
stride=2
pad=1
activation=leaky

[convolutional]
batch_normalize=1
filters=16
size=3
stride=2
pad=1
activation=leaky

[convolutional]
batch_normalize=1
filters=16
size=3
stride=1
pad=1
activation=leaky

[shortcut]
from=-2
activation=linear

[convolutional]
filters=24
size=1
stride=1
pad=1
activation=linear

[yolo]
anchors=6,6, 10,10, 14,14
mask=0,1,2
classes=3
)";

// Parameter mass split between linear terms (first conv reads the fixed RGB
// input, last conv feeds the head) and one quadratic conv-conv term, so the
// scaling envelope has real margin on both sides.
const char* kEnvelopeCfg = R"(
[net]
width=64
height=64
channels=3

[convolutional]
batch_normalize=1
filters=256
size=7
stride=2
pad=1
activation=leaky

[convolutional]
batch_normalize=1
filters=128
size=1
stride=1
pad=1
activation=leaky

[convolutional]
size=1
stride=1
pad=1
filters=24
activation=linear

[yolo]
mask = 0,1,2
anchors = 10,14, 23,27, 37,58
classes=3
num=3
)";

std::vector<Sample> shapes(uint32_t count, uint32_t side, uint64_t seed,
                           uint32_t max_objects = 2) {
    ShapesConfig cfg;
    cfg.count = count;
    cfg.width = side;
    cfg.height = side;
    cfg.min_objects = 1;
    cfg.max_objects = max_objects;
    return synthetic_shapes(cfg, seed);
}

Tensor noise_image(Rng& rng, uint32_t c, uint32_t h, uint32_t w) {
    Tensor t(c, h, w);
    for (float& v : t.data) v = rng.uniform(0.0f, 1.0f);
    return t;
}

// One uniform draw vector per dependency group: channels tied by shortcuts
// carry a single keep/drop decision, so they get a single sample.
void scatter_gammas(Network& net, const PruneAnalysis& analysis, uint64_t seed) {
    Rng rng(seed);
    for (const std::vector<int>& group : analysis.groups) {
        std::vector<float> draw(net.weights().blocks[group[0]].bn_gamma.size());
        for (float& g : draw) g = rng.uniform(0.05f, 1.0f);
        for (int layer : group) net.weights().blocks[layer].bn_gamma = draw;
    }
}

void zero_dropped(Network& net, const PruneMask& mask) {
    for (size_t l = 0; l < mask.kept.size(); l++) {
        if (mask.kept[l].empty()) continue;
        ConvWeights& w = net.weights().blocks[l];
        std::vector<uint8_t> keep(w.bn_gamma.size(), 0);
        for (uint32_t c : mask.kept[l]) keep[c] = 1;
        for (size_t c = 0; c < keep.size(); c++) {
            if (!keep[c]) {
                w.bn_gamma[c] = 0.0f;
                w.bn_beta[c] = 0.0f;
            }
        }
    }
}

double head_gap(const Network& a, const Network& b, const Tensor& x) {
    ForwardTrace ta = a.forward(x);
    ForwardTrace tb = b.forward(x);
    double gap = 0;
    for (int h : a.head_layers()) {
        const Tensor& u = ta.out[h];
        const Tensor& v = tb.out[h];
        for (size_t i = 0; i < u.data.size(); i++)
            gap = std::max(gap, std::fabs(double(u.data[i]) - double(v.data[i])));
    }
    return gap;
}

double rel_err(double a, double b) {
    return std::fabs(a - b) / std::max({1e-6, std::fabs(a), std::fabs(b)});
}

double median5(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

// ---- independent double-precision references ----

struct DTerms {
    double iou, rho2, c2, v, alpha, loss;
};

DTerms dciou_ref(const double p[4], const double g[4], const double* alpha_frozen = nullptr) {
    double px1 = p[0] - p[2] / 2, px2 = p[0] + p[2] / 2;
    double py1 = p[1] - p[3] / 2, py2 = p[1] + p[3] / 2;
    double gx1 = g[0] - g[2] / 2, gx2 = g[0] + g[2] / 2;
    double gy1 = g[1] - g[3] / 2, gy2 = g[1] + g[3] / 2;
    double iw = std::min(px2, gx2) - std::max(px1, gx1);
    double ih = std::min(py2, gy2) - std::max(py1, gy1);
    double inter = (iw > 0 && ih > 0) ? iw * ih : 0.0;
    double uni = p[2] * p[3] + g[2] * g[3] - inter;
    double iou = uni > 0 ? inter / uni : 0.0;
    double rho2 = (p[0] - g[0]) * (p[0] - g[0]) + (p[1] - g[1]) * (p[1] - g[1]);
    double cw = std::max(px2, gx2) - std::min(px1, gx1);
    double ch = std::max(py2, gy2) - std::min(py1, gy1);
    double c2 = cw * cw + ch * ch;
    double pi = 3.14159265358979323846;
    double d = std::atan(g[2] / g[3]) - std::atan(p[2] / p[3]);
    double v = 4.0 / (pi * pi) * d * d;
    double alpha = alpha_frozen ? *alpha_frozen : (v == 0 ? 0.0 : v / ((1.0 - iou) + v));
    return {iou, rho2, c2, v, alpha, 1.0 - iou + rho2 / c2 + alpha * v};
}

double dbce_ref(double p, double t) {
    p = std::clamp(p, 1e-7, 1.0 - 1e-7);
    return -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
}

Box rand_box(Rng& rng) {
    return {rng.uniform(0.2f, 0.8f), rng.uniform(0.2f, 0.8f), rng.uniform(0.05f, 0.5f),
            rng.uniform(0.05f, 0.5f)};
}

LossInputs random_inputs(Rng& rng, uint32_t gh, uint32_t gw, uint32_t nb, uint32_t classes) {
    LossInputs in;
    in.grid_h = gh;
    in.grid_w = gw;
    in.boxes_per_cell = nb;
    in.classes = classes;
    size_t n = in.slots();
    in.obj_mask.assign(n, 0);
    in.noobj_mask.assign(n, 0);
    in.pred_conf.resize(n);
    in.target_conf.assign(n, 0);
    in.pred_class.resize(n * classes);
    in.target_class.assign(n * classes, 0);
    in.target_gt.assign(n, -1);
    for (size_t s = 0; s < n; s++) {
        in.pred_conf[s] = rng.uniform(0.02f, 0.98f);
        if (rng.uniform() < 0.3) {
            in.obj_mask[s] = 1;
            in.target_conf[s] = 1;
            in.target_class[s * classes + rng.below(classes)] = 1;
        } else {
            in.noobj_mask[s] = 1;
        }
        for (uint32_t k = 0; k < classes; k++)
            in.pred_class[s * classes + k] = rng.uniform(0.02f, 0.98f);
    }
    return in;
}

// Mark-removal over the full pairwise matrix instead of a kept list.
std::vector<Detection> nms_oracle(const std::vector<Detection>& dets, float conf_thresh,
                                  float iou_thresh) {
    std::vector<size_t> order;
    for (size_t i = 0; i < dets.size(); i++)
        if (dets[i].confidence >= conf_thresh) order.push_back(i);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return dets[a].confidence > dets[b].confidence;
    });
    std::vector<bool> removed(dets.size(), false);
    std::vector<Detection> out;
    for (size_t oi = 0; oi < order.size(); oi++) {
        size_t i = order[oi];
        if (removed[i]) continue;
        out.push_back(dets[i]);
        for (size_t oj = oi + 1; oj < order.size(); oj++) {
            size_t j = order[oj];
            if (dets[j].class_id == dets[i].class_id && iou(dets[i].box, dets[j].box) > iou_thresh)
                removed[j] = true;
        }
    }
    return out;
}

// Explicit precision envelope, quadratic on purpose: at every recall rise,
// scan the whole tail for the best precision.
double ap_oracle(const std::vector<uint8_t>& flags, uint32_t n_gt) {
    size_t n = flags.size();
    std::vector<double> prec(n);
    uint32_t tp = 0;
    for (size_t i = 0; i < n; i++) {
        tp += flags[i];
        prec[i] = double(tp) / double(i + 1);
    }
    double ap = 0;
    for (size_t i = 0; i < n; i++) {
        if (!flags[i]) continue;
        double envelope = 0;
        for (size_t j = i; j < n; j++) envelope = std::max(envelope, prec[j]);
        ap += envelope / n_gt;
    }
    return ap;
}

// ---- criteria ----

struct Outcome {
    bool pass = false;
    std::string detail;
};

Outcome c1_parameter_accounting() {
    auto in_band = [](uint64_t n, double center) {
        return double(n) >= center * 0.98 && double(n) <= center * 1.02;
    };
    uint64_t full = count_parameters(parse_cfg_file(cfg_path("yolov4.cfg")));
    uint64_t tiny = count_parameters(parse_cfg_file(cfg_path("yolov4-tiny.cfg")));
    bool full_ok = in_band(full, 63.95e6);
    bool tiny_ok = in_band(tiny, 9.34e6);
    return {full_ok && tiny_ok,
            str("yolov4 %llu %s 63.95M +/- 2%%; tiny %llu %s 9.34M +/- 2%%",
                (unsigned long long)full, full_ok ? "inside" : "OUTSIDE",
                (unsigned long long)tiny, tiny_ok ? "inside" : "OUTSIDE")};
}

Outcome c2_prune_scaling_envelope() {
    NetworkDef def = parse_cfg(kEnvelopeCfg);
    uint64_t before = count_parameters(def);
    Network net = Network::random(def, 5);
    PruneAnalysis analysis = analyze_pruning(net.def());
    scatter_gammas(net, analysis, 11);
    std::vector<GammaScore> scores = collect_gammas(net.def(), net.weights(), analysis);

    bool ok = true;
    std::string detail;
    for (float r : {0.2f, 0.5f, 0.9f}) {
        PruneMask mask = select_mask(net.def(), analysis, scores, r);
        PrunedModel pm = apply_mask(net.def(), net.weights(), mask);
        double frac = double(count_parameters(pm.def)) / double(before);
        double lo = (1.0 - r) * (1.0 - r), hi = 1.0 - r;
        ok = ok && frac >= lo && frac <= hi;
        detail += str("r=%.1f %.4f in [%.4f,%.4f]; ", r, frac, lo, hi);
    }

    // published full-scale fractions obey the same envelope
    const double published[][2] = {{0.2, 0.698}, {0.5, 0.276}, {0.9, 0.0119}};
    for (auto& row : published) {
        double r = row[0], frac = row[1];
        ok = ok && frac >= (1 - r) * (1 - r) && frac <= (1 - r);
    }
    detail += "published 0.698/0.276/0.0119 in band";
    return {ok, detail};
}

Outcome c3_zero_gamma_equivalence() {
    auto check = [](NetworkDef def, uint64_t net_seed, uint64_t gamma_seed, float ratio,
                    int inputs) {
        Network net = Network::random(std::move(def), net_seed);
        PruneAnalysis analysis = analyze_pruning(net.def());
        scatter_gammas(net, analysis, gamma_seed);
        PruneMask mask = select_mask(net.def(), analysis,
                                     collect_gammas(net.def(), net.weights(), analysis), ratio);
        zero_dropped(net, mask);
        PrunedModel pm = apply_mask(net.def(), net.weights(), mask);
        Network pruned(pm.def, pm.store);

        Rng rng(net_seed * 31 + 7);
        double gap = 0;
        for (int i = 0; i < inputs; i++) {
            Tensor x = noise_image(rng, net.def().input_channels, net.def().input_height,
                                   net.def().input_width);
            gap = std::max(gap, head_gap(net, pruned, x));
        }
        return gap;
    };

    double toy_gap = check(parse_cfg(kToyCfg), 9, 13, 0.4f, 5);

    NetworkDef full = parse_cfg_file(cfg_path("yolov4.cfg"));
    full.input_width = full.input_height = 96;
    double full_gap = check(std::move(full), 2, 17, 0.3f, 5);

    bool ok = toy_gap <= 1e-5 && full_gap <= 1e-5;
    return {ok, str("max |head diff| toy %.2e, yolov4@96 %.2e (tol 1e-5, 5 inputs each)",
                    toy_gap, full_gap)};
}

Outcome c4_loss_gradients() {
    int checked = 0;

    // box regression: analytic CIoU gradient vs central differences on the
    // double reference, alpha pinned at the evaluation point
    double worst = 0;
    for (uint64_t seed = 1; seed <= 25; seed++) {
        Rng rng(seed * 311);
        Box p = rand_box(rng), g = rand_box(rng);
        BoxGrad grad;
        ciou_loss(p, g, &grad);
        double pd[4] = {p.cx, p.cy, p.w, p.h};
        double gd[4] = {g.cx, g.cy, g.w, g.h};
        double alpha0 = dciou_ref(pd, gd).alpha;
        float analytic[4] = {grad.dcx, grad.dcy, grad.dw, grad.dh};
        double h = 1e-6;
        for (int k = 0; k < 4; k++) {
            double save = pd[k];
            pd[k] = save + h;
            double up = dciou_ref(pd, gd, &alpha0).loss;
            pd[k] = save - h;
            double dn = dciou_ref(pd, gd, &alpha0).loss;
            pd[k] = save;
            worst = std::max(worst, rel_err(analytic[k], (up - dn) / (2 * h)));
            checked++;
        }
    }

    // the full logit chain: sigmoid/exp decode into the same frozen-alpha loss
    LayerSpec head;
    head.kind = LayerKind::yolo;
    head.anchors = {{10, 14}, {30, 40}, {50, 60}};
    head.mask = {1};
    head.classes = 2;
    head.scale_xy = 1.1f;
    for (uint64_t seed = 1; seed <= 20; seed++) {
        Rng rng(seed * 277);
        Tensor f(7, 1, 1);
        for (float& v : f.data) v = rng.uniform(-1.5f, 1.5f);
        GroundTruth gt{{rng.uniform(0.3f, 0.7f), rng.uniform(0.3f, 0.7f),
                        rng.uniform(0.2f, 0.9f), rng.uniform(0.2f, 0.9f)},
                       0};
        Tensor df;
        head_loss(f, head, 32, {gt}, &df);

        double gd[4] = {gt.box.cx, gt.box.cy, gt.box.w, gt.box.h};
        auto decode = [](const double t[4], double out[4]) {
            double sx = 1.0 / (1.0 + std::exp(-t[0]));
            double sy = 1.0 / (1.0 + std::exp(-t[1]));
            out[0] = sx * 1.1 - 0.05;
            out[1] = sy * 1.1 - 0.05;
            out[2] = 30.0 * std::exp(t[2]) / 32.0;
            out[3] = 40.0 * std::exp(t[3]) / 32.0;
        };
        double logits[4] = {f.at(0, 0, 0), f.at(1, 0, 0), f.at(2, 0, 0), f.at(3, 0, 0)};
        double p0[4];
        decode(logits, p0);
        double alpha0 = dciou_ref(p0, gd).alpha;
        double h = 1e-6;
        for (int k = 0; k < 4; k++) {
            double save = logits[k];
            double pu[4], pd[4];
            logits[k] = save + h;
            decode(logits, pu);
            logits[k] = save - h;
            decode(logits, pd);
            logits[k] = save;
            double fd =
                (dciou_ref(pu, gd, &alpha0).loss - dciou_ref(pd, gd, &alpha0).loss) / (2 * h);
            worst = std::max(worst, rel_err(df.at(k, 0, 0), fd));
            checked++;
        }
    }

    // objectness, no-object and class binary cross-entropies
    for (uint64_t seed = 1; seed <= 20; seed++) {
        Rng rng(seed * 97);
        LossInputs in = random_inputs(rng, 2, 3, 2, 3);
        std::vector<float> dconf(in.slots(), 0.0f);
        std::vector<float> dcls(in.slots() * in.classes, 0.0f);
        obj_conf_loss(in, &dconf);
        noobj_conf_loss(in, &dconf);
        class_loss(in, &dcls);
        double h = 1e-6;
        for (size_t s = 0; s < in.slots(); s++) {
            if (in.obj_mask[s] || in.noobj_mask[s]) {
                double fd = (dbce_ref(in.pred_conf[s] + h, in.target_conf[s]) -
                             dbce_ref(in.pred_conf[s] - h, in.target_conf[s])) /
                            (2 * h);
                worst = std::max(worst, rel_err(dconf[s], fd));
                checked++;
            }
            if (!in.obj_mask[s]) continue;
            for (uint32_t k = 0; k < in.classes; k++) {
                size_t e = s * in.classes + k;
                double fd = (dbce_ref(in.pred_class[e] + h, in.target_class[e]) -
                             dbce_ref(in.pred_class[e] - h, in.target_class[e])) /
                            (2 * h);
                worst = std::max(worst, rel_err(dcls[e], fd));
                checked++;
            }
        }
    }

    CiouTerms example = ciou_loss(Box{0, 0, 2, 2}, Box{1, 1, 2, 2});
    bool example_ok = std::fabs(example.loss - 61.0 / 63.0) < 1e-6;

    Box same{0.4f, 0.6f, 0.3f, 0.2f};
    CiouTerms zero = ciou_loss(same, same);
    bool zero_ok = std::fabs(zero.loss) <= 1e-9;

    bool ok = worst < 1e-4 && example_ok && zero_ok;
    return {ok, str("%d gradient checks, worst rel err %.2e; worked example %.6f "
                    "(want 0.968254); identical boxes %.1e",
                    checked, worst, example.loss, std::fabs(zero.loss))};
}

Outcome c5_nms_and_ap_oracles() {
    auto det = [](float cx, float cy, float w, float h, int cls, float conf) {
        Detection d;
        d.box = {cx, cy, w, h};
        d.class_id = cls;
        d.confidence = conf;
        return d;
    };

    int nms_checked = 0;
    for (uint64_t seed = 1; seed <= 1000; seed++) {
        Rng rng(seed * 131);
        std::vector<Detection> in;
        for (int i = 0; i < 50; i++) {
            in.push_back(det(rng.uniform(0.2f, 0.8f), rng.uniform(0.2f, 0.8f),
                             rng.uniform(0.05f, 0.4f), rng.uniform(0.05f, 0.4f),
                             int(rng.below(3)), rng.uniform(0.0f, 1.0f)));
        }
        if (nms(in, kDefaultConfThresh, kDefaultNmsIou) !=
            nms_oracle(in, kDefaultConfThresh, kDefaultNmsIou))
            return {false, str("nms diverged from oracle at instance %llu",
                               (unsigned long long)seed)};
        nms_checked++;
    }

    double worst = 0;
    for (uint64_t seed = 1; seed <= 1000; seed++) {
        Rng rng(seed * 37);
        uint32_t n_gt = 1 + uint32_t(rng.below(12));
        size_t len = rng.below(40);
        std::vector<uint8_t> flags(len, 0);
        uint32_t budget = n_gt;
        for (size_t i = 0; i < len; i++) {
            if (budget > 0 && rng.uniform() < 0.4) {
                flags[i] = 1;
                budget--;
            }
        }
        worst = std::max(worst,
                         std::fabs(average_precision(flags, n_gt) - ap_oracle(flags, n_gt)));
    }

    double tp_fp_tp = average_precision({1, 0, 1}, 2);
    bool spot = std::fabs(tp_fp_tp - 5.0 / 6.0) <= 1e-9;

    bool ok = worst <= 1e-9 && spot;
    return {ok, str("%d nms instances exact; 1000 ap instances, worst gap %.1e; "
                    "[tp,fp,tp]/2gt = %.4f",
                    nms_checked, worst, tp_fp_tp)};
}

Outcome c6_sparsity_effect() {
    // 6e-3 is the largest step where all ten runs converge; 1e-2 blows up
    // two of the sampled seed pairs in both arms.
    std::vector<double> off, on;
    for (int pair = 0; pair < 5; pair++) {
        std::vector<Sample> data = shapes(12, 32, 17 + pair);
        TrainConfig cfg;
        cfg.epochs = 300;
        cfg.base_lr = 6e-3f;
        cfg.lr_step_every = 1000;
        cfg.batch = 4;
        cfg.seed = 3;

        Network plain = Network::random(parse_cfg(kToyCfg), 41 + pair);
        cfg.sparsity.lambda = 0.0f;
        off.push_back(train_toy(plain, cfg, data).epochs.back().gamma_small);

        Network slim = Network::random(parse_cfg(kToyCfg), 41 + pair);
        cfg.sparsity.lambda = 1e-2f;
        on.push_back(train_toy(slim, cfg, data).epochs.back().gamma_small);
    }
    double med_off = median5(off), med_on = median5(on);
    bool ok = med_on > 0 && med_on >= 5.0 * med_off;
    return {ok, str("median |gamma|<0.01 fraction: lambda=1e-2 %.3f vs lambda=0 %.3f "
                    "(need >= 5x over 5 paired runs)",
                    med_on, med_off)};
}

Outcome c7_prune_finetune_recovery() {
    std::vector<Sample> train_set = shapes(48, 32, 1);
    std::vector<Sample> heldout = shapes(24, 32, 2);

    Network net = Network::random(parse_cfg(kRecoverCfg), 3);
    TrainConfig tc;
    tc.epochs = 300;
    tc.base_lr = 5e-3f;
    tc.lr_step_every = 150;
    tc.lr_decay = 0.3f;
    tc.batch = 4;
    tc.seed = 7;
    tc.sparsity.lambda = 5e-3f;
    train_toy(net, tc, train_set);
    EvalResult base = evaluate_model(net, heldout, 0.5f, 0.05f);

    PruneAnalysis analysis = analyze_pruning(net.def());
    PruneMask mask = select_mask(net.def(), analysis,
                                 collect_gammas(net.def(), net.weights(), analysis), 0.5f);
    PrunedModel pm = apply_mask(net.def(), net.weights(), mask);
    Network pruned(pm.def, pm.store);
    EvalResult dropped = evaluate_model(pruned, heldout, 0.5f, 0.05f);

    TrainConfig ft = tc;
    ft.epochs = 200;
    ft.base_lr = 2e-3f;
    ft.lr_step_every = 80;
    ft.lr_decay = 0.3f;
    fine_tune(pruned, ft, train_set);
    EvalResult recovered = evaluate_model(pruned, heldout, 0.5f, 0.05f);

    double delta = base.map - recovered.map;
    bool ok = base.map > 0.2 && delta < 0.05;
    return {ok, str("held-out mAP base %.4f -> pruned@0.5 %.4f -> fine-tuned %.4f; "
                    "delta %.4f (need < 0.05)",
                    base.map, dropped.map, recovered.map, delta)};
}

Outcome c8_fps_ordering() {
    Rng rng(21);
    std::vector<Tensor> images;
    for (int i = 0; i < 11; i++) images.push_back(noise_image(rng, 3, 96, 96));
    auto fps_of = [&](const Network& net) {
        return benchmark_fps(net, images, 1).fps;
    };

    NetworkDef full = parse_cfg_file(cfg_path("yolov4.cfg"));
    full.input_width = full.input_height = 96;
    Network base = Network::random(full, 4);
    double base_fps = fps_of(base);

    PruneAnalysis analysis = analyze_pruning(base.def());
    scatter_gammas(base, analysis, 13);
    std::vector<GammaScore> scores = collect_gammas(base.def(), base.weights(), analysis);
    auto pruned_fps = [&](float ratio) {
        PruneMask mask = select_mask(base.def(), analysis, scores, ratio);
        PrunedModel pm = apply_mask(base.def(), base.weights(), mask);
        Network net(pm.def, pm.store);
        return fps_of(net);
    };
    double p20_fps = pruned_fps(0.2f);
    double p50_fps = pruned_fps(0.5f);

    NetworkDef tiny_def = parse_cfg_file(cfg_path("yolov4-tiny.cfg"));
    tiny_def.input_width = tiny_def.input_height = 96;
    Network tiny = Network::random(tiny_def, 4);
    double tiny_fps = fps_of(tiny);

    bool ok = tiny_fps > p50_fps && p50_fps > p20_fps && p20_fps >= base_fps;
    return {ok, str("fps@96: tiny %.2f > pruned-50 %.2f > pruned-20 %.2f >= yolov4 %.2f",
                    tiny_fps, p50_fps, p20_fps, base_fps)};
}

Outcome c9_freezing_contract() {
    NetworkDef full = parse_cfg_file(cfg_path("yolov4.cfg"));
    full.input_width = full.input_height = 64;
    Network base = Network::random(full, 2);
    const WeightStore before = base.weights();
    std::vector<Sample> data = shapes(1, 64, 11);
    const std::vector<uint32_t> head_convs = {137, 138, 148, 149, 159, 160};

    std::string detail;
    bool ok = true;
    for (FreezeMode mode : {FreezeMode::backbone, FreezeMode::backbone_neck}) {
        Network net(base.def(), before);
        TrainConfig cfg;
        cfg.epochs = 10;
        cfg.batch = 1;
        cfg.base_lr = 1e-3f;
        cfg.seed = 5;
        cfg.freeze.mode = mode;
        train_toy(net, cfg, data);

        std::vector<uint8_t> trainable = trainable_mask(net.def(), cfg.freeze);
        uint32_t frozen_held = 0, frozen_moved = 0, heads_moved = 0;
        for (size_t l = 0; l < net.def().layers.size(); l++) {
            if (net.def().layers[l].kind != LayerKind::convolutional) continue;
            if (!trainable[l]) {
                (net.weights().blocks[l] == before.blocks[l] ? frozen_held : frozen_moved)++;
            }
        }
        for (uint32_t l : head_convs) {
            if (trainable[l] && net.weights().blocks[l].kernel != before.blocks[l].kernel)
                heads_moved++;
        }
        bool mode_ok = frozen_moved == 0 && heads_moved == head_convs.size();
        ok = ok && mode_ok;
        detail += str("%s: %u frozen convs held, %u moved, %u/%zu head convs changed; ",
                      mode == FreezeMode::backbone ? "backbone" : "backbone+neck", frozen_held,
                      frozen_moved, heads_moved, head_convs.size());
    }
    return {ok, detail + "10 steps each"};
}

Outcome c10_format_round_trips() {
    for (const char* name : {"yolov4.cfg", "yolov4-tiny.cfg"}) {
        NetworkDef def = parse_cfg_file(cfg_path(name));
        if (!(parse_cfg(serialize_cfg(def)) == def))
            return {false, str("%s changed across serialize/reparse", name)};
    }

    NetworkDef toy = parse_cfg(kToyCfg);
    Network net = Network::random(toy, 21);
    std::vector<uint8_t> bytes = save_weights(net.weights(), toy);
    if (!(load_weights(bytes, toy) == net.weights()))
        return {false, "weights changed across save/load"};

    fs::path dir = fs::temp_directory_path() / "slimdet_acceptance";
    fs::create_directories(dir);
    PruneAnalysis analysis = analyze_pruning(net.def());
    scatter_gammas(net, analysis, 29);
    PruneMask mask = select_mask(net.def(), analysis,
                                 collect_gammas(net.def(), net.weights(), analysis), 0.5f);
    PrunedModel pm = apply_mask(net.def(), net.weights(), mask);
    fs::path cfg_file = dir / "pruned.cfg", w_file = dir / "pruned.weights";
    {
        std::string text = serialize_cfg(pm.def);
        FILE* f = fopen(cfg_file.c_str(), "wb");
        fwrite(text.data(), 1, text.size(), f);
        fclose(f);
    }
    save_weights_file(pm.store, pm.def, w_file.string());

    NetworkDef back = parse_cfg_file(cfg_file.string());
    if (!(back == pm.def)) return {false, "pruned cfg changed across save/load"};
    std::vector<std::string> complaints = validate(back);
    if (!complaints.empty()) return {false, "reloaded pruned cfg fails validate: " + complaints[0]};
    if (!(load_weights_file(w_file.string(), back) == pm.store))
        return {false, "pruned weights changed across save/load"};

    return {true, "cfg serialize/reparse identity (yolov4 + tiny); weights byte "
                  "round-trip; pruned model save/load/validate clean"};
}

Outcome c11_determinism() {
    std::vector<Sample> data = shapes(8, 32, 19);
    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.base_lr = 5e-3f;
    cfg.lr_step_every = 1000;
    cfg.batch = 4;
    cfg.seed = 3;

    Network a = Network::random(parse_cfg(kToyCfg), 31);
    Network b = Network::random(parse_cfg(kToyCfg), 31);
    TrainHistory ha = train_toy(a, cfg, data);
    TrainHistory hb = train_toy(b, cfg, data);
    bool train_same = a.weights() == b.weights() && ha.epochs.size() == hb.epochs.size();
    for (size_t i = 0; train_same && i < ha.epochs.size(); i++)
        train_same = ha.epochs[i].total == hb.epochs[i].total;

    std::vector<Sample> tiles = shapes(4, 48, 23);
    Sample m1 = mosaic(tiles, 64, 64, 77);
    Sample m2 = mosaic(tiles, 64, 64, 77);
    bool mosaic_same = m1.image.data == m2.image.data && m1.gts == m2.gts;

    // a fresh-init net fires on everything at a low threshold, so the rerun
    // compares a non-empty detection list through the whole pipeline
    Network c = Network::random(parse_cfg(kToyCfg), 31);
    std::vector<Detection> d1 = detect_image(c, data[0].image, 0.05f);
    std::vector<Detection> d2 = detect_image(c, data[0].image, 0.05f);
    std::vector<Detection> t1 = detect_image(a, data[0].image, 0.05f);
    std::vector<Detection> t2 = detect_image(a, data[0].image, 0.05f);
    bool infer_same = d1 == d2 && !d1.empty() && t1 == t2;

    bool ok = train_same && mosaic_same && infer_same;
    return {ok, str("train rerun %s (20 epochs, final weights + losses); mosaic rerun %s; "
                    "infer rerun %s (%zu + %zu detections)",
                    train_same ? "identical" : "DIVERGED", mosaic_same ? "identical" : "DIVERGED",
                    infer_same ? "identical" : "DIVERGED", d1.size(), t1.size())};
}

int g_failures = 0;

void run(int id, const char* name, double budget_s, Outcome (*fn)()) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = fn();
    } catch (const std::exception& e) {
        o = {false, str("threw: %s", e.what())};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (budget_s > 0 && secs > budget_s) {
        o.pass = false;
        o.detail += str(" (exceeded %.0fs budget)", budget_s);
    }
    std::printf("criterion %2d %-28s %s  %s  [%.1fs]\n", id, name, o.pass ? "PASS" : "FAIL",
                o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) g_failures++;
}

}  // namespace

int main() {
    run(1, "parameter accounting", 1, c1_parameter_accounting);
    run(2, "prune scaling envelope", 10, c2_prune_scaling_envelope);
    run(3, "zero-gamma prune equivalence", 120, c3_zero_gamma_equivalence);
    run(4, "loss gradients", 0, c4_loss_gradients);
    run(5, "nms + ap oracles", 0, c5_nms_and_ap_oracles);
    run(6, "sparsity effect", 600, c6_sparsity_effect);
    run(7, "prune + fine-tune recovery", 900, c7_prune_finetune_recovery);
    run(8, "fps ordering", 0, c8_fps_ordering);
    run(9, "freezing contract", 0, c9_freezing_contract);
    run(10, "format round-trips", 5, c10_format_round_trips);
    run(11, "determinism", 0, c11_determinism);

    std::printf("%d of 11 criteria passed\n", 11 - g_failures);
    return g_failures;
}
