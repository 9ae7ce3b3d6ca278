#include "losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "error.hpp"

namespace slimdet {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kProbClamp = 1e-7;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// One BCE term with the conventional leading negation; d/dpred through the
// clamp (exact while the clamp is inactive).
double bce_one(double pred, double target, double* dpred) {
    double p = std::clamp(pred, kProbClamp, 1.0 - kProbClamp);
    if (dpred) *dpred = -(target / p - (1.0 - target) / (1.0 - p));
    return -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
}

}  // namespace

float shape_iou(float w1, float h1, float w2, float h2) {
    float inter = std::max(0.0f, std::min(w1, w2)) * std::max(0.0f, std::min(h1, h2));
    float uni = w1 * h1 + w2 * h2 - inter;
    return uni > 0 ? inter / uni : 0.0f;
}

CiouTerms ciou_loss(const Box& pred, const Box& gt, BoxGrad* grad) {
    if (gt.w <= 0 || gt.h <= 0) fail(ErrorKind::invalid, "degenerate ground truth box");

    double pcx = pred.cx, pcy = pred.cy, pw = pred.w, ph = pred.h;
    double px1 = pcx - pw / 2, px2 = pcx + pw / 2;
    double py1 = pcy - ph / 2, py2 = pcy + ph / 2;
    double gx1 = gt.x1(), gx2 = gt.x2(), gy1 = gt.y1(), gy2 = gt.y2();

    double ix = std::min(px2, gx2) - std::max(px1, gx1);
    double iy = std::min(py2, gy2) - std::max(py1, gy1);
    bool overlap = ix > 0 && iy > 0;
    double inter = overlap ? ix * iy : 0.0;
    double uni = pw * ph + static_cast<double>(gt.w) * gt.h - inter;
    double iou_v = uni > 0 ? inter / uni : 0.0;

    double ox = pcx - gt.cx, oy = pcy - gt.cy;
    double rho2 = ox * ox + oy * oy;
    double cw = std::max(px2, gx2) - std::min(px1, gx1);
    double ch = std::max(py2, gy2) - std::min(py1, gy1);
    double c2 = cw * cw + ch * ch;

    // atan2 keeps degenerate predicted extents finite
    double delta = std::atan2(static_cast<double>(gt.w), gt.h) - std::atan2(pw, ph);
    double v = (4.0 / (kPi * kPi)) * delta * delta;
    double alpha = v == 0 ? 0.0 : v / ((1.0 - iou_v) + v);
    double loss = 1.0 - iou_v + (c2 > 0 ? rho2 / c2 : 0.0) + alpha * v;

    if (grad) {
        double di_px1 = 0, di_px2 = 0, di_py1 = 0, di_py2 = 0;
        if (overlap) {
            if (px1 > gx1) di_px1 = -iy;
            if (px2 < gx2) di_px2 = iy;
            if (py1 > gy1) di_py1 = -ix;
            if (py2 < gy2) di_py2 = ix;
        }
        // corner chain: d corner / d center = 1, d corner / d extent = -+1/2
        double di_cx = di_px1 + di_px2, di_w = (di_px2 - di_px1) / 2;
        double di_cy = di_py1 + di_py2, di_h = (di_py2 - di_py1) / 2;

        // iou = I/U, dU = dA_pred - dI
        auto diou = [&](double di, double da) {
            if (uni <= 0) return 0.0;
            return (di * uni - inter * (da - di)) / (uni * uni);
        };
        double diou_cx = diou(di_cx, 0), diou_w = diou(di_w, ph);
        double diou_cy = diou(di_cy, 0), diou_h = diou(di_h, pw);

        double dcw_px1 = px1 < gx1 ? -1.0 : 0.0, dcw_px2 = px2 > gx2 ? 1.0 : 0.0;
        double dch_py1 = py1 < gy1 ? -1.0 : 0.0, dch_py2 = py2 > gy2 ? 1.0 : 0.0;
        double dc2_cx = 2 * cw * (dcw_px1 + dcw_px2);
        double dc2_w = 2 * cw * (dcw_px2 - dcw_px1) / 2;
        double dc2_cy = 2 * ch * (dch_py1 + dch_py2);
        double dc2_h = 2 * ch * (dch_py2 - dch_py1) / 2;

        // rho2/c2 by the quotient rule
        auto dpen = [&](double drho2, double dc2v) {
            if (c2 <= 0) return 0.0;
            return (drho2 * c2 - rho2 * dc2v) / (c2 * c2);
        };

        double s2 = pw * pw + ph * ph;
        double dv_w = s2 > 0 ? -(8.0 / (kPi * kPi)) * delta * ph / s2 : 0.0;
        double dv_h = s2 > 0 ? (8.0 / (kPi * kPi)) * delta * pw / s2 : 0.0;

        // alpha held constant
        grad->dcx = static_cast<float>(-diou_cx + dpen(2 * ox, dc2_cx));
        grad->dcy = static_cast<float>(-diou_cy + dpen(2 * oy, dc2_cy));
        grad->dw = static_cast<float>(-diou_w + dpen(0, dc2_w) + alpha * dv_w);
        grad->dh = static_cast<float>(-diou_h + dpen(0, dc2_h) + alpha * dv_h);
    }

    CiouTerms t;
    t.iou = static_cast<float>(iou_v);
    t.rho2 = static_cast<float>(rho2);
    t.c2 = static_cast<float>(c2);
    t.v = static_cast<float>(v);
    t.alpha = static_cast<float>(alpha);
    t.loss = static_cast<float>(loss);
    return t;
}

double obj_conf_loss(const LossInputs& in, std::vector<float>* dpred_conf) {
    double sum = 0;
    for (size_t s = 0; s < in.slots(); s++) {
        if (!in.obj_mask[s]) continue;
        double g;
        sum += bce_one(in.pred_conf[s], in.target_conf[s], dpred_conf ? &g : nullptr);
        if (dpred_conf) (*dpred_conf)[s] += static_cast<float>(g);
    }
    return sum;
}

double noobj_conf_loss(const LossInputs& in, std::vector<float>* dpred_conf) {
    double sum = 0;
    for (size_t s = 0; s < in.slots(); s++) {
        if (!in.noobj_mask[s]) continue;
        double g;
        sum += bce_one(in.pred_conf[s], in.target_conf[s], dpred_conf ? &g : nullptr);
        if (dpred_conf) (*dpred_conf)[s] += static_cast<float>(g);
    }
    return sum;
}

double class_loss(const LossInputs& in, std::vector<float>* dpred_class) {
    double sum = 0;
    for (size_t s = 0; s < in.slots(); s++) {
        if (!in.obj_mask[s]) continue;
        for (uint32_t k = 0; k < in.classes; k++) {
            size_t e = s * in.classes + k;
            double g;
            sum += bce_one(in.pred_class[e], in.target_class[e], dpred_class ? &g : nullptr);
            if (dpred_class) (*dpred_class)[e] += static_cast<float>(g);
        }
    }
    return sum;
}

LossInputs assign_targets(const std::vector<GroundTruth>& gts,
                          const std::vector<std::pair<float, float>>& anchors,
                          const std::vector<uint32_t>& mask, uint32_t grid_h, uint32_t grid_w,
                          uint32_t net_w, uint32_t net_h, uint32_t classes,
                          float ignore_iou) {
    if (mask.empty() || grid_h == 0 || grid_w == 0 || classes == 0)
        fail(ErrorKind::invalid, "empty head geometry");
    for (uint32_t m : mask)
        if (m >= anchors.size())
            fail(ErrorKind::invalid, "mask entry " + std::to_string(m) + " out of range");

    LossInputs in;
    in.grid_h = grid_h;
    in.grid_w = grid_w;
    in.boxes_per_cell = static_cast<uint32_t>(mask.size());
    in.classes = classes;
    size_t n = in.slots();
    in.obj_mask.assign(n, 0);
    in.noobj_mask.assign(n, 0);
    in.pred_conf.assign(n, 0);
    in.target_conf.assign(n, 0);
    in.pred_class.assign(n * classes, 0);
    in.target_class.assign(n * classes, 0);
    in.target_gt.assign(n, -1);

    auto gt_shape_iou = [&](size_t a, const GroundTruth& gt) {
        auto [aw, ah] = anchors[mask[a]];
        return shape_iou(gt.box.w * net_w, gt.box.h * net_h, aw, ah);
    };

    auto cell = [](float c, uint32_t extent) {
        float f = c * extent;
        if (f < 0) return 0u;
        return std::min(static_cast<uint32_t>(f), extent - 1);
    };

    for (size_t g = 0; g < gts.size(); g++) {
        const GroundTruth& gt = gts[g];
        if (gt.class_id < 0 || static_cast<uint32_t>(gt.class_id) >= classes)
            fail(ErrorKind::invalid, "class id " + std::to_string(gt.class_id) + " out of range");
        uint32_t j = cell(gt.box.cx, grid_w);
        uint32_t i = cell(gt.box.cy, grid_h);

        std::vector<size_t> order(mask.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            return gt_shape_iou(a, gt) > gt_shape_iou(b, gt);
        });
        // occupied slots fall through to the next-best anchor
        for (size_t a : order) {
            size_t s = in.slot(static_cast<uint32_t>(a), i, j);
            if (in.obj_mask[s]) continue;
            in.obj_mask[s] = 1;
            in.target_conf[s] = 1;
            in.target_class[s * classes + gt.class_id] = 1;
            in.target_gt[s] = static_cast<int32_t>(g);
            break;
        }
    }

    // ignore zone: anchors that resemble some gt supervise neither way
    std::vector<char> ignored(mask.size(), 0);
    for (size_t a = 0; a < mask.size(); a++)
        for (const GroundTruth& gt : gts)
            if (gt_shape_iou(a, gt) > ignore_iou) ignored[a] = 1;

    for (uint32_t a = 0; a < in.boxes_per_cell; a++) {
        if (ignored[a]) continue;
        for (uint32_t i = 0; i < grid_h; i++)
            for (uint32_t j = 0; j < grid_w; j++) {
                size_t s = in.slot(a, i, j);
                if (!in.obj_mask[s]) in.noobj_mask[s] = 1;
            }
    }
    return in;
}

LossTerms head_loss(const Tensor& feature, const LayerSpec& head, uint32_t stride,
                    const std::vector<GroundTruth>& gts, Tensor* dfeature) {
    if (head.kind != LayerKind::yolo) fail(ErrorKind::invalid, "head spec is not a yolo layer");
    uint32_t classes = head.classes;
    uint32_t per = classes + 5;
    uint32_t nb = static_cast<uint32_t>(head.mask.size());
    if (feature.c() != per * nb)
        fail(ErrorKind::invalid, "head expects " + std::to_string(per * nb) +
                                     " channels, got " + std::to_string(feature.c()));

    uint32_t gh = feature.h(), gw = feature.w();
    float net_w = static_cast<float>(gw * stride);
    float net_h = static_cast<float>(gh * stride);

    LossInputs in = assign_targets(gts, head.anchors, head.mask, gh, gw,
                                   static_cast<uint32_t>(net_w), static_cast<uint32_t>(net_h),
                                   classes);
    for (uint32_t a = 0; a < nb; a++) {
        uint32_t base = a * per;
        for (uint32_t i = 0; i < gh; i++)
            for (uint32_t j = 0; j < gw; j++) {
                size_t s = in.slot(a, i, j);
                in.pred_conf[s] = static_cast<float>(sigmoid(feature.at(base + 4, i, j)));
                for (uint32_t k = 0; k < classes; k++)
                    in.pred_class[s * classes + k] =
                        static_cast<float>(sigmoid(feature.at(base + 5 + k, i, j)));
            }
    }

    std::vector<float> dconf, dcls;
    if (dfeature) {
        *dfeature = Tensor(feature.c(), gh, gw);
        dconf.assign(in.slots(), 0);
        dcls.assign(in.slots() * classes, 0);
    }

    LossTerms t;
    t.obj = obj_conf_loss(in, dfeature ? &dconf : nullptr);
    t.noobj = noobj_conf_loss(in, dfeature ? &dconf : nullptr);
    t.cls = class_loss(in, dfeature ? &dcls : nullptr);

    float shift = (head.scale_xy - 1) / 2;
    for (uint32_t a = 0; a < nb; a++) {
        uint32_t base = a * per;
        auto [aw, ah] = head.anchors[head.mask[a]];
        for (uint32_t i = 0; i < gh; i++)
            for (uint32_t j = 0; j < gw; j++) {
                size_t s = in.slot(a, i, j);
                if (dfeature) {
                    float c = in.pred_conf[s];
                    dfeature->at(base + 4, i, j) = dconf[s] * c * (1 - c);
                    for (uint32_t k = 0; k < classes; k++) {
                        float p = in.pred_class[s * classes + k];
                        dfeature->at(base + 5 + k, i, j) =
                            dcls[s * classes + k] * p * (1 - p);
                    }
                }
                if (!in.obj_mask[s]) continue;

                float sx = static_cast<float>(sigmoid(feature.at(base + 0, i, j)));
                float sy = static_cast<float>(sigmoid(feature.at(base + 1, i, j)));
                Box pred;
                pred.cx = (sx * head.scale_xy - shift + j) / gw;
                pred.cy = (sy * head.scale_xy - shift + i) / gh;
                pred.w = aw * std::exp(feature.at(base + 2, i, j)) / net_w;
                pred.h = ah * std::exp(feature.at(base + 3, i, j)) / net_h;

                BoxGrad bg;
                const GroundTruth& gt = gts[in.target_gt[s]];
                CiouTerms ct = ciou_loss(pred, gt.box, dfeature ? &bg : nullptr);
                t.ciou += ct.loss;
                if (dfeature) {
                    dfeature->at(base + 0, i, j) = bg.dcx * head.scale_xy * sx * (1 - sx) / gw;
                    dfeature->at(base + 1, i, j) = bg.dcy * head.scale_xy * sy * (1 - sy) / gh;
                    dfeature->at(base + 2, i, j) = bg.dw * pred.w;  // dw/dtw = w
                    dfeature->at(base + 3, i, j) = bg.dh * pred.h;
                }
            }
    }
    return t;
}

LossTerms total_loss(const std::vector<std::vector<Tensor>>& head_features,
                     const std::vector<HeadRef>& heads,
                     const std::vector<std::vector<GroundTruth>>& truths,
                     const std::vector<float>& prunable_gammas, float lambda,
                     std::vector<std::vector<Tensor>>* dfeatures) {
    if (head_features.size() != truths.size())
        fail(ErrorKind::invalid, "batch size mismatch between features and truths");
    if (dfeatures) {
        dfeatures->clear();
        dfeatures->resize(head_features.size());
    }

    LossTerms t;
    for (size_t n = 0; n < head_features.size(); n++) {
        if (head_features[n].size() != heads.size())
            fail(ErrorKind::invalid, "head count mismatch");
        if (dfeatures) (*dfeatures)[n].resize(heads.size());
        for (size_t h = 0; h < heads.size(); h++) {
            Tensor* df = dfeatures ? &(*dfeatures)[n][h] : nullptr;
            LossTerms ht =
                head_loss(head_features[n][h], *heads[h].spec, heads[h].stride, truths[n], df);
            t.ciou += ht.ciou;
            t.obj += ht.obj;
            t.noobj += ht.noobj;
            t.cls += ht.cls;
        }
    }
    t.sparsity = l1_penalty(prunable_gammas, lambda);
    return t;
}

double l1_penalty(const std::vector<float>& gammas, float lambda) {
    if (lambda < 0) fail(ErrorKind::invalid, "negative sparsity coefficient");
    double sum = 0;
    for (float g : gammas) sum += std::fabs(g);
    return lambda * sum;
}

void add_l1_subgradient(const std::vector<float>& gammas, float lambda,
                        std::vector<float>& dgamma) {
    if (lambda < 0) fail(ErrorKind::invalid, "negative sparsity coefficient");
    if (gammas.size() != dgamma.size())
        fail(ErrorKind::invalid, "gamma/gradient size mismatch");
    for (size_t i = 0; i < gammas.size(); i++) {
        if (gammas[i] > 0)
            dgamma[i] += lambda;
        else if (gammas[i] < 0)
            dgamma[i] -= lambda;
    }
}

}  // namespace slimdet
