#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "detect.hpp"
#include "netcfg.hpp"
#include "tensor.hpp"

namespace slimdet {

struct GroundTruth {
    Box box;  // normalized
    int class_id = 0;

    bool operator==(const GroundTruth&) const = default;
};

// Complete-IoU decomposition: loss = 1 - iou + rho2/c2 + alpha*v.
struct CiouTerms {
    float iou = 0;    // overlap / union
    float rho2 = 0;   // squared center distance
    float c2 = 0;     // squared diagonal of the smallest enclosing box
    float v = 0;      // aspect consistency
    float alpha = 0;  // v / ((1 - iou) + v), 0 when v is 0
    float loss = 0;
};

struct BoxGrad {
    float dcx = 0, dcy = 0, dw = 0, dh = 0;
};

// gt must have positive area. alpha is held constant in the gradient.
CiouTerms ciou_loss(const Box& pred, const Box& gt, BoxGrad* grad = nullptr);

// IoU of two extents as if co-centered; used for anchor matching.
float shape_iou(float w1, float h1, float w2, float h2);

// Grid of prediction slots for the confidence/class losses. Slots are
// anchor-major: slot(a,i,j) = (a*grid_h + i)*grid_w + j. pred_class and
// target_class hold `classes` values per slot.
struct LossInputs {
    uint32_t grid_h = 0, grid_w = 0;
    uint32_t boxes_per_cell = 0;
    uint32_t classes = 0;
    std::vector<uint8_t> obj_mask, noobj_mask;
    std::vector<float> pred_conf, target_conf;
    std::vector<float> pred_class, target_class;
    std::vector<int32_t> target_gt;  // gt index per obj slot, else -1

    size_t slots() const {
        return static_cast<size_t>(boxes_per_cell) * grid_h * grid_w;
    }
    size_t slot(uint32_t a, uint32_t i, uint32_t j) const {
        return (static_cast<size_t>(a) * grid_h + i) * grid_w + j;
    }
};

// Binary cross-entropy over masked slots, predictions clamped to
// [1e-7, 1-1e-7]. Gradients (w.r.t. the unclamped predictions) accumulate
// into the optional buffers, which must be pre-sized.
double obj_conf_loss(const LossInputs& in, std::vector<float>* dpred_conf = nullptr);
double noobj_conf_loss(const LossInputs& in, std::vector<float>* dpred_conf = nullptr);
double class_loss(const LossInputs& in, std::vector<float>* dpred_class = nullptr);

// Builds masks and targets for one head: each gt lands in the cell holding
// its center, at the in-mask anchor with best shape IoU (occupied slots fall
// through to the next-best anchor). Anchors whose shape IoU against any gt
// exceeds ignore_iou drop out of the noobj mask entirely. Prediction buffers
// are sized but left zero.
LossInputs assign_targets(const std::vector<GroundTruth>& gts,
                          const std::vector<std::pair<float, float>>& anchors,
                          const std::vector<uint32_t>& mask, uint32_t grid_h, uint32_t grid_w,
                          uint32_t net_w, uint32_t net_h, uint32_t classes,
                          float ignore_iou = 0.7f);

struct LossTerms {
    double ciou = 0, obj = 0, noobj = 0, cls = 0, sparsity = 0;
    double total() const { return ciou + obj + noobj + cls + sparsity; }
};

// Loss of one raw head tensor against ground truth; dfeature (optional)
// receives d total / d logits, the seed for Network::backward.
LossTerms head_loss(const Tensor& feature, const LayerSpec& head, uint32_t stride,
                    const std::vector<GroundTruth>& gts, Tensor* dfeature = nullptr);

struct HeadRef {
    const LayerSpec* spec = nullptr;
    uint32_t stride = 0;
};

// Batch aggregate: head_features[image][head] against truths[image], plus
// the L1 sparsity term over prunable-layer gammas when lambda > 0.
LossTerms total_loss(const std::vector<std::vector<Tensor>>& head_features,
                     const std::vector<HeadRef>& heads,
                     const std::vector<std::vector<GroundTruth>>& truths,
                     const std::vector<float>& prunable_gammas = {}, float lambda = 0,
                     std::vector<std::vector<Tensor>>* dfeatures = nullptr);

struct SparsityConfig {
    float lambda = 1e-4f;  // L1 coefficient on BN gamma, prunable convs only
};

double l1_penalty(const std::vector<float>& gammas, float lambda);
// dgamma += lambda * sign(gamma), subgradient 0 at gamma = 0.
void add_l1_subgradient(const std::vector<float>& gammas, float lambda,
                        std::vector<float>& dgamma);

}  // namespace slimdet
