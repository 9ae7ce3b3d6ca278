#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "data.hpp"
#include "detect.hpp"
#include "losses.hpp"
#include "network.hpp"

namespace slimdet {

// Per-detection TP(1)/FP(0) flags for one image under greedy matching: each
// detection takes the highest-IoU unmatched same-class GT at or above the
// threshold. Detections must arrive sorted by confidence, descending.
std::vector<uint8_t> match_detections(const std::vector<Detection>& dets,
                                      const std::vector<GroundTruth>& gts,
                                      float iou_thresh = 0.5f);

enum class ApInterp { all_points, voc11 };

// Area under the monotone (max-interpolated) precision envelope over the
// recall points of a confidence-ordered flag sequence. voc11 averages the
// envelope at the eleven recalls {0, 0.1, ..., 1} instead.
double average_precision(const std::vector<uint8_t>& flags, uint32_t n_gt,
                         ApInterp interp = ApInterp::all_points);

struct ClassEval {
    int class_id = 0;
    double ap = 0;
    uint32_t tp = 0, fp = 0, fn = 0;
    uint32_t n_gt = 0;
    bool evaluated = true;  // false: no ground truth, excluded from the mean
};

struct EvalResult {
    std::vector<ClassEval> classes;
    double map = 0;  // mean AP over evaluated classes
    float iou_thresh = 0.5f;
    float conf_thresh = 0.0f;  // recorded for the report; filtering is upstream
    std::vector<std::string> warnings;
};

// Pools detections per class across images (global confidence order) and
// averages the per-class APs. Zero-GT classes are skipped with a warning.
EvalResult map50(const std::vector<std::vector<Detection>>& dets_by_image,
                 const std::vector<std::vector<GroundTruth>>& gts_by_image,
                 uint32_t num_classes, float iou_thresh = 0.5f,
                 ApInterp interp = ApInterp::all_points);

std::string format_eval_report(const EvalResult& result);

// Runs the detector on every sample (parallel over images, merged by index)
// and scores the pooled detections against the sample ground truth.
EvalResult evaluate_model(const Network& model, const std::vector<Sample>& data,
                          float iou_thresh = 0.5f, float conf_thresh = kDefaultConfThresh,
                          float nms_iou = kDefaultNmsIou, ApInterp interp = ApInterp::all_points);

struct FpsReport {
    uint32_t images = 0;  // timed images
    uint32_t warmup = 0;
    double seconds = 0;  // summed timed latency
    double fps = 0;
    double p50_ms = 0, p95_ms = 0;  // nearest-rank percentiles
    std::vector<double> latency_ms;      // one entry per timed image
    std::vector<uint32_t> det_counts;    // post-NMS detections per timed image
};

// Times the full pipeline (letterbox, forward, decode, NMS) per image on one
// worker, strictly serially. The first `warmup` images prime caches and are
// excluded from every statistic.
FpsReport benchmark_fps(const Network& model, const std::vector<Tensor>& images,
                        uint32_t warmup = 10, float conf_thresh = kDefaultConfThresh,
                        float nms_iou = kDefaultNmsIou);

std::string format_fps_report(const FpsReport& report);

}  // namespace slimdet
