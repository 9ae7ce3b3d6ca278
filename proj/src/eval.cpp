#include "eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "data.hpp"
#include "error.hpp"
#include "parallel.hpp"

namespace slimdet {

std::vector<uint8_t> match_detections(const std::vector<Detection>& dets,
                                      const std::vector<GroundTruth>& gts, float iou_thresh) {
    for (size_t i = 1; i < dets.size(); ++i)
        if (dets[i].confidence > dets[i - 1].confidence)
            fail(ErrorKind::invalid, "detections not sorted by confidence");

    std::vector<uint8_t> flags(dets.size(), 0);
    std::vector<bool> taken(gts.size(), false);
    for (size_t i = 0; i < dets.size(); ++i) {
        int best = -1;
        float best_iou = 0.0f;
        for (size_t j = 0; j < gts.size(); ++j) {
            if (taken[j] || gts[j].class_id != dets[i].class_id) continue;
            float v = iou(dets[i].box, gts[j].box);
            if (v >= iou_thresh && v > best_iou) {
                best = static_cast<int>(j);
                best_iou = v;
            }
        }
        if (best >= 0) {
            taken[best] = true;
            flags[i] = 1;
        }
    }
    return flags;
}

double average_precision(const std::vector<uint8_t>& flags, uint32_t n_gt, ApInterp interp) {
    if (n_gt == 0) fail(ErrorKind::invalid, "no ground truth: AP undefined");
    if (flags.empty()) return 0.0;

    size_t n = flags.size();
    std::vector<double> precision(n), recall(n);
    double tp = 0, fp = 0;
    for (size_t i = 0; i < n; ++i) {
        (flags[i] ? tp : fp) += 1.0;
        precision[i] = tp / (tp + fp);
        recall[i] = tp / n_gt;
    }
    // Monotone envelope from the right.
    for (size_t i = n - 1; i-- > 0;) precision[i] = std::max(precision[i], precision[i + 1]);

    if (interp == ApInterp::voc11) {
        double sum = 0;
        for (int k = 0; k <= 10; ++k) {
            double r = k / 10.0;
            double best = 0;
            for (size_t i = 0; i < n; ++i)
                if (recall[i] >= r - 1e-12) {
                    best = precision[i];
                    break;
                }
            sum += best;
        }
        return sum / 11.0;
    }

    double ap = 0, prev = 0;
    for (size_t i = 0; i < n; ++i) {
        if (recall[i] > prev) ap += (recall[i] - prev) * precision[i];
        prev = recall[i];
    }
    return ap;
}

EvalResult map50(const std::vector<std::vector<Detection>>& dets_by_image,
                 const std::vector<std::vector<GroundTruth>>& gts_by_image,
                 uint32_t num_classes, float iou_thresh, ApInterp interp) {
    if (dets_by_image.size() != gts_by_image.size())
        fail(ErrorKind::invalid, "detection/ground-truth image counts differ");
    if (num_classes == 0) fail(ErrorKind::invalid, "need at least one class");

    struct Scored {
        float confidence;
        size_t image, order;
        uint8_t flag;
    };
    std::vector<std::vector<Scored>> per_class(num_classes);
    std::vector<uint32_t> gt_count(num_classes, 0);

    for (size_t img = 0; img < dets_by_image.size(); ++img) {
        std::vector<Detection> dets = dets_by_image[img];
        std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
            return a.confidence > b.confidence;
        });
        std::vector<uint8_t> flags = match_detections(dets, gts_by_image[img], iou_thresh);
        for (size_t i = 0; i < dets.size(); ++i) {
            int c = dets[i].class_id;
            if (c < 0 || c >= static_cast<int>(num_classes))
                fail(ErrorKind::invalid, "detection class id out of range");
            per_class[c].push_back({dets[i].confidence, img, i, flags[i]});
        }
        for (const GroundTruth& gt : gts_by_image[img]) {
            if (gt.class_id < 0 || gt.class_id >= static_cast<int>(num_classes))
                fail(ErrorKind::invalid, "ground truth class id out of range");
            ++gt_count[gt.class_id];
        }
    }

    EvalResult result;
    result.iou_thresh = iou_thresh;
    double ap_sum = 0;
    uint32_t evaluated = 0;
    for (uint32_t c = 0; c < num_classes; ++c) {
        ClassEval ce;
        ce.class_id = static_cast<int>(c);
        ce.n_gt = gt_count[c];

        std::vector<Scored>& scored = per_class[c];
        std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
            if (a.confidence != b.confidence) return a.confidence > b.confidence;
            if (a.image != b.image) return a.image < b.image;
            return a.order < b.order;
        });
        std::vector<uint8_t> flags;
        flags.reserve(scored.size());
        for (const Scored& s : scored) {
            flags.push_back(s.flag);
            (s.flag ? ce.tp : ce.fp) += 1;
        }

        if (gt_count[c] == 0) {
            ce.evaluated = false;
            ce.ap = 0;
            std::string name = c < std::size(kClassNames) ? kClassNames[c]
                                                          : "class " + std::to_string(c);
            result.warnings.push_back("no ground truth for " + name + "; excluded from mAP");
        } else {
            ce.ap = average_precision(flags, gt_count[c], interp);
            ce.fn = gt_count[c] - ce.tp;
            ap_sum += ce.ap;
            ++evaluated;
        }
        result.classes.push_back(ce);
    }
    result.map = evaluated ? ap_sum / evaluated : 0.0;
    if (evaluated == 0) result.warnings.push_back("no class had ground truth; mAP reported as 0");
    return result;
}

std::string format_eval_report(const EvalResult& r) {
    std::string out;
    char line[160];
    std::snprintf(line, sizeof(line), "%-10s %8s %6s %6s %6s %6s\n", "class", "AP", "TP", "FP",
                  "FN", "GT");
    out += line;
    for (const ClassEval& ce : r.classes) {
        std::string name = ce.class_id >= 0 && ce.class_id < static_cast<int>(std::size(kClassNames))
                               ? kClassNames[ce.class_id]
                               : "class " + std::to_string(ce.class_id);
        if (ce.evaluated)
            std::snprintf(line, sizeof(line), "%-10s %8.4f %6u %6u %6u %6u\n", name.c_str(), ce.ap,
                          ce.tp, ce.fp, ce.fn, ce.n_gt);
        else
            std::snprintf(line, sizeof(line), "%-10s %8s %6u %6u %6s %6u\n", name.c_str(), "-",
                          ce.tp, ce.fp, "-", ce.n_gt);
        out += line;
    }
    std::snprintf(line, sizeof(line), "mAP@%.2f    %8.4f  (conf >= %.2f)\n", r.iou_thresh, r.map,
                  r.conf_thresh);
    out += line;
    for (const std::string& w : r.warnings) out += "warning: " + w + "\n";
    return out;
}

EvalResult evaluate_model(const Network& model, const std::vector<Sample>& data, float iou_thresh,
                          float conf_thresh, float nms_iou, ApInterp interp) {
    if (data.empty()) fail(ErrorKind::invalid, "empty dataset");
    std::vector<std::vector<Detection>> dets(data.size());
    std::vector<std::vector<GroundTruth>> gts(data.size());
    parallel_for(data.size(), [&](size_t i) {
        dets[i] = detect_image(model, data[i].image, conf_thresh, nms_iou);
        for (Detection& d : dets[i]) d.image_id = static_cast<int>(i);
        gts[i] = data[i].gts;
    });
    EvalResult result = map50(dets, gts, static_cast<uint32_t>(std::size(kClassNames)),
                              iou_thresh, interp);
    result.conf_thresh = conf_thresh;
    return result;
}

FpsReport benchmark_fps(const Network& model, const std::vector<Tensor>& images, uint32_t warmup,
                        float conf_thresh, float nms_iou) {
    if (images.size() < static_cast<size_t>(warmup) + 10)
        fail(ErrorKind::invalid, "benchmark needs at least warmup + 10 images");

    if (model.head_layers().empty()) fail(ErrorKind::invalid, "network has no yolo heads");

    FpsReport report;
    report.warmup = warmup;

    for (size_t i = 0; i < images.size(); ++i) {
        auto start = std::chrono::steady_clock::now();
        uint32_t count =
            static_cast<uint32_t>(detect_image(model, images[i], conf_thresh, nms_iou).size());
        auto stop = std::chrono::steady_clock::now();
        if (i < warmup) continue;
        double ms = std::chrono::duration<double, std::milli>(stop - start).count();
        report.latency_ms.push_back(ms);
        report.det_counts.push_back(count);
    }

    report.images = static_cast<uint32_t>(report.latency_ms.size());
    for (double ms : report.latency_ms) report.seconds += ms / 1000.0;
    report.fps = report.images / report.seconds;

    std::vector<double> sorted = report.latency_ms;
    std::sort(sorted.begin(), sorted.end());
    report.p50_ms = sorted[sorted.size() / 2];
    report.p95_ms = sorted[static_cast<size_t>(0.95 * (sorted.size() - 1))];
    return report;
}

std::string format_fps_report(const FpsReport& r) {
    char line[256];
    std::snprintf(line, sizeof(line),
                  "images %u (after %u warmup)  time %.3fs  fps %.2f  p50 %.2fms  p95 %.2fms\n",
                  r.images, r.warmup, r.seconds, r.fps, r.p50_ms, r.p95_ms);
    std::string out = line;
    uint64_t dets = 0;
    for (uint32_t c : r.det_counts) dets += c;
    std::snprintf(line, sizeof(line), "detections per image: mean %.2f\n",
                  r.images ? static_cast<double>(dets) / r.images : 0.0);
    out += line;
    return out;
}

}  // namespace slimdet
