#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace slimdet {

// Class ids are fixed across the toolkit.
inline constexpr int kClassPlastic = 0;
inline constexpr int kClassBio = 1;
inline constexpr int kClassRov = 2;
inline constexpr const char* kClassNames[] = {"plastic", "bio", "rov"};

// Normalized center-format box; corner form derived on demand.
struct Box {
    float cx = 0, cy = 0, w = 0, h = 0;

    float x1() const { return cx - w / 2; }
    float y1() const { return cy - h / 2; }
    float x2() const { return cx + w / 2; }
    float y2() const { return cy + h / 2; }

    static Box from_corners(float x1, float y1, float x2, float y2) {
        return {(x1 + x2) / 2, (y1 + y2) / 2, x2 - x1, y2 - y1};
    }

    float area() const { return w * h; }
    bool operator==(const Box&) const = default;
};

struct Detection {
    Box box;
    int class_id = 0;
    float confidence = 0;  // objectness x class score
    int image_id = -1;

    bool operator==(const Detection&) const = default;
};

float iou(const Box& a, const Box& b);

// Raw (pre-NMS) detections from one head. Feature is (anchor*(5+classes), H, W);
// anchors are the full per-network list in input pixels, mask selects this
// head's entries; stride maps grid cells to input pixels.
std::vector<Detection> decode_yolo_head(const Tensor& feature,
                                        const std::vector<std::pair<float, float>>& anchors,
                                        const std::vector<uint32_t>& mask, uint32_t stride,
                                        float scale_xy, uint32_t classes);

// Per-class greedy suppression. Ties sort by confidence then insertion order.
std::vector<Detection> nms(const std::vector<Detection>& dets, float conf_thresh,
                           float iou_thresh);

inline constexpr float kDefaultConfThresh = 0.25f;
inline constexpr float kDefaultNmsIou = 0.45f;

class Network;

// Full single-image pipeline: letterbox to the net geometry, forward, decode
// every head, suppress, then map boxes back to source-image coordinates.
std::vector<Detection> detect_image(const Network& net, const Tensor& image,
                                    float conf_thresh = kDefaultConfThresh,
                                    float nms_iou = kDefaultNmsIou);

// Line records: image_id class_id confidence cx cy w h
std::string format_detections(const std::vector<Detection>& dets);
std::vector<Detection> parse_detections(const std::string& text);

}  // namespace slimdet
