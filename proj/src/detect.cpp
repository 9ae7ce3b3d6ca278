#include "detect.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "data.hpp"
#include "error.hpp"
#include "network.hpp"
#include "nnops.hpp"

namespace slimdet {

float iou(const Box& a, const Box& b) {
    float ix = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
    float iy = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
    if (ix <= 0 || iy <= 0) return 0;
    float inter = ix * iy;
    float uni = a.area() + b.area() - inter;
    if (uni <= 0) return 0;
    return inter / uni;
}

std::vector<Detection> decode_yolo_head(const Tensor& feature,
                                        const std::vector<std::pair<float, float>>& anchors,
                                        const std::vector<uint32_t>& mask, uint32_t stride,
                                        float scale_xy, uint32_t classes) {
    uint32_t per_anchor = classes + 5;
    uint32_t want = per_anchor * static_cast<uint32_t>(mask.size());
    if (feature.c() != want)
        fail(ErrorKind::invalid, "head expects " + std::to_string(want) + " channels, got " +
                                     std::to_string(feature.c()));
    for (uint32_t m : mask)
        if (m >= anchors.size())
            fail(ErrorKind::invalid, "mask entry " + std::to_string(m) + " out of range");

    uint32_t gh = feature.h(), gw = feature.w();
    float net_w = static_cast<float>(gw * stride);
    float net_h = static_cast<float>(gh * stride);
    float shift = (scale_xy - 1) / 2;

    std::vector<Detection> out;
    out.reserve(static_cast<size_t>(gh) * gw * mask.size());
    for (size_t a = 0; a < mask.size(); a++) {
        uint32_t base = static_cast<uint32_t>(a) * per_anchor;
        auto [aw, ah] = anchors[mask[a]];
        for (uint32_t i = 0; i < gh; i++) {
            for (uint32_t j = 0; j < gw; j++) {
                Detection d;
                d.box.cx = (activate_one(feature.at(base + 0, i, j), Activation::sigmoid) *
                                scale_xy -
                            shift + j) /
                           gw;
                d.box.cy = (activate_one(feature.at(base + 1, i, j), Activation::sigmoid) *
                                scale_xy -
                            shift + i) /
                           gh;
                d.box.w = aw * std::exp(feature.at(base + 2, i, j)) / net_w;
                d.box.h = ah * std::exp(feature.at(base + 3, i, j)) / net_h;
                float obj = activate_one(feature.at(base + 4, i, j), Activation::sigmoid);
                float best = -1;
                for (uint32_t k = 0; k < classes; k++) {
                    float s = activate_one(feature.at(base + 5 + k, i, j), Activation::sigmoid);
                    if (s > best) {
                        best = s;
                        d.class_id = static_cast<int>(k);
                    }
                }
                d.confidence = obj * best;
                out.push_back(d);
            }
        }
    }
    return out;
}

std::vector<Detection> nms(const std::vector<Detection>& dets, float conf_thresh,
                           float iou_thresh) {
    std::vector<const Detection*> order;
    order.reserve(dets.size());
    for (const Detection& d : dets)
        if (d.confidence >= conf_thresh) order.push_back(&d);
    // stable: equal confidences keep insertion order
    std::stable_sort(order.begin(), order.end(),
                     [](const Detection* a, const Detection* b) {
                         return a->confidence > b->confidence;
                     });

    std::vector<Detection> kept;
    for (const Detection* d : order) {
        bool dropped = false;
        for (const Detection& k : kept) {
            if (k.class_id == d->class_id && iou(k.box, d->box) > iou_thresh) {
                dropped = true;
                break;
            }
        }
        if (!dropped) kept.push_back(*d);
    }
    return kept;
}

static void put_field(std::string& out, float v) {
    char buf[32];
    snprintf(buf, sizeof buf, "%.9g", v);
    out += ' ';
    out += buf;
}

std::string format_detections(const std::vector<Detection>& dets) {
    std::string out;
    for (const Detection& d : dets) {
        out += std::to_string(d.image_id);
        out += ' ';
        out += std::to_string(d.class_id);
        put_field(out, d.confidence);
        put_field(out, d.box.cx);
        put_field(out, d.box.cy);
        put_field(out, d.box.w);
        put_field(out, d.box.h);
        out += '\n';
    }
    return out;
}

std::vector<Detection> parse_detections(const std::string& text) {
    std::vector<Detection> out;
    std::istringstream in(text);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        lineno++;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream row(line);
        Detection d;
        if (!(row >> d.image_id >> d.class_id >> d.confidence >> d.box.cx >> d.box.cy >>
              d.box.w >> d.box.h))
            fail(ErrorKind::parse, "detection record line " + std::to_string(lineno) +
                                       ": expected 7 fields");
        out.push_back(d);
    }
    return out;
}

std::vector<Detection> detect_image(const Network& net, const Tensor& image, float conf_thresh,
                                    float nms_iou) {
    const NetworkDef& def = net.def();
    std::vector<int> heads = net.head_layers();
    if (heads.empty()) fail(ErrorKind::invalid, "network has no yolo heads");

    Sample frame;
    frame.image = image;
    LetterboxMap map;
    Sample fitted = letterbox(frame, def.input_width, def.input_height, &map);
    ForwardTrace trace = net.forward(fitted.image, false);

    std::vector<Detection> all;
    for (int idx : heads) {
        const LayerSpec& spec = def.layers[idx];
        uint32_t stride = def.input_width / trace.out[idx].w();
        std::vector<Detection> part = decode_yolo_head(trace.out[idx], spec.anchors, spec.mask,
                                                       stride, spec.scale_xy, spec.classes);
        all.insert(all.end(), part.begin(), part.end());
    }
    std::vector<Detection> kept = nms(all, conf_thresh, nms_iou);
    for (Detection& d : kept) d.box = map.to_source(d.box);
    return kept;
}

}  // namespace slimdet
