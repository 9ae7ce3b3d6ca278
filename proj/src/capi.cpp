#include "slimdet.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "data.hpp"
#include "detect.hpp"
#include "error.hpp"
#include "eval.hpp"
#include "graph.hpp"
#include "image.hpp"
#include "netcfg.hpp"
#include "network.hpp"
#include "parallel.hpp"
#include "prune.hpp"
#include "rng.hpp"
#include "train.hpp"

using namespace slimdet;

struct sd_model {
    Network net;
};

struct sd_dataset {
    std::vector<Sample> samples;
};

struct sd_detections {
    std::vector<Detection> dets;
};

struct sd_eval {
    EvalResult result;
};

namespace {

thread_local std::string g_error;

sd_status status_of(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::parse: return SD_ERR_PARSE;
        case ErrorKind::weights: return SD_ERR_WEIGHTS;
        case ErrorKind::io: return SD_ERR_IO;
        case ErrorKind::invalid: return SD_ERR_INVALID;
        case ErrorKind::runtime: return SD_ERR_RUNTIME;
    }
    return SD_ERR_RUNTIME;
}

sd_status fail_invalid(const std::string& message) {
    g_error = message;
    return SD_ERR_INVALID;
}

char* copy_text(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

// Runs fn inside the exception-to-status boundary.
template <typename Fn>
sd_status guarded(Fn&& fn) {
    try {
        g_error.clear();
        fn();
        return SD_OK;
    } catch (const Error& e) {
        g_error = e.what();
        return status_of(e.kind());
    } catch (const std::exception& e) {
        g_error = e.what();
        return SD_ERR_RUNTIME;
    }
}

TrainConfig to_train_config(const sd_train_config& c) {
    TrainConfig cfg;
    cfg.epochs = c.epochs;
    cfg.base_lr = c.base_lr;
    cfg.lr_step_every = c.lr_step_every;
    cfg.lr_decay = c.lr_decay;
    cfg.momentum = c.momentum;
    cfg.batch = c.batch;
    cfg.seed = c.seed;
    cfg.mosaic = c.mosaic != 0;
    if (c.freeze < 0 || c.freeze > 2) fail(ErrorKind::invalid, "freeze must be 0, 1 or 2");
    cfg.freeze.mode = static_cast<FreezeMode>(c.freeze);
    cfg.sparsity.lambda = c.sparsity_lambda;
    return cfg;
}

AugmentConfig to_augment_config(const sd_augment_config& c) {
    AugmentConfig cfg;
    cfg.crop_prob = c.crop_prob;
    cfg.crop_max = c.crop_max;
    cfg.flip_prob = c.flip_prob;
    cfg.hsv_prob = c.hsv_prob;
    cfg.hue_max = c.hue_max;
    cfg.sat_max = c.sat_max;
    cfg.val_max = c.val_max;
    cfg.blur_prob = c.blur_prob;
    cfg.affine_prob = c.affine_prob;
    cfg.shift_max = c.shift_max;
    cfg.zoom_max = c.zoom_max;
    return cfg;
}

std::string layer_geometry(const LayerSpec& spec) {
    char buf[96];
    switch (spec.kind) {
        case LayerKind::convolutional:
            std::snprintf(buf, sizeof(buf), "%ux%u/%u f=%u", spec.size, spec.size, spec.stride,
                          spec.filters);
            return buf;
        case LayerKind::maxpool:
            std::snprintf(buf, sizeof(buf), "%ux%u/%u", spec.size, spec.size, spec.stride);
            return buf;
        case LayerKind::upsample:
            std::snprintf(buf, sizeof(buf), "x%u", spec.factor);
            return buf;
        case LayerKind::route: {
            std::string s;
            for (int idx : spec.route_layers) s += (s.empty() ? "" : ",") + std::to_string(idx);
            if (spec.route_groups > 1)
                s += " g" + std::to_string(spec.route_group_id) + "/" +
                     std::to_string(spec.route_groups);
            return s;
        }
        case LayerKind::shortcut:
            return "from " + std::to_string(spec.from);
        case LayerKind::yolo:
            std::snprintf(buf, sizeof(buf), "%zu anchors, %u classes", spec.mask.size(),
                          spec.classes);
            return buf;
    }
    return "";
}

}  // namespace

extern "C" {

const char* sd_version(void) { return "0.1.0"; }

const char* sd_last_error(void) { return g_error.c_str(); }

void sd_text_free(char* text) { std::free(text); }

void sd_set_threads(int n) { set_thread_count(n); }

int sd_threads(void) { return thread_count(); }

int sd_class_count(void) { return static_cast<int>(std::size(kClassNames)); }

const char* sd_class_name(int class_id) {
    if (class_id < 0 || class_id >= sd_class_count()) return nullptr;
    return kClassNames[class_id];
}

/* ---- models ---------------------------------------------------------- */

sd_status sd_model_load(const char* cfg_path, const char* weights_path, sd_model** out) {
    if (!cfg_path || !weights_path || !out) return fail_invalid("null argument");
    return guarded([&] { *out = new sd_model{Network::load(cfg_path, weights_path)}; });
}

sd_status sd_model_random(const char* cfg_path, uint64_t seed, sd_model** out) {
    if (!cfg_path || !out) return fail_invalid("null argument");
    return guarded([&] { *out = new sd_model{Network::random(parse_cfg_file(cfg_path), seed)}; });
}

void sd_model_free(sd_model* model) { delete model; }

sd_status sd_model_save(const sd_model* model, const char* cfg_path, const char* weights_path) {
    if (!model) return fail_invalid("null model");
    return guarded([&] {
        if (cfg_path) {
            std::ofstream out(cfg_path, std::ios::binary);
            if (!out) fail(ErrorKind::io, std::string("cannot write ") + cfg_path);
            out << serialize_cfg(model->net.def());
        }
        if (weights_path) save_weights_file(model->net.weights(), model->net.def(), weights_path);
    });
}

int64_t sd_model_layer_count(const sd_model* model) {
    return model ? static_cast<int64_t>(model->net.def().layers.size()) : -1;
}

uint64_t sd_model_param_count(const sd_model* model) {
    return model ? count_parameters(model->net.def()) : 0;
}

sd_status sd_model_input_size(const sd_model* model, uint32_t* width, uint32_t* height,
                              uint32_t* channels) {
    if (!model) return fail_invalid("null model");
    if (width) *width = model->net.def().input_width;
    if (height) *height = model->net.def().input_height;
    if (channels) *channels = model->net.def().input_channels;
    return SD_OK;
}

sd_status sd_model_summary(const sd_model* model, char** text) {
    if (!model || !text) return fail_invalid("null argument");
    return guarded([&] {
        const NetworkDef& def = model->net.def();
        const ShapeTable& shapes = model->net.shapes();
        std::vector<uint64_t> params = parameter_counts(def);
        std::string out = def.source_name + ": " + std::to_string(def.input_width) + "x" +
                          std::to_string(def.input_height) + "x" +
                          std::to_string(def.input_channels) + "\n";
        char line[160];
        std::snprintf(line, sizeof(line), "%4s %-14s %-24s %-14s %12s\n", "#", "layer", "geometry",
                      "output", "params");
        out += line;
        for (size_t i = 0; i < def.layers.size(); ++i) {
            char shape[48];
            std::snprintf(shape, sizeof(shape), "%ux%ux%u", shapes[i].c, shapes[i].h, shapes[i].w);
            std::snprintf(line, sizeof(line), "%4zu %-14s %-24s %-14s %12llu\n", i,
                          layer_kind_name(def.layers[i].kind), layer_geometry(def.layers[i]).c_str(),
                          shape, static_cast<unsigned long long>(params[i]));
            out += line;
        }
        std::snprintf(line, sizeof(line), "total parameters: %llu\n",
                      static_cast<unsigned long long>(count_parameters(def)));
        out += line;
        *text = copy_text(out);
    });
}

sd_status sd_validate(const char* cfg_path, const char* weights_path, char** warnings) {
    if (!cfg_path) return fail_invalid("null cfg path");
    return guarded([&] {
        std::vector<std::string> warn;
        NetworkDef def = parse_cfg_file(cfg_path, &warn);
        if (weights_path) load_weights_file(weights_path, def);
        if (warnings) {
            std::string joined;
            for (const std::string& w : warn) joined += w + "\n";
            *warnings = copy_text(joined);
        }
    });
}

/* ---- inference ------------------------------------------------------- */

sd_status sd_infer_file(const sd_model* model, const char* image_path, float conf_thresh,
                        float nms_iou, int image_id, sd_detections** out) {
    if (!model || !image_path || !out) return fail_invalid("null argument");
    return guarded([&] {
        Tensor image = read_image(image_path);
        std::vector<Detection> dets = detect_image(model->net, image, conf_thresh, nms_iou);
        for (Detection& d : dets) d.image_id = image_id;
        *out = new sd_detections{std::move(dets)};
    });
}

size_t sd_detections_count(const sd_detections* dets) { return dets ? dets->dets.size() : 0; }

sd_status sd_detections_get(const sd_detections* dets, size_t index, sd_detection* out) {
    if (!dets || !out) return fail_invalid("null argument");
    if (index >= dets->dets.size()) return fail_invalid("detection index out of range");
    const Detection& d = dets->dets[index];
    *out = {d.box.cx, d.box.cy, d.box.w, d.box.h, d.class_id, d.confidence};
    return SD_OK;
}

sd_status sd_detections_format(const sd_detections* dets, char** text) {
    if (!dets || !text) return fail_invalid("null argument");
    return guarded([&] { *text = copy_text(format_detections(dets->dets)); });
}

void sd_detections_free(sd_detections* dets) { delete dets; }

sd_status sd_annotate_file(const char* image_path, const sd_detections* dets,
                           const char* out_path) {
    if (!image_path || !dets || !out_path) return fail_invalid("null argument");
    return guarded([&] {
        Tensor image = read_image(image_path);
        for (const Detection& d : dets->dets) draw_box(image, d.box, d.class_id);
        write_png(image, out_path);
    });
}

/* ---- pruning --------------------------------------------------------- */

sd_status sd_model_prune(const sd_model* model, float ratio, sd_model** out, char** report) {
    if (!model || !out) return fail_invalid("null argument");
    return guarded([&] {
        const NetworkDef& def = model->net.def();
        const WeightStore& store = model->net.weights();
        PruneAnalysis analysis = analyze_pruning(def);
        PruneMask mask = select_mask(def, analysis, collect_gammas(def, store, analysis), ratio);
        PrunedModel pruned = apply_mask(def, store, mask);
        if (report)
            *report = copy_text(
                format_prune_report(prune_report(def, pruned.def, mask, store)));
        *out = new sd_model{Network(std::move(pruned.def), std::move(pruned.store))};
    });
}

/* ---- datasets -------------------------------------------------------- */

sd_status sd_dataset_load(const char* list_path, const char* label_dir, sd_dataset** out) {
    if (!list_path || !out) return fail_invalid("null argument");
    return guarded(
        [&] { *out = new sd_dataset{load_dataset(list_path, label_dir ? label_dir : "")}; });
}

sd_status sd_dataset_synthetic(uint32_t count, uint32_t width, uint32_t height,
                               uint32_t min_objects, uint32_t max_objects, uint64_t seed,
                               sd_dataset** out) {
    if (!out) return fail_invalid("null argument");
    return guarded([&] {
        ShapesConfig cfg;
        cfg.count = count;
        cfg.width = width;
        cfg.height = height;
        cfg.min_objects = min_objects;
        cfg.max_objects = max_objects;
        *out = new sd_dataset{synthetic_shapes(cfg, seed)};
    });
}

size_t sd_dataset_count(const sd_dataset* dataset) {
    return dataset ? dataset->samples.size() : 0;
}

sd_status sd_dataset_write(const sd_dataset* dataset, const char* dir, char** list_path) {
    if (!dataset || !dir) return fail_invalid("null argument");
    return guarded([&] {
        std::string list = write_dataset(dataset->samples, dir);
        if (list_path) *list_path = copy_text(list);
    });
}

sd_augment_config sd_augment_config_default(void) {
    AugmentConfig d;
    return {d.crop_prob, d.crop_max, d.flip_prob,   d.hsv_prob,  d.hue_max, d.sat_max,
            d.val_max,   d.blur_prob, d.affine_prob, d.shift_max, d.zoom_max};
}

sd_status sd_dataset_augment(const sd_dataset* dataset, const sd_augment_config* config,
                             uint64_t seed, sd_dataset** out) {
    if (!dataset || !config || !out) return fail_invalid("null argument");
    return guarded([&] {
        AugmentConfig cfg = to_augment_config(*config);
        Rng base(seed);
        std::vector<Sample> result;
        result.reserve(dataset->samples.size());
        for (size_t i = 0; i < dataset->samples.size(); ++i)
            result.push_back(basic_transforms(dataset->samples[i], cfg, base.fork(i).next_u64()));
        *out = new sd_dataset{std::move(result)};
    });
}

void sd_dataset_free(sd_dataset* dataset) { delete dataset; }

/* ---- training -------------------------------------------------------- */

sd_train_config sd_train_config_default(void) {
    TrainConfig d;
    return {d.epochs,  d.base_lr, d.lr_step_every,    d.lr_decay, d.momentum,
            d.batch,   d.seed,    d.mosaic ? 1 : 0,   0,          d.sparsity.lambda};
}

sd_status sd_train_toy(sd_model* model, const sd_dataset* dataset,
                       const sd_train_config* config, char** history) {
    if (!model || !dataset || !config) return fail_invalid("null argument");
    return guarded([&] {
        TrainHistory h = train_toy(model->net, to_train_config(*config), dataset->samples);
        if (history) *history = copy_text(format_history(h));
    });
}

sd_status sd_fine_tune(sd_model* model, const sd_dataset* dataset,
                       const sd_train_config* config, char** history) {
    if (!model || !dataset || !config) return fail_invalid("null argument");
    return guarded([&] {
        TrainHistory h = fine_tune(model->net, to_train_config(*config), dataset->samples);
        if (history) *history = copy_text(format_history(h));
    });
}

/* ---- evaluation ------------------------------------------------------ */

sd_status sd_evaluate(const sd_model* model, const sd_dataset* dataset, float iou_thresh,
                      float conf_thresh, float nms_iou, int use_voc11, sd_eval** out) {
    if (!model || !dataset || !out) return fail_invalid("null argument");
    return guarded([&] {
        ApInterp interp = use_voc11 ? ApInterp::voc11 : ApInterp::all_points;
        *out = new sd_eval{evaluate_model(model->net, dataset->samples, iou_thresh, conf_thresh,
                                          nms_iou, interp)};
    });
}

double sd_eval_map(const sd_eval* eval) { return eval ? eval->result.map : -1.0; }

sd_status sd_eval_class_ap(const sd_eval* eval, int class_id, double* ap, int* evaluated) {
    if (!eval) return fail_invalid("null eval");
    if (class_id < 0 || class_id >= static_cast<int>(eval->result.classes.size()))
        return fail_invalid("class id out of range");
    const ClassEval& ce = eval->result.classes[class_id];
    if (ap) *ap = ce.ap;
    if (evaluated) *evaluated = ce.evaluated ? 1 : 0;
    return SD_OK;
}

sd_status sd_eval_report(const sd_eval* eval, char** text) {
    if (!eval || !text) return fail_invalid("null argument");
    return guarded([&] { *text = copy_text(format_eval_report(eval->result)); });
}

void sd_eval_free(sd_eval* eval) { delete eval; }

sd_status sd_benchmark(const sd_model* model, const sd_dataset* dataset, uint32_t count,
                       uint32_t warmup, sd_fps* out, char** report) {
    if (!model || !dataset || !out) return fail_invalid("null argument");
    return guarded([&] {
        if (dataset->samples.empty()) fail(ErrorKind::invalid, "empty dataset");
        size_t n = count == 0 ? dataset->samples.size() : count;
        std::vector<Tensor> images;
        images.reserve(n);
        for (size_t i = 0; i < n; ++i)
            images.push_back(dataset->samples[i % dataset->samples.size()].image);
        FpsReport r = benchmark_fps(model->net, images, warmup);
        *out = {r.images, r.warmup, r.seconds, r.fps, r.p50_ms, r.p95_ms};
        if (report) *report = copy_text(format_fps_report(r));
    });
}

}  // extern "C"
