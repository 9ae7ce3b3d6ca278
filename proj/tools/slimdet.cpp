// Command-line front end. Everything goes through the C API in slimdet.h;
// machine output goes to stdout, logs and errors to stderr.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "slimdet.h"

namespace fs = std::filesystem;

namespace {

bool g_verbose = false;

void note(const std::string& s) {
    if (g_verbose) std::cerr << s << "\n";
}

// Failing C-API call -> message on stderr, status as the process exit code
// (2 parse, 3 weights, 4 I/O, 5 bad arguments, 6 runtime).
int die(sd_status st) {
    std::cerr << "error: " << sd_last_error() << "\n";
    return static_cast<int>(st);
}

int usage_error(const std::string& message) {
    std::cerr << "error: " << message << "\n";
    return static_cast<int>(SD_ERR_INVALID);
}

struct Model {
    sd_model* h = nullptr;
    ~Model() { sd_model_free(h); }
};

struct Dataset {
    sd_dataset* h = nullptr;
    ~Dataset() { sd_dataset_free(h); }
};

struct Dets {
    sd_detections* h = nullptr;
    ~Dets() { sd_detections_free(h); }
};

struct Eval {
    sd_eval* h = nullptr;
    ~Eval() { sd_eval_free(h); }
};

struct Text {
    char* s = nullptr;
    ~Text() { sd_text_free(s); }
    std::string str() const { return s ? s : ""; }
};

// ---- shared option groups ------------------------------------------------

struct ModelOpts {
    std::string cfg, weights;
};

void add_model_opts(CLI::App* sub, ModelOpts& m, bool weights_required) {
    sub->add_option("--cfg", m.cfg, "network description file")->required();
    auto* w = sub->add_option("--weights", m.weights, "weights file");
    if (weights_required) w->required();
}

// Loads weights when given, otherwise falls back to a seeded random init.
sd_status open_model(const ModelOpts& m, uint64_t seed, Model& out) {
    if (!m.weights.empty()) return sd_model_load(m.cfg.c_str(), m.weights.c_str(), &out.h);
    note("no weights given; seeded random initialization");
    return sd_model_random(m.cfg.c_str(), seed, &out.h);
}

struct DataOpts {
    std::string list, labels;
    uint32_t synthetic = 0;
    uint32_t width = 96, height = 96;
};

void add_data_opts(CLI::App* sub, DataOpts& d) {
    sub->add_option("--list", d.list, "image list file");
    sub->add_option("--labels", d.labels, "label directory (default: beside each image)");
    sub->add_option("--synthetic", d.synthetic,
                    "generate N synthetic shape samples instead of loading");
    sub->add_option("--width", d.width, "synthetic sample width")->check(CLI::PositiveNumber);
    sub->add_option("--height", d.height, "synthetic sample height")->check(CLI::PositiveNumber);
}

int open_data(const DataOpts& d, uint64_t seed, Dataset& out) {
    if (d.synthetic > 0) {
        note("generating " + std::to_string(d.synthetic) + " synthetic samples");
        sd_status st =
            sd_dataset_synthetic(d.synthetic, d.width, d.height, 1, 3, seed, &out.h);
        return st == SD_OK ? 0 : die(st);
    }
    if (d.list.empty()) return usage_error("need --list or --synthetic");
    sd_status st =
        sd_dataset_load(d.list.c_str(), d.labels.empty() ? nullptr : d.labels.c_str(), &out.h);
    return st == SD_OK ? 0 : die(st);
}

// ---- training config: defaults < --config file < explicit flags -----------

struct TrainFlags {
    sd_train_config cfg = sd_train_config_default();
    std::string config_file;
    std::string freeze_name = "none";
    bool mosaic = false;
};

int freeze_code(const std::string& name) {
    if (name == "none") return 0;
    if (name == "backbone") return 1;
    if (name == "backbone_neck") return 2;
    return -1;
}

bool apply_train_kv(sd_train_config& c, const std::string& key, const std::string& value) {
    std::istringstream v(value);
    if (key == "epochs") return static_cast<bool>(v >> c.epochs);
    if (key == "base_lr") return static_cast<bool>(v >> c.base_lr);
    if (key == "lr_step_every") return static_cast<bool>(v >> c.lr_step_every);
    if (key == "lr_decay") return static_cast<bool>(v >> c.lr_decay);
    if (key == "momentum") return static_cast<bool>(v >> c.momentum);
    if (key == "batch") return static_cast<bool>(v >> c.batch);
    if (key == "seed") return static_cast<bool>(v >> c.seed);
    if (key == "mosaic") return static_cast<bool>(v >> c.mosaic);
    if (key == "sparsity_lambda") return static_cast<bool>(v >> c.sparsity_lambda);
    if (key == "freeze") {
        int code = freeze_code(value);
        if (code < 0) return false;
        c.freeze = code;
        return true;
    }
    return false;
}

int load_train_config(const std::string& path, sd_train_config& c) {
    std::ifstream in(path);
    if (!in) return usage_error("cannot open config file " + path);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t start = line.find_first_not_of(" \t\r");
        if (start == std::string::npos || line[start] == '#') continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            return usage_error(path + " line " + std::to_string(lineno) + ": expected key=value");
        std::string key = line.substr(start, eq - start);
        std::string value = line.substr(eq + 1);
        key.erase(key.find_last_not_of(" \t") + 1);
        value.erase(0, value.find_first_not_of(" \t"));
        value.erase(value.find_last_not_of(" \t\r") + 1);
        if (!apply_train_kv(c, key, value))
            return usage_error(path + " line " + std::to_string(lineno) + ": bad key or value '" +
                               key + "'");
    }
    return 0;
}

void add_train_opts(CLI::App* sub, TrainFlags& t) {
    sub->add_option("--config", t.config_file, "key=value training config file");
    sub->add_option("--epochs", t.cfg.epochs)->check(CLI::PositiveNumber);
    sub->add_option("--lr", t.cfg.base_lr, "base learning rate");
    sub->add_option("--lr-step", t.cfg.lr_step_every, "epochs between LR drops");
    sub->add_option("--lr-decay", t.cfg.lr_decay);
    sub->add_option("--momentum", t.cfg.momentum);
    sub->add_option("--batch", t.cfg.batch)->check(CLI::PositiveNumber);
    sub->add_flag("--mosaic", t.mosaic, "mosaic augmentation");
    sub->add_option("--freeze", t.freeze_name, "none | backbone | backbone_neck")
        ->check(CLI::IsMember({"none", "backbone", "backbone_neck"}));
    sub->add_option("--sparsity", t.cfg.sparsity_lambda, "L1 coefficient on BN gammas");
}

// Resolves the three layers (defaults, file, flags) into t.cfg.
int resolve_train_config(CLI::App* sub, TrainFlags& t, uint64_t seed, bool seed_set) {
    sd_train_config from_flags = t.cfg;  // flag values landed here during parse
    t.cfg = sd_train_config_default();
    if (!t.config_file.empty()) {
        int rc = load_train_config(t.config_file, t.cfg);
        if (rc != 0) return rc;
    }
    if (seed_set) t.cfg.seed = seed;
    if (sub->count("--epochs")) t.cfg.epochs = from_flags.epochs;
    if (sub->count("--lr")) t.cfg.base_lr = from_flags.base_lr;
    if (sub->count("--lr-step")) t.cfg.lr_step_every = from_flags.lr_step_every;
    if (sub->count("--lr-decay")) t.cfg.lr_decay = from_flags.lr_decay;
    if (sub->count("--momentum")) t.cfg.momentum = from_flags.momentum;
    if (sub->count("--batch")) t.cfg.batch = from_flags.batch;
    if (sub->count("--mosaic")) t.cfg.mosaic = t.mosaic ? 1 : 0;
    if (sub->count("--freeze")) t.cfg.freeze = freeze_code(t.freeze_name);
    if (sub->count("--sparsity")) t.cfg.sparsity_lambda = from_flags.sparsity_lambda;
    return 0;
}

// ---- subcommand runners ----------------------------------------------------

bool has_image_extension(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::vector<std::string> expand_image_paths(const std::vector<std::string>& inputs) {
    std::vector<std::string> out;
    for (const std::string& in : inputs) {
        if (fs::is_directory(in)) {
            std::vector<std::string> found;
            for (const auto& entry : fs::directory_iterator(in))
                if (entry.is_regular_file() && has_image_extension(entry.path()))
                    found.push_back(entry.path().string());
            std::sort(found.begin(), found.end());
            out.insert(out.end(), found.begin(), found.end());
        } else {
            out.push_back(in);
        }
    }
    return out;
}

int run_inspect(const ModelOpts& m, uint64_t seed) {
    Model model;
    if (sd_status st = open_model(m, seed, model); st != SD_OK) return die(st);
    Text summary;
    if (sd_status st = sd_model_summary(model.h, &summary.s); st != SD_OK) return die(st);
    std::cout << summary.str();
    return 0;
}

int run_validate(const ModelOpts& m) {
    Text warnings;
    sd_status st = sd_validate(m.cfg.c_str(), m.weights.empty() ? nullptr : m.weights.c_str(),
                               &warnings.s);
    if (st != SD_OK) return die(st);
    std::istringstream lines(warnings.str());
    std::string line;
    while (std::getline(lines, line))
        if (!line.empty()) std::cerr << "warning: " << line << "\n";
    std::cout << "ok\n";
    return 0;
}

int run_infer(const ModelOpts& m, uint64_t seed, const std::vector<std::string>& inputs,
              float conf, float nms, const std::string& out_file,
              const std::string& annotate_dir) {
    Model model;
    if (sd_status st = open_model(m, seed, model); st != SD_OK) return die(st);

    std::vector<std::string> paths = expand_image_paths(inputs);
    if (paths.empty()) return usage_error("no images found");
    if (!annotate_dir.empty()) fs::create_directories(annotate_dir);

    std::string records;
    for (size_t i = 0; i < paths.size(); ++i) {
        Dets dets;
        sd_status st = sd_infer_file(model.h, paths[i].c_str(), conf, nms,
                                     static_cast<int>(i), &dets.h);
        if (st != SD_OK) return die(st);
        note(paths[i] + ": " + std::to_string(sd_detections_count(dets.h)) + " detections");
        records += "# " + std::to_string(i) + " " + paths[i] + "\n";
        Text text;
        if ((st = sd_detections_format(dets.h, &text.s)) != SD_OK) return die(st);
        records += text.str();
        if (!annotate_dir.empty()) {
            fs::path out = fs::path(annotate_dir) /
                           (fs::path(paths[i]).stem().string() + ".det.png");
            if ((st = sd_annotate_file(paths[i].c_str(), dets.h, out.string().c_str())) != SD_OK)
                return die(st);
        }
    }
    if (out_file.empty()) {
        std::cout << records;
    } else {
        std::ofstream out(out_file, std::ios::binary);
        if (!out) return usage_error("cannot write " + out_file);
        out << records;
    }
    return 0;
}

int run_prune(const ModelOpts& m, float ratio, const std::string& out_cfg,
              const std::string& out_weights, bool report) {
    Model model;
    if (sd_status st = sd_model_load(m.cfg.c_str(), m.weights.c_str(), &model.h); st != SD_OK)
        return die(st);
    Model pruned;
    Text table;
    if (sd_status st = sd_model_prune(model.h, ratio, &pruned.h, report ? &table.s : nullptr);
        st != SD_OK)
        return die(st);
    if (sd_status st = sd_model_save(pruned.h, out_cfg.empty() ? nullptr : out_cfg.c_str(),
                                     out_weights.empty() ? nullptr : out_weights.c_str());
        st != SD_OK)
        return die(st);
    if (report) std::cout << table.str();
    note("parameters " + std::to_string(sd_model_param_count(model.h)) + " -> " +
         std::to_string(sd_model_param_count(pruned.h)));
    return 0;
}

int run_train(bool finetune, const ModelOpts& m, uint64_t seed, bool seed_set, CLI::App* sub,
              TrainFlags& t, const DataOpts& d, const std::string& out_weights,
              const std::string& history_file) {
    if (int rc = resolve_train_config(sub, t, seed, seed_set); rc != 0) return rc;
    Model model;
    if (sd_status st = open_model(m, t.cfg.seed, model); st != SD_OK) return die(st);
    Dataset data;
    if (int rc = open_data(d, t.cfg.seed, data); rc != 0) return rc;

    note((finetune ? std::string("fine-tuning ") : std::string("training ")) +
         std::to_string(t.cfg.epochs) + " epochs on " + std::to_string(sd_dataset_count(data.h)) +
         " samples");
    Text history;
    sd_status st = finetune ? sd_fine_tune(model.h, data.h, &t.cfg, &history.s)
                            : sd_train_toy(model.h, data.h, &t.cfg, &history.s);
    if (st != SD_OK) return die(st);

    if (history_file.empty()) {
        std::cout << history.str();
    } else {
        std::ofstream out(history_file, std::ios::binary);
        if (!out) return usage_error("cannot write " + history_file);
        out << history.str();
    }
    if (!out_weights.empty()) {
        if ((st = sd_model_save(model.h, nullptr, out_weights.c_str())) != SD_OK) return die(st);
        note("weights written to " + out_weights);
    }
    return 0;
}

int run_eval(const ModelOpts& m, uint64_t seed, const DataOpts& d, float iou, float conf,
             float nms, bool voc11, bool report) {
    Model model;
    if (sd_status st = open_model(m, seed, model); st != SD_OK) return die(st);
    Dataset data;
    if (int rc = open_data(d, seed, data); rc != 0) return rc;
    Eval eval;
    if (sd_status st = sd_evaluate(model.h, data.h, iou, conf, nms, voc11 ? 1 : 0, &eval.h);
        st != SD_OK)
        return die(st);
    if (report) {
        Text table;
        if (sd_status st = sd_eval_report(eval.h, &table.s); st != SD_OK) return die(st);
        std::cout << table.str();
    } else {
        char line[64];
        std::snprintf(line, sizeof(line), "mAP@%.2f %.4f\n", iou, sd_eval_map(eval.h));
        std::cout << line;
    }
    return 0;
}

int run_bench(const ModelOpts& m, uint64_t seed, const DataOpts& d, uint32_t n, uint32_t warmup) {
    Model model;
    if (sd_status st = open_model(m, seed, model); st != SD_OK) return die(st);
    Dataset data;
    if (int rc = open_data(d, seed, data); rc != 0) return rc;
    sd_fps fps{};
    Text report;
    uint32_t count = n == 0 ? 0 : warmup + n;
    if (sd_status st = sd_benchmark(model.h, data.h, count, warmup, &fps, &report.s);
        st != SD_OK)
        return die(st);
    std::cout << report.str();
    return 0;
}

int run_augment_preview(uint64_t seed, const DataOpts& d, const sd_augment_config& aug,
                        const std::string& out_dir) {
    Dataset data;
    if (int rc = open_data(d, seed, data); rc != 0) return rc;
    sd_dataset* transformed = nullptr;
    if (sd_status st = sd_dataset_augment(data.h, &aug, seed, &transformed); st != SD_OK)
        return die(st);
    Dataset owned;
    owned.h = transformed;
    Text list;
    if (sd_status st = sd_dataset_write(owned.h, out_dir.c_str(), &list.s); st != SD_OK)
        return die(st);
    std::cout << list.str() << "\n";
    return 0;
}

int run_sweep(const ModelOpts& m, uint64_t seed, const DataOpts& d,
              const std::vector<float>& ratios, uint32_t finetune_epochs, uint32_t bench_n,
              uint32_t warmup, float iou, float conf) {
    if (ratios.empty()) return usage_error("empty ratio list");
    for (float r : ratios)
        if (r < 0.0f || r >= 1.0f) return usage_error("ratios must lie in [0, 1)");

    Model base;
    if (sd_status st = sd_model_load(m.cfg.c_str(), m.weights.c_str(), &base.h); st != SD_OK)
        return die(st);
    Dataset data;
    if (int rc = open_data(d, seed, data); rc != 0) return rc;

    double base_params = static_cast<double>(sd_model_param_count(base.h));
    struct Row {
        float ratio;
        uint64_t params;
        double frac, map, fps;
    };
    std::vector<Row> rows;

    for (float r : ratios) {
        note("ratio " + std::to_string(r));
        Model pruned;
        if (sd_status st = sd_model_prune(base.h, r, &pruned.h, nullptr); st != SD_OK)
            return die(st);
        if (finetune_epochs > 0) {
            sd_train_config tc = sd_train_config_default();
            tc.epochs = finetune_epochs;
            tc.seed = seed;
            if (sd_status st = sd_fine_tune(pruned.h, data.h, &tc, nullptr); st != SD_OK)
                return die(st);
        }
        Eval eval;
        if (sd_status st = sd_evaluate(pruned.h, data.h, iou, conf, 0.45f, 0, &eval.h);
            st != SD_OK)
            return die(st);
        sd_fps fps{};
        if (sd_status st = sd_benchmark(pruned.h, data.h, warmup + bench_n, warmup, &fps, nullptr);
            st != SD_OK)
            return die(st);
        uint64_t params = sd_model_param_count(pruned.h);
        rows.push_back({r, params, params / base_params, sd_eval_map(eval.h), fps.fps});
    }

    size_t best_fps = 0, best_map = 0;
    for (size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].fps > rows[best_fps].fps) best_fps = i;
        if (rows[i].map > rows[best_map].map) best_map = i;
    }

    char line[160];
    std::snprintf(line, sizeof(line), "%6s %12s %12s %8s %8s  %s\n", "ratio", "params",
                  "params_frac", "mAP", "fps", "best");
    std::cout << line;
    for (size_t i = 0; i < rows.size(); ++i) {
        std::string marks;
        if (i == best_fps) marks += "*";
        if (i == best_map) marks += "+";
        std::snprintf(line, sizeof(line), "%6.2f %12llu %12.4f %8.4f %8.2f  %s\n", rows[i].ratio,
                      static_cast<unsigned long long>(rows[i].params), rows[i].frac, rows[i].map,
                      rows[i].fps, marks.c_str());
        std::cout << line;
    }
    std::cout << "# * most efficient (fps), + best mAP\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pruning-aware one-stage detector toolkit"};
    app.require_subcommand(1);

    int threads = 0;
    uint64_t seed = 0;
    app.add_flag("-v,--verbose", g_verbose, "progress logs on stderr");
    app.add_option("--threads", threads, "worker cap (default: SLIMDET_THREADS or hardware)")
        ->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "seed for every random choice (default 0)");

    // inspect / validate
    ModelOpts inspect_m;
    CLI::App* inspect = app.add_subcommand("inspect", "print the layer table");
    inspect->fallthrough();
    add_model_opts(inspect, inspect_m, false);

    ModelOpts validate_m;
    CLI::App* validate = app.add_subcommand("validate", "check a cfg (and optional weights)");
    validate->fallthrough();
    add_model_opts(validate, validate_m, false);

    // infer
    ModelOpts infer_m;
    std::vector<std::string> infer_inputs;
    float infer_conf = 0.25f, infer_nms = 0.45f;
    std::string infer_out, infer_annotate;
    CLI::App* infer = app.add_subcommand("infer", "detect objects in images");
    infer->fallthrough();
    add_model_opts(infer, infer_m, true);
    infer->add_option("images", infer_inputs, "image files or directories")->required();
    infer->add_option("--conf", infer_conf, "confidence threshold");
    infer->add_option("--iou", infer_nms, "NMS IoU threshold");
    infer->add_option("--out", infer_out, "write records here instead of stdout");
    infer->add_option("--annotate", infer_annotate, "directory for box-drawn copies");

    // prune
    ModelOpts prune_m;
    float prune_ratio = 0.5f;
    std::string prune_out_cfg, prune_out_weights;
    bool prune_report = false;
    CLI::App* prune = app.add_subcommand("prune", "channel-prune by BN gamma magnitude");
    prune->fallthrough();
    add_model_opts(prune, prune_m, true);
    prune->add_option("--ratio", prune_ratio, "fraction of prunable channels to drop")
        ->required();
    prune->add_option("--out-cfg", prune_out_cfg, "pruned description file");
    prune->add_option("--out-weights", prune_out_weights, "pruned weights file");
    prune->add_flag("--report", prune_report, "per-layer table on stdout");

    // train-toy / fine-tune
    ModelOpts train_m, tune_m;
    TrainFlags train_t, tune_t;
    DataOpts train_d, tune_d;
    std::string train_out, train_history, tune_out, tune_history;
    CLI::App* train = app.add_subcommand("train-toy", "small-scale SGD training");
    train->fallthrough();
    add_model_opts(train, train_m, false);
    add_data_opts(train, train_d);
    add_train_opts(train, train_t);
    train->add_option("--out-weights", train_out, "save trained weights here");
    train->add_option("--history", train_history, "write per-epoch records here");

    CLI::App* tune = app.add_subcommand("fine-tune", "recovery training, sparsity off");
    tune->fallthrough();
    add_model_opts(tune, tune_m, true);
    add_data_opts(tune, tune_d);
    add_train_opts(tune, tune_t);
    tune->add_option("--out-weights", tune_out, "save tuned weights here");
    tune->add_option("--history", tune_history, "write per-epoch records here");

    // eval
    ModelOpts eval_m;
    DataOpts eval_d;
    float eval_iou = 0.5f, eval_conf = 0.25f, eval_nms = 0.45f;
    bool eval_report = false;
    std::string eval_interp = "all";
    CLI::App* evalc = app.add_subcommand("eval", "mAP over a labeled dataset");
    evalc->fallthrough();
    add_model_opts(evalc, eval_m, true);
    add_data_opts(evalc, eval_d);
    evalc->add_option("--iou", eval_iou, "matching IoU threshold");
    evalc->add_option("--conf", eval_conf, "confidence threshold");
    evalc->add_option("--nms-iou", eval_nms, "NMS IoU threshold");
    evalc->add_flag("--report", eval_report, "per-class table instead of the mAP line");
    evalc->add_option("--ap-interp", eval_interp, "all | voc11")
        ->check(CLI::IsMember({"all", "voc11"}));

    // bench
    ModelOpts bench_m;
    DataOpts bench_d;
    uint32_t bench_n = 0, bench_warmup = 10;
    CLI::App* bench = app.add_subcommand("bench", "single-image FPS benchmark");
    bench->fallthrough();
    add_model_opts(bench, bench_m, true);
    add_data_opts(bench, bench_d);
    bench->add_option("--n", bench_n, "timed images (default: dataset size minus warmup)");
    bench->add_option("--warmup", bench_warmup, "untimed lead-in images");

    // augment-preview
    DataOpts aug_d;
    sd_augment_config aug = sd_augment_config_default();
    std::string aug_out;
    CLI::App* augment = app.add_subcommand("augment-preview", "apply transforms and write out");
    augment->fallthrough();
    add_data_opts(augment, aug_d);
    augment->add_option("--out", aug_out, "output dataset directory")->required();
    augment->add_option("--crop", aug.crop_prob, "random-crop probability");
    augment->add_option("--flip", aug.flip_prob, "horizontal-flip probability");
    augment->add_option("--hsv", aug.hsv_prob, "color-jitter probability");
    augment->add_option("--blur", aug.blur_prob, "box-blur probability");
    augment->add_option("--affine", aug.affine_prob, "shift/zoom probability");

    // sweep
    ModelOpts sweep_m;
    DataOpts sweep_d;
    std::vector<float> sweep_ratios;
    uint32_t sweep_ft = 0, sweep_bench_n = 10, sweep_warmup = 3;
    float sweep_iou = 0.5f, sweep_conf = 0.25f;
    CLI::App* sweep = app.add_subcommand("sweep", "prune-ratio sweep: params / mAP / fps table");
    sweep->fallthrough();
    add_model_opts(sweep, sweep_m, true);
    add_data_opts(sweep, sweep_d);
    sweep->add_option("--ratios", sweep_ratios, "prune ratios, e.g. 0,0.2,0.5")
        ->required()
        ->delimiter(',');
    sweep->add_option("--fine-tune-epochs", sweep_ft, "recovery epochs per ratio");
    sweep->add_option("--bench-n", sweep_bench_n, "timed benchmark images per ratio");
    sweep->add_option("--warmup", sweep_warmup, "benchmark warmup images");
    sweep->add_option("--iou", sweep_iou, "matching IoU threshold");
    sweep->add_option("--conf", sweep_conf, "confidence threshold");

    CLI11_PARSE(app, argc, argv);

    if (threads > 0) sd_set_threads(threads);

    if (app.got_subcommand(inspect)) return run_inspect(inspect_m, seed);
    if (app.got_subcommand(validate)) return run_validate(validate_m);
    if (app.got_subcommand(infer))
        return run_infer(infer_m, seed, infer_inputs, infer_conf, infer_nms, infer_out,
                         infer_annotate);
    if (app.got_subcommand(prune))
        return run_prune(prune_m, prune_ratio, prune_out_cfg, prune_out_weights, prune_report);
    bool seed_set = app.count("--seed") > 0;
    if (app.got_subcommand(train))
        return run_train(false, train_m, seed, seed_set, train, train_t, train_d, train_out,
                         train_history);
    if (app.got_subcommand(tune))
        return run_train(true, tune_m, seed, seed_set, tune, tune_t, tune_d, tune_out,
                         tune_history);
    if (app.got_subcommand(evalc))
        return run_eval(eval_m, seed, eval_d, eval_iou, eval_conf, eval_nms,
                        eval_interp == "voc11", eval_report);
    if (app.got_subcommand(bench)) return run_bench(bench_m, seed, bench_d, bench_n, bench_warmup);
    if (app.got_subcommand(augment)) return run_augment_preview(seed, aug_d, aug, aug_out);
    if (app.got_subcommand(sweep))
        return run_sweep(sweep_m, seed, sweep_d, sweep_ratios, sweep_ft, sweep_bench_n,
                         sweep_warmup, sweep_iou, sweep_conf);
    return 0;
}
