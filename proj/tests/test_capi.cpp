#include "slimdet.h"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"

namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& tag) {
    static std::atomic<int> counter{0};
    fs::path dir = fs::temp_directory_path() / ("slimdet_capi_" + tag + "_" +
                                                std::to_string(counter.fetch_add(1)));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

const char* kToyCfg = R"([net]
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
activation=mish

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

std::string write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    return path.string();
}

// Owns a model handle for the scope of one test.
struct ModelGuard {
    sd_model* m = nullptr;
    ~ModelGuard() { sd_model_free(m); }
};

struct TextGuard {
    char* text = nullptr;
    ~TextGuard() { sd_text_free(text); }
};

}  // namespace

TEST_CASE("library identity and global knobs") {
    CHECK(sd_version() != nullptr);
    CHECK(sd_class_count() == 3);
    CHECK(std::string(sd_class_name(0)) == "plastic");
    CHECK(std::string(sd_class_name(1)) == "bio");
    CHECK(std::string(sd_class_name(2)) == "rov");
    CHECK(sd_class_name(3) == nullptr);
    CHECK(sd_class_name(-1) == nullptr);

    int before = sd_threads();
    sd_set_threads(2);
    CHECK(sd_threads() == 2);
    sd_set_threads(0);  // clamps
    CHECK(sd_threads() == 1);
    sd_set_threads(before);
}

TEST_CASE("model round-trip through files") {
    fs::path dir = fresh_dir("model");
    std::string cfg = write_text(dir / "toy.cfg", kToyCfg);

    ModelGuard model;
    REQUIRE(sd_model_random(cfg.c_str(), 7, &model.m) == SD_OK);
    CHECK(sd_model_layer_count(model.m) == 4);
    CHECK(sd_model_param_count(model.m) > 0);

    uint32_t w = 0, h = 0, c = 0;
    REQUIRE(sd_model_input_size(model.m, &w, &h, &c) == SD_OK);
    CHECK(w == 32);
    CHECK(h == 32);
    CHECK(c == 3);

    TextGuard summary;
    REQUIRE(sd_model_summary(model.m, &summary.text) == SD_OK);
    std::string s = summary.text;
    CHECK(s.find("convolutional") != std::string::npos);
    CHECK(s.find("yolo") != std::string::npos);
    CHECK(s.find("total parameters") != std::string::npos);

    std::string cfg2 = (dir / "saved.cfg").string();
    std::string weights = (dir / "saved.weights").string();
    REQUIRE(sd_model_save(model.m, cfg2.c_str(), weights.c_str()) == SD_OK);

    ModelGuard back;
    REQUIRE(sd_model_load(cfg2.c_str(), weights.c_str(), &back.m) == SD_OK);
    CHECK(sd_model_param_count(back.m) == sd_model_param_count(model.m));

    TextGuard warnings;
    CHECK(sd_validate(cfg2.c_str(), weights.c_str(), &warnings.text) == SD_OK);

    SUBCASE("status codes separate the failure classes") {
        sd_model* out = nullptr;
        CHECK(sd_model_load("/nonexistent/x.cfg", weights.c_str(), &out) == SD_ERR_IO);
        CHECK(std::string(sd_last_error()).size() > 0);

        std::string bad = write_text(dir / "bad.cfg", "[net]\nwidth=32\n[warp]\n");
        CHECK(sd_validate(bad.c_str(), nullptr, nullptr) == SD_ERR_PARSE);

        // Truncated weight file: alignment failure, not I/O.
        std::ifstream in(weights, std::ios::binary);
        std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
        bytes.resize(bytes.size() - 4);
        std::ofstream(dir / "short.weights", std::ios::binary)
            .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        CHECK(sd_validate(cfg2.c_str(), (dir / "short.weights").string().c_str(), nullptr) ==
              SD_ERR_WEIGHTS);

        CHECK(sd_model_random(nullptr, 0, &out) == SD_ERR_INVALID);
    }
}

TEST_CASE("synthetic data, inference and annotation") {
    fs::path dir = fresh_dir("infer");
    std::string cfg = write_text(dir / "toy.cfg", kToyCfg);
    ModelGuard model;
    REQUIRE(sd_model_random(cfg.c_str(), 11, &model.m) == SD_OK);

    sd_dataset* data = nullptr;
    REQUIRE(sd_dataset_synthetic(6, 64, 64, 1, 2, 5, &data) == SD_OK);
    CHECK(sd_dataset_count(data) == 6);

    TextGuard list;
    REQUIRE(sd_dataset_write(data, dir.string().c_str(), &list.text) == SD_OK);
    CHECK(fs::exists(list.text));

    sd_dataset* loaded = nullptr;
    std::string labels = (dir / "labels").string();
    REQUIRE(sd_dataset_load(list.text, labels.c_str(), &loaded) == SD_OK);
    CHECK(sd_dataset_count(loaded) == 6);

    std::string image0 = (dir / "images" / "0000.png").string();
    REQUIRE(fs::exists(image0));

    sd_detections* dets = nullptr;
    REQUIRE(sd_infer_file(model.m, image0.c_str(), 0.001f, 0.45f, 0, &dets) == SD_OK);
    REQUIRE(sd_detections_count(dets) > 0);

    sd_detection d{};
    REQUIRE(sd_detections_get(dets, 0, &d) == SD_OK);
    CHECK(d.class_id >= 0);
    CHECK(d.class_id < 3);
    CHECK(d.confidence > 0.0f);
    CHECK(d.confidence <= 1.0f);
    CHECK(sd_detections_get(dets, sd_detections_count(dets), &d) == SD_ERR_INVALID);

    TextGuard records;
    REQUIRE(sd_detections_format(dets, &records.text) == SD_OK);
    CHECK(std::string(records.text).find('\n') != std::string::npos);

    std::string annotated = (dir / "annotated.png").string();
    REQUIRE(sd_annotate_file(image0.c_str(), dets, annotated.c_str()) == SD_OK);
    CHECK(fs::exists(annotated));

    SUBCASE("augmentation keeps the sample count") {
        sd_augment_config aug = sd_augment_config_default();
        aug.flip_prob = 1.0f;
        sd_dataset* flipped = nullptr;
        REQUIRE(sd_dataset_augment(loaded, &aug, 9, &flipped) == SD_OK);
        CHECK(sd_dataset_count(flipped) == 6);
        sd_dataset_free(flipped);
    }

    sd_detections_free(dets);
    sd_dataset_free(loaded);
    sd_dataset_free(data);
}

TEST_CASE("pruning shrinks the model behind the boundary") {
    fs::path dir = fresh_dir("prune");
    std::string cfg = write_text(dir / "toy.cfg", kToyCfg);
    ModelGuard model;
    REQUIRE(sd_model_random(cfg.c_str(), 3, &model.m) == SD_OK);

    // Fresh init keeps every gamma at the same value, which the strict global
    // quantile refuses to cut; a couple of SGD steps spreads them out.
    sd_dataset* data = nullptr;
    REQUIRE(sd_dataset_synthetic(4, 32, 32, 1, 1, 6, &data) == SD_OK);
    sd_train_config tc = sd_train_config_default();
    tc.batch = 2;
    REQUIRE(sd_train_toy(model.m, data, &tc, nullptr) == SD_OK);
    sd_dataset_free(data);

    uint64_t base = sd_model_param_count(model.m);

    ModelGuard half;
    TextGuard report;
    REQUIRE(sd_model_prune(model.m, 0.5f, &half.m, &report.text) == SD_OK);
    CHECK(sd_model_param_count(half.m) < base);
    CHECK(std::string(report.text).find("ratio") != std::string::npos);

    ModelGuard same;
    REQUIRE(sd_model_prune(model.m, 0.0f, &same.m, nullptr) == SD_OK);
    CHECK(sd_model_param_count(same.m) == base);

    sd_model* out = nullptr;
    CHECK(sd_model_prune(model.m, 1.5f, &out, nullptr) == SD_ERR_INVALID);
}

TEST_CASE("training, evaluation and benchmarking round trip") {
    fs::path dir = fresh_dir("train");
    std::string cfg = write_text(dir / "toy.cfg", kToyCfg);
    ModelGuard model;
    REQUIRE(sd_model_random(cfg.c_str(), 1, &model.m) == SD_OK);

    sd_dataset* data = nullptr;
    REQUIRE(sd_dataset_synthetic(4, 32, 32, 1, 1, 2, &data) == SD_OK);

    sd_train_config tc = sd_train_config_default();
    CHECK(tc.epochs == 1);
    CHECK(tc.momentum == doctest::Approx(0.9f));
    tc.epochs = 2;
    tc.batch = 2;
    tc.base_lr = 1e-3f;

    TextGuard history;
    REQUIRE(sd_train_toy(model.m, data, &tc, &history.text) == SD_OK);
    CHECK(std::string(history.text).find("epoch") != std::string::npos);

    REQUIRE(sd_fine_tune(model.m, data, &tc, nullptr) == SD_OK);

    tc.epochs = 0;
    CHECK(sd_train_toy(model.m, data, &tc, nullptr) == SD_ERR_INVALID);
    tc.epochs = 1;
    tc.freeze = 9;
    CHECK(sd_train_toy(model.m, data, &tc, nullptr) == SD_ERR_INVALID);

    sd_eval* eval = nullptr;
    REQUIRE(sd_evaluate(model.m, data, 0.5f, 0.25f, 0.45f, 0, &eval) == SD_OK);
    CHECK(sd_eval_map(eval) >= 0.0);
    CHECK(sd_eval_map(eval) <= 1.0);
    double ap = -1;
    int evaluated = -1;
    REQUIRE(sd_eval_class_ap(eval, 0, &ap, &evaluated) == SD_OK);
    CHECK((evaluated == 0 || (ap >= 0.0 && ap <= 1.0)));
    CHECK(sd_eval_class_ap(eval, 5, &ap, &evaluated) == SD_ERR_INVALID);
    TextGuard report;
    REQUIRE(sd_eval_report(eval, &report.text) == SD_OK);
    CHECK(std::string(report.text).find("mAP") != std::string::npos);
    sd_eval_free(eval);

    sd_eval* eval11 = nullptr;
    REQUIRE(sd_evaluate(model.m, data, 0.5f, 0.25f, 0.45f, 1, &eval11) == SD_OK);
    sd_eval_free(eval11);

    sd_fps fps{};
    TextGuard fps_text;
    REQUIRE(sd_benchmark(model.m, data, 15, 5, &fps, &fps_text.text) == SD_OK);
    CHECK(fps.images == 10);
    CHECK(fps.warmup == 5);
    CHECK(fps.fps > 0.0);
    CHECK(fps.p50_ms <= fps.p95_ms);
    CHECK(std::string(fps_text.text).find("fps") != std::string::npos);

    CHECK(sd_benchmark(model.m, data, 12, 5, &fps, nullptr) == SD_ERR_INVALID);

    sd_dataset_free(data);
}
