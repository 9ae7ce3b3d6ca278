#ifndef SLIMDET_H
#define SLIMDET_H

/* C interface to the slimdet toolkit. Objects live behind opaque handles;
 * every fallible call returns a status code and leaves a message retrievable
 * through sd_last_error() on the calling thread. Strings returned through
 * char** outputs are heap blocks owned by the caller; release them with
 * sd_text_free(). */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sd_status {
    SD_OK = 0,
    SD_ERR_PARSE = 2,   /* malformed cfg text, bad layer references */
    SD_ERR_WEIGHTS = 3, /* weight file size/header mismatch */
    SD_ERR_IO = 4,      /* missing files, undecodable images */
    SD_ERR_INVALID = 5, /* bad arguments, contract violations */
    SD_ERR_RUNTIME = 6  /* divergence, shape conflicts */
} sd_status;

typedef struct sd_model sd_model;
typedef struct sd_dataset sd_dataset;
typedef struct sd_detections sd_detections;
typedef struct sd_eval sd_eval;

const char* sd_version(void);

/* Message from the most recent failing call on this thread ("" if none). */
const char* sd_last_error(void);

void sd_text_free(char* text);

/* Worker cap for the tensor kernels; also readable. Values < 1 clamp to 1. */
void sd_set_threads(int n);
int sd_threads(void);

int sd_class_count(void);
const char* sd_class_name(int class_id); /* NULL when out of range */

/* ---- models ---------------------------------------------------------- */

sd_status sd_model_load(const char* cfg_path, const char* weights_path, sd_model** out);

/* Seeded scratch initialization from a cfg file (no weights file needed). */
sd_status sd_model_random(const char* cfg_path, uint64_t seed, sd_model** out);

void sd_model_free(sd_model* model);

/* Either path may be NULL to skip that half. */
sd_status sd_model_save(const sd_model* model, const char* cfg_path, const char* weights_path);

int64_t sd_model_layer_count(const sd_model* model);
uint64_t sd_model_param_count(const sd_model* model);
sd_status sd_model_input_size(const sd_model* model, uint32_t* width, uint32_t* height,
                              uint32_t* channels);

/* Per-layer table: kind, geometry, output shape, parameter count. */
sd_status sd_model_summary(const sd_model* model, char** text);

/* Parse checks only, or parse + weight-alignment checks when weights_path is
 * non-NULL. Parser warnings land in *warnings (one per line) when requested. */
sd_status sd_validate(const char* cfg_path, const char* weights_path, char** warnings);

/* ---- inference ------------------------------------------------------- */

typedef struct sd_detection {
    float cx, cy, w, h; /* normalized to the source image */
    int class_id;
    float confidence;
} sd_detection;

/* Detect on one image file; boxes come back in source-image coordinates.
 * image_id tags every record (use 0 for single images). */
sd_status sd_infer_file(const sd_model* model, const char* image_path, float conf_thresh,
                        float nms_iou, int image_id, sd_detections** out);

size_t sd_detections_count(const sd_detections* dets);
sd_status sd_detections_get(const sd_detections* dets, size_t index, sd_detection* out);

/* Line records: image_id class_id confidence cx cy w h */
sd_status sd_detections_format(const sd_detections* dets, char** text);

void sd_detections_free(sd_detections* dets);

/* Draw class-colored boxes on the image and write the result (PNG). */
sd_status sd_annotate_file(const char* image_path, const sd_detections* dets,
                           const char* out_path);

/* ---- pruning --------------------------------------------------------- */

/* Global gamma-magnitude channel prune at the given ratio. The input model is
 * untouched; *out is a standalone smaller model. Pass a non-NULL report to
 * receive the per-layer table. */
sd_status sd_model_prune(const sd_model* model, float ratio, sd_model** out, char** report);

/* ---- datasets -------------------------------------------------------- */

/* label_dir NULL or "": labels are siblings of each image. */
sd_status sd_dataset_load(const char* list_path, const char* label_dir, sd_dataset** out);

/* Synthetic colored-shapes detection set (3 classes). */
sd_status sd_dataset_synthetic(uint32_t count, uint32_t width, uint32_t height,
                               uint32_t min_objects, uint32_t max_objects, uint64_t seed,
                               sd_dataset** out);

size_t sd_dataset_count(const sd_dataset* dataset);

/* Writes images/, labels/ and list.txt under dir; *list_path (optional)
 * receives the list-file path. */
sd_status sd_dataset_write(const sd_dataset* dataset, const char* dir, char** list_path);

typedef struct sd_augment_config {
    float crop_prob, crop_max;
    float flip_prob;
    float hsv_prob, hue_max, sat_max, val_max;
    float blur_prob;
    float affine_prob, shift_max, zoom_max;
} sd_augment_config;

sd_augment_config sd_augment_config_default(void);

/* Seeded augmentation of every sample (sample i uses a fork of seed by i). */
sd_status sd_dataset_augment(const sd_dataset* dataset, const sd_augment_config* config,
                             uint64_t seed, sd_dataset** out);

void sd_dataset_free(sd_dataset* dataset);

/* ---- training -------------------------------------------------------- */

typedef struct sd_train_config {
    uint32_t epochs;
    float base_lr;
    uint32_t lr_step_every; /* epochs between LR drops */
    float lr_decay;
    float momentum;
    uint32_t batch;
    uint64_t seed;
    int mosaic;            /* 0/1 */
    int freeze;            /* 0 none, 1 backbone, 2 backbone+neck */
    float sparsity_lambda; /* L1 coefficient on BN gammas; 0 = off */
} sd_train_config;

sd_train_config sd_train_config_default(void);

/* SGD training on the toy scale; mutates the model in place. *history
 * (optional) receives one formatted line per epoch. */
sd_status sd_train_toy(sd_model* model, const sd_dataset* dataset,
                       const sd_train_config* config, char** history);

/* Same loop with the sparsity penalty forced off; for post-prune recovery. */
sd_status sd_fine_tune(sd_model* model, const sd_dataset* dataset,
                       const sd_train_config* config, char** history);

/* ---- evaluation ------------------------------------------------------ */

/* Runs the detector over the whole dataset and scores mAP at iou_thresh.
 * use_voc11 selects 11-point AP interpolation (0 = all-point). */
sd_status sd_evaluate(const sd_model* model, const sd_dataset* dataset, float iou_thresh,
                      float conf_thresh, float nms_iou, int use_voc11, sd_eval** out);

double sd_eval_map(const sd_eval* eval);

/* *evaluated is 0 for classes with no ground truth (their AP is undefined). */
sd_status sd_eval_class_ap(const sd_eval* eval, int class_id, double* ap, int* evaluated);

sd_status sd_eval_report(const sd_eval* eval, char** text);

void sd_eval_free(sd_eval* eval);

typedef struct sd_fps {
    uint32_t images; /* timed images (count - warmup) */
    uint32_t warmup;
    double seconds;
    double fps;
    double p50_ms, p95_ms;
} sd_fps;

/* Feeds `count` images by cycling the dataset (count 0 = dataset size); the
 * first `warmup` are untimed. Needs count >= warmup + 10. */
sd_status sd_benchmark(const sd_model* model, const sd_dataset* dataset, uint32_t count,
                       uint32_t warmup, sd_fps* out, char** report);

#ifdef __cplusplus
}
#endif

#endif /* SLIMDET_H */
