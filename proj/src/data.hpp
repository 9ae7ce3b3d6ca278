#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "losses.hpp"
#include "tensor.hpp"

namespace slimdet {

struct Sample {
    Tensor image;                  // 3xHxW, RGB in [0,1]
    std::vector<GroundTruth> gts;  // normalized to image extent
    std::string source;            // originating path or generator tag
};

struct SplitManifest {
    std::string train_list, test_list, val_list;
    uint32_t train_count = 0, test_count = 0, val_count = 0;
};

// Reads an image-list file (one path per line, relative paths resolved
// against the list's directory) plus YOLO-style label files: one
// "class cx cy w h" line per box, normalized. The label for images/x.png
// lives at <label_dir>/x.txt, or next to the image when label_dir is empty.
std::vector<Sample> load_dataset(const std::string& list_file, const std::string& label_dir);

// Box mapping between a letterboxed net frame and the source image.
struct LetterboxMap {
    uint32_t src_w = 0, src_h = 0;
    uint32_t net_w = 0, net_h = 0;
    float scale = 1.0f;
    uint32_t pad_x = 0, pad_y = 0;  // left / top padding in net pixels

    Box to_net(const Box& src) const;
    Box to_source(const Box& net) const;
};

// Aspect-preserving resize onto a gray (0.5) canvas; boxes remapped.
Sample letterbox(const Sample& s, uint32_t net_w, uint32_t net_h, LetterboxMap* map = nullptr);

// Four-tile mosaic at net size. The split point is drawn uniformly from
// [0.3, 0.7]^2 by the seeded generator; each tile is cover-scaled and
// center-cropped into its quadrant. Remapped boxes are clipped to their
// quadrant and dropped when the clipped area falls below 25% of the box.
Sample mosaic(const std::vector<Sample>& tiles, uint32_t net_w, uint32_t net_h, uint64_t seed);

struct AugmentConfig {
    float crop_prob = 0.0f;
    float crop_max = 0.2f;  // fraction trimmed from each side
    float flip_prob = 0.0f;
    float hsv_prob = 0.0f;
    float hue_max = 0.05f;  // shift, as a fraction of the hue circle
    float sat_max = 0.3f;   // gain drawn from [1 - sat_max, 1 + sat_max]
    float val_max = 0.3f;
    float blur_prob = 0.0f;
    float affine_prob = 0.0f;
    float shift_max = 0.1f;  // translation, fraction of extent
    float zoom_max = 0.2f;   // scale drawn from [1 - zoom_max, 1 + zoom_max]
};

// Seeded crop / flip / HSV jitter / blur / affine chain. The default config
// is the identity. Boxes follow the geometry and stay inside [0,1].
Sample basic_transforms(const Sample& s, const AugmentConfig& cfg, uint64_t seed);

// Colored rectangles and ellipses on a noise background, one color family
// per class. Small enough to train the toy net against, bright enough that
// the classes are separable.
struct ShapesConfig {
    uint32_t count = 32;
    uint32_t width = 96, height = 96;
    uint32_t min_objects = 1, max_objects = 3;
};
std::vector<Sample> synthetic_shapes(const ShapesConfig& cfg, uint64_t seed);

// Writes images/NNNN.png, labels/NNNN.txt and list.txt under dir; returns
// the list-file path (loadable by load_dataset with label_dir = dir/labels).
std::string write_dataset(const std::vector<Sample>& samples, const std::string& dir);

}  // namespace slimdet
