#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"

namespace slimdet {

enum class LayerKind { convolutional, maxpool, upsample, route, shortcut, yolo };
enum class Activation { mish, leaky, linear, sigmoid };

const char* layer_kind_name(LayerKind k);
const char* activation_name(Activation a);

// One parsed section. Fields are meaningful per kind; unused ones keep their
// defaults so value comparison stays simple.
struct LayerSpec {
    LayerKind kind = LayerKind::convolutional;

    // convolutional
    uint32_t filters = 0;
    uint32_t size = 1;
    uint32_t stride = 1;
    bool pad = false;
    bool batch_normalize = false;
    Activation activation = Activation::linear;

    // upsample
    uint32_t factor = 2;

    // route (indices resolved to absolute earlier-layer positions)
    std::vector<int> route_layers;
    uint32_t route_groups = 1;
    uint32_t route_group_id = 0;

    // shortcut (resolved absolute index)
    int from = -1;

    // yolo
    std::vector<std::pair<float, float>> anchors;  // (w, h) in input pixels
    std::vector<uint32_t> mask;
    uint32_t classes = 0;
    float scale_xy = 1.0f;

    bool operator==(const LayerSpec&) const = default;
};

struct NetworkDef {
    uint32_t input_width = 0;
    uint32_t input_height = 0;
    uint32_t input_channels = 0;
    std::vector<LayerSpec> layers;
    std::string source_name;

    bool operator==(const NetworkDef& o) const {
        return input_width == o.input_width && input_height == o.input_height &&
               input_channels == o.input_channels && layers == o.layers;
    }
};

// Parses the section-based key=value description format. Negative route and
// shortcut offsets are resolved to absolute indices. Unknown keys inside
// known sections are collected into `warnings` when given; unknown section
// kinds are errors.
NetworkDef parse_cfg(const std::string& text, std::vector<std::string>* warnings = nullptr);
NetworkDef parse_cfg_file(const std::string& path, std::vector<std::string>* warnings = nullptr);

// Inverse of parse_cfg up to structural equality. Refuses an empty layer list.
std::string serialize_cfg(const NetworkDef& net);

// Output channel count of every layer (pure channel walk, no spatial shapes).
std::vector<uint32_t> layer_out_channels(const NetworkDef& net);

// In-channels seen by layer i (input_channels for i == 0).
uint32_t layer_in_channels(const NetworkDef& net, size_t i);

struct WeightHeader {
    int32_t major = 0;
    int32_t minor = 2;
    int32_t revision = 0;
    uint64_t seen = 0;

    bool operator==(const WeightHeader&) const = default;
};

// Float parameter block for one convolutional layer. BN layers carry
// beta/gamma/mean/var (n each); plain layers carry bias (n); kernel is
// always n*c*k*k, row-major.
struct ConvWeights {
    std::vector<float> bn_beta, bn_gamma, bn_mean, bn_var;
    std::vector<float> bias;
    std::vector<float> kernel;

    bool operator==(const ConvWeights&) const = default;
};

struct WeightStore {
    WeightHeader header;
    std::vector<ConvWeights> blocks;  // one per layer, empty for non-conv layers

    bool operator==(const WeightStore&) const = default;
};

// Total float count the weights file must carry for this definition.
uint64_t weight_float_count(const NetworkDef& net);

WeightStore load_weights(const std::vector<uint8_t>& bytes, const NetworkDef& net);
WeightStore load_weights_file(const std::string& path, const NetworkDef& net);
std::vector<uint8_t> save_weights(const WeightStore& store, const NetworkDef& net);
void save_weights_file(const WeightStore& store, const NetworkDef& net, const std::string& path);

}  // namespace slimdet
