#pragma once

#include <cstdint>
#include <string>

#include "detect.hpp"
#include "tensor.hpp"

namespace slimdet {

// Decodes a PNG or JPEG file (sniffed by magic bytes) into 3xHxW RGB in [0,1].
Tensor read_image(const std::string& path);

// Writes a 3xHxW tensor as an 8-bit RGB PNG / JPEG. Values are clamped to
// [0,1] before quantization.
void write_png(const Tensor& image, const std::string& path);
void write_jpeg(const Tensor& image, const std::string& path, int quality = 90);

Tensor resize_bilinear(const Tensor& image, uint32_t out_w, uint32_t out_h);

// Annotation colors, one per class: blue plastic, orange bio, pink rov.
extern const float kClassColors[3][3];

// Paints the outline of a normalized box onto the image.
void draw_box(Tensor& image, const Box& box, int class_id, uint32_t thickness = 2);

}  // namespace slimdet
