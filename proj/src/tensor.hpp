#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace slimdet {

// Dense float tensor, row-major, channel-major within an image (CHW).
// Rank is free but nearly everything in the toolkit uses (c, h, w).
struct Tensor {
    std::vector<uint32_t> dims;
    std::vector<float> data;

    Tensor() = default;
    Tensor(uint32_t c, uint32_t h, uint32_t w)
        : dims{c, h, w}, data(static_cast<size_t>(c) * h * w, 0.0f) {}

    static Tensor zeros_like(const Tensor& t) {
        Tensor r;
        r.dims = t.dims;
        r.data.assign(t.data.size(), 0.0f);
        return r;
    }

    uint32_t c() const { return dims.size() > 2 ? dims[dims.size() - 3] : 1; }
    uint32_t h() const { return dims.size() > 1 ? dims[dims.size() - 2] : 1; }
    uint32_t w() const { return dims.empty() ? 0 : dims.back(); }
    size_t size() const { return data.size(); }

    float& at(uint32_t ch, uint32_t y, uint32_t x) {
        return data[(static_cast<size_t>(ch) * h() + y) * w() + x];
    }
    float at(uint32_t ch, uint32_t y, uint32_t x) const {
        return data[(static_cast<size_t>(ch) * h() + y) * w() + x];
    }

    float* plane(uint32_t ch) { return data.data() + static_cast<size_t>(ch) * h() * w(); }
    const float* plane(uint32_t ch) const {
        return data.data() + static_cast<size_t>(ch) * h() * w();
    }

    bool same_shape(const Tensor& o) const { return dims == o.dims; }
};

// Raw tensor file: magic "FTSR", u32 rank, u32 dims[rank], little-endian f32 payload.
void write_tensor(const Tensor& t, const std::string& path);
Tensor read_tensor(const std::string& path);

}  // namespace slimdet
