#include "image.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

#include "error.hpp"

namespace slimdet {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
    FilePtr fp(std::fopen(path.c_str(), mode));
    if (!fp) fail(ErrorKind::io, "cannot open " + path);
    return fp;
}

uint8_t quantize(float v) {
    float c = std::clamp(v, 0.0f, 1.0f);
    return static_cast<uint8_t>(std::lround(c * 255.0f));
}

Tensor from_rgb8(const std::vector<uint8_t>& rgb, uint32_t w, uint32_t h) {
    Tensor t(3, h, w);
    const float inv = 1.0f / 255.0f;
    for (uint32_t y = 0; y < h; ++y) {
        const uint8_t* row = rgb.data() + static_cast<size_t>(y) * w * 3;
        for (uint32_t x = 0; x < w; ++x) {
            t.at(0, y, x) = row[x * 3 + 0] * inv;
            t.at(1, y, x) = row[x * 3 + 1] * inv;
            t.at(2, y, x) = row[x * 3 + 2] * inv;
        }
    }
    return t;
}

std::vector<uint8_t> to_rgb8(const Tensor& image) {
    if (image.dims.size() != 3 || image.c() != 3)
        fail(ErrorKind::invalid, "image tensor must be 3xHxW");
    uint32_t w = image.w(), h = image.h();
    std::vector<uint8_t> rgb(static_cast<size_t>(w) * h * 3);
    for (uint32_t y = 0; y < h; ++y) {
        uint8_t* row = rgb.data() + static_cast<size_t>(y) * w * 3;
        for (uint32_t x = 0; x < w; ++x) {
            row[x * 3 + 0] = quantize(image.at(0, y, x));
            row[x * 3 + 1] = quantize(image.at(1, y, x));
            row[x * 3 + 2] = quantize(image.at(2, y, x));
        }
    }
    return rgb;
}

Tensor read_png_file(FILE* fp, const std::string& path) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) fail(ErrorKind::io, "png reader allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        fail(ErrorKind::io, "png reader allocation failed");
    }

    std::vector<uint8_t> pixels;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(ErrorKind::io, "corrupt png: " + path);
    }

    png_init_io(png, fp);
    png_read_info(png, info);

    png_byte color = png_get_color_type(png, info);
    png_byte depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    uint32_t w = png_get_image_width(png, info);
    uint32_t h = png_get_image_height(png, info);
    size_t stride = png_get_rowbytes(png, info);

    pixels.resize(stride * h);
    rows.resize(h);
    for (uint32_t y = 0; y < h; ++y) rows[y] = pixels.data() + static_cast<size_t>(y) * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    if (stride != static_cast<size_t>(w) * 3) fail(ErrorKind::io, "unexpected png layout: " + path);
    return from_rgb8(pixels, w, h);
}

struct JpegErr {
    jpeg_error_mgr mgr;
    jmp_buf jump;
};

void jpeg_error_trap(j_common_ptr cinfo) {
    longjmp(reinterpret_cast<JpegErr*>(cinfo->err)->jump, 1);
}

Tensor read_jpeg_file(FILE* fp, const std::string& path) {
    jpeg_decompress_struct cinfo;
    JpegErr err;
    cinfo.err = jpeg_std_error(&err.mgr);
    err.mgr.error_exit = jpeg_error_trap;

    std::vector<uint8_t> pixels;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        fail(ErrorKind::io, "corrupt jpeg: " + path);
    }

    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, fp);
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);

    uint32_t w = cinfo.output_width;
    uint32_t h = cinfo.output_height;
    size_t stride = static_cast<size_t>(w) * 3;
    pixels.resize(stride * h);
    while (cinfo.output_scanline < h) {
        JSAMPROW row = pixels.data() + cinfo.output_scanline * stride;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return from_rgb8(pixels, w, h);
}

}  // namespace

Tensor read_image(const std::string& path) {
    FilePtr fp = open_file(path, "rb");
    uint8_t magic[2] = {0, 0};
    if (std::fread(magic, 1, 2, fp.get()) != 2)
        fail(ErrorKind::io, "truncated image file: " + path);
    std::rewind(fp.get());
    if (magic[0] == 0x89 && magic[1] == 'P') return read_png_file(fp.get(), path);
    if (magic[0] == 0xff && magic[1] == 0xd8) return read_jpeg_file(fp.get(), path);
    fail(ErrorKind::io, "unsupported image format: " + path);
}

void write_png(const Tensor& image, const std::string& path) {
    std::vector<uint8_t> rgb = to_rgb8(image);
    uint32_t w = image.w(), h = image.h();
    FilePtr fp = open_file(path, "wb");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) fail(ErrorKind::io, "png writer allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        fail(ErrorKind::io, "png writer allocation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail(ErrorKind::io, "png write failed: " + path);
    }

    png_init_io(png, fp.get());
    png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (uint32_t y = 0; y < h; ++y)
        png_write_row(png, rgb.data() + static_cast<size_t>(y) * w * 3);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void write_jpeg(const Tensor& image, const std::string& path, int quality) {
    std::vector<uint8_t> rgb = to_rgb8(image);
    uint32_t w = image.w(), h = image.h();
    FilePtr fp = open_file(path, "wb");

    jpeg_compress_struct cinfo;
    JpegErr err;
    cinfo.err = jpeg_std_error(&err.mgr);
    err.mgr.error_exit = jpeg_error_trap;
    if (setjmp(err.jump)) {
        jpeg_destroy_compress(&cinfo);
        fail(ErrorKind::io, "jpeg write failed: " + path);
    }

    jpeg_create_compress(&cinfo);
    jpeg_stdio_dest(&cinfo, fp.get());
    cinfo.image_width = w;
    cinfo.image_height = h;
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    size_t stride = static_cast<size_t>(w) * 3;
    while (cinfo.next_scanline < h) {
        JSAMPROW row = rgb.data() + cinfo.next_scanline * stride;
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
}

Tensor resize_bilinear(const Tensor& image, uint32_t out_w, uint32_t out_h) {
    if (image.dims.size() != 3) fail(ErrorKind::invalid, "resize expects a 3-d image tensor");
    if (out_w == 0 || out_h == 0) fail(ErrorKind::invalid, "resize target must be positive");
    uint32_t c = image.c(), in_h = image.h(), in_w = image.w();
    Tensor out(c, out_h, out_w);
    float sx = static_cast<float>(in_w) / out_w;
    float sy = static_cast<float>(in_h) / out_h;
    for (uint32_t y = 0; y < out_h; ++y) {
        float fy = (y + 0.5f) * sy - 0.5f;
        float cy = std::clamp(fy, 0.0f, static_cast<float>(in_h - 1));
        uint32_t y0 = static_cast<uint32_t>(cy);
        uint32_t y1 = std::min(y0 + 1, in_h - 1);
        float wy = cy - y0;
        for (uint32_t x = 0; x < out_w; ++x) {
            float fx = (x + 0.5f) * sx - 0.5f;
            float cx = std::clamp(fx, 0.0f, static_cast<float>(in_w - 1));
            uint32_t x0 = static_cast<uint32_t>(cx);
            uint32_t x1 = std::min(x0 + 1, in_w - 1);
            float wx = cx - x0;
            for (uint32_t ch = 0; ch < c; ++ch) {
                float top = image.at(ch, y0, x0) * (1.0f - wx) + image.at(ch, y0, x1) * wx;
                float bot = image.at(ch, y1, x0) * (1.0f - wx) + image.at(ch, y1, x1) * wx;
                out.at(ch, y, x) = top * (1.0f - wy) + bot * wy;
            }
        }
    }
    return out;
}

const float kClassColors[3][3] = {
    {0.15f, 0.35f, 0.95f},  // plastic: blue
    {0.95f, 0.55f, 0.10f},  // bio: orange
    {0.95f, 0.25f, 0.65f},  // rov: pink
};

void draw_box(Tensor& image, const Box& box, int class_id, uint32_t thickness) {
    if (image.dims.size() != 3 || image.c() != 3)
        fail(ErrorKind::invalid, "draw target must be 3xHxW");
    if (class_id < 0 || class_id > 2) fail(ErrorKind::invalid, "class id out of range");
    const float* color = kClassColors[class_id];
    int w = static_cast<int>(image.w()), h = static_cast<int>(image.h());
    int x1 = std::clamp(static_cast<int>(std::lround(box.x1() * w)), 0, w - 1);
    int x2 = std::clamp(static_cast<int>(std::lround(box.x2() * w)), 0, w - 1);
    int y1 = std::clamp(static_cast<int>(std::lround(box.y1() * h)), 0, h - 1);
    int y2 = std::clamp(static_cast<int>(std::lround(box.y2() * h)), 0, h - 1);
    int t = static_cast<int>(thickness);
    auto paint = [&](int y, int x) {
        for (int ch = 0; ch < 3; ++ch) image.at(ch, y, x) = color[ch];
    };
    for (int y = y1; y <= y2; ++y)
        for (int dx = 0; dx < t; ++dx) {
            paint(y, std::min(x1 + dx, w - 1));
            paint(y, std::max(x2 - dx, 0));
        }
    for (int x = x1; x <= x2; ++x)
        for (int dy = 0; dy < t; ++dy) {
            paint(std::min(y1 + dy, h - 1), x);
            paint(std::max(y2 - dy, 0), x);
        }
}

}  // namespace slimdet
