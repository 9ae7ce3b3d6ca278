#include "data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "detect.hpp"
#include "error.hpp"
#include "image.hpp"
#include "rng.hpp"

namespace slimdet {

namespace fs = std::filesystem;

namespace {

constexpr int kNumClasses = static_cast<int>(std::size(kClassNames));

// A remapped box survives only when at least a quarter of it stays visible.
constexpr float kClipKeepFraction = 0.25f;

std::string trimmed(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<GroundTruth> parse_label_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open label file " + path);
    std::vector<GroundTruth> gts;
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = trimmed(raw);
        if (line.empty()) continue;
        std::istringstream ss(line);
        int cls;
        float cx, cy, w, h;
        std::string extra;
        if (!(ss >> cls >> cx >> cy >> w >> h) || (ss >> extra)) {
            fail(ErrorKind::parse, path + " line " + std::to_string(lineno) +
                                       ": expected 'class cx cy w h'");
        }
        if (cls < 0 || cls >= kNumClasses) {
            fail(ErrorKind::parse, path + " line " + std::to_string(lineno) +
                                       ": class id out of range");
        }
        if (!(cx >= 0.0f && cx <= 1.0f) || !(cy >= 0.0f && cy <= 1.0f) ||
            !(w > 0.0f && w <= 1.0f) || !(h > 0.0f && h <= 1.0f)) {
            fail(ErrorKind::parse,
                 path + " line " + std::to_string(lineno) + ": box out of range");
        }
        // Clamp overhang at the borders; the center was already checked.
        float x1 = std::max(0.0f, cx - w / 2), y1 = std::max(0.0f, cy - h / 2);
        float x2 = std::min(1.0f, cx + w / 2), y2 = std::min(1.0f, cy + h / 2);
        gts.push_back({Box::from_corners(x1, y1, x2, y2), cls});
    }
    return gts;
}

// Clips corner-form coordinates to a rectangle; false when the remnant is
// degenerate or keeps less than kClipKeepFraction of the box.
bool clip_box(float bx1, float by1, float bx2, float by2, float lo_x, float lo_y,
              float hi_x, float hi_y, Box* out) {
    float full = (bx2 - bx1) * (by2 - by1);
    if (full <= 0.0f) return false;
    float cx1 = std::max(bx1, lo_x), cy1 = std::max(by1, lo_y);
    float cx2 = std::min(bx2, hi_x), cy2 = std::min(by2, hi_y);
    if (cx2 - cx1 <= 0.0f || cy2 - cy1 <= 0.0f) return false;
    if ((cx2 - cx1) * (cy2 - cy1) < kClipKeepFraction * full) return false;
    *out = Box::from_corners(cx1, cy1, cx2, cy2);
    return true;
}

void check_image(const Sample& s, const char* who) {
    if (s.image.dims.size() != 3 || s.image.c() != 3 || s.image.w() == 0 || s.image.h() == 0)
        fail(ErrorKind::invalid, std::string(who) + " expects 3xHxW images");
}

}  // namespace

std::vector<Sample> load_dataset(const std::string& list_file, const std::string& label_dir) {
    std::ifstream in(list_file);
    if (!in) fail(ErrorKind::io, "cannot open image list " + list_file);
    fs::path base = fs::path(list_file).parent_path();

    std::vector<Sample> samples;
    std::string raw;
    while (std::getline(in, raw)) {
        std::string line = trimmed(raw);
        if (line.empty()) continue;
        fs::path img_path(line);
        if (img_path.is_relative()) img_path = base / img_path;

        fs::path label_name = img_path.stem();
        label_name += ".txt";
        fs::path label_path =
            label_dir.empty() ? img_path.parent_path() / label_name : fs::path(label_dir) / label_name;
        if (!fs::exists(label_path))
            fail(ErrorKind::io, "no label file for " + line + " (expected " +
                                    label_path.string() + ")");

        Sample s;
        s.image = read_image(img_path.string());
        s.gts = parse_label_file(label_path.string());
        s.source = line;
        samples.push_back(std::move(s));
    }
    return samples;
}

Box LetterboxMap::to_net(const Box& src) const {
    float sx = scale * src_w, sy = scale * src_h;
    return {(src.cx * sx + pad_x) / net_w, (src.cy * sy + pad_y) / net_h,
            src.w * sx / net_w, src.h * sy / net_h};
}

Box LetterboxMap::to_source(const Box& net) const {
    float sx = scale * src_w, sy = scale * src_h;
    return {(net.cx * net_w - pad_x) / sx, (net.cy * net_h - pad_y) / sy,
            net.w * net_w / sx, net.h * net_h / sy};
}

Sample letterbox(const Sample& s, uint32_t net_w, uint32_t net_h, LetterboxMap* map) {
    check_image(s, "letterbox");
    if (net_w == 0 || net_h == 0) fail(ErrorKind::invalid, "letterbox target must be positive");
    uint32_t sw = s.image.w(), sh = s.image.h();
    float scale = std::min(static_cast<float>(net_w) / sw, static_cast<float>(net_h) / sh);
    uint32_t new_w = std::min(net_w, static_cast<uint32_t>(std::lround(sw * scale)));
    uint32_t new_h = std::min(net_h, static_cast<uint32_t>(std::lround(sh * scale)));
    new_w = std::max(1u, new_w);
    new_h = std::max(1u, new_h);

    LetterboxMap m;
    m.src_w = sw;
    m.src_h = sh;
    m.net_w = net_w;
    m.net_h = net_h;
    m.scale = scale;
    m.pad_x = (net_w - new_w) / 2;
    m.pad_y = (net_h - new_h) / 2;

    Sample out;
    out.source = s.source;
    out.image = Tensor(3, net_h, net_w);
    std::fill(out.image.data.begin(), out.image.data.end(), 0.5f);
    Tensor resized = (new_w == sw && new_h == sh) ? s.image : resize_bilinear(s.image, new_w, new_h);
    for (uint32_t ch = 0; ch < 3; ++ch)
        for (uint32_t y = 0; y < new_h; ++y)
            for (uint32_t x = 0; x < new_w; ++x)
                out.image.at(ch, y + m.pad_y, x + m.pad_x) = resized.at(ch, y, x);

    out.gts.reserve(s.gts.size());
    for (const GroundTruth& gt : s.gts) out.gts.push_back({m.to_net(gt.box), gt.class_id});
    if (map) *map = m;
    return out;
}

Sample mosaic(const std::vector<Sample>& tiles, uint32_t net_w, uint32_t net_h, uint64_t seed) {
    if (tiles.size() != 4) fail(ErrorKind::invalid, "mosaic needs exactly 4 tiles");
    for (const Sample& t : tiles) check_image(t, "mosaic");
    if (net_w < 4 || net_h < 4) fail(ErrorKind::invalid, "mosaic target too small");

    Rng rng(seed);
    float px = rng.uniform(0.3f, 0.7f);
    float py = rng.uniform(0.3f, 0.7f);
    uint32_t cut_x = std::clamp<uint32_t>(static_cast<uint32_t>(std::lround(px * net_w)), 1, net_w - 1);
    uint32_t cut_y = std::clamp<uint32_t>(static_cast<uint32_t>(std::lround(py * net_h)), 1, net_h - 1);

    Sample out;
    out.image = Tensor(3, net_h, net_w);
    out.source = "mosaic";

    const uint32_t origin[4][2] = {{0, 0}, {cut_x, 0}, {0, cut_y}, {cut_x, cut_y}};
    const uint32_t extent[4][2] = {{cut_x, cut_y},
                                   {net_w - cut_x, cut_y},
                                   {cut_x, net_h - cut_y},
                                   {net_w - cut_x, net_h - cut_y}};
    for (int q = 0; q < 4; ++q) {
        uint32_t ox = origin[q][0], oy = origin[q][1];
        uint32_t qw = extent[q][0], qh = extent[q][1];
        const Sample& tile = tiles[q];
        uint32_t sw = tile.image.w(), sh = tile.image.h();

        // Cover-scale the tile, then center-crop the quadrant out of it.
        float s = std::max(static_cast<float>(qw) / sw, static_cast<float>(qh) / sh);
        uint32_t rw = std::max(qw, static_cast<uint32_t>(std::lround(sw * s)));
        uint32_t rh = std::max(qh, static_cast<uint32_t>(std::lround(sh * s)));
        Tensor scaled = resize_bilinear(tile.image, rw, rh);
        uint32_t cx0 = (rw - qw) / 2, cy0 = (rh - qh) / 2;
        for (uint32_t ch = 0; ch < 3; ++ch)
            for (uint32_t y = 0; y < qh; ++y)
                for (uint32_t x = 0; x < qw; ++x)
                    out.image.at(ch, oy + y, ox + x) = scaled.at(ch, cy0 + y, cx0 + x);

        float lo_x = static_cast<float>(ox) / net_w, hi_x = static_cast<float>(ox + qw) / net_w;
        float lo_y = static_cast<float>(oy) / net_h, hi_y = static_cast<float>(oy + qh) / net_h;
        for (const GroundTruth& gt : tile.gts) {
            float bx1 = (gt.box.x1() * sw * s - cx0 + ox) / net_w;
            float bx2 = (gt.box.x2() * sw * s - cx0 + ox) / net_w;
            float by1 = (gt.box.y1() * sh * s - cy0 + oy) / net_h;
            float by2 = (gt.box.y2() * sh * s - cy0 + oy) / net_h;
            Box clipped;
            if (clip_box(bx1, by1, bx2, by2, lo_x, lo_y, hi_x, hi_y, &clipped))
                out.gts.push_back({clipped, gt.class_id});
        }
    }
    return out;
}

namespace {

void apply_crop(Sample& s, Rng& rng, float crop_max) {
    int w = static_cast<int>(s.image.w()), h = static_cast<int>(s.image.h());
    float trim[4];
    for (float& t : trim) t = rng.uniform(0.0f, crop_max);
    int x0 = static_cast<int>(std::lround(trim[0] * w));
    int y0 = static_cast<int>(std::lround(trim[1] * h));
    int x1 = w - static_cast<int>(std::lround(trim[2] * w));
    int y1 = h - static_cast<int>(std::lround(trim[3] * h));
    x1 = std::min(w, std::max(x1, x0 + 2));
    y1 = std::min(h, std::max(y1, y0 + 2));
    if (x0 == 0 && y0 == 0 && x1 == w && y1 == h) return;

    Tensor crop(3, static_cast<uint32_t>(y1 - y0), static_cast<uint32_t>(x1 - x0));
    for (uint32_t ch = 0; ch < 3; ++ch)
        for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x)
                crop.at(ch, y - y0, x - x0) = s.image.at(ch, y, x);
    s.image = resize_bilinear(crop, w, h);

    std::vector<GroundTruth> kept;
    float cw = static_cast<float>(x1 - x0), chh = static_cast<float>(y1 - y0);
    for (const GroundTruth& gt : s.gts) {
        float bx1 = (gt.box.x1() * w - x0) / cw, bx2 = (gt.box.x2() * w - x0) / cw;
        float by1 = (gt.box.y1() * h - y0) / chh, by2 = (gt.box.y2() * h - y0) / chh;
        Box clipped;
        if (clip_box(bx1, by1, bx2, by2, 0.0f, 0.0f, 1.0f, 1.0f, &clipped))
            kept.push_back({clipped, gt.class_id});
    }
    s.gts = std::move(kept);
}

void apply_flip(Sample& s) {
    uint32_t w = s.image.w(), h = s.image.h();
    for (uint32_t ch = 0; ch < 3; ++ch)
        for (uint32_t y = 0; y < h; ++y)
            for (uint32_t x = 0; x < w / 2; ++x)
                std::swap(s.image.at(ch, y, x), s.image.at(ch, y, w - 1 - x));
    for (GroundTruth& gt : s.gts) gt.box.cx = 1.0f - gt.box.cx;
}

void apply_affine(Sample& s, Rng& rng, float shift_max, float zoom_max) {
    float z = rng.uniform(1.0f - zoom_max, 1.0f + zoom_max);
    float dx = rng.uniform(-shift_max, shift_max);
    float dy = rng.uniform(-shift_max, shift_max);
    int w = static_cast<int>(s.image.w()), h = static_cast<int>(s.image.h());

    // Forward map on normalized coordinates: p' = (p - 0.5) * z + 0.5 + d.
    Tensor src = s.image;
    auto tap = [&](uint32_t ch, int y, int x) -> float {
        if (x < 0 || y < 0 || x >= w || y >= h) return 0.5f;
        return src.at(ch, y, x);
    };
    for (int y = 0; y < h; ++y) {
        float yn = ((y + 0.5f) / h - 0.5f - dy) / z + 0.5f;
        float fy = yn * h - 0.5f;
        int y0 = static_cast<int>(std::floor(fy));
        float wy = fy - y0;
        for (int x = 0; x < w; ++x) {
            float xn = ((x + 0.5f) / w - 0.5f - dx) / z + 0.5f;
            float fx = xn * w - 0.5f;
            int x0 = static_cast<int>(std::floor(fx));
            float wx = fx - x0;
            for (uint32_t ch = 0; ch < 3; ++ch) {
                float top = tap(ch, y0, x0) * (1.0f - wx) + tap(ch, y0, x0 + 1) * wx;
                float bot = tap(ch, y0 + 1, x0) * (1.0f - wx) + tap(ch, y0 + 1, x0 + 1) * wx;
                s.image.at(ch, y, x) = top * (1.0f - wy) + bot * wy;
            }
        }
    }

    std::vector<GroundTruth> kept;
    for (const GroundTruth& gt : s.gts) {
        float bx1 = (gt.box.x1() - 0.5f) * z + 0.5f + dx;
        float bx2 = (gt.box.x2() - 0.5f) * z + 0.5f + dx;
        float by1 = (gt.box.y1() - 0.5f) * z + 0.5f + dy;
        float by2 = (gt.box.y2() - 0.5f) * z + 0.5f + dy;
        Box clipped;
        if (clip_box(bx1, by1, bx2, by2, 0.0f, 0.0f, 1.0f, 1.0f, &clipped))
            kept.push_back({clipped, gt.class_id});
    }
    s.gts = std::move(kept);
}

void rgb_to_hsv(float r, float g, float b, float* hh, float* ss, float* vv) {
    float mx = std::max({r, g, b}), mn = std::min({r, g, b});
    float d = mx - mn;
    float h = 0.0f;
    if (d > 0.0f) {
        if (mx == r)
            h = (g - b) / d;
        else if (mx == g)
            h = (b - r) / d + 2.0f;
        else
            h = (r - g) / d + 4.0f;
        h /= 6.0f;
        if (h < 0.0f) h += 1.0f;
    }
    *hh = h;
    *ss = mx > 0.0f ? d / mx : 0.0f;
    *vv = mx;
}

void hsv_to_rgb(float h, float s, float v, float* r, float* g, float* b) {
    float hh = (h - std::floor(h)) * 6.0f;
    int i = std::min(5, static_cast<int>(hh));
    float f = hh - i;
    float p = v * (1.0f - s);
    float q = v * (1.0f - s * f);
    float t = v * (1.0f - s * (1.0f - f));
    switch (i) {
        case 0: *r = v; *g = t; *b = p; break;
        case 1: *r = q; *g = v; *b = p; break;
        case 2: *r = p; *g = v; *b = t; break;
        case 3: *r = p; *g = q; *b = v; break;
        case 4: *r = t; *g = p; *b = v; break;
        default: *r = v; *g = p; *b = q; break;
    }
}

void apply_hsv(Sample& s, Rng& rng, const AugmentConfig& cfg) {
    float dh = rng.uniform(-cfg.hue_max, cfg.hue_max);
    float sg = rng.uniform(1.0f - cfg.sat_max, 1.0f + cfg.sat_max);
    float vg = rng.uniform(1.0f - cfg.val_max, 1.0f + cfg.val_max);
    uint32_t n = s.image.h() * s.image.w();
    float* r = s.image.plane(0);
    float* g = s.image.plane(1);
    float* b = s.image.plane(2);
    for (uint32_t i = 0; i < n; ++i) {
        float h, sa, v;
        rgb_to_hsv(r[i], g[i], b[i], &h, &sa, &v);
        h += dh;
        h -= std::floor(h);
        sa = std::clamp(sa * sg, 0.0f, 1.0f);
        v = std::clamp(v * vg, 0.0f, 1.0f);
        hsv_to_rgb(h, sa, v, &r[i], &g[i], &b[i]);
    }
}

void apply_blur(Sample& s) {
    int w = static_cast<int>(s.image.w()), h = static_cast<int>(s.image.h());
    Tensor src = s.image;
    for (uint32_t ch = 0; ch < 3; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                float sum = 0.0f;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        int yy = std::clamp(y + dy, 0, h - 1);
                        int xx = std::clamp(x + dx, 0, w - 1);
                        sum += src.at(ch, yy, xx);
                    }
                s.image.at(ch, y, x) = sum / 9.0f;
            }
}

}  // namespace

Sample basic_transforms(const Sample& s, const AugmentConfig& cfg, uint64_t seed) {
    check_image(s, "basic_transforms");
    for (float p : {cfg.crop_prob, cfg.flip_prob, cfg.hsv_prob, cfg.blur_prob, cfg.affine_prob})
        if (!(p >= 0.0f && p <= 1.0f))
            fail(ErrorKind::invalid, "augment probability out of range");

    Rng rng(seed);
    Sample out = s;
    if (rng.uniform() < cfg.crop_prob) apply_crop(out, rng, cfg.crop_max);
    if (rng.uniform() < cfg.flip_prob) apply_flip(out);
    if (rng.uniform() < cfg.affine_prob) apply_affine(out, rng, cfg.shift_max, cfg.zoom_max);
    if (rng.uniform() < cfg.hsv_prob) apply_hsv(out, rng, cfg);
    if (rng.uniform() < cfg.blur_prob) apply_blur(out);
    return out;
}

std::vector<Sample> synthetic_shapes(const ShapesConfig& cfg, uint64_t seed) {
    if (cfg.width < 16 || cfg.height < 16) fail(ErrorKind::invalid, "shapes canvas too small");
    if (cfg.min_objects < 1 || cfg.max_objects < cfg.min_objects)
        fail(ErrorKind::invalid, "bad object count range");

    Rng base(seed);
    std::vector<Sample> samples;
    samples.reserve(cfg.count);
    for (uint32_t idx = 0; idx < cfg.count; ++idx) {
        Rng rng = base.fork(idx);
        Sample s;
        s.image = Tensor(3, cfg.height, cfg.width);
        s.source = "shapes:" + std::to_string(idx);
        for (float& v : s.image.data) v = rng.uniform(0.05f, 0.30f);

        uint32_t n = cfg.min_objects + rng.below(cfg.max_objects - cfg.min_objects + 1);
        for (uint32_t obj = 0; obj < n; ++obj) {
            int cls = static_cast<int>(rng.below(3));
            bool ellipse = rng.below(2) == 1;
            Box box;
            for (int attempt = 0; attempt < 20; ++attempt) {
                float bw = rng.uniform(0.18f, 0.45f);
                float bh = rng.uniform(0.18f, 0.45f);
                box = {rng.uniform(bw / 2, 1.0f - bw / 2), rng.uniform(bh / 2, 1.0f - bh / 2),
                       bw, bh};
                float worst = 0.0f;
                for (const GroundTruth& prev : s.gts) worst = std::max(worst, iou(box, prev.box));
                if (worst <= 0.05f) break;
            }
            float color[3];
            for (int ch = 0; ch < 3; ++ch)
                color[ch] = std::clamp(kClassColors[cls][ch] + rng.uniform(-0.06f, 0.06f),
                                       0.0f, 1.0f);

            float ccx = box.cx * cfg.width, ccy = box.cy * cfg.height;
            float rx = box.w * cfg.width / 2, ry = box.h * cfg.height / 2;
            int x1 = std::max(0, static_cast<int>(std::floor(box.x1() * cfg.width)));
            int x2 = std::min<int>(cfg.width - 1, static_cast<int>(std::ceil(box.x2() * cfg.width)));
            int y1 = std::max(0, static_cast<int>(std::floor(box.y1() * cfg.height)));
            int y2 = std::min<int>(cfg.height - 1, static_cast<int>(std::ceil(box.y2() * cfg.height)));
            for (int y = y1; y <= y2; ++y)
                for (int x = x1; x <= x2; ++x) {
                    if (ellipse) {
                        float ex = (x + 0.5f - ccx) / rx, ey = (y + 0.5f - ccy) / ry;
                        if (ex * ex + ey * ey > 1.0f) continue;
                    }
                    float shade = rng.uniform(-0.03f, 0.03f);
                    for (int ch = 0; ch < 3; ++ch)
                        s.image.at(ch, y, x) = std::clamp(color[ch] + shade, 0.0f, 1.0f);
                }
            s.gts.push_back({box, cls});
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

std::string write_dataset(const std::vector<Sample>& samples, const std::string& dir) {
    fs::create_directories(fs::path(dir) / "images");
    fs::create_directories(fs::path(dir) / "labels");
    std::string list_path = (fs::path(dir) / "list.txt").string();
    std::ofstream list(list_path);
    if (!list) fail(ErrorKind::io, "cannot write " + list_path);

    char name[16];
    for (size_t i = 0; i < samples.size(); ++i) {
        std::snprintf(name, sizeof(name), "%04zu", i);
        std::string rel = std::string("images/") + name + ".png";
        write_png(samples[i].image, (fs::path(dir) / rel).string());

        std::string label_path = (fs::path(dir) / "labels" / (std::string(name) + ".txt")).string();
        std::ofstream label(label_path);
        if (!label) fail(ErrorKind::io, "cannot write " + label_path);
        char line[128];
        for (const GroundTruth& gt : samples[i].gts) {
            std::snprintf(line, sizeof(line), "%d %.6f %.6f %.6f %.6f\n", gt.class_id,
                          gt.box.cx, gt.box.cy, gt.box.w, gt.box.h);
            label << line;
        }
        list << rel << "\n";
    }
    return list_path;
}

}  // namespace slimdet
