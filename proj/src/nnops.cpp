#include "nnops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "error.hpp"
#include "parallel.hpp"

namespace slimdet {

namespace {

void check_kernel(const Tensor& x, const Tensor& kernel) {
    if (kernel.dims.size() != 4)
        fail(ErrorKind::invalid, "conv kernel must be rank 4 (n,c,kh,kw)");
    if (kernel.dims[1] != x.c())
        fail(ErrorKind::invalid, "channel mismatch: input has " + std::to_string(x.c()) +
                                     ", kernel expects " + std::to_string(kernel.dims[1]));
}

// Output extent for one spatial axis.
uint32_t conv_extent(uint32_t in, uint32_t k, uint32_t stride, uint32_t pad) {
    int64_t span = static_cast<int64_t>(in) + 2 * pad - k;
    if (span < 0) fail(ErrorKind::invalid, "kernel larger than padded input");
    return static_cast<uint32_t>(span / stride + 1);
}

// Valid output positions for a kernel tap: ix = ox*stride + k - pad in [0, in).
void tap_range(uint32_t out, uint32_t in, uint32_t stride, int64_t off, uint32_t& lo, uint32_t& hi) {
    int64_t first = off >= 0 ? 0 : (-off + stride - 1) / stride;
    int64_t last = (static_cast<int64_t>(in) - 1 - off) / stride;
    lo = static_cast<uint32_t>(std::clamp<int64_t>(first, 0, out));
    hi = static_cast<uint32_t>(std::clamp<int64_t>(last + 1, 0, out));
}

}  // namespace

Tensor conv2d_forward(const Tensor& x, const Tensor& kernel, uint32_t stride, uint32_t pad) {
    check_kernel(x, kernel);
    uint32_t n = kernel.dims[0], c = kernel.dims[1], kh = kernel.dims[2], kw = kernel.dims[3];
    uint32_t oh = conv_extent(x.h(), kh, stride, pad);
    uint32_t ow = conv_extent(x.w(), kw, stride, pad);
    Tensor out(n, oh, ow);

    parallel_for(n, [&](size_t oc) {
        for (uint32_t oy = 0; oy < oh; ++oy) {
            float* acc = out.plane(static_cast<uint32_t>(oc)) + static_cast<size_t>(oy) * ow;
            for (uint32_t ky = 0; ky < kh; ++ky) {
                int64_t iy = static_cast<int64_t>(oy) * stride + ky - pad;
                if (iy < 0 || iy >= x.h()) continue;
                for (uint32_t kx = 0; kx < kw; ++kx) {
                    int64_t off = static_cast<int64_t>(kx) - pad;
                    uint32_t lo, hi;
                    tap_range(ow, x.w(), stride, off, lo, hi);
                    for (uint32_t ic = 0; ic < c; ++ic) {
                        float w = kernel.data[((static_cast<size_t>(oc) * c + ic) * kh + ky) * kw + kx];
                        const float* row = x.plane(ic) + static_cast<size_t>(iy) * x.w() + off;
                        for (uint32_t ox = lo; ox < hi; ++ox)
                            acc[ox] = std::fma(w, row[static_cast<size_t>(ox) * stride], acc[ox]);
                    }
                }
            }
        }
    });
    return out;
}

ConvGrads conv2d_backward(const Tensor& x, const Tensor& kernel, uint32_t stride, uint32_t pad,
                          const Tensor& dy) {
    check_kernel(x, kernel);
    uint32_t n = kernel.dims[0], c = kernel.dims[1], kh = kernel.dims[2], kw = kernel.dims[3];
    uint32_t oh = dy.h(), ow = dy.w();
    if (dy.c() != n) fail(ErrorKind::invalid, "upstream gradient channel mismatch");

    ConvGrads g;
    g.dx = Tensor::zeros_like(x);
    g.dkernel = Tensor::zeros_like(kernel);

    // dkernel: each output channel owned by one worker
    parallel_for(n, [&](size_t oc) {
        for (uint32_t ic = 0; ic < c; ++ic) {
            for (uint32_t ky = 0; ky < kh; ++ky) {
                for (uint32_t kx = 0; kx < kw; ++kx) {
                    int64_t off = static_cast<int64_t>(kx) - pad;
                    float acc = 0.0f;
                    for (uint32_t oy = 0; oy < oh; ++oy) {
                        int64_t iy = static_cast<int64_t>(oy) * stride + ky - pad;
                        if (iy < 0 || iy >= x.h()) continue;
                        uint32_t lo, hi;
                        tap_range(ow, x.w(), stride, off, lo, hi);
                        const float* drow =
                            dy.plane(static_cast<uint32_t>(oc)) + static_cast<size_t>(oy) * ow;
                        const float* row = x.plane(ic) + static_cast<size_t>(iy) * x.w() + off;
                        for (uint32_t ox = lo; ox < hi; ++ox)
                            acc = std::fma(drow[ox], row[static_cast<size_t>(ox) * stride], acc);
                    }
                    g.dkernel.data[((static_cast<size_t>(oc) * c + ic) * kh + ky) * kw + kx] = acc;
                }
            }
        }
    });

    // dx: each input channel owned by one worker, fixed (oc, ky, kx, oy) term order
    parallel_for(c, [&](size_t ic) {
        for (uint32_t oc = 0; oc < n; ++oc) {
            for (uint32_t ky = 0; ky < kh; ++ky) {
                for (uint32_t kx = 0; kx < kw; ++kx) {
                    float w = kernel.data[((static_cast<size_t>(oc) * c + ic) * kh + ky) * kw + kx];
                    int64_t off = static_cast<int64_t>(kx) - pad;
                    for (uint32_t oy = 0; oy < oh; ++oy) {
                        int64_t iy = static_cast<int64_t>(oy) * stride + ky - pad;
                        if (iy < 0 || iy >= x.h()) continue;
                        uint32_t lo, hi;
                        tap_range(ow, x.w(), stride, off, lo, hi);
                        const float* drow = dy.plane(oc) + static_cast<size_t>(oy) * ow;
                        float* xrow =
                            g.dx.plane(static_cast<uint32_t>(ic)) + static_cast<size_t>(iy) * x.w() + off;
                        for (uint32_t ox = lo; ox < hi; ++ox)
                            xrow[static_cast<size_t>(ox) * stride] =
                                std::fma(w, drow[ox], xrow[static_cast<size_t>(ox) * stride]);
                    }
                }
            }
        }
    });
    return g;
}

void add_bias(Tensor& x, const std::vector<float>& bias) {
    if (bias.size() != x.c()) fail(ErrorKind::invalid, "bias length does not match channels");
    size_t hw = static_cast<size_t>(x.h()) * x.w();
    for (uint32_t ch = 0; ch < x.c(); ++ch) {
        float b = bias[ch];
        float* p = x.plane(ch);
        for (size_t i = 0; i < hw; ++i) p[i] += b;
    }
}

std::vector<float> bias_gradient(const Tensor& dy) {
    std::vector<float> db(dy.c(), 0.0f);
    size_t hw = static_cast<size_t>(dy.h()) * dy.w();
    for (uint32_t ch = 0; ch < dy.c(); ++ch) {
        const float* p = dy.plane(ch);
        float acc = 0.0f;
        for (size_t i = 0; i < hw; ++i) acc += p[i];
        db[ch] = acc;
    }
    return db;
}

Tensor batchnorm_forward(const Tensor& x, const BnParams& p) {
    if (p.gamma.size() != x.c() || p.beta.size() != x.c() || p.mean.size() != x.c() ||
        p.var.size() != x.c())
        fail(ErrorKind::invalid, "batchnorm parameter length does not match channels");
    if (p.epsilon <= 0.0f) fail(ErrorKind::invalid, "batchnorm epsilon must be positive");
    Tensor y = x;
    size_t hw = static_cast<size_t>(x.h()) * x.w();
    for (uint32_t ch = 0; ch < x.c(); ++ch) {
        if (p.var[ch] < 0.0f)
            fail(ErrorKind::invalid, "negative variance at channel " + std::to_string(ch));
        float scale = p.gamma[ch] / std::sqrt(p.var[ch] + p.epsilon);
        float mean = p.mean[ch], shift = p.beta[ch];
        float* row = y.plane(ch);
        for (size_t i = 0; i < hw; ++i) row[i] = scale * (row[i] - mean) + shift;
    }
    return y;
}

BnGrads batchnorm_backward(const Tensor& x, const BnParams& p, const Tensor& dy) {
    if (!x.same_shape(dy)) fail(ErrorKind::invalid, "batchnorm gradient shape mismatch");
    BnGrads g;
    g.dx = Tensor::zeros_like(x);
    g.dgamma.assign(x.c(), 0.0f);
    g.dbeta.assign(x.c(), 0.0f);
    size_t hw = static_cast<size_t>(x.h()) * x.w();
    for (uint32_t ch = 0; ch < x.c(); ++ch) {
        float inv = 1.0f / std::sqrt(p.var[ch] + p.epsilon);
        float scale = p.gamma[ch] * inv;
        float mean = p.mean[ch];
        const float* xr = x.plane(ch);
        const float* dr = dy.plane(ch);
        float* out = g.dx.plane(ch);
        float dgamma = 0.0f, dbeta = 0.0f;
        for (size_t i = 0; i < hw; ++i) {
            dgamma = std::fma(dr[i], (xr[i] - mean) * inv, dgamma);
            dbeta += dr[i];
            out[i] = dr[i] * scale;
        }
        g.dgamma[ch] = dgamma;
        g.dbeta[ch] = dbeta;
    }
    return g;
}

void fold_batchnorm(Tensor& kernel, std::vector<float>& bias, const BnParams& p) {
    uint32_t n = kernel.dims[0];
    if (p.gamma.size() != n) fail(ErrorKind::invalid, "fold: parameter length mismatch");
    if (bias.empty()) bias.assign(n, 0.0f);
    size_t per = kernel.data.size() / n;
    for (uint32_t oc = 0; oc < n; ++oc) {
        float scale = p.gamma[oc] / std::sqrt(p.var[oc] + p.epsilon);
        float* w = kernel.data.data() + static_cast<size_t>(oc) * per;
        for (size_t i = 0; i < per; ++i) w[i] *= scale;
        bias[oc] = p.beta[oc] + scale * (bias[oc] - p.mean[oc]);
    }
}

float activate_one(float x, Activation kind) {
    switch (kind) {
        case Activation::linear:
            return x;
        case Activation::leaky:
            return x > 0.0f ? x : 0.1f * x;
        case Activation::sigmoid:
            return 1.0f / (1.0f + std::exp(-x));
        case Activation::mish: {
            // softplus with overflow guard; exp underflow is harmless
            float sp = x > 20.0f ? x : std::log1p(std::exp(x));
            return x * std::tanh(sp);
        }
    }
    return x;
}

float activate_gradient_one(float x, Activation kind) {
    // double intermediates: the mish derivative loses precision in float near
    // its stationary point, and gradient checks budget 1e-4 relative
    switch (kind) {
        case Activation::linear:
            return 1.0f;
        case Activation::leaky:
            return x > 0.0f ? 1.0f : 0.1f;
        case Activation::sigmoid: {
            double s = 1.0 / (1.0 + std::exp(static_cast<double>(-x)));
            return static_cast<float>(s * (1.0 - s));
        }
        case Activation::mish: {
            double xd = x;
            double sp = xd > 20.0 ? xd : std::log1p(std::exp(xd));
            double t = std::tanh(sp);
            double sig = 1.0 / (1.0 + std::exp(-xd));
            return static_cast<float>(t + xd * (1.0 - t * t) * sig);
        }
    }
    return 1.0f;
}

Tensor activate(const Tensor& x, Activation kind) {
    if (kind == Activation::linear) return x;
    Tensor y = x;
    for (float& v : y.data) v = activate_one(v, kind);
    return y;
}

Tensor activate_backward(const Tensor& x, Activation kind, const Tensor& dy) {
    if (!x.same_shape(dy)) fail(ErrorKind::invalid, "activation gradient shape mismatch");
    Tensor dx = dy;
    if (kind == Activation::linear) return dx;
    for (size_t i = 0; i < dx.data.size(); ++i)
        dx.data[i] = dy.data[i] * activate_gradient_one(x.data[i], kind);
    return dx;
}

Tensor maxpool_forward(const Tensor& x, uint32_t size, uint32_t stride,
                       std::vector<uint32_t>* argmax) {
    uint32_t oh = (x.h() - 1) / stride + 1;
    uint32_t ow = (x.w() - 1) / stride + 1;
    uint32_t pad = (size - 1) / 2;
    Tensor out(x.c(), oh, ow);
    if (argmax) argmax->assign(out.size(), 0);

    for (uint32_t ch = 0; ch < x.c(); ++ch) {
        for (uint32_t oy = 0; oy < oh; ++oy) {
            for (uint32_t ox = 0; ox < ow; ++ox) {
                float best = -std::numeric_limits<float>::infinity();
                uint32_t best_idx = 0;
                for (uint32_t ky = 0; ky < size; ++ky) {
                    int64_t iy = static_cast<int64_t>(oy) * stride + ky - pad;
                    if (iy < 0 || iy >= x.h()) continue;
                    for (uint32_t kx = 0; kx < size; ++kx) {
                        int64_t ix = static_cast<int64_t>(ox) * stride + kx - pad;
                        if (ix < 0 || ix >= x.w()) continue;
                        float v = x.at(ch, static_cast<uint32_t>(iy), static_cast<uint32_t>(ix));
                        if (v > best) {
                            best = v;
                            best_idx = static_cast<uint32_t>(
                                (static_cast<size_t>(ch) * x.h() + iy) * x.w() + ix);
                        }
                    }
                }
                out.at(ch, oy, ox) = best;
                if (argmax)
                    (*argmax)[(static_cast<size_t>(ch) * oh + oy) * ow + ox] = best_idx;
            }
        }
    }
    return out;
}

Tensor maxpool_backward(const Tensor& x, uint32_t size, uint32_t stride, const Tensor& dy,
                        const std::vector<uint32_t>& argmax) {
    (void)size;
    (void)stride;
    if (argmax.size() != dy.size()) fail(ErrorKind::invalid, "maxpool cache does not match gradient");
    Tensor dx = Tensor::zeros_like(x);
    for (size_t i = 0; i < dy.data.size(); ++i) dx.data[argmax[i]] += dy.data[i];
    return dx;
}

Tensor upsample_forward(const Tensor& x, uint32_t factor) {
    Tensor out(x.c(), x.h() * factor, x.w() * factor);
    for (uint32_t ch = 0; ch < x.c(); ++ch)
        for (uint32_t y = 0; y < out.h(); ++y) {
            const float* src = x.plane(ch) + static_cast<size_t>(y / factor) * x.w();
            float* dst = out.plane(ch) + static_cast<size_t>(y) * out.w();
            for (uint32_t xx = 0; xx < out.w(); ++xx) dst[xx] = src[xx / factor];
        }
    return out;
}

Tensor upsample_backward(const Tensor& x, uint32_t factor, const Tensor& dy) {
    Tensor dx = Tensor::zeros_like(x);
    for (uint32_t ch = 0; ch < x.c(); ++ch)
        for (uint32_t y = 0; y < dy.h(); ++y) {
            float* dst = dx.plane(ch) + static_cast<size_t>(y / factor) * x.w();
            const float* src = dy.plane(ch) + static_cast<size_t>(y) * dy.w();
            for (uint32_t xx = 0; xx < dy.w(); ++xx) dst[xx / factor] += src[xx];
        }
    return dx;
}

Tensor channel_slice(const Tensor& x, uint32_t begin, uint32_t count) {
    if (begin + count > x.c()) fail(ErrorKind::invalid, "channel slice out of range");
    Tensor out(count, x.h(), x.w());
    size_t hw = static_cast<size_t>(x.h()) * x.w();
    for (uint32_t ch = 0; ch < count; ++ch)
        std::copy_n(x.plane(begin + ch), hw, out.plane(ch));
    return out;
}

void channel_slice_backward(Tensor& dx_accum, uint32_t begin, const Tensor& dy) {
    if (begin + dy.c() > dx_accum.c()) fail(ErrorKind::invalid, "channel slice out of range");
    size_t hw = static_cast<size_t>(dy.h()) * dy.w();
    for (uint32_t ch = 0; ch < dy.c(); ++ch) {
        float* dst = dx_accum.plane(begin + ch);
        const float* src = dy.plane(ch);
        for (size_t i = 0; i < hw; ++i) dst[i] += src[i];
    }
}

Tensor route_concat(const std::vector<const Tensor*>& xs) {
    if (xs.empty()) fail(ErrorKind::invalid, "concat of nothing");
    uint32_t h = xs[0]->h(), w = xs[0]->w(), c = 0;
    for (const Tensor* t : xs) {
        if (t->h() != h || t->w() != w)
            fail(ErrorKind::runtime, "shape conflict: concat sources differ spatially");
        c += t->c();
    }
    Tensor out(c, h, w);
    size_t hw = static_cast<size_t>(h) * w;
    uint32_t at = 0;
    for (const Tensor* t : xs) {
        std::copy_n(t->data.data(), static_cast<size_t>(t->c()) * hw, out.plane(at));
        at += t->c();
    }
    return out;
}

Tensor shortcut_add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) fail(ErrorKind::runtime, "shape conflict: shortcut operands differ");
    Tensor out = a;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
    return out;
}

}  // namespace slimdet
