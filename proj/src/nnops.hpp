#pragma once

#include <cstdint>
#include <vector>

#include "netcfg.hpp"
#include "tensor.hpp"

namespace slimdet {

// Kernels work on single-image CHW tensors. Convolution kernels are
// (n, c, kh, kw). Accumulation order per output element is fixed — kernel
// row, kernel column, then input channel — so results are bit-identical
// regardless of worker count.

Tensor conv2d_forward(const Tensor& x, const Tensor& kernel, uint32_t stride, uint32_t pad);

struct ConvGrads {
    Tensor dx;
    Tensor dkernel;
};
ConvGrads conv2d_backward(const Tensor& x, const Tensor& kernel, uint32_t stride, uint32_t pad,
                          const Tensor& dy);

void add_bias(Tensor& x, const std::vector<float>& bias);
std::vector<float> bias_gradient(const Tensor& dy);

struct BnParams {
    std::vector<float> gamma, beta, mean, var;
    float epsilon = 1e-5f;
};

Tensor batchnorm_forward(const Tensor& x, const BnParams& p);

struct BnGrads {
    Tensor dx;
    std::vector<float> dgamma, dbeta;
};
// Inference-style normalization: mean/var are constants, so only x, gamma
// and beta carry gradients.
BnGrads batchnorm_backward(const Tensor& x, const BnParams& p, const Tensor& dy);

// Rewrites kernel/bias so conv+bias reproduces conv+BN within 1e-5.
void fold_batchnorm(Tensor& kernel, std::vector<float>& bias, const BnParams& p);

float activate_one(float x, Activation kind);
float activate_gradient_one(float x, Activation kind);
Tensor activate(const Tensor& x, Activation kind);
// dx from upstream dy and the cached pre-activation input x.
Tensor activate_backward(const Tensor& x, Activation kind, const Tensor& dy);

// Front padding of (size-1)/2 at -inf; output (H-1)/stride + 1. `argmax`
// (optional) receives the flat input index of each window winner.
Tensor maxpool_forward(const Tensor& x, uint32_t size, uint32_t stride,
                       std::vector<uint32_t>* argmax = nullptr);
Tensor maxpool_backward(const Tensor& x, uint32_t size, uint32_t stride, const Tensor& dy,
                        const std::vector<uint32_t>& argmax);

Tensor upsample_forward(const Tensor& x, uint32_t factor);
Tensor upsample_backward(const Tensor& x, uint32_t factor, const Tensor& dy);

// Channels [begin, begin+count) of x, same H and W.
Tensor channel_slice(const Tensor& x, uint32_t begin, uint32_t count);
// Adds dy into the matching channel range of dx_accum.
void channel_slice_backward(Tensor& dx_accum, uint32_t begin, const Tensor& dy);

Tensor route_concat(const std::vector<const Tensor*>& xs);
Tensor shortcut_add(const Tensor& a, const Tensor& b);

}  // namespace slimdet
