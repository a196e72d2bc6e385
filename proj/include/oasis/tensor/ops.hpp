#pragma once

#include <vector>

#include "oasis/tensor/tensor.hpp"

namespace oasis {

// Elementwise with NumPy-style right-aligned broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& a, float s);
Tensor mul_scalar(const Tensor& a, float s);
Tensor neg(const Tensor& a);

Tensor leaky_relu(const Tensor& x, float slope);
Tensor sigmoid(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor clamp(const Tensor& x, float lo, float hi);
Tensor digamma(const Tensor& x);  // x > 0
Tensor lgamma(const Tensor& x);   // x > 0

// matmul with optional transposes: transA reads a as [K,M], transB b as [N,K].
Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a = false,
              bool trans_b = false);
Tensor transpose2d(const Tensor& x);

// x [C,H,W], w [O,C,kh,kw], bias [O] or undefined.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride,
              int pad);
// x [C,H,W], w [C,O,kh,kw]; output [(O, (H-1)*stride+kh, ...)].
Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& bias,
                        int stride);

Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);
Tensor sum_axis(const Tensor& x, int axis, bool keepdim);
Tensor mean_axis(const Tensor& x, int axis, bool keepdim);
// Non-differentiable (used for detached stabilization / margins).
Tensor max_axis_detached(const Tensor& x, int axis, bool keepdim);

Tensor softmax(const Tensor& x, int axis);

Tensor reshape(const Tensor& x, std::vector<int> shape);
Tensor concat_axis0(const std::vector<Tensor>& parts);
Tensor narrow_axis0(const Tensor& x, int start, int len);
// x [C,N], idx in [0,N) -> [C,P]
Tensor gather_cols(const Tensor& x, const std::vector<int>& idx);

// x [C,H,W] -> [C,oh,ow], half-pixel-center bilinear sampling.
Tensor bilinear_resize(const Tensor& x, int oh, int ow);

// mean over all elements of max(x,0) - x*t + log(1+exp(-|x|)); t constant.
Tensor bce_with_logits_mean(const Tensor& logits, const Tensor& targets);

// High-precision special functions shared by the double-precision loss path.
double digamma_d(double x);
double trigamma_d(double x);

}  // namespace oasis
