#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "oasis/kern/kernels.hpp"
#include "oasis/tensor/ops.hpp"
#include "ops_internal.hpp"

namespace oasis {
namespace {

using kern::active;

struct MatDims {
    int M, N, K;
};

MatDims matmul_dims(const Tensor& a, const Tensor& b, bool ta, bool tb) {
    if (a.dim() != 2 || b.dim() != 2) throw std::runtime_error("matmul: expects 2-D");
    const int M = ta ? a.shape()[1] : a.shape()[0];
    const int Ka = ta ? a.shape()[0] : a.shape()[1];
    const int Kb = tb ? b.shape()[1] : b.shape()[0];
    const int N = tb ? b.shape()[0] : b.shape()[1];
    if (Ka != Kb) throw std::runtime_error("matmul: inner dim mismatch");
    return {M, N, Ka};
}

void gemm_into(bool ta, bool tb, int M, int N, int K, const Tensor& a, const Tensor& b,
               float* C, bool accumulate) {
    active().gemm(ta, tb, M, N, K, a.data(), a.shape()[1], b.data(), b.shape()[1], C, N,
                  accumulate);
}

void gemm_into_raw(bool ta, bool tb, int M, int N, int K, const float* A, int lda,
                   const float* B, int ldb, float* C, bool accumulate) {
    active().gemm(ta, tb, M, N, K, A, lda, B, ldb, C, N, accumulate);
}

void im2col(const float* x, int C, int H, int W, int kh, int kw, int stride, int pad,
            int OH, int OW, float* col) {
    for (int c = 0; c < C; ++c)
        for (int ki = 0; ki < kh; ++ki)
            for (int kj = 0; kj < kw; ++kj) {
                float* dst = col + ((size_t)(c * kh + ki) * kw + kj) * OH * OW;
                for (int oy = 0; oy < OH; ++oy) {
                    const int y = oy * stride - pad + ki;
                    if (y < 0 || y >= H) {
                        std::fill(dst + (size_t)oy * OW, dst + (size_t)(oy + 1) * OW, 0.0f);
                        continue;
                    }
                    const float* src = x + ((size_t)c * H + y) * W;
                    for (int ox = 0; ox < OW; ++ox) {
                        const int xx = ox * stride - pad + kj;
                        dst[(size_t)oy * OW + ox] = (xx >= 0 && xx < W) ? src[xx] : 0.0f;
                    }
                }
            }
}

void col2im_accum(const float* col, int C, int H, int W, int kh, int kw, int stride,
                  int pad, int OH, int OW, float* x) {
    for (int c = 0; c < C; ++c)
        for (int ki = 0; ki < kh; ++ki)
            for (int kj = 0; kj < kw; ++kj) {
                const float* src = col + ((size_t)(c * kh + ki) * kw + kj) * OH * OW;
                for (int oy = 0; oy < OH; ++oy) {
                    const int y = oy * stride - pad + ki;
                    if (y < 0 || y >= H) continue;
                    float* dst = x + ((size_t)c * H + y) * W;
                    for (int ox = 0; ox < OW; ++ox) {
                        const int xx = ox * stride - pad + kj;
                        if (xx >= 0 && xx < W) dst[xx] += src[(size_t)oy * OW + ox];
                    }
                }
            }
}

struct ResizePlan {
    std::vector<int> i0, i1;
    std::vector<float> w1;  // weight of i1; i0 gets 1-w1
};

ResizePlan resize_axis_plan(int in, int out) {
    ResizePlan p;
    p.i0.resize((size_t)out);
    p.i1.resize((size_t)out);
    p.w1.resize((size_t)out);
    const float scale = (float)in / (float)out;
    for (int o = 0; o < out; ++o) {
        float s = ((float)o + 0.5f) * scale - 0.5f;
        if (s < 0.0f) s = 0.0f;
        if (s > (float)(in - 1)) s = (float)(in - 1);
        const int lo = (int)s;
        p.i0[(size_t)o] = lo;
        p.i1[(size_t)o] = std::min(lo + 1, in - 1);
        p.w1[(size_t)o] = s - (float)lo;
    }
    return p;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b, bool ta, bool tb) {
    const MatDims d = matmul_dims(a, b, ta, tb);
    Tensor out = detail::make_result(
        {d.M, d.N}, "matmul", {a, b}, [ta, tb, d](TensorImpl& o) {
            const Tensor& a = o.grad_fn->inputs[0];
            const Tensor& b = o.grad_fn->inputs[1];
            const float* g = o.grad->data();
            const int M = d.M, N = d.N, K = d.K;
            if (a.requires_grad()) {
                Tensor mut = a;
                float* da = mut.grad_data();
                // dopA = g * op(B)^T, mapped back to A's storage
                if (!ta && !tb)  // dA[M,K] += g[M,N] * B[K,N]^T
                    gemm_into_raw(false, true, M, K, N, g, N, b.data(), b.shape()[1], da, true);
                else if (!ta && tb)  // dA[M,K] += g[M,N] * B[N,K]
                    gemm_into_raw(false, false, M, K, N, g, N, b.data(), b.shape()[1], da, true);
                else if (ta && !tb)  // dA[K,M] += B[K,N] * g[M,N]^T
                    gemm_into_raw(false, true, K, M, N, b.data(), b.shape()[1], g, N, da, true);
                else  // dA[K,M] += B[N,K]^T * g[M,N]^T = (g*B)^T
                    gemm_into_raw(true, true, K, M, N, b.data(), b.shape()[1], g, N, da, true);
            }
            if (b.requires_grad()) {
                Tensor mut = b;
                float* db = mut.grad_data();
                if (!ta && !tb)  // dB[K,N] += A[M,K]^T * g[M,N]
                    gemm_into_raw(true, false, K, N, M, a.data(), a.shape()[1], g, N, db, true);
                else if (ta && !tb)  // dB[K,N] += A[K,M] * g[M,N]
                    gemm_into_raw(false, false, K, N, M, a.data(), a.shape()[1], g, N, db, true);
                else if (!ta && tb)  // dB[N,K] += g[M,N]^T * A[M,K]
                    gemm_into_raw(true, false, N, K, M, g, N, a.data(), a.shape()[1], db, true);
                else  // dB[N,K] += g^T[N,M] * A^T[M,K] = (A*g)^T
                    gemm_into_raw(true, true, N, K, M, g, N, a.data(), a.shape()[1], db, true);
            }
        });
    gemm_into(ta, tb, d.M, d.N, d.K, a, b, out.data(), false);
    return out;
}

Tensor transpose2d(const Tensor& x) {
    if (x.dim() != 2) throw std::runtime_error("transpose2d: expects 2-D");
    const int M = x.shape()[0], N = x.shape()[1];
    Tensor out = detail::make_result({N, M}, "transpose2d", {x}, [M, N](TensorImpl& o) {
        const Tensor& x = o.grad_fn->inputs[0];
        if (!x.requires_grad()) return;
        Tensor mut = x;
        float* dx = mut.grad_data();
        const float* g = o.grad->data();
        for (int j = 0; j < N; ++j)
            for (int i = 0; i < M; ++i) dx[(size_t)i * N + j] += g[(size_t)j * M + i];
    });
    const float* px = x.data();
    float* po = out.data();
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < N; ++j) po[(size_t)j * M + i] = px[(size_t)i * N + j];
    return out;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad) {
    if (x.dim() != 3 || w.dim() != 4) throw std::runtime_error("conv2d: x [C,H,W], w [O,C,kh,kw]");
    const int C = x.shape()[0], H = x.shape()[1], W = x.shape()[2];
    const int O = w.shape()[0], kh = w.shape()[2], kw = w.shape()[3];
    if (w.shape()[1] != C) throw std::runtime_error("conv2d: channel mismatch");
    const int OH = (H + 2 * pad - kh) / stride + 1;
    const int OW = (W + 2 * pad - kw) / stride + 1;
    const int ck = C * kh * kw;

    std::vector<Tensor> inputs = {x, w};
    if (bias.defined()) inputs.push_back(bias);
    Tensor out = detail::make_result(
        {O, OH, OW}, "conv2d", std::move(inputs),
        [C, H, W, O, kh, kw, stride, pad, OH, OW, ck](TensorImpl& o) {
            const Tensor& x = o.grad_fn->inputs[0];
            const Tensor& w = o.grad_fn->inputs[1];
            const float* g = o.grad->data();  // [O, OH*OW]
            const int hw = OH * OW;
            if (w.requires_grad() || x.requires_grad()) {
                std::vector<float> col((size_t)ck * hw);
                im2col(x.data(), C, H, W, kh, kw, stride, pad, OH, OW, col.data());
                if (w.requires_grad()) {
                    Tensor mut = w;
                    // dW[O,ck] += g[O,hw] * col[ck,hw]^T
                    gemm_into_raw(false, true, O, ck, hw, g, hw, col.data(), hw,
                                  mut.grad_data(), true);
                }
                if (x.requires_grad()) {
                    std::vector<float> dcol((size_t)ck * hw);
                    // dcol[ck,hw] = w[O,ck]^T * g[O,hw]
                    gemm_into_raw(true, false, ck, hw, O, w.data(), ck, g, hw,
                                  dcol.data(), false);
                    Tensor mut = x;
                    col2im_accum(dcol.data(), C, H, W, kh, kw, stride, pad, OH, OW,
                                 mut.grad_data());
                }
            }
            if (o.grad_fn->inputs.size() > 2 && o.grad_fn->inputs[2].requires_grad()) {
                Tensor mut = o.grad_fn->inputs[2];
                float* db = mut.grad_data();
                for (int oc = 0; oc < O; ++oc)
                    db[oc] += active().reduce_sum(g + (size_t)oc * hw, (size_t)hw);
            }
        });
    std::vector<float> col((size_t)ck * OH * OW);
    im2col(x.data(), C, H, W, kh, kw, stride, pad, OH, OW, col.data());
    // out[O, OH*OW] = w[O,ck] * col[ck, OH*OW]
    gemm_into_raw(false, false, O, OH * OW, ck, w.data(), ck, col.data(), OH * OW,
                  out.data(), false);
    if (bias.defined()) {
        float* po = out.data();
        const float* pb = bias.data();
        for (int oc = 0; oc < O; ++oc) {
            const float b = pb[oc];
            float* row = po + (size_t)oc * OH * OW;
            for (int i = 0; i < OH * OW; ++i) row[i] += b;
        }
    }
    return out;
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride) {
    if (x.dim() != 3 || w.dim() != 4)
        throw std::runtime_error("conv_transpose2d: x [C,H,W], w [C,O,kh,kw]");
    const int C = x.shape()[0], H = x.shape()[1], W = x.shape()[2];
    const int O = w.shape()[1], kh = w.shape()[2], kw = w.shape()[3];
    if (w.shape()[0] != C) throw std::runtime_error("conv_transpose2d: channel mismatch");
    const int OH = (H - 1) * stride + kh;
    const int OW = (W - 1) * stride + kw;
    const int ok = O * kh * kw;

    std::vector<Tensor> inputs = {x, w};
    if (bias.defined()) inputs.push_back(bias);
    Tensor out = detail::make_result(
        {O, OH, OW}, "conv_transpose2d", std::move(inputs),
        [C, H, W, O, kh, kw, stride, OH, OW, ok](TensorImpl& o) {
            const Tensor& x = o.grad_fn->inputs[0];
            const Tensor& w = o.grad_fn->inputs[1];
            const float* g = o.grad->data();
            const int hw = H * W;
            if (x.requires_grad() || w.requires_grad()) {
                // dcol[(o,ki,kj),(y,x)] = g[o, y*s+ki, x*s+kj]
                std::vector<float> dcol((size_t)ok * hw);
                im2col(g, O, OH, OW, kh, kw, stride, 0, H, W, dcol.data());
                if (x.requires_grad()) {
                    Tensor mut = x;
                    // dx[C,hw] += w[C,ok] * dcol[ok,hw]
                    gemm_into_raw(false, false, C, hw, ok, w.data(), ok, dcol.data(), hw,
                                  mut.grad_data(), true);
                }
                if (w.requires_grad()) {
                    Tensor mut = w;
                    // dW[C,ok] += x[C,hw] * dcol[ok,hw]^T
                    gemm_into_raw(false, true, C, ok, hw, x.data(), hw, dcol.data(), hw,
                                  mut.grad_data(), true);
                }
            }
            if (o.grad_fn->inputs.size() > 2 && o.grad_fn->inputs[2].requires_grad()) {
                Tensor mut = o.grad_fn->inputs[2];
                float* db = mut.grad_data();
                for (int oc = 0; oc < O; ++oc)
                    db[oc] += active().reduce_sum(g + (size_t)oc * OH * OW,
                                                  (size_t)(OH * OW));
            }
        });
    // col[ok, H*W] = w[C,ok]^T * x[C,H*W], then scatter to output grid
    std::vector<float> col((size_t)ok * H * W);
    gemm_into_raw(true, false, ok, H * W, C, w.data(), ok, x.data(), H * W, col.data(),
                  false);
    col2im_accum(col.data(), O, OH, OW, kh, kw, stride, 0, H, W, out.data());
    if (bias.defined()) {
        float* po = out.data();
        const float* pb = bias.data();
        for (int oc = 0; oc < O; ++oc) {
            float* row = po + (size_t)oc * OH * OW;
            for (int i = 0; i < OH * OW; ++i) row[i] += pb[oc];
        }
    }
    return out;
}

Tensor bilinear_resize(const Tensor& x, int oh, int ow) {
    if (x.dim() != 3) throw std::runtime_error("bilinear_resize: expects [C,H,W]");
    const int C = x.shape()[0], H = x.shape()[1], W = x.shape()[2];
    if (oh == H && ow == W) {
        // still a node so grads flow, but a plain copy
        Tensor out = detail::make_result({C, H, W}, "resize_copy", {x}, [](TensorImpl& o) {
            const Tensor& x = o.grad_fn->inputs[0];
            if (x.requires_grad()) accumulate_grad(x, o.grad->data(), numel_of(o.shape));
        });
        std::copy(x.data(), x.data() + x.numel(), out.data());
        return out;
    }
    auto ypl = std::make_shared<ResizePlan>(resize_axis_plan(H, oh));
    auto xpl = std::make_shared<ResizePlan>(resize_axis_plan(W, ow));
    Tensor out = detail::make_result(
        {C, oh, ow}, "bilinear_resize", {x}, [C, H, W, oh, ow, ypl, xpl](TensorImpl& o) {
            const Tensor& x = o.grad_fn->inputs[0];
            if (!x.requires_grad()) return;
            Tensor mut = x;
            float* dx = mut.grad_data();
            const float* g = o.grad->data();
            for (int c = 0; c < C; ++c) {
                float* dch = dx + (size_t)c * H * W;
                const float* gch = g + (size_t)c * oh * ow;
                for (int oy = 0; oy < oh; ++oy) {
                    const int y0 = ypl->i0[(size_t)oy], y1 = ypl->i1[(size_t)oy];
                    const float wy = ypl->w1[(size_t)oy];
                    for (int ox = 0; ox < ow; ++ox) {
                        const int x0 = xpl->i0[(size_t)ox], x1 = xpl->i1[(size_t)ox];
                        const float wx = xpl->w1[(size_t)ox];
                        const float gv = gch[(size_t)oy * ow + ox];
                        dch[(size_t)y0 * W + x0] += gv * (1 - wy) * (1 - wx);
                        dch[(size_t)y0 * W + x1] += gv * (1 - wy) * wx;
                        dch[(size_t)y1 * W + x0] += gv * wy * (1 - wx);
                        dch[(size_t)y1 * W + x1] += gv * wy * wx;
                    }
                }
            }
        });
    const float* px = x.data();
    float* po = out.data();
    for (int c = 0; c < C; ++c) {
        const float* ch = px + (size_t)c * H * W;
        float* och = po + (size_t)c * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
            const int y0 = ypl->i0[(size_t)oy], y1 = ypl->i1[(size_t)oy];
            const float wy = ypl->w1[(size_t)oy];
            for (int ox = 0; ox < ow; ++ox) {
                const int x0 = xpl->i0[(size_t)ox], x1 = xpl->i1[(size_t)ox];
                const float wx = xpl->w1[(size_t)ox];
                const float v00 = ch[(size_t)y0 * W + x0], v01 = ch[(size_t)y0 * W + x1];
                const float v10 = ch[(size_t)y1 * W + x0], v11 = ch[(size_t)y1 * W + x1];
                och[(size_t)oy * ow + ox] = (1 - wy) * ((1 - wx) * v00 + wx * v01) +
                                            wy * ((1 - wx) * v10 + wx * v11);
            }
        }
    }
    return out;
}

}  // namespace oasis
