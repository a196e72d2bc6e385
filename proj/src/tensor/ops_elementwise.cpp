#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "oasis/kern/kernels.hpp"
#include "oasis/tensor/ops.hpp"

namespace oasis {
namespace {

using kern::active;

std::vector<int> pad_rank(const std::vector<int>& s, size_t rank) {
    std::vector<int> out(rank, 1);
    std::copy(s.begin(), s.end(), out.begin() + (rank - s.size()));
    return out;
}

std::vector<int> broadcast_shape(const std::vector<int>& a, const std::vector<int>& b) {
    const size_t rank = std::max(a.size(), b.size());
    const auto pa = pad_rank(a, rank), pb = pad_rank(b, rank);
    std::vector<int> out(rank);
    for (size_t i = 0; i < rank; ++i) {
        if (pa[i] == pb[i] || pa[i] == 1 || pb[i] == 1)
            out[i] = std::max(pa[i], pb[i]);
        else
            throw std::runtime_error("broadcast: incompatible shapes");
    }
    return out;
}

std::vector<int64_t> strides_for(const std::vector<int>& shape) {
    std::vector<int64_t> st(shape.size(), 0);
    int64_t acc = 1;
    for (int i = (int)shape.size() - 1; i >= 0; --i) {
        st[(size_t)i] = acc;
        acc *= shape[(size_t)i];
    }
    return st;
}

// Strides for reading an array of shape `shape` at positions of `out_shape`
// (0 on broadcast dims).
std::vector<int64_t> bcast_strides(const std::vector<int>& shape,
                                   const std::vector<int>& out_shape) {
    const auto padded = pad_rank(shape, out_shape.size());
    auto st = strides_for(padded);
    for (size_t i = 0; i < padded.size(); ++i)
        if (padded[i] == 1 && out_shape[i] != 1) st[i] = 0;
    return st;
}

template <class F>
void strided_binary(const float* a, const std::vector<int64_t>& sa, const float* b,
                    const std::vector<int64_t>& sb, float* out,
                    const std::vector<int>& oshape, F f) {
    const size_t rank = oshape.size();
    std::vector<int> idx(rank, 0);
    const int64_t n = numel_of(oshape);
    int64_t oa = 0, ob = 0;
    for (int64_t lin = 0; lin < n; ++lin) {
        out[lin] = f(a[oa], b[ob]);
        for (int d = (int)rank - 1; d >= 0; --d) {
            idx[(size_t)d]++;
            oa += sa[(size_t)d];
            ob += sb[(size_t)d];
            if (idx[(size_t)d] < oshape[(size_t)d]) break;
            oa -= sa[(size_t)d] * (int64_t)oshape[(size_t)d];
            ob -= sb[(size_t)d] * (int64_t)oshape[(size_t)d];
            idx[(size_t)d] = 0;
        }
    }
}

enum class BinOp { Add, Sub, Mul, Div };

void run_binary_raw(BinOp op, const float* a, const std::vector<int>& ashape,
                    const float* b, const std::vector<int>& bshape, float* out,
                    const std::vector<int>& oshape) {
    const auto& k = active();
    const size_t n = (size_t)numel_of(oshape);
    if (ashape == bshape && ashape == oshape) {
        switch (op) {
            case BinOp::Add: k.vadd(out, a, b, n); return;
            case BinOp::Sub: k.vsub(out, a, b, n); return;
            case BinOp::Mul: k.vmul(out, a, b, n); return;
            case BinOp::Div:
                for (size_t i = 0; i < n; ++i) out[i] = a[i] / b[i];
                return;
        }
    }
    const auto sa = bcast_strides(ashape, oshape);
    const auto sb = bcast_strides(bshape, oshape);
    switch (op) {
        case BinOp::Add:
            strided_binary(a, sa, b, sb, out, oshape, [](float x, float y) { return x + y; });
            break;
        case BinOp::Sub:
            strided_binary(a, sa, b, sb, out, oshape, [](float x, float y) { return x - y; });
            break;
        case BinOp::Mul:
            strided_binary(a, sa, b, sb, out, oshape, [](float x, float y) { return x * y; });
            break;
        case BinOp::Div:
            strided_binary(a, sa, b, sb, out, oshape, [](float x, float y) { return x / y; });
            break;
    }
}

// Sum src (shaped src_shape) into dst (shaped dst_shape broadcastable to it).
void reduce_into(const float* src, const std::vector<int>& src_shape, float* dst,
                 const std::vector<int>& dst_shape) {
    if (pad_rank(dst_shape, src_shape.size()) == src_shape) {
        active().vaxpy(dst, 1.0f, src, (size_t)numel_of(src_shape));
        return;
    }
    const auto sd = bcast_strides(dst_shape, src_shape);
    const size_t rank = src_shape.size();
    std::vector<int> idx(rank, 0);
    const int64_t n = numel_of(src_shape);
    int64_t od = 0;
    for (int64_t lin = 0; lin < n; ++lin) {
        dst[od] += src[lin];
        for (int d = (int)rank - 1; d >= 0; --d) {
            idx[(size_t)d]++;
            od += sd[(size_t)d];
            if (idx[(size_t)d] < src_shape[(size_t)d]) break;
            od -= sd[(size_t)d] * (int64_t)src_shape[(size_t)d];
            idx[(size_t)d] = 0;
        }
    }
}

}  // namespace

namespace detail {

Tensor make_result(std::vector<int> shape, const char* op, std::vector<Tensor> inputs,
                   std::function<void(TensorImpl&)> backward) {
    Tensor out = Tensor::zeros(std::move(shape));
    bool needs = false;
    if (GradMode::enabled())
        for (const auto& t : inputs)
            if (t.defined() && t.requires_grad()) needs = true;
    if (needs) {
        auto node = std::make_shared<GradNode>();
        node->op = op;
        node->inputs = std::move(inputs);
        node->backward = std::move(backward);
        out.raw().grad_fn = node;
        out.raw().requires_grad = true;
    }
    return out;
}

// grad_src spans out_shape; reduce-accumulate it into t's grad.
void accumulate_reduced(const Tensor& t, const float* grad_src,
                        const std::vector<int>& out_shape) {
    Tensor mut = t;
    reduce_into(grad_src, out_shape, mut.grad_data(), t.shape());
}

}  // namespace detail

namespace {

Tensor binary_op(BinOp op, const char* name, const Tensor& a, const Tensor& b) {
    const auto oshape = broadcast_shape(a.shape(), b.shape());
    auto backward = [op](TensorImpl& out) {
        const Tensor& a = out.grad_fn->inputs[0];
        const Tensor& b = out.grad_fn->inputs[1];
        const float* g = out.grad->data();
        const auto& oshape = out.shape;
        const int64_t n = numel_of(oshape);
        std::vector<float> tmp((size_t)n);
        switch (op) {
            case BinOp::Add:
                if (a.requires_grad()) detail::accumulate_reduced(a, g, oshape);
                if (b.requires_grad()) detail::accumulate_reduced(b, g, oshape);
                break;
            case BinOp::Sub:
                if (a.requires_grad()) detail::accumulate_reduced(a, g, oshape);
                if (b.requires_grad()) {
                    active().vscale(tmp.data(), g, -1.0f, (size_t)n);
                    detail::accumulate_reduced(b, tmp.data(), oshape);
                }
                break;
            case BinOp::Mul:
                if (a.requires_grad()) {
                    run_binary_raw(BinOp::Mul, g, oshape, b.data(), b.shape(), tmp.data(), oshape);
                    detail::accumulate_reduced(a, tmp.data(), oshape);
                }
                if (b.requires_grad()) {
                    run_binary_raw(BinOp::Mul, g, oshape, a.data(), a.shape(), tmp.data(), oshape);
                    detail::accumulate_reduced(b, tmp.data(), oshape);
                }
                break;
            case BinOp::Div:
                if (a.requires_grad()) {
                    run_binary_raw(BinOp::Div, g, oshape, b.data(), b.shape(), tmp.data(), oshape);
                    detail::accumulate_reduced(a, tmp.data(), oshape);
                }
                if (b.requires_grad()) {
                    // db = -g * a / b^2
                    std::vector<float> ab((size_t)n);
                    run_binary_raw(BinOp::Mul, g, oshape, a.data(), a.shape(), tmp.data(), oshape);
                    run_binary_raw(BinOp::Div, tmp.data(), oshape, b.data(), b.shape(), ab.data(), oshape);
                    run_binary_raw(BinOp::Div, ab.data(), oshape, b.data(), b.shape(), tmp.data(), oshape);
                    active().vscale(tmp.data(), tmp.data(), -1.0f, (size_t)n);
                    detail::accumulate_reduced(b, tmp.data(), oshape);
                }
                break;
        }
    };
    Tensor out = detail::make_result(oshape, name, {a, b}, backward);
    run_binary_raw(op, a.data(), a.shape(), b.data(), b.shape(), out.data(), oshape);
    return out;
}

template <class Fwd, class Bwd>
Tensor unary_op(const char* name, const Tensor& x, Fwd fwd, Bwd bwd_factor) {
    // bwd_factor(x_i, y_i) -> dy/dx at element i
    Tensor out = detail::make_result(
        x.shape(), name, {x}, [bwd_factor](TensorImpl& o) {
            const Tensor& x = o.grad_fn->inputs[0];
            if (!x.requires_grad()) return;
            const float* g = o.grad->data();
            const float* px = x.data();
            const float* py = o.data->data();
            Tensor mut = x;
            float* dx = mut.grad_data();
            const int64_t n = numel_of(o.shape);
            for (int64_t i = 0; i < n; ++i)
                dx[i] += g[i] * bwd_factor(px[i], py[i]);
        });
    const float* px = x.data();
    float* py = out.data();
    const int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) py[i] = fwd(px[i]);
    return out;
}

float sigmoid_f(float x) {
    if (x >= 0.0f) return 1.0f / (1.0f + std::exp(-x));
    const float e = std::exp(x);
    return e / (1.0f + e);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(BinOp::Add, "add", a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(BinOp::Sub, "sub", a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(BinOp::Mul, "mul", a, b); }
Tensor div(const Tensor& a, const Tensor& b) { return binary_op(BinOp::Div, "div", a, b); }

Tensor add_scalar(const Tensor& a, float s) {
    Tensor out = detail::make_result(a.shape(), "add_scalar", {a}, [](TensorImpl& o) {
        const Tensor& a = o.grad_fn->inputs[0];
        if (a.requires_grad()) accumulate_grad(a, o.grad->data(), numel_of(o.shape));
    });
    const float* pa = a.data();
    float* po = out.data();
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] + s;
    return out;
}

Tensor mul_scalar(const Tensor& a, float s) {
    Tensor out = detail::make_result(a.shape(), "mul_scalar", {a}, [s](TensorImpl& o) {
        const Tensor& a = o.grad_fn->inputs[0];
        if (!a.requires_grad()) return;
        Tensor mut = a;
        active().vaxpy(mut.grad_data(), s, o.grad->data(), (size_t)numel_of(o.shape));
    });
    active().vscale(out.data(), a.data(), s, (size_t)a.numel());
    return out;
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0f); }

Tensor leaky_relu(const Tensor& x, float slope) {
    Tensor out = detail::make_result(x.shape(), "leaky_relu", {x}, [slope](TensorImpl& o) {
        const Tensor& x = o.grad_fn->inputs[0];
        if (!x.requires_grad()) return;
        Tensor mut = x;
        active().leaky_relu_grad(mut.grad_data(), x.data(), o.grad->data(), slope,
                                 (size_t)numel_of(o.shape));
    });
    active().leaky_relu(out.data(), x.data(), slope, (size_t)x.numel());
    return out;
}

Tensor sigmoid(const Tensor& x) {
    return unary_op("sigmoid", x, sigmoid_f,
                    [](float, float y) { return y * (1.0f - y); });
}

Tensor softplus(const Tensor& x) {
    return unary_op(
        "softplus", x,
        [](float v) { return v > 30.0f ? v : std::log1p(std::exp(v)); },
        [](float v, float) { return sigmoid_f(v); });
}

Tensor exp(const Tensor& x) {
    return unary_op("exp", x, [](float v) { return std::exp(v); },
                    [](float, float y) { return y; });
}

Tensor log(const Tensor& x) {
    return unary_op("log", x, [](float v) { return std::log(v); },
                    [](float v, float) { return 1.0f / v; });
}

Tensor sqrt(const Tensor& x) {
    return unary_op("sqrt", x, [](float v) { return std::sqrt(v); },
                    [](float, float y) { return 0.5f / y; });
}

Tensor clamp(const Tensor& x, float lo, float hi) {
    return unary_op(
        "clamp", x,
        [lo, hi](float v) { return std::min(std::max(v, lo), hi); },
        [lo, hi](float v, float) { return (v >= lo && v <= hi) ? 1.0f : 0.0f; });
}

Tensor digamma(const Tensor& x) {
    return unary_op(
        "digamma", x, [](float v) { return (float)digamma_d((double)v); },
        [](float v, float) { return (float)trigamma_d((double)v); });
}

Tensor lgamma(const Tensor& x) {
    return unary_op(
        "lgamma", x, [](float v) { return (float)std::lgamma((double)v); },
        [](float v, float) { return (float)digamma_d((double)v); });
}

Tensor sum_all(const Tensor& x) {
    Tensor out = detail::make_result({1}, "sum_all", {x}, [](TensorImpl& o) {
        const Tensor& x = o.grad_fn->inputs[0];
        if (!x.requires_grad()) return;
        Tensor mut = x;
        const float g = (*o.grad)[0];
        float* dx = mut.grad_data();
        const int64_t n = x.numel();
        for (int64_t i = 0; i < n; ++i) dx[i] += g;
    });
    out.data()[0] = active().reduce_sum(x.data(), (size_t)x.numel());
    return out;
}

Tensor mean_all(const Tensor& x) {
    return mul_scalar(sum_all(x), 1.0f / (float)x.numel());
}

namespace {
void axis_dims(const std::vector<int>& shape, int axis, int64_t& outer, int64_t& len,
               int64_t& inner) {
    outer = 1;
    for (int i = 0; i < axis; ++i) outer *= shape[(size_t)i];
    len = shape[(size_t)axis];
    inner = 1;
    for (size_t i = (size_t)axis + 1; i < shape.size(); ++i) inner *= shape[i];
}

std::vector<int> reduced_shape(const std::vector<int>& shape, int axis, bool keepdim) {
    std::vector<int> s = shape;
    if (keepdim)
        s[(size_t)axis] = 1;
    else
        s.erase(s.begin() + axis);
    return s;
}
}  // namespace

Tensor sum_axis(const Tensor& x, int axis, bool keepdim) {
    int64_t outer, len, inner;
    axis_dims(x.shape(), axis, outer, len, inner);
    Tensor out = detail::make_result(
        reduced_shape(x.shape(), axis, keepdim), "sum_axis", {x},
        [axis](TensorImpl& o) {
            const Tensor& x = o.grad_fn->inputs[0];
            if (!x.requires_grad()) return;
            int64_t outer, len, inner;
            axis_dims(x.shape(), axis, outer, len, inner);
            Tensor mut = x;
            float* dx = mut.grad_data();
            const float* g = o.grad->data();
            for (int64_t ou = 0; ou < outer; ++ou)
                for (int64_t l = 0; l < len; ++l)
                    active().vaxpy(dx + (ou * len + l) * inner, 1.0f,
                                   g + ou * inner, (size_t)inner);
        });
    float* po = out.data();
    const float* px = x.data();
    for (int64_t ou = 0; ou < outer; ++ou) {
        float* orow = po + ou * inner;
        for (int64_t l = 0; l < len; ++l)
            active().vaxpy(orow, 1.0f, px + (ou * len + l) * inner, (size_t)inner);
    }
    return out;
}

Tensor mean_axis(const Tensor& x, int axis, bool keepdim) {
    const float inv = 1.0f / (float)x.shape()[(size_t)axis];
    return mul_scalar(sum_axis(x, axis, keepdim), inv);
}

Tensor max_axis_detached(const Tensor& x, int axis, bool keepdim) {
    int64_t outer, len, inner;
    axis_dims(x.shape(), axis, outer, len, inner);
    Tensor out = Tensor::zeros(reduced_shape(x.shape(), axis, keepdim));
    float* po = out.data();
    const float* px = x.data();
    for (int64_t ou = 0; ou < outer; ++ou)
        for (int64_t in = 0; in < inner; ++in) {
            float m = px[(ou * len) * inner + in];
            for (int64_t l = 1; l < len; ++l)
                m = std::max(m, px[(ou * len + l) * inner + in]);
            po[ou * inner + in] = m;
        }
    return out;
}

Tensor softmax(const Tensor& x, int axis) {
    Tensor m = max_axis_detached(x, axis, true);
    Tensor e = exp(sub(x, m));
    Tensor s = sum_axis(e, axis, true);
    return div(e, s);
}

Tensor reshape(const Tensor& x, std::vector<int> shape) {
    // -1 wildcard on one dim
    int64_t known = 1;
    int wild = -1;
    for (size_t i = 0; i < shape.size(); ++i) {
        if (shape[i] == -1)
            wild = (int)i;
        else
            known *= shape[i];
    }
    if (wild >= 0) shape[(size_t)wild] = (int)(x.numel() / known);
    if (numel_of(shape) != x.numel()) throw std::runtime_error("reshape: numel mismatch");
    Tensor out = detail::make_result(shape, "reshape", {x}, [](TensorImpl& o) {
        const Tensor& x = o.grad_fn->inputs[0];
        if (x.requires_grad()) accumulate_grad(x, o.grad->data(), numel_of(o.shape));
    });
    // share storage
    out.raw().data = x.impl()->data;
    return out;
}

Tensor concat_axis0(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::runtime_error("concat: empty input");
    std::vector<int> shape = parts[0].shape();
    int total = 0;
    for (const auto& p : parts) {
        if (p.dim() != (int)shape.size())
            throw std::runtime_error("concat: rank mismatch");
        for (size_t i = 1; i < shape.size(); ++i)
            if (p.shape()[i] != shape[i]) throw std::runtime_error("concat: shape mismatch");
        total += p.shape()[0];
    }
    shape[0] = total;
    Tensor out = detail::make_result(shape, "concat_axis0", parts, [](TensorImpl& o) {
        const float* g = o.grad->data();
        int64_t off = 0;
        for (const auto& p : o.grad_fn->inputs) {
            const int64_t n = p.numel();
            if (p.requires_grad()) accumulate_grad(p, g + off, n);
            off += n;
        }
    });
    float* po = out.data();
    int64_t off = 0;
    for (const auto& p : parts) {
        std::copy(p.data(), p.data() + p.numel(), po + off);
        off += p.numel();
    }
    return out;
}

Tensor narrow_axis0(const Tensor& x, int start, int len) {
    if (start < 0 || len <= 0 || start + len > x.shape()[0])
        throw std::runtime_error("narrow: out of range");
    std::vector<int> shape = x.shape();
    shape[0] = len;
    const int64_t inner = x.numel() / x.shape()[0];
    Tensor out = detail::make_result(shape, "narrow_axis0", {x},
                                     [start, inner](TensorImpl& o) {
                                         const Tensor& x = o.grad_fn->inputs[0];
                                         if (!x.requires_grad()) return;
                                         Tensor mut = x;
                                         float* dx = mut.grad_data();
                                         active().vaxpy(dx + start * inner, 1.0f,
                                                        o.grad->data(),
                                                        (size_t)numel_of(o.shape));
                                     });
    std::copy(x.data() + start * inner, x.data() + (start + len) * inner, out.data());
    return out;
}

Tensor gather_cols(const Tensor& x, const std::vector<int>& idx) {
    if (x.dim() != 2) throw std::runtime_error("gather_cols: expects [C,N]");
    const int C = x.shape()[0], N = x.shape()[1];
    const int P = (int)idx.size();
    auto idx_copy = std::make_shared<std::vector<int>>(idx);
    Tensor out = detail::make_result({C, P}, "gather_cols", {x}, [idx_copy, N](TensorImpl& o) {
        const Tensor& x = o.grad_fn->inputs[0];
        if (!x.requires_grad()) return;
        const int C = o.shape[0], P = o.shape[1];
        Tensor mut = x;
        float* dx = mut.grad_data();
        const float* g = o.grad->data();
        for (int c = 0; c < C; ++c)
            for (int p = 0; p < P; ++p)
                dx[(size_t)c * N + (size_t)(*idx_copy)[(size_t)p]] += g[(size_t)c * P + p];
    });
    const float* px = x.data();
    float* po = out.data();
    for (int c = 0; c < C; ++c)
        for (int p = 0; p < P; ++p) {
            const int j = idx[(size_t)p];
            if (j < 0 || j >= N) throw std::runtime_error("gather_cols: index out of range");
            po[(size_t)c * P + p] = px[(size_t)c * N + j];
        }
    return out;
}

Tensor bce_with_logits_mean(const Tensor& logits, const Tensor& targets) {
    if (logits.shape() != targets.shape())
        throw std::runtime_error("bce_with_logits: shape mismatch");
    const int64_t n = logits.numel();
    Tensor out = detail::make_result({1}, "bce_with_logits_mean", {logits, targets},
                                     [n](TensorImpl& o) {
                                         const Tensor& x = o.grad_fn->inputs[0];
                                         const Tensor& t = o.grad_fn->inputs[1];
                                         if (!x.requires_grad()) return;
                                         const float g = (*o.grad)[0] / (float)n;
                                         Tensor mut = x;
                                         float* dx = mut.grad_data();
                                         const float* px = x.data();
                                         const float* pt = t.data();
                                         for (int64_t i = 0; i < n; ++i)
                                             dx[i] += g * (sigmoid_f(px[i]) - pt[i]);
                                     });
    const float* px = logits.data();
    const float* pt = targets.data();
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double x = px[i], t = pt[i];
        acc += std::max(x, 0.0) - x * t + std::log1p(std::exp(-std::abs(x)));
    }
    out.data()[0] = (float)(acc / (double)n);
    return out;
}

}  // namespace oasis
