#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "oasis/tensor/ops.hpp"
#include "test_util.hpp"

using namespace oasis;
using testutil::fd_grad;

namespace {

// Finite-difference check of d(sum(w .* op(x)))/dx against autograd, with a
// fixed random weighting to make the loss scalar.
void gradcheck(const std::function<Tensor(const Tensor&)>& op, std::vector<int> shape,
               uint64_t seed, double h = 1e-2, double rel = 2e-2, double abs = 2e-3,
               float lo = -2.0f, float hi = 2.0f) {
    Rng rng(seed);
    Tensor x = rand_uniform(shape, rng, lo, hi);
    x.set_requires_grad(true);
    Tensor y = op(x);
    Tensor w = rand_uniform(y.shape(), rng, -1.0f, 1.0f);
    Tensor loss = sum_all(mul(y, w));
    loss.backward();
    const Tensor g = x.grad_tensor();
    REQUIRE(g.defined());

    auto forward = [&](const std::vector<float>& vals) -> double {
        NoGradGuard ng;
        Tensor xx = Tensor::from_vector(shape, vals);
        Tensor yy = op(xx);
        double acc = 0.0;
        const float* py = yy.data();
        const float* pw = w.data();
        for (int64_t i = 0; i < yy.numel(); ++i) acc += (double)py[i] * pw[i];
        return acc;
    };
    const auto vals = testutil::tensor_to_vec(x);
    for (int64_t i = 0; i < x.numel(); ++i) {
        const double fd = fd_grad(forward, vals, (size_t)i, h);
        const double ag = g.data()[i];
        const double tol = abs + rel * std::max(std::abs(fd), std::abs(ag));
        CHECK_MESSAGE(std::abs(fd - ag) <= tol,
                      "elem " << i << " fd=" << fd << " ag=" << ag);
    }
}

}  // namespace

TEST_CASE("broadcast add/mul forward values") {
    Tensor a = Tensor::from_vector({2, 2}, {1, 2, 3, 4});
    Tensor b = Tensor::from_vector({2, 1}, {10, 20});
    Tensor s = add(a, b);
    CHECK(s.data()[0] == 11);
    CHECK(s.data()[1] == 12);
    CHECK(s.data()[2] == 23);
    CHECK(s.data()[3] == 24);
    Tensor c = Tensor::from_vector({2}, {2, 3});  // broadcasts along rows
    Tensor m = mul(a, c);
    CHECK(m.data()[0] == 2);
    CHECK(m.data()[1] == 6);
    CHECK(m.data()[2] == 6);
    CHECK(m.data()[3] == 12);
}

TEST_CASE("binary op gradients (broadcast both directions)") {
    Rng rng(5);
    Tensor b = rand_uniform({1, 3}, rng, 0.5f, 2.0f);
    gradcheck([&](const Tensor& x) { return mul(x, b); }, {4, 3}, 11);
    gradcheck([&](const Tensor& x) { return div(x, b); }, {4, 3}, 12);
    gradcheck([&](const Tensor& x) { return add(x, b); }, {4, 3}, 13);
    Tensor big = rand_uniform({4, 3}, rng, 0.5f, 2.0f);
    gradcheck([&](const Tensor& x) { return mul(big, x); }, {1, 3}, 14);
    gradcheck([&](const Tensor& x) { return div(big, x); }, {1, 3}, 15, 1e-2, 2e-2,
              2e-3, 0.5f, 2.0f);
    gradcheck([&](const Tensor& x) { return sub(big, x); }, {3}, 16);
}

TEST_CASE("unary op gradients") {
    gradcheck([](const Tensor& x) { return leaky_relu(x, 0.1f); }, {5, 5}, 21);
    gradcheck([](const Tensor& x) { return sigmoid(x); }, {4, 4}, 22);
    gradcheck([](const Tensor& x) { return softplus(x); }, {4, 4}, 23);
    gradcheck([](const Tensor& x) { return exp(x); }, {3, 3}, 24, 1e-3);
    gradcheck([](const Tensor& x) { return log(x); }, {3, 3}, 25, 1e-3, 2e-2, 2e-3,
              0.2f, 3.0f);
    gradcheck([](const Tensor& x) { return sqrt(x); }, {3, 3}, 26, 1e-3, 2e-2, 2e-3,
              0.2f, 3.0f);
    gradcheck([](const Tensor& x) { return digamma(x); }, {3, 3}, 27, 1e-3, 2e-2, 2e-3,
              1.0f, 6.0f);
    gradcheck([](const Tensor& x) { return lgamma(x); }, {3, 3}, 28, 1e-3, 2e-2, 2e-3,
              1.0f, 6.0f);
}

TEST_CASE("matmul gradients across all transpose modes") {
    Rng rng(31);
    for (int mode = 0; mode < 4; ++mode) {
        const bool ta = mode & 1, tb = mode & 2;
        const int M = 3, N = 4, K = 5;
        const std::vector<int> ashape = ta ? std::vector<int>{K, M} : std::vector<int>{M, K};
        const std::vector<int> bshape = tb ? std::vector<int>{N, K} : std::vector<int>{K, N};
        Tensor b = rand_uniform(bshape, rng, -1.0f, 1.0f);
        gradcheck([&](const Tensor& x) { return matmul(x, b, ta, tb); }, ashape,
                  100 + (uint64_t)mode);
        Tensor a = rand_uniform(ashape, rng, -1.0f, 1.0f);
        gradcheck([&](const Tensor& x) { return matmul(a, x, ta, tb); }, bshape,
                  200 + (uint64_t)mode);
    }
}

TEST_CASE("conv2d forward matches a direct loop and grads check out") {
    Rng rng(41);
    const int C = 2, H = 6, W = 6, O = 3, k = 3, stride = 2, pad = 1;
    Tensor x = rand_uniform({C, H, W}, rng, -1.0f, 1.0f);
    Tensor w = rand_uniform({O, C, k, k}, rng, -1.0f, 1.0f);
    Tensor bias = rand_uniform({O}, rng, -0.5f, 0.5f);
    Tensor y = conv2d(x, w, bias, stride, pad);
    const int OH = (H + 2 * pad - k) / stride + 1;
    REQUIRE(y.shape() == std::vector<int>({O, OH, OH}));
    for (int o = 0; o < O; ++o)
        for (int oy = 0; oy < OH; ++oy)
            for (int ox = 0; ox < OH; ++ox) {
                double ref = bias.data()[o];
                for (int c = 0; c < C; ++c)
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            const int yy = oy * stride - pad + ky;
                            const int xx = ox * stride - pad + kx;
                            if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
                            ref += (double)x.data()[(c * H + yy) * W + xx] *
                                   w.data()[((o * C + c) * k + ky) * k + kx];
                        }
                CHECK(std::abs(y.data()[(o * OH + oy) * OH + ox] - (float)ref) < 1e-4);
            }

    gradcheck([&](const Tensor& xx) { return conv2d(xx, w, bias, stride, pad); },
              {C, H, W}, 42);
    gradcheck([&](const Tensor& ww) { return conv2d(x, ww, bias, stride, pad); },
              {O, C, k, k}, 43);
    gradcheck([&](const Tensor& bb) { return conv2d(x, w, bb, stride, pad); }, {O}, 44);
}

TEST_CASE("conv_transpose2d shape and gradients") {
    Rng rng(51);
    const int C = 3, H = 4, W = 5, O = 2;
    Tensor x = rand_uniform({C, H, W}, rng, -1.0f, 1.0f);
    Tensor w = rand_uniform({C, O, 2, 2}, rng, -1.0f, 1.0f);
    Tensor bias = rand_uniform({O}, rng, -0.5f, 0.5f);
    Tensor y = conv_transpose2d(x, w, bias, 2);
    REQUIRE(y.shape() == std::vector<int>({O, 2 * H, 2 * W}));
    // stride-2 k2 transposed conv partitions output 2x2 cells
    const int oy = 3, ox = 4;
    double ref = bias.data()[1];
    for (int c = 0; c < C; ++c)
        ref += (double)x.data()[(c * H + 1) * W + 2] * w.data()[((c * O + 1) * 2 + 1) * 2 + 0];
    CHECK(std::abs(y.data()[(1 * 2 * H + oy) * 2 * W + ox] - (float)ref) < 1e-4);

    gradcheck([&](const Tensor& xx) { return conv_transpose2d(xx, w, bias, 2); },
              {C, H, W}, 52);
    gradcheck([&](const Tensor& ww) { return conv_transpose2d(x, ww, bias, 2); },
              {C, O, 2, 2}, 53);
}

TEST_CASE("reductions, softmax, reshape, concat, narrow, gather, transpose") {
    gradcheck([](const Tensor& x) { return sum_axis(x, 0, false); }, {3, 4}, 61);
    gradcheck([](const Tensor& x) { return sum_axis(x, 1, true); }, {3, 4}, 62);
    gradcheck([](const Tensor& x) { return mean_axis(x, 1, false); }, {2, 3, 4}, 63);
    gradcheck([](const Tensor& x) { return softmax(x, 1); }, {3, 5}, 64);
    gradcheck([](const Tensor& x) { return reshape(x, {6, 2}); }, {3, 4}, 65);
    gradcheck([](const Tensor& x) { return narrow_axis0(x, 1, 2); }, {4, 3}, 66);
    gradcheck([](const Tensor& x) { return transpose2d(x); }, {3, 4}, 67);
    gradcheck([](const Tensor& x) { return gather_cols(x, {0, 2, 2, 5}); }, {3, 6}, 68);
    gradcheck(
        [](const Tensor& x) {
            return concat_axis0({narrow_axis0(x, 0, 1), narrow_axis0(x, 2, 1)});
        },
        {4, 3}, 69);
    Tensor s = softmax(Tensor::from_vector({2, 3}, {1, 2, 3, 0, 0, 0}), 1);
    for (int r = 0; r < 2; ++r) {
        float sum = 0.0f;
        for (int c = 0; c < 3; ++c) sum += s.data()[r * 3 + c];
        CHECK(std::abs(sum - 1.0f) < 1e-6f);
    }
}

TEST_CASE("bilinear_resize is exact on constants and grads check out") {
    Tensor c = Tensor::full({2, 5, 7}, 3.25f);
    Tensor r = bilinear_resize(c, 11, 3);
    for (int64_t i = 0; i < r.numel(); ++i) CHECK(r.data()[i] == 3.25f);
    gradcheck([](const Tensor& x) { return bilinear_resize(x, 7, 9); }, {2, 4, 5}, 71);
    gradcheck([](const Tensor& x) { return bilinear_resize(x, 2, 3); }, {2, 5, 6}, 72);
}

TEST_CASE("bce_with_logits matches the stable formula and its gradient") {
    Rng rng(81);
    Tensor t = rand_uniform({1, 4, 4}, rng, 0.0f, 1.0f);
    // round targets to {0,1}
    for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = t.data()[i] > 0.5f ? 1.0f : 0.0f;
    Tensor x = rand_uniform({1, 4, 4}, rng, -3.0f, 3.0f);
    x.set_requires_grad(true);
    Tensor loss = bce_with_logits_mean(x, t);
    double ref = 0.0;
    for (int64_t i = 0; i < x.numel(); ++i) {
        const double xv = x.data()[i], tv = t.data()[i];
        ref += std::max(xv, 0.0) - xv * tv + std::log1p(std::exp(-std::abs(xv)));
    }
    ref /= (double)x.numel();
    CHECK(std::abs((double)loss.item() - ref) < 1e-6);

    loss.backward();
    const Tensor g = x.grad_tensor();
    for (int64_t i = 0; i < x.numel(); ++i) {
        const double xv = x.data()[i], tv = t.data()[i];
        const double expect = (1.0 / (1.0 + std::exp(-xv)) - tv) / (double)x.numel();
        CHECK(std::abs((double)g.data()[i] - expect) < 1e-6);
    }
}

TEST_CASE("grad accumulates when a tensor is used twice") {
    Tensor x = Tensor::from_vector({2}, {1.0f, 2.0f});
    x.set_requires_grad(true);
    Tensor y = add(mul(x, x), x);  // y = x^2 + x, dy/dx = 2x + 1
    sum_all(y).backward();
    CHECK(x.grad_tensor().data()[0] == doctest::Approx(3.0f));
    CHECK(x.grad_tensor().data()[1] == doctest::Approx(5.0f));
}

TEST_CASE("NoGradGuard suppresses graph construction") {
    Tensor x = Tensor::from_vector({2}, {1.0f, 2.0f});
    x.set_requires_grad(true);
    NoGradGuard ng;
    Tensor y = mul(x, x);
    CHECK_FALSE(y.requires_grad());
    CHECK(y.raw().grad_fn == nullptr);
}

TEST_CASE("digamma and trigamma against the high-shift oracle") {
    for (double x : {0.5, 1.0, 1.5, 2.0, 5.0, 9.99, 10.0, 25.0, 101.0, 500.0}) {
        CHECK(std::abs(digamma_d(x) - testutil::digamma_oracle(x)) < 1e-12);
        CHECK(std::abs(trigamma_d(x) - testutil::trigamma_oracle(x)) < 1e-12);
    }
}
