#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "oasis/kern/kernels.hpp"
#include "oasis/tensor/tensor.hpp"

using namespace oasis;
using kern::Kernels;

namespace {

bool have_avx2() {
    const auto cpu = kern::detect_cpu();
    return cpu.avx2 && cpu.fma;
}

std::vector<float> random_vec(size_t n, Rng& rng) {
    std::vector<float> v(n);
    for (auto& x : v) x = (float)rng.uniform(-2.0, 2.0);
    return v;
}

void check_close(const std::vector<float>& a, const std::vector<float>& b, float rel) {
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        const float tol = rel * std::max({std::abs(a[i]), std::abs(b[i]), 1.0f});
        CHECK(std::abs(a[i] - b[i]) <= tol);
    }
}

}  // namespace

TEST_CASE("scalar and avx2 gemm agree on random problems") {
    if (!have_avx2()) return;
    const Kernels& sc = kern::scalar_kernels();
    const Kernels& vx = kern::avx2_kernels();
    Rng rng(42);
    for (int trial = 0; trial < 20; ++trial) {
        const int M = rng.uniform_int(1, 17);
        const int N = rng.uniform_int(1, 33);
        const int K = rng.uniform_int(1, 29);
        for (int mode = 0; mode < 4; ++mode) {
            const bool ta = mode & 1, tb = mode & 2;
            const auto A = random_vec((size_t)(ta ? K * M : M * K), rng);
            const auto B = random_vec((size_t)(tb ? N * K : K * N), rng);
            std::vector<float> C1((size_t)M * N, 0.5f), C2((size_t)M * N, 0.5f);
            const int lda = ta ? M : K;
            const int ldb = tb ? K : N;
            sc.gemm(ta, tb, M, N, K, A.data(), lda, B.data(), ldb, C1.data(), N, true);
            vx.gemm(ta, tb, M, N, K, A.data(), lda, B.data(), ldb, C2.data(), N, true);
            check_close(C1, C2, 1e-5f);
        }
    }
}

TEST_CASE("elementwise kernels match bit-for-bit or to float rounding") {
    if (!have_avx2()) return;
    const Kernels& sc = kern::scalar_kernels();
    const Kernels& vx = kern::avx2_kernels();
    Rng rng(7);
    for (size_t n : {1ul, 7ul, 8ul, 65ul, 1003ul}) {
        const auto a = random_vec(n, rng);
        const auto b = random_vec(n, rng);
        std::vector<float> r1(n), r2(n);

        sc.vadd(r1.data(), a.data(), b.data(), n);
        vx.vadd(r2.data(), a.data(), b.data(), n);
        CHECK(r1 == r2);

        sc.vsub(r1.data(), a.data(), b.data(), n);
        vx.vsub(r2.data(), a.data(), b.data(), n);
        CHECK(r1 == r2);

        sc.vmul(r1.data(), a.data(), b.data(), n);
        vx.vmul(r2.data(), a.data(), b.data(), n);
        CHECK(r1 == r2);

        sc.vscale(r1.data(), a.data(), 1.7f, n);
        vx.vscale(r2.data(), a.data(), 1.7f, n);
        CHECK(r1 == r2);

        sc.leaky_relu(r1.data(), a.data(), 0.01f, n);
        vx.leaky_relu(r2.data(), a.data(), 0.01f, n);
        CHECK(r1 == r2);

        r1 = b;
        r2 = b;
        sc.vaxpy(r1.data(), 0.3f, a.data(), n);
        vx.vaxpy(r2.data(), 0.3f, a.data(), n);
        check_close(r1, r2, 1e-6f);  // FMA rounding

        std::vector<float> d1 = b, d2 = b;
        sc.leaky_relu_grad(d1.data(), a.data(), b.data(), 0.01f, n);
        vx.leaky_relu_grad(d2.data(), a.data(), b.data(), 0.01f, n);
        check_close(d1, d2, 1e-6f);
    }
}

TEST_CASE("reductions agree within accumulation-order tolerance") {
    if (!have_avx2()) return;
    const Kernels& sc = kern::scalar_kernels();
    const Kernels& vx = kern::avx2_kernels();
    Rng rng(99);
    for (size_t n : {1ul, 5ul, 8ul, 100ul, 4096ul}) {
        const auto a = random_vec(n, rng);
        CHECK(std::abs(sc.reduce_sum(a.data(), n) - vx.reduce_sum(a.data(), n)) <=
              1e-4f * (float)n);
        CHECK(std::abs(sc.reduce_sumsq(a.data(), n) - vx.reduce_sumsq(a.data(), n)) <=
              1e-4f * (float)n);
        CHECK(sc.reduce_max(a.data(), n) == vx.reduce_max(a.data(), n));
    }
}

TEST_CASE("gemm matches a naive triple loop") {
    const Kernels& k = kern::active();
    Rng rng(3);
    const int M = 5, N = 9, K = 7;
    const auto A = random_vec((size_t)M * K, rng);
    const auto B = random_vec((size_t)K * N, rng);
    std::vector<float> C((size_t)M * N, 0.0f);
    k.gemm(false, false, M, N, K, A.data(), K, B.data(), N, C.data(), N, false);
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < N; ++j) {
            double ref = 0.0;
            for (int kk = 0; kk < K; ++kk)
                ref += (double)A[(size_t)i * K + kk] * B[(size_t)kk * N + j];
            CHECK(std::abs(C[(size_t)i * N + j] - (float)ref) <= 1e-4f);
        }
}

TEST_CASE("backend selection honors explicit requests") {
    kern::select_backend("scalar");
    CHECK(std::string(kern::active().name) == "scalar");
    if (have_avx2()) {
        kern::select_backend("avx2");
        CHECK(std::string(kern::active().name) == "avx2");
    }
    kern::select_backend("auto");
    CHECK_THROWS(kern::select_backend("gpu"));
}
