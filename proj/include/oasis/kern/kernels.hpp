#pragma once

#include <cstddef>
#include <string>

namespace oasis::kern {

// Low-level float kernels behind all tensor arithmetic. Two backends ship:
// a scalar reference and an AVX2+FMA variant picked at runtime. Both keep a
// fixed per-element accumulation order over k, so results are reproducible
// for a given backend; backends agree to float rounding (equivalence-tested).
struct Kernels {
    const char* name;

    // C[M,N] (+)= op(A) * op(B). Row-major. transA: A stored [K,M],
    // transB: B stored [N,K]. accumulate=false zeroes C first.
    void (*gemm)(bool transA, bool transB, int M, int N, int K,
                 const float* A, int lda, const float* B, int ldb,
                 float* C, int ldc, bool accumulate);

    void (*vadd)(float* out, const float* a, const float* b, size_t n);
    void (*vsub)(float* out, const float* a, const float* b, size_t n);
    void (*vmul)(float* out, const float* a, const float* b, size_t n);
    void (*vaxpy)(float* y, float a, const float* x, size_t n);  // y += a*x
    void (*vscale)(float* out, const float* x, float a, size_t n);
    void (*vfill)(float* out, float v, size_t n);

    void (*leaky_relu)(float* out, const float* x, float slope, size_t n);
    // dx += dy * (x > 0 ? 1 : slope)
    void (*leaky_relu_grad)(float* dx, const float* x, const float* dy,
                            float slope, size_t n);

    float (*reduce_sum)(const float* x, size_t n);
    float (*reduce_sumsq)(const float* x, size_t n);
    float (*reduce_max)(const float* x, size_t n);  // n >= 1
};

struct CpuFeatures {
    bool avx2 = false;
    bool fma = false;
};

CpuFeatures detect_cpu();

const Kernels& scalar_kernels();
const Kernels& avx2_kernels();  // callable only if detect_cpu().avx2 && fma

// Active backend. Defaults to the best supported one; OASIS_KERNELS
// (scalar|avx2|auto) overrides at process start, select_backend() at runtime.
const Kernels& active();
// name: "auto", "scalar" or "avx2". Throws on unsupported request.
void select_backend(const std::string& name);

}  // namespace oasis::kern
