#include "oasis/kern/kernels.hpp"

#include <immintrin.h>

#include <cstring>

// Compiled with -mavx2 -mfma; must only be reached after the cpuid check.

namespace oasis::kern {
namespace {

inline float hsum(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 sh = _mm_movehdup_ps(lo);
    __m128 s = _mm_add_ps(lo, sh);
    sh = _mm_movehl_ps(sh, s);
    s = _mm_add_ss(s, sh);
    return _mm_cvtss_f32(s);
}

inline float hmax(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_max_ps(lo, hi);
    __m128 sh = _mm_movehdup_ps(lo);
    __m128 s = _mm_max_ps(lo, sh);
    sh = _mm_movehl_ps(sh, s);
    s = _mm_max_ss(s, sh);
    return _mm_cvtss_f32(s);
}

// c[0..n) += a * b[0..n)
inline void axpy_row(float* c, float a, const float* b, int n) {
    const __m256 va = _mm256_set1_ps(a);
    int j = 0;
    for (; j + 8 <= n; j += 8) {
        __m256 vc = _mm256_loadu_ps(c + j);
        vc = _mm256_fmadd_ps(va, _mm256_loadu_ps(b + j), vc);
        _mm256_storeu_ps(c + j, vc);
    }
    for (; j < n; ++j) c[j] += a * b[j];
}

inline float dot_row(const float* a, const float* b, int n) {
    __m256 acc = _mm256_setzero_ps();
    int k = 0;
    for (; k + 8 <= n; k += 8)
        acc = _mm256_fmadd_ps(_mm256_loadu_ps(a + k), _mm256_loadu_ps(b + k), acc);
    float s = hsum(acc);
    for (; k < n; ++k) s += a[k] * b[k];
    return s;
}

void gemm(bool transA, bool transB, int M, int N, int K, const float* A,
          int lda, const float* B, int ldb, float* C, int ldc,
          bool accumulate) {
    if (!accumulate)
        for (int i = 0; i < M; ++i)
            std::memset(C + (size_t)i * ldc, 0, sizeof(float) * (size_t)N);
    if (!transA && !transB) {
        for (int i = 0; i < M; ++i) {
            float* c = C + (size_t)i * ldc;
            for (int k = 0; k < K; ++k)
                axpy_row(c, A[(size_t)i * lda + k], B + (size_t)k * ldb, N);
        }
    } else if (transA && !transB) {
        for (int k = 0; k < K; ++k) {
            const float* arow = A + (size_t)k * lda;
            const float* b = B + (size_t)k * ldb;
            for (int i = 0; i < M; ++i)
                axpy_row(C + (size_t)i * ldc, arow[i], b, N);
        }
    } else if (!transA && transB) {
        for (int i = 0; i < M; ++i) {
            const float* a = A + (size_t)i * lda;
            float* c = C + (size_t)i * ldc;
            for (int j = 0; j < N; ++j)
                c[j] += dot_row(a, B + (size_t)j * ldb, K);
        }
    } else {
        for (int i = 0; i < M; ++i) {
            float* c = C + (size_t)i * ldc;
            for (int j = 0; j < N; ++j) {
                const float* b = B + (size_t)j * ldb;
                float acc = 0.0f;
                for (int k = 0; k < K; ++k) acc += A[(size_t)k * lda + i] * b[k];
                c[j] += acc;
            }
        }
    }
}

void vadd(float* out, const float* a, const float* b, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(a + i),
                                                _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}
void vsub(float* out, const float* a, const float* b, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_sub_ps(_mm256_loadu_ps(a + i),
                                                _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) out[i] = a[i] - b[i];
}
void vmul(float* out, const float* a, const float* b, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i),
                                                _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}
void vaxpy(float* y, float a, const float* x, size_t n) {
    const __m256 va = _mm256_set1_ps(a);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 vy = _mm256_loadu_ps(y + i);
        vy = _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), vy);
        _mm256_storeu_ps(y + i, vy);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}
void vscale(float* out, const float* x, float a, size_t n) {
    const __m256 va = _mm256_set1_ps(a);
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_mul_ps(va, _mm256_loadu_ps(x + i)));
    for (; i < n; ++i) out[i] = a * x[i];
}
void vfill(float* out, float v, size_t n) {
    const __m256 vv = _mm256_set1_ps(v);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) _mm256_storeu_ps(out + i, vv);
    for (; i < n; ++i) out[i] = v;
}

void leaky_relu(float* out, const float* x, float slope, size_t n) {
    const __m256 vs = _mm256_set1_ps(slope);
    const __m256 zero = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 vx = _mm256_loadu_ps(x + i);
        __m256 neg = _mm256_mul_ps(vs, vx);
        __m256 mask = _mm256_cmp_ps(vx, zero, _CMP_GT_OQ);
        _mm256_storeu_ps(out + i, _mm256_blendv_ps(neg, vx, mask));
    }
    for (; i < n; ++i) out[i] = x[i] > 0.0f ? x[i] : slope * x[i];
}
void leaky_relu_grad(float* dx, const float* x, const float* dy, float slope,
                     size_t n) {
    const __m256 vs = _mm256_set1_ps(slope);
    const __m256 one = _mm256_set1_ps(1.0f);
    const __m256 zero = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 vx = _mm256_loadu_ps(x + i);
        __m256 mask = _mm256_cmp_ps(vx, zero, _CMP_GT_OQ);
        __m256 g = _mm256_blendv_ps(vs, one, mask);
        __m256 vdx = _mm256_loadu_ps(dx + i);
        vdx = _mm256_fmadd_ps(_mm256_loadu_ps(dy + i), g, vdx);
        _mm256_storeu_ps(dx + i, vdx);
    }
    for (; i < n; ++i) dx[i] += dy[i] * (x[i] > 0.0f ? 1.0f : slope);
}

float reduce_sum(const float* x, size_t n) {
    __m256 acc = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) acc = _mm256_add_ps(acc, _mm256_loadu_ps(x + i));
    float s = hsum(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}
float reduce_sumsq(const float* x, size_t n) {
    __m256 acc = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 vx = _mm256_loadu_ps(x + i);
        acc = _mm256_fmadd_ps(vx, vx, acc);
    }
    float s = hsum(acc);
    for (; i < n; ++i) s += x[i] * x[i];
    return s;
}
float reduce_max(const float* x, size_t n) {
    size_t i = 0;
    float m = x[0];
    if (n >= 8) {
        __m256 acc = _mm256_loadu_ps(x);
        for (i = 8; i + 8 <= n; i += 8)
            acc = _mm256_max_ps(acc, _mm256_loadu_ps(x + i));
        m = hmax(acc);
    }
    for (; i < n; ++i)
        if (x[i] > m) m = x[i];
    return m;
}

}  // namespace

const Kernels& avx2_kernels() {
    static const Kernels k = {
        "avx2", gemm,   vadd,       vsub,            vmul,
        vaxpy,  vscale, vfill,      leaky_relu,      leaky_relu_grad,
        reduce_sum, reduce_sumsq, reduce_max,
    };
    return k;
}

}  // namespace oasis::kern
