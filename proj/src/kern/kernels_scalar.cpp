#include "oasis/kern/kernels.hpp"

#include <cstring>

namespace oasis::kern {
namespace {

void gemm_nn(int M, int N, int K, const float* A, int lda, const float* B,
             int ldb, float* C, int ldc) {
    for (int i = 0; i < M; ++i) {
        float* c = C + (size_t)i * ldc;
        for (int k = 0; k < K; ++k) {
            const float a = A[(size_t)i * lda + k];
            const float* b = B + (size_t)k * ldb;
            for (int j = 0; j < N; ++j) c[j] += a * b[j];
        }
    }
}

void gemm_tn(int M, int N, int K, const float* A, int lda, const float* B,
             int ldb, float* C, int ldc) {
    // A stored [K,M]
    for (int k = 0; k < K; ++k) {
        const float* arow = A + (size_t)k * lda;
        const float* b = B + (size_t)k * ldb;
        for (int i = 0; i < M; ++i) {
            const float a = arow[i];
            float* c = C + (size_t)i * ldc;
            for (int j = 0; j < N; ++j) c[j] += a * b[j];
        }
    }
}

void gemm_nt(int M, int N, int K, const float* A, int lda, const float* B,
             int ldb, float* C, int ldc) {
    // B stored [N,K]
    for (int i = 0; i < M; ++i) {
        const float* a = A + (size_t)i * lda;
        float* c = C + (size_t)i * ldc;
        for (int j = 0; j < N; ++j) {
            const float* b = B + (size_t)j * ldb;
            float acc = 0.0f;
            for (int k = 0; k < K; ++k) acc += a[k] * b[k];
            c[j] += acc;
        }
    }
}

void gemm(bool transA, bool transB, int M, int N, int K, const float* A,
          int lda, const float* B, int ldb, float* C, int ldc,
          bool accumulate) {
    if (!accumulate)
        for (int i = 0; i < M; ++i)
            std::memset(C + (size_t)i * ldc, 0, sizeof(float) * (size_t)N);
    if (!transA && !transB) {
        gemm_nn(M, N, K, A, lda, B, ldb, C, ldc);
    } else if (transA && !transB) {
        gemm_tn(M, N, K, A, lda, B, ldb, C, ldc);
    } else if (!transA && transB) {
        gemm_nt(M, N, K, A, lda, B, ldb, C, ldc);
    } else {
        // A [K,M], B [N,K]: C[i,j] = sum_k A[k,i] * B[j,k]
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
    for (size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}
void vsub(float* out, const float* a, const float* b, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}
void vmul(float* out, const float* a, const float* b, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}
void vaxpy(float* y, float a, const float* x, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}
void vscale(float* out, const float* x, float a, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a * x[i];
}
void vfill(float* out, float v, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = v;
}

void leaky_relu(float* out, const float* x, float slope, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0f ? x[i] : slope * x[i];
}
void leaky_relu_grad(float* dx, const float* x, const float* dy, float slope,
                     size_t n) {
    for (size_t i = 0; i < n; ++i) dx[i] += dy[i] * (x[i] > 0.0f ? 1.0f : slope);
}

float reduce_sum(const float* x, size_t n) {
    float s = 0.0f;
    for (size_t i = 0; i < n; ++i) s += x[i];
    return s;
}
float reduce_sumsq(const float* x, size_t n) {
    float s = 0.0f;
    for (size_t i = 0; i < n; ++i) s += x[i] * x[i];
    return s;
}
float reduce_max(const float* x, size_t n) {
    float m = x[0];
    for (size_t i = 1; i < n; ++i)
        if (x[i] > m) m = x[i];
    return m;
}

}  // namespace

const Kernels& scalar_kernels() {
    static const Kernels k = {
        "scalar", gemm,   vadd,       vsub,            vmul,
        vaxpy,    vscale, vfill,      leaky_relu,      leaky_relu_grad,
        reduce_sum, reduce_sumsq, reduce_max,
    };
    return k;
}

}  // namespace oasis::kern
