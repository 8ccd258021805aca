#include <immintrin.h>

#include <algorithm>
#include <cstddef>
#include <cstring>

// AVX2+FMA float32 kernels. Compiled only on x86-64 with -mavx2 -mfma; the
// dispatcher in kernels.cpp guards selection with a cpuid check.

namespace cgt::kernels::avx2 {

namespace {

inline float hsum8(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    __m128 s = _mm_add_ps(lo, hi);
    s = _mm_add_ps(s, _mm_movehl_ps(s, s));
    s = _mm_add_ss(s, _mm_movehdup_ps(s));
    return _mm_cvtss_f32(s);
}

inline float hmax8(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    __m128 s = _mm_max_ps(lo, hi);
    s = _mm_max_ps(s, _mm_movehl_ps(s, s));
    s = _mm_max_ss(s, _mm_movehdup_ps(s));
    return _mm_cvtss_f32(s);
}

// c[0..m) += av * b[0..m)
inline void fma_row(float av, const float* b, float* c, std::size_t m) {
    const __m256 va = _mm256_set1_ps(av);
    std::size_t j = 0;
    for (; j + 8 <= m; j += 8) {
        __m256 vc = _mm256_loadu_ps(c + j);
        vc = _mm256_fmadd_ps(va, _mm256_loadu_ps(b + j), vc);
        _mm256_storeu_ps(c + j, vc);
    }
    for (; j < m; ++j) c[j] += av * b[j];
}

} // namespace

void gemm_nn(const float* a, const float* b, float* c, std::size_t n, std::size_t k, std::size_t m, bool acc) {
    if (!acc) std::memset(c, 0, n * m * sizeof(float));
    for (std::size_t i = 0; i < n; ++i) {
        float* crow = c + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            fma_row(a[i * k + p], b + p * m, crow, m);
        }
    }
}

void gemm_nt(const float* a, const float* b, float* c, std::size_t n, std::size_t k, std::size_t m, bool acc) {
    for (std::size_t i = 0; i < n; ++i) {
        const float* arow = a + i * k;
        for (std::size_t j = 0; j < m; ++j) {
            const float* brow = b + j * k;
            __m256 vs = _mm256_setzero_ps();
            std::size_t p = 0;
            for (; p + 8 <= k; p += 8) {
                vs = _mm256_fmadd_ps(_mm256_loadu_ps(arow + p), _mm256_loadu_ps(brow + p), vs);
            }
            float s = hsum8(vs);
            for (; p < k; ++p) s += arow[p] * brow[p];
            if (acc) c[i * m + j] += s; else c[i * m + j] = s;
        }
    }
}

void gemm_tn(const float* a, const float* b, float* c, std::size_t n, std::size_t k, std::size_t m, bool acc) {
    if (!acc) std::memset(c, 0, n * m * sizeof(float));
    for (std::size_t p = 0; p < k; ++p) {
        const float* arow = a + p * n;
        const float* brow = b + p * m;
        for (std::size_t i = 0; i < n; ++i) {
            fma_row(arow[i], brow, c + i * m, m);
        }
    }
}

void add(const float* a, const float* b, float* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) y[i] = a[i] + b[i];
}

void sub(const float* a, const float* b, float* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) y[i] = a[i] - b[i];
}

void mul(const float* a, const float* b, float* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) y[i] = a[i] * b[i];
}

void axpy(float alpha, const float* x, float* y, std::size_t n) {
    const __m256 va = _mm256_set1_ps(alpha);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 vy = _mm256_loadu_ps(y + i);
        vy = _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), vy);
        _mm256_storeu_ps(y + i, vy);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale(const float* x, float alpha, float* y, std::size_t n) {
    const __m256 va = _mm256_set1_ps(alpha);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_mul_ps(va, _mm256_loadu_ps(x + i)));
    for (; i < n; ++i) y[i] = alpha * x[i];
}

void relu(const float* x, float* y, std::size_t n) {
    const __m256 vz = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_max_ps(vz, _mm256_loadu_ps(x + i)));
    for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_grad_acc(const float* x, const float* dy, float* dx, std::size_t n) {
    const __m256 vz = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), vz, _CMP_GT_OQ);
        const __m256 g = _mm256_and_ps(mask, _mm256_loadu_ps(dy + i));
        _mm256_storeu_ps(dx + i, _mm256_add_ps(_mm256_loadu_ps(dx + i), g));
    }
    for (; i < n; ++i) dx[i] += x[i] > 0.0f ? dy[i] : 0.0f;
}

void leaky_relu(const float* x, float slope, float* y, std::size_t n) {
    const __m256 vz = _mm256_setzero_ps();
    const __m256 vs = _mm256_set1_ps(slope);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 vx = _mm256_loadu_ps(x + i);
        const __m256 mask = _mm256_cmp_ps(vx, vz, _CMP_GT_OQ);
        _mm256_storeu_ps(y + i, _mm256_blendv_ps(_mm256_mul_ps(vs, vx), vx, mask));
    }
    for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : slope * x[i];
}

void leaky_relu_grad_acc(const float* x, float slope, const float* dy, float* dx, std::size_t n) {
    const __m256 vz = _mm256_setzero_ps();
    const __m256 vs = _mm256_set1_ps(slope);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 vdy = _mm256_loadu_ps(dy + i);
        const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), vz, _CMP_GT_OQ);
        const __m256 g = _mm256_blendv_ps(_mm256_mul_ps(vs, vdy), vdy, mask);
        _mm256_storeu_ps(dx + i, _mm256_add_ps(_mm256_loadu_ps(dx + i), g));
    }
    for (; i < n; ++i) dx[i] += x[i] > 0.0f ? dy[i] : slope * dy[i];
}

float dot(const float* a, const float* b, std::size_t n) {
    __m256 vs = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        vs = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), vs);
    float s = hsum8(vs);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

float reduce_sum(const float* x, std::size_t n) {
    __m256 vs = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) vs = _mm256_add_ps(vs, _mm256_loadu_ps(x + i));
    float s = hsum8(vs);
    for (; i < n; ++i) s += x[i];
    return s;
}

float reduce_max(const float* x, std::size_t n) {
    float m = x[0];
    std::size_t i = 0;
    if (n >= 8) {
        __m256 vm = _mm256_loadu_ps(x);
        for (i = 8; i + 8 <= n; i += 8) vm = _mm256_max_ps(vm, _mm256_loadu_ps(x + i));
        m = hmax8(vm);
    }
    for (; i < n; ++i) m = std::max(m, x[i]);
    return m;
}

} // namespace cgt::kernels::avx2
