#include "cgt/kernels.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstring>

namespace cgt::kernels {

namespace ref {

void gemm_nn(const float* a, const float* b, float* c, std::size_t n, std::size_t k, std::size_t m, bool acc) {
    if (!acc) std::memset(c, 0, n * m * sizeof(float));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const float av = a[i * k + p];
            const float* brow = b + p * m;
            float* crow = c + i * m;
            for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
}

void gemm_nt(const float* a, const float* b, float* c, std::size_t n, std::size_t k, std::size_t m, bool acc) {
    for (std::size_t i = 0; i < n; ++i) {
        const float* arow = a + i * k;
        for (std::size_t j = 0; j < m; ++j) {
            const float* brow = b + j * k;
            float s = 0.0f;
            for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
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
            const float av = arow[i];
            float* crow = c + i * m;
            for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
}

void add(const float* a, const float* b, float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
}
void sub(const float* a, const float* b, float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a[i] - b[i];
}
void mul(const float* a, const float* b, float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a[i] * b[i];
}
void axpy(float alpha, const float* x, float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}
void scale(const float* x, float alpha, float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = alpha * x[i];
}
void relu(const float* x, float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}
void relu_grad_acc(const float* x, const float* dy, float* dx, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dx[i] += x[i] > 0.0f ? dy[i] : 0.0f;
}
void leaky_relu(const float* x, float slope, float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : slope * x[i];
}
void leaky_relu_grad_acc(const float* x, float slope, const float* dy, float* dx, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dx[i] += x[i] > 0.0f ? dy[i] : slope * dy[i];
}
float dot(const float* a, const float* b, std::size_t n) {
    float s = 0.0f;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}
float reduce_sum(const float* x, std::size_t n) {
    float s = 0.0f;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
}
float reduce_max(const float* x, std::size_t n) {
    float m = x[0];
    for (std::size_t i = 1; i < n; ++i) m = std::max(m, x[i]);
    return m;
}

} // namespace ref

#if defined(CGT_BUILD_AVX2)
namespace avx2 {
void gemm_nn(const float* a, const float* b, float* c, std::size_t n, std::size_t k, std::size_t m, bool acc);
void gemm_nt(const float* a, const float* b, float* c, std::size_t n, std::size_t k, std::size_t m, bool acc);
void gemm_tn(const float* a, const float* b, float* c, std::size_t n, std::size_t k, std::size_t m, bool acc);
void add(const float* a, const float* b, float* y, std::size_t n);
void sub(const float* a, const float* b, float* y, std::size_t n);
void mul(const float* a, const float* b, float* y, std::size_t n);
void axpy(float alpha, const float* x, float* y, std::size_t n);
void scale(const float* x, float alpha, float* y, std::size_t n);
void relu(const float* x, float* y, std::size_t n);
void relu_grad_acc(const float* x, const float* dy, float* dx, std::size_t n);
void leaky_relu(const float* x, float slope, float* y, std::size_t n);
void leaky_relu_grad_acc(const float* x, float slope, const float* dy, float* dx, std::size_t n);
float dot(const float* a, const float* b, std::size_t n);
float reduce_sum(const float* x, std::size_t n);
float reduce_max(const float* x, std::size_t n);
} // namespace avx2
#endif

namespace {

struct Table {
    void (*gemm_nn)(const float*, const float*, float*, std::size_t, std::size_t, std::size_t, bool);
    void (*gemm_nt)(const float*, const float*, float*, std::size_t, std::size_t, std::size_t, bool);
    void (*gemm_tn)(const float*, const float*, float*, std::size_t, std::size_t, std::size_t, bool);
    void (*add)(const float*, const float*, float*, std::size_t);
    void (*sub)(const float*, const float*, float*, std::size_t);
    void (*mul)(const float*, const float*, float*, std::size_t);
    void (*axpy)(float, const float*, float*, std::size_t);
    void (*scale)(const float*, float, float*, std::size_t);
    void (*relu)(const float*, float*, std::size_t);
    void (*relu_grad_acc)(const float*, const float*, float*, std::size_t);
    void (*leaky_relu)(const float*, float, float*, std::size_t);
    void (*leaky_relu_grad_acc)(const float*, float, const float*, float*, std::size_t);
    float (*dot)(const float*, const float*, std::size_t);
    float (*reduce_sum)(const float*, std::size_t);
    float (*reduce_max)(const float*, std::size_t);
};

constexpr Table kScalarTable{
    ref::gemm_nn, ref::gemm_nt, ref::gemm_tn,
    ref::add, ref::sub, ref::mul, ref::axpy, ref::scale,
    ref::relu, ref::relu_grad_acc, ref::leaky_relu, ref::leaky_relu_grad_acc,
    ref::dot, ref::reduce_sum, ref::reduce_max,
};

#if defined(CGT_BUILD_AVX2)
constexpr Table kAvx2Table{
    avx2::gemm_nn, avx2::gemm_nt, avx2::gemm_tn,
    avx2::add, avx2::sub, avx2::mul, avx2::axpy, avx2::scale,
    avx2::relu, avx2::relu_grad_acc, avx2::leaky_relu, avx2::leaky_relu_grad_acc,
    avx2::dot, avx2::reduce_sum, avx2::reduce_max,
};
#endif

bool cpu_has_avx2() {
#if defined(CGT_BUILD_AVX2)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

struct State {
    Isa isa;
    const Table* table;
};

State make_default_state() {
    Isa isa = cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
    if (const char* env = std::getenv("CGT_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) isa = Isa::scalar;
        else if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2()) isa = Isa::avx2;
    }
#if defined(CGT_BUILD_AVX2)
    return {isa, isa == Isa::avx2 ? &kAvx2Table : &kScalarTable};
#else
    return {isa, &kScalarTable};
#endif
}

State& state() {
    static State s = make_default_state();
    return s;
}

} // namespace

Isa active() { return state().isa; }

std::string isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

bool isa_supported(Isa isa) { return isa == Isa::scalar || cpu_has_avx2(); }

bool select(Isa isa) {
    if (!isa_supported(isa)) return false;
#if defined(CGT_BUILD_AVX2)
    state() = {isa, isa == Isa::avx2 ? &kAvx2Table : &kScalarTable};
#else
    state() = {isa, &kScalarTable};
#endif
    return true;
}

void gemm_nn(const float* a, const float* b, float* c, std::size_t n, std::size_t k, std::size_t m, bool acc) {
    state().table->gemm_nn(a, b, c, n, k, m, acc);
}
void gemm_nt(const float* a, const float* b, float* c, std::size_t n, std::size_t k, std::size_t m, bool acc) {
    state().table->gemm_nt(a, b, c, n, k, m, acc);
}
void gemm_tn(const float* a, const float* b, float* c, std::size_t n, std::size_t k, std::size_t m, bool acc) {
    state().table->gemm_tn(a, b, c, n, k, m, acc);
}
void add(const float* a, const float* b, float* y, std::size_t n) { state().table->add(a, b, y, n); }
void sub(const float* a, const float* b, float* y, std::size_t n) { state().table->sub(a, b, y, n); }
void mul(const float* a, const float* b, float* y, std::size_t n) { state().table->mul(a, b, y, n); }
void axpy(float alpha, const float* x, float* y, std::size_t n) { state().table->axpy(alpha, x, y, n); }
void scale(const float* x, float alpha, float* y, std::size_t n) { state().table->scale(x, alpha, y, n); }
void relu(const float* x, float* y, std::size_t n) { state().table->relu(x, y, n); }
void relu_grad_acc(const float* x, const float* dy, float* dx, std::size_t n) {
    state().table->relu_grad_acc(x, dy, dx, n);
}
void leaky_relu(const float* x, float slope, float* y, std::size_t n) { state().table->leaky_relu(x, slope, y, n); }
void leaky_relu_grad_acc(const float* x, float slope, const float* dy, float* dx, std::size_t n) {
    state().table->leaky_relu_grad_acc(x, slope, dy, dx, n);
}
float dot(const float* a, const float* b, std::size_t n) { return state().table->dot(a, b, n); }
float reduce_sum(const float* x, std::size_t n) { return state().table->reduce_sum(x, n); }
float reduce_max(const float* x, std::size_t n) { return state().table->reduce_max(x, n); }

// f64: scalar reference only.

void gemm_nn(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m, bool acc) {
    if (!acc) std::memset(c, 0, n * m * sizeof(double));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[i * k + p];
            const double* brow = b + p * m;
            double* crow = c + i * m;
            for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m, bool acc) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* arow = a + i * k;
        for (std::size_t j = 0; j < m; ++j) {
            const double* brow = b + j * k;
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
            if (acc) c[i * m + j] += s; else c[i * m + j] = s;
        }
    }
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m, bool acc) {
    if (!acc) std::memset(c, 0, n * m * sizeof(double));
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = a + p * n;
        const double* brow = b + p * m;
        for (std::size_t i = 0; i < n; ++i) {
            const double av = arow[i];
            double* crow = c + i * m;
            for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
}

void add(const double* a, const double* b, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
}
void sub(const double* a, const double* b, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a[i] - b[i];
}
void mul(const double* a, const double* b, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a[i] * b[i];
}
void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}
void scale(const double* x, double alpha, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = alpha * x[i];
}
void relu(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}
void relu_grad_acc(const double* x, const double* dy, double* dx, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dx[i] += x[i] > 0.0 ? dy[i] : 0.0;
}
void leaky_relu(const double* x, double slope, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : slope * x[i];
}
void leaky_relu_grad_acc(const double* x, double slope, const double* dy, double* dx, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dx[i] += x[i] > 0.0 ? dy[i] : slope * dy[i];
}
double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}
double reduce_sum(const double* x, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
}
double reduce_max(const double* x, std::size_t n) {
    double m = x[0];
    for (std::size_t i = 1; i < n; ++i) m = std::max(m, x[i]);
    return m;
}

} // namespace cgt::kernels
