#pragma once

#include <cstddef>
#include <string>

// Dense float32 inner loops behind a runtime-dispatched backend: a scalar
// reference implementation that always exists, and an AVX2+FMA variant picked
// when the CPU supports it. The float64 overloads are scalar only; they back
// the 64-bit gradient-check mode where throughput does not matter.
//
// All matrices are row-major. GEMM shape convention (BLAS-like, inner dim k):
//   gemm_nn: C[n,m] (+)= A[n,k] * B[k,m]
//   gemm_nt: C[n,m] (+)= A[n,k] * B[m,k]^T
//   gemm_tn: C[n,m] (+)= A[k,n]^T * B[k,m]

namespace cgt::kernels {

enum class Isa { scalar, avx2 };

// Backend selected at startup: AVX2 when supported, else scalar.
// The CGT_KERNELS env var ("scalar" or "avx2") overrides the default.
Isa active();
std::string isa_name(Isa isa);
bool isa_supported(Isa isa);
// Test hook. Selecting an unsupported backend is an error (returns false).
bool select(Isa isa);

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

void gemm_nn(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m, bool acc);
void gemm_nt(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m, bool acc);
void gemm_tn(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m, bool acc);

void add(const double* a, const double* b, double* y, std::size_t n);
void sub(const double* a, const double* b, double* y, std::size_t n);
void mul(const double* a, const double* b, double* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(const double* x, double alpha, double* y, std::size_t n);
void relu(const double* x, double* y, std::size_t n);
void relu_grad_acc(const double* x, const double* dy, double* dx, std::size_t n);
void leaky_relu(const double* x, double slope, double* y, std::size_t n);
void leaky_relu_grad_acc(const double* x, double slope, const double* dy, double* dx, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
double reduce_sum(const double* x, std::size_t n);
double reduce_max(const double* x, std::size_t n);

// Scalar reference path for f32, exposed so the AVX2 variants can be
// equivalence-tested against it regardless of the active backend.
namespace ref {
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
} // namespace ref

} // namespace cgt::kernels
