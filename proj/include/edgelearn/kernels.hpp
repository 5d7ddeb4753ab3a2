#pragma once

// Dense double-precision kernels behind the numeric core. Every kernel has a
// scalar reference implementation plus SIMD variants (AVX2+FMA on x86-64,
// NEON on aarch64) selected once at runtime from CPU capabilities. The scalar
// versions stay exported so equivalence tests can compare the dispatched path
// against the reference on the same inputs.

#include <cstddef>
#include <string>

namespace edgelearn::kernels {

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
double sum(const double* a, std::size_t n);
double sumsq(const double* a, std::size_t n);
void scale(double* a, double alpha, std::size_t n);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
double sum(const double* a, std::size_t n);
double sumsq(const double* a, std::size_t n);
void scale(double* a, double alpha, std::size_t n);
}  // namespace avx2
#endif

#if defined(__aarch64__)
namespace neon {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
double sum(const double* a, std::size_t n);
double sumsq(const double* a, std::size_t n);
void scale(double* a, double alpha, std::size_t n);
}  // namespace neon
#endif

enum class Backend { scalar, avx2, neon };

// Active backend. Initialized from CPU detection on first use; the
// EDGELEARN_KERNELS env var ("scalar", "avx2", "neon") or set_backend()
// override it.
Backend backend();
void set_backend(Backend b);
std::string backend_name();

double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
double sum(const double* a, std::size_t n);
double sumsq(const double* a, std::size_t n);
void scale(double* a, double alpha, std::size_t n);

}  // namespace edgelearn::kernels
