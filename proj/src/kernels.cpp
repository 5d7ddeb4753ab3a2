#include "edgelearn/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace edgelearn::kernels {

namespace scalar {

double dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double sum(const double* a, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i];
    return acc;
}

double sumsq(const double* a, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * a[i];
    return acc;
}

void scale(double* a, double alpha, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) a[i] *= alpha;
}

}  // namespace scalar

namespace {

Backend detect_backend() {
#if defined(__x86_64__) || defined(_M_X64)
    __builtin_cpu_init();
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return Backend::avx2;
    return Backend::scalar;
#elif defined(__aarch64__)
    return Backend::neon;
#else
    return Backend::scalar;
#endif
}

Backend initial_backend() {
    if (const char* env = std::getenv("EDGELEARN_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
#if defined(__x86_64__) || defined(_M_X64)
        if (std::strcmp(env, "avx2") == 0) return Backend::avx2;
#endif
#if defined(__aarch64__)
        if (std::strcmp(env, "neon") == 0) return Backend::neon;
#endif
    }
    return detect_backend();
}

std::atomic<Backend>& backend_slot() {
    static std::atomic<Backend> slot{initial_backend()};
    return slot;
}

}  // namespace

Backend backend() { return backend_slot().load(std::memory_order_relaxed); }

void set_backend(Backend b) { backend_slot().store(b, std::memory_order_relaxed); }

std::string backend_name() {
    switch (backend()) {
        case Backend::avx2: return "avx2";
        case Backend::neon: return "neon";
        default: return "scalar";
    }
}

double dot(const double* a, const double* b, std::size_t n) {
#if defined(__x86_64__) || defined(_M_X64)
    if (backend() == Backend::avx2) return avx2::dot(a, b, n);
#endif
#if defined(__aarch64__)
    if (backend() == Backend::neon) return neon::dot(a, b, n);
#endif
    return scalar::dot(a, b, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
#if defined(__x86_64__) || defined(_M_X64)
    if (backend() == Backend::avx2) return avx2::axpy(alpha, x, y, n);
#endif
#if defined(__aarch64__)
    if (backend() == Backend::neon) return neon::axpy(alpha, x, y, n);
#endif
    scalar::axpy(alpha, x, y, n);
}

double sum(const double* a, std::size_t n) {
#if defined(__x86_64__) || defined(_M_X64)
    if (backend() == Backend::avx2) return avx2::sum(a, n);
#endif
#if defined(__aarch64__)
    if (backend() == Backend::neon) return neon::sum(a, n);
#endif
    return scalar::sum(a, n);
}

double sumsq(const double* a, std::size_t n) {
#if defined(__x86_64__) || defined(_M_X64)
    if (backend() == Backend::avx2) return avx2::sumsq(a, n);
#endif
#if defined(__aarch64__)
    if (backend() == Backend::neon) return neon::sumsq(a, n);
#endif
    return scalar::sumsq(a, n);
}

void scale(double* a, double alpha, std::size_t n) {
#if defined(__x86_64__) || defined(_M_X64)
    if (backend() == Backend::avx2) return avx2::scale(a, alpha, n);
#endif
#if defined(__aarch64__)
    if (backend() == Backend::neon) return neon::scale(a, alpha, n);
#endif
    scalar::scale(a, alpha, n);
}

}  // namespace edgelearn::kernels
