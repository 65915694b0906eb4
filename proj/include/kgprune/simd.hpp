#pragma once
// Dense double-precision kernels used by the embedding and classifier code.
//
// Each kernel has a scalar reference implementation and, on x86-64, an
// AVX2+FMA variant. The variant is picked once per process from CPUID; set
// KGP_SIMD=scalar to force the reference path. Within one process the choice
// never changes, so results are bit-reproducible run to run on one machine.
// Variants differ from the reference only by floating-point reassociation.

#include <cassert>
#include <cstddef>
#include <span>
#include <string_view>

namespace kgp::simd {

struct KernelTable {
    std::string_view name;
    double (*dot)(const double* x, const double* y, std::size_t n);
    double (*sum_squares)(const double* x, std::size_t n);
    double (*squared_distance)(const double* x, const double* y, std::size_t n);
    double (*l1_distance)(const double* x, const double* y, std::size_t n);
    // y += a * x
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    void (*scale)(double a, double* x, std::size_t n);
    // out = h + r - t
    void (*translation_residual)(const double* h, const double* r, const double* t,
                                 double* out, std::size_t n);
    // out = max(0, w0 * x0 + w1 * x1 + b)
    void (*relu_affine2)(double w0, const double* x0, double w1, const double* x1,
                         double b, double* out, std::size_t n);
};

const KernelTable& scalar_kernels() noexcept;
// nullptr when the CPU (or the build) lacks AVX2/FMA.
const KernelTable* avx2_kernels() noexcept;
// The table selected for this process.
const KernelTable& active() noexcept;

inline double dot(std::span<const double> x, std::span<const double> y) {
    assert(x.size() == y.size());
    return active().dot(x.data(), y.data(), x.size());
}

inline double sum_squares(std::span<const double> x) {
    return active().sum_squares(x.data(), x.size());
}

inline double squared_distance(std::span<const double> x, std::span<const double> y) {
    assert(x.size() == y.size());
    return active().squared_distance(x.data(), y.data(), x.size());
}

inline double l1_distance(std::span<const double> x, std::span<const double> y) {
    assert(x.size() == y.size());
    return active().l1_distance(x.data(), y.data(), x.size());
}

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
    assert(x.size() == y.size());
    active().axpy(a, x.data(), y.data(), x.size());
}

inline void scale(double a, std::span<double> x) {
    active().scale(a, x.data(), x.size());
}

inline void translation_residual(std::span<const double> h, std::span<const double> r,
                                 std::span<const double> t, std::span<double> out) {
    assert(h.size() == r.size() && r.size() == t.size() && t.size() == out.size());
    active().translation_residual(h.data(), r.data(), t.data(), out.data(), out.size());
}

inline void relu_affine2(double w0, std::span<const double> x0, double w1,
                         std::span<const double> x1, double b, std::span<double> out) {
    assert(x0.size() == out.size() && x1.size() == out.size());
    active().relu_affine2(w0, x0.data(), w1, x1.data(), b, out.data(), out.size());
}

}  // namespace kgp::simd
