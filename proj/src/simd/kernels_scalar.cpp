#include "kgprune/simd.hpp"

#include <cmath>

namespace kgp::simd {
namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

double sum_squares_scalar(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
    return acc;
}

double squared_distance_scalar(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - y[i];
        acc += d * d;
    }
    return acc;
}

double l1_distance_scalar(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += std::fabs(x[i] - y[i]);
    return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale_scalar(double a, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void translation_residual_scalar(const double* h, const double* r, const double* t,
                                 double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = h[i] + r[i] - t[i];
}

void relu_affine2_scalar(double w0, const double* x0, double w1, const double* x1,
                         double b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double v = w0 * x0[i] + w1 * x1[i] + b;
        out[i] = v > 0.0 ? v : 0.0;
    }
}

}  // namespace

const KernelTable& scalar_kernels() noexcept {
    static const KernelTable table{
        "scalar",
        dot_scalar,
        sum_squares_scalar,
        squared_distance_scalar,
        l1_distance_scalar,
        axpy_scalar,
        scale_scalar,
        translation_residual_scalar,
        relu_affine2_scalar,
    };
    return table;
}

}  // namespace kgp::simd
