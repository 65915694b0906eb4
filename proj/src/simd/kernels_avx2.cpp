// Compiled with -mavx2 -mfma; only reached through the dispatcher after a
// CPUID check, so nothing here may be called from generic code.
#include "kgprune/simd.hpp"

#if defined(__x86_64__) && defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

#include <cmath>

namespace kgp::simd {
namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

double sum_squares_avx2(const double* x, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(x + i);
        acc0 = _mm256_fmadd_pd(v, v, acc0);
    }
    double acc = hsum(acc0);
    for (; i < n; ++i) acc += x[i] * x[i];
    return acc;
}

double squared_distance_avx2(const double* x, const double* y, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        acc0 = _mm256_fmadd_pd(d, d, acc0);
    }
    double acc = hsum(acc0);
    for (; i < n; ++i) {
        const double d = x[i] - y[i];
        acc += d * d;
    }
    return acc;
}

double l1_distance_avx2(const double* x, const double* y, std::size_t n) {
    const __m256d sign_mask = _mm256_set1_pd(-0.0);
    __m256d acc0 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        acc0 = _mm256_add_pd(acc0, _mm256_andnot_pd(sign_mask, d));
    }
    double acc = hsum(acc0);
    for (; i < n; ++i) acc += std::fabs(x[i] - y[i]);
    return acc;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

void scale_avx2(double a, double* x, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) x[i] *= a;
}

void translation_residual_avx2(const double* h, const double* r, const double* t,
                               double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d s = _mm256_add_pd(_mm256_loadu_pd(h + i), _mm256_loadu_pd(r + i));
        _mm256_storeu_pd(out + i, _mm256_sub_pd(s, _mm256_loadu_pd(t + i)));
    }
    for (; i < n; ++i) out[i] = h[i] + r[i] - t[i];
}

void relu_affine2_avx2(double w0, const double* x0, double w1, const double* x1,
                       double b, double* out, std::size_t n) {
    const __m256d vw0 = _mm256_set1_pd(w0);
    const __m256d vw1 = _mm256_set1_pd(w1);
    const __m256d vb = _mm256_set1_pd(b);
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_fmadd_pd(vw0, _mm256_loadu_pd(x0 + i), vb);
        v = _mm256_fmadd_pd(vw1, _mm256_loadu_pd(x1 + i), v);
        _mm256_storeu_pd(out + i, _mm256_max_pd(v, zero));
    }
    for (; i < n; ++i) {
        const double v = w0 * x0[i] + w1 * x1[i] + b;
        out[i] = v > 0.0 ? v : 0.0;
    }
}

}  // namespace

const KernelTable* avx2_kernels_unchecked() noexcept {
    static const KernelTable table{
        "avx2",
        dot_avx2,
        sum_squares_avx2,
        squared_distance_avx2,
        l1_distance_avx2,
        axpy_avx2,
        scale_avx2,
        translation_residual_avx2,
        relu_affine2_avx2,
    };
    return &table;
}

}  // namespace kgp::simd

#else

namespace kgp::simd {
const KernelTable* avx2_kernels_unchecked() noexcept { return nullptr; }
}  // namespace kgp::simd

#endif
