// AVX2 variants of the arithmetic kernels. This translation unit is compiled
// with -mavx2 -mfma on x86 builds (PUO_COMPILE_AVX2); elsewhere it only
// provides the null avx2_ops(). Availability is still checked at runtime, so
// a binary built with AVX2 support runs correctly on older x86 CPUs.

#include "puo/kernels.hpp"

#if defined(PUO_COMPILE_AVX2)

#include <immintrin.h>

namespace puo::kernels {

namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(lo) + _mm_cvtsd_f64(_mm_unpackhi_pd(lo, lo));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    if (i + 4 <= n) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        i += 4;
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void scale_avx2(double* x, double a, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), va));
    for (; i < n; ++i) x[i] *= a;
}

void add_avx2(const double* x, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) y[i] += x[i];
}

void ewise_min_avx2(const double* x, double* acc, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(acc + i, _mm256_min_pd(_mm256_loadu_pd(acc + i), _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) acc[i] = acc[i] < x[i] ? acc[i] : x[i];
}

void ewise_max_avx2(const double* x, double* acc, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(acc + i, _mm256_max_pd(_mm256_loadu_pd(acc + i), _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) acc[i] = acc[i] > x[i] ? acc[i] : x[i];
}

constexpr Ops kAvx2Ops = {
    "avx2",     dot_avx2,        axpy_avx2,
    scale_avx2, add_avx2,        ewise_min_avx2,
    ewise_max_avx2,
};

}  // namespace

const Ops* avx2_ops() {
#if defined(__GNUC__) || defined(__clang__)
    if (!__builtin_cpu_supports("avx2")) return nullptr;
#endif
    return &kAvx2Ops;
}

}  // namespace puo::kernels

#else  // !PUO_COMPILE_AVX2

namespace puo::kernels {
const Ops* avx2_ops() { return nullptr; }
}  // namespace puo::kernels

#endif
