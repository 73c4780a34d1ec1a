#pragma once

#include <cassert>
#include <cstddef>
#include <span>

namespace puo::kernels {

// Data-parallel primitives behind the training and scoring inner loops.
// The scalar table is the reference; the AVX2 table must agree with it
// within a small relative tolerance (summation order differs, so results
// are not bit-identical between tables). Whichever table is active stays
// fixed for the process lifetime, which keeps seeded runs reproducible.
struct Ops {
    const char* name;
    double (*dot)(const double* a, const double* b, std::size_t n);
    void (*axpy)(double a, const double* x, double* y, std::size_t n);  // y += a*x
    void (*scale)(double* x, double a, std::size_t n);                  // x *= a
    void (*add)(const double* x, double* y, std::size_t n);             // y += x
    void (*ewise_min)(const double* x, double* acc, std::size_t n);     // acc = min(acc, x)
    void (*ewise_max)(const double* x, double* acc, std::size_t n);     // acc = max(acc, x)
};

/// Scalar reference implementations; always available.
const Ops& scalar_ops();

/// AVX2 implementations, or nullptr when the build or the CPU lacks AVX2.
const Ops* avx2_ops();

/// The table in use. Resolved once per process: AVX2 when available,
/// otherwise scalar. Set PUO_KERNELS=scalar or PUO_KERNELS=avx2 to force
/// a table (forcing avx2 on an unsupported CPU falls back to scalar).
const Ops& active_ops();

inline double dot(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    return active_ops().dot(a.data(), b.data(), a.size());
}

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
    assert(x.size() == y.size());
    active_ops().axpy(a, x.data(), y.data(), x.size());
}

inline void scale(std::span<double> x, double a) { active_ops().scale(x.data(), a, x.size()); }

inline void add(std::span<const double> x, std::span<double> y) {
    assert(x.size() == y.size());
    active_ops().add(x.data(), y.data(), x.size());
}

inline void ewise_min(std::span<const double> x, std::span<double> acc) {
    assert(x.size() == acc.size());
    active_ops().ewise_min(x.data(), acc.data(), x.size());
}

inline void ewise_max(std::span<const double> x, std::span<double> acc) {
    assert(x.size() == acc.size());
    active_ops().ewise_max(x.data(), acc.data(), x.size());
}

inline double l2_norm_sq(std::span<const double> v) {
    return active_ops().dot(v.data(), v.data(), v.size());
}

}  // namespace puo::kernels
