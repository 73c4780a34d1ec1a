#include "puo/kernels.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstring>

namespace puo::kernels {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale_scalar(double* x, double a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void add_scalar(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += x[i];
}

void ewise_min_scalar(const double* x, double* acc, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) acc[i] = std::min(acc[i], x[i]);
}

void ewise_max_scalar(const double* x, double* acc, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) acc[i] = std::max(acc[i], x[i]);
}

constexpr Ops kScalarOps = {
    "scalar",   dot_scalar,        axpy_scalar,
    scale_scalar, add_scalar,      ewise_min_scalar,
    ewise_max_scalar,
};

const Ops* resolve_active() {
    const char* force = std::getenv("PUO_KERNELS");
    if (force != nullptr && std::strcmp(force, "scalar") == 0) return &kScalarOps;
    if (const Ops* simd = avx2_ops()) return simd;
    return &kScalarOps;
}

}  // namespace

const Ops& scalar_ops() { return kScalarOps; }

const Ops& active_ops() {
    static const Ops* active = resolve_active();
    return *active;
}

}  // namespace puo::kernels
