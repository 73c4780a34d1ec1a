#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "puo/kernels.hpp"
#include "puo/rng.hpp"

using namespace puo;

namespace {

std::vector<double> random_vector(Rng& rng, std::size_t n, double lo = -2.0, double hi = 2.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

// tolerance scaled by the magnitude of the terms, since SIMD summation
// order differs from the scalar reference
double dot_tolerance(const std::vector<double>& a, const std::vector<double>& b) {
    double mag = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) mag += std::abs(a[i] * b[i]);
    return 1e-12 * std::max(mag, 1.0);
}

}  // namespace

TEST_CASE("scalar dot matches a hand-rolled loop") {
    const std::vector<double> a{1.0, 2.0, 3.0};
    const std::vector<double> b{-1.0, 0.5, 2.0};
    CHECK(kernels::scalar_ops().dot(a.data(), b.data(), 3) == doctest::Approx(6.0));
    CHECK(kernels::scalar_ops().dot(a.data(), b.data(), 0) == 0.0);
}

TEST_CASE("simd kernels agree with the scalar reference") {
    const kernels::Ops* simd = kernels::avx2_ops();
    if (simd == nullptr) return;  // CPU or build without AVX2

    Rng rng(42);
    for (std::size_t n : {0u, 1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 31u, 50u, 67u}) {
        const auto a = random_vector(rng, n);
        const auto b = random_vector(rng, n);

        CHECK(std::abs(simd->dot(a.data(), b.data(), n) -
                       kernels::scalar_ops().dot(a.data(), b.data(), n)) <= dot_tolerance(a, b));

        auto y1 = random_vector(rng, n);
        auto y2 = y1;
        kernels::scalar_ops().axpy(0.37, a.data(), y1.data(), n);
        simd->axpy(0.37, a.data(), y2.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-13));

        auto s1 = a;
        auto s2 = a;
        kernels::scalar_ops().scale(s1.data(), -1.75, n);
        simd->scale(s2.data(), -1.75, n);
        CHECK(s1 == s2);  // multiply is exact per element

        auto add1 = b;
        auto add2 = b;
        kernels::scalar_ops().add(a.data(), add1.data(), n);
        simd->add(a.data(), add2.data(), n);
        CHECK(add1 == add2);

        auto min1 = b;
        auto min2 = b;
        kernels::scalar_ops().ewise_min(a.data(), min1.data(), n);
        simd->ewise_min(a.data(), min2.data(), n);
        CHECK(min1 == min2);

        auto max1 = b;
        auto max2 = b;
        kernels::scalar_ops().ewise_max(a.data(), max1.data(), n);
        simd->ewise_max(a.data(), max2.data(), n);
        CHECK(max1 == max2);
    }
}

TEST_CASE("active table is resolved and stable") {
    const kernels::Ops& first = kernels::active_ops();
    const kernels::Ops& second = kernels::active_ops();
    CHECK(&first == &second);
    const std::string name = first.name;
    CHECK((name == "scalar" || name == "avx2"));
}

TEST_CASE("span wrappers forward to the active table") {
    const std::vector<double> a{1.0, 2.0, 2.0};
    CHECK(kernels::l2_norm_sq(a) == doctest::Approx(9.0));
    std::vector<double> acc{5.0, -5.0, 0.0};
    kernels::ewise_max(a, acc);
    CHECK(acc == std::vector<double>{5.0, 2.0, 2.0});
}
