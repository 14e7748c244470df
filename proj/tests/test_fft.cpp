// Unitary DFT wrapper: round trips, norm preservation across transform
// lengths (including non-powers of two), and closed-form transforms of
// deltas, constants, and pure tones.
#include <cmath>

#include "doctest.h"
#include "dsltv/common.hpp"
#include "dsltv/fft.hpp"
#include "dsltv/rng.hpp"

using namespace dsltv;

namespace {

CVec random_cvec(int n, std::uint64_t seed) {
    Rng rng(seed);
    CVec v(n);
    for (int i = 0; i < n; ++i) v(i) = rng.cnormal(1.0);
    return v;
}

}  // namespace

TEST_CASE("forward then inverse is the identity") {
    for (int n : {2, 12, 15, 64, 100, 128, 1000}) {
        const CVec x = random_cvec(n, 100 + static_cast<std::uint64_t>(n));
        CVec y = x;
        fft::forward(y);
        fft::inverse(y);
        CHECK((y - x).norm() < 1e-12 * x.norm());
    }
}

TEST_CASE("both directions preserve the Euclidean norm") {
    for (int n : {3, 7, 32, 48, 81, 256}) {
        const CVec x = random_cvec(n, 200 + static_cast<std::uint64_t>(n));
        CVec f = x, b = x;
        fft::forward(f);
        fft::inverse(b);
        CHECK(std::abs(f.norm() - x.norm()) < 1e-12 * x.norm());
        CHECK(std::abs(b.norm() - x.norm()) < 1e-12 * x.norm());
    }
}

TEST_CASE("delta transforms to the flat spectrum 1/sqrt(n)") {
    const int n = 64;
    CVec x = CVec::Zero(n);
    x(0) = 1.0;
    fft::forward(x);
    const double expect = 1.0 / std::sqrt(static_cast<double>(n));
    for (int k = 0; k < n; ++k) {
        CHECK(std::abs(x(k) - Complex{expect, 0.0}) < 1e-13);
    }
}

TEST_CASE("constant transforms to sqrt(n) at DC") {
    const int n = 48;
    CVec x = CVec::Ones(n);
    fft::forward(x);
    CHECK(std::abs(x(0) - Complex{std::sqrt(static_cast<double>(n)), 0.0}) < 1e-12);
    for (int k = 1; k < n; ++k) CHECK(std::abs(x(k)) < 1e-12);
}

TEST_CASE("pure tone lands in its own bin") {
    const int n = 96;
    const int f = 17;
    CVec x(n);
    for (int m = 0; m < n; ++m) x(m) = unit_phasor(static_cast<double>(f) * m / n);
    fft::forward(x);
    CHECK(std::abs(x(f) - Complex{std::sqrt(static_cast<double>(n)), 0.0}) < 1e-11);
    double off_bin = 0.0;
    for (int k = 0; k < n; ++k) {
        if (k != f) off_bin += std::norm(x(k));
    }
    CHECK(off_bin < 1e-20);
}

TEST_CASE("real input has a conjugate-symmetric spectrum") {
    const int n = 40;
    Rng rng(7);
    CVec x(n);
    for (int i = 0; i < n; ++i) x(i) = Complex{rng.normal(), 0.0};
    CVec X = x;
    fft::forward(X);
    for (int k = 1; k < n; ++k) {
        CHECK(std::abs(X(n - k) - std::conj(X(k))) < 1e-12);
    }
}

TEST_CASE("forward is linear") {
    const int n = 50;
    const CVec a = random_cvec(n, 301);
    const CVec b = random_cvec(n, 302);
    const Complex ca{0.7, -1.2}, cb{-0.3, 0.4};
    CVec combined = ca * a + cb * b;
    fft::forward(combined);
    CVec fa = a, fb = b;
    fft::forward(fa);
    fft::forward(fb);
    CHECK((combined - (ca * fa + cb * fb)).norm() < 1e-12);
}
