// Shared scalar/matrix aliases and small numeric helpers used across the
// library. Everything is double precision: the test tolerances (1e-10
// orthonormality, 1e-8 eigen-residuals) are not reachable in single.
#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace dsltv {

using Complex = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kTwoPi = 2.0 * kPi;

/** e^{i2π·turns}; the argument is in cycles, not radians. */
inline Complex unit_phasor(double turns) {
    const double a = kTwoPi * turns;
    return {std::cos(a), std::sin(a)};
}

/** sin(πx)/(πx) with the removable singularity filled in. */
inline double sinc(double x) {
    if (x == 0.0) return 1.0;
    const double px = kPi * x;
    return std::sin(px) / px;
}

/** y = M x for a real matrix expression M and complex x; Eigen rejects
 *  mixed-scalar products, so the real and imaginary parts go separately. */
template <typename Derived>
CVec real_complex_product(const Eigen::MatrixBase<Derived>& M, const CVec& x) {
    CVec out(M.rows());
    out.real() = M * x.real();
    out.imag() = M * x.imag();
    return out;
}

/** Thrown when an operation's preconditions on sizes/configs are violated. */
class DimensionError : public std::invalid_argument {
public:
    explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw DimensionError(msg);
}

}  // namespace dsltv
