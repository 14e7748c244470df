// Discrete prolate spheroidal sequences (Slepian basis): the order-Q_BEM
// eigenbasis of the N×N prolate matrix C_{k,n} = sin(2πW(k-n))/(π(k-n)),
// plus the modulated-basis projection used to compress one tap trajectory,
// the explicit frequency-domain mapping matrix (small-N oracle), and the
// band-limited extrapolation of basis vectors beyond the observation window.
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dsltv/common.hpp"
#include "dsltv/grid.hpp"
#include "dsltv/parallel.hpp"

namespace dsltv {

struct ProlateSpec {
    int N = 2;          // window length in samples
    double W = 0.25;    // half-bandwidth, cycles/sample
    int Q_BEM = 1;      // basis order (number of eigenpairs)

    /** The library-wide default: one-DFT-bin half-bandwidth W = 1/(2N). */
    static ProlateSpec for_frame(int N, int Q_BEM) { return {N, 0.5 / N, Q_BEM}; }

    void validate() const {
        require(N >= 2, "ProlateSpec: N must be >= 2");
        require(W > 0.0 && W < 0.5, "ProlateSpec: W must lie in (0, 1/2)");
        require(Q_BEM >= 1 && Q_BEM <= N, "ProlateSpec: Q_BEM must lie in [1, N]");
    }
};

struct DpssBasis {
    int N = 0;
    double W = 0.0;
    RMat U;       // N × Q_BEM, unit-norm columns, most concentrated first
    RVec lambda;  // Q_BEM concentration eigenvalues, descending in [0, 1]

    int order() const { return static_cast<int>(U.cols()); }
};

/** Stacked basis coefficients of all active grid points, delay-major, then
 *  Doppler ascending, then basis index (fastest). */
struct BemCoefficients {
    std::vector<std::pair<int, int>> support;  // active (l, q) in stacking order
    int order = 0;                             // Q_BEM, coefficients per point
    CVec beta;                                 // length support.size() * order

    CVec block(std::size_t point) const {
        return beta.segment(static_cast<Eigen::Index>(point) * order, order);
    }
    void validate() const {
        require(beta.size() == static_cast<Eigen::Index>(support.size()) * order,
                "BemCoefficients: beta length must be #support * order");
    }
};

/**
 * Prolate matrix entry sin(2πW(k-n))/(π(k-n)), with the diagonal limit 2W.
 * Valid for any integers k, n (also outside [0, N-1]); N is part of the
 * grid signature but does not enter the entry formula.
 */
double prolate_entry(std::int64_t k, std::int64_t n, std::int64_t N, double W);

/**
 * y_k = Σ_{n=0..N-1} C_{k+k_offset, n} x_n for k = 0..rows-1. The workhorse
 * behind Rayleigh quotients (k_offset = 0, rows = N) and extrapolation.
 */
RVec prolate_matvec(int N, double W, const RVec& x, std::int64_t k_offset, int rows,
                    const ExecPolicy& policy = ExecPolicy::serial());

/**
 * First Q_BEM prolate eigenpairs. Eigenvectors come from Slepian's commuting
 * symmetric tridiagonal matrix (diagonal ((N-1-2n)/2)^2 cos(2πW),
 * off-diagonal n(N-n)/2) — the prolate matrix's exponentially clustered
 * spectrum makes a direct dense eigendecomposition fragile at N ~ 2048 —
 * then each λ_b is recovered as the Rayleigh quotient u^T C u against the
 * true prolate matrix. Each column is scaled so its first nonzero entry is
 * positive.
 */
DpssBasis compute_dpss(const ProlateSpec& spec);

/** β = U^H E^H h where E = diag(e^{i2πqn/N}): basis coefficients of one
 *  demodulated tap trajectory. */
CVec bem_project(const CVec& h_lq, int q, const DpssBasis& basis);

/** h = E U β, the rank-Q_BEM reconstruction matching bem_project. */
CVec bem_reconstruct(const CVec& beta_lq, int q, const DpssBasis& basis);

/**
 * Explicit frequency-domain mapping matrix B̃ of shape N × (2Q+1)·Q_BEM:
 * column (q, b) holds (1/√N) · Ũ_b circularly shifted by q rows, with Ũ_b
 * the unitary DFT of u_b. Columns ordered Doppler-major (q = -Q..Q), basis
 * index fastest. Dense and O(N²(2Q+1)Q_BEM) to build — intended as a
 * small-N oracle; measurement assembly uses the time-domain columns
 * e^{i2πqn/N} u_{b,n} instead. Guarded to N ≤ 4096.
 */
CMat build_B(const GridDims& dims, int Q_BEM, const DpssBasis& basis);

struct ExtendedBasis {
    std::int64_t n_begin = 0;   // inclusive
    std::int64_t n_end = 0;     // exclusive
    RMat U_ext;                 // (n_end - n_begin) × order
    std::vector<int> excluded;  // basis indices with λ below the floor (columns zeroed)
};

/**
 * Band-limited continuation u^ext_{b,n} = (1/λ_b) Σ_k C_{k,n} u_{b,k} over
 * n ∈ [n_begin, n_end). Rows overlapping [0, N-1] copy the in-window
 * samples (there the formula is the eigen identity). Basis indices with
 * λ_b < lambda_floor are excluded — the division is ill-conditioned — and
 * reported; their columns are zero.
 */
ExtendedBasis extend_dpss(const DpssBasis& basis, std::int64_t n_begin, std::int64_t n_end,
                          double lambda_floor = 1e-12,
                          const ExecPolicy& policy = ExecPolicy::serial());

/** Serial reference for the extrapolation kernel (benchmark comparator). */
ExtendedBasis extend_dpss_serial(const DpssBasis& basis, std::int64_t n_begin, std::int64_t n_end,
                                 double lambda_floor = 1e-12);

/** Binary round-trip of a computed basis, keyed by (N, W, Q_BEM). */
void save_dpss(const DpssBasis& basis, const std::string& path);
DpssBasis load_dpss(const std::string& path);
/** Cache-file name for a spec, e.g. "dpss_N2048_W0.000244140625_Q8.bin". */
std::string dpss_cache_name(const ProlateSpec& spec);

}  // namespace dsltv
