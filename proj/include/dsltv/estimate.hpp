// LMMSE estimation of basis-expansion coefficients, channel reconstruction
// on the frame window, band-limited extrapolation beyond it, the reduced-rank
// MMSE prediction oracle, and the per-tap multi-band (single-BEM) baseline
// with its support-pattern basis cache.
#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "dsltv/channel.hpp"
#include "dsltv/common.hpp"
#include "dsltv/dpss.hpp"
#include "dsltv/grid.hpp"
#include "dsltv/sensing.hpp"

namespace dsltv {

enum class PriorKind {
    Isotropic,  // one shared variance: N * N_D * sigma_alpha^2 * mean(lambda)
    Spectral,   // per-order variance: N * N_D * sigma_alpha^2 * lambda_b
};

/** Prior variance of each of the Q_BEM coefficients of one active grid
 *  point. Derived from the sub-path gain prior: the demodulated tap has
 *  covariance N_D sigma_alpha^2 N C, so coefficient b carries variance
 *  N_D sigma_alpha^2 N lambda_b. */
RVec beta_prior_variances(const DpssBasis& basis, double sigma_alpha_sq, int N_D, PriorKind kind);

enum class LmmseForm {
    Auto,        // smaller of the two normal systems
    Gram,        // (A^H A + sigma_w^2 D^{-1})^{-1} A^H y
    Covariance,  // D A^H (A D A^H + sigma_w^2 I)^{-1} y
};

struct LmmseDiagnostics {
    bool min_norm_fallback = false;  // sigma_w^2 = 0 rank-deficient path taken
    double residual_norm = 0.0;      // ||y - A beta_hat||
};

/**
 * beta_hat = D A^H (A D A^H + sigma_w^2 I)^{-1} y with D the diagonal prior
 * covariance formed by tiling per_order_var over the columns (column j uses
 * per_order_var[j mod order]). Gram and covariance forms agree to machine
 * precision; sigma_w^2 = 0 falls back to a minimum-norm least squares solve.
 */
CVec lmmse_beta(const CMat& A, const CVec& y, const RVec& per_order_var, double sigma_w_sq,
                LmmseForm form = LmmseForm::Auto, LmmseDiagnostics* diag = nullptr);

struct EstimationResult {
    BemCoefficients beta_hat;
    CMat h_hat;  // L x N reconstructed trajectories
    LmmseDiagnostics diagnostics;
};

/**
 * Reconstruction on the frame window: h_hat(l, n) = sum over active q of
 * e^{i2πq t(n)/N} [U beta_block]_n. `times` defaults to the frame clock
 * t(n) = n; multi-prefix waveforms pass their physical receive times.
 */
CMat reconstruct(const BemCoefficients& beta, const DpssBasis& basis, const GridDims& dims,
                 const std::vector<std::int64_t>* times = nullptr);

/** Wraps lmmse_beta + reconstruct for a support-restricted measurement. */
EstimationResult estimate_offgrid(const MeasurementMatrix& M, const CVec& y,
                                  const DpssBasis& basis, double sigma_alpha_sq, int N_D,
                                  double sigma_w_sq, PriorKind prior = PriorKind::Isotropic,
                                  const std::vector<std::int64_t>* times = nullptr);

struct PredictionResult {
    CMat h_ext;     // L x N_ext trajectories over n = N .. N+N_ext-1
    int horizon = 0;
    std::vector<int> excluded_basis;  // basis indices dropped by the lambda floor
    RVec per_horizon_mse;             // filled by score_prediction
};

/**
 * Extrapolated trajectories h_ext(l, n) = sum over active q of
 * e^{i2πqn/N} [U_ext beta_block]_n for n in [N, N+N_ext), using the
 * band-limited basis continuation (frame clock).
 */
PredictionResult predict(const BemCoefficients& beta, const DpssBasis& basis,
                         const GridDims& dims, int N_ext, double lambda_floor = 1e-12,
                         const ExecPolicy& policy = ExecPolicy::serial());

/** predict() against a precomputed basis continuation (the extension is
 *  coefficient-independent, so sweeps share one). Requires ext.n_begin = N. */
PredictionResult predict_with(const BemCoefficients& beta, const ExtendedBasis& ext,
                              const DpssBasis& basis, const GridDims& dims);

/** Per-horizon-sample squared error summed over taps, against ground truth
 *  trajectories covering [N, N+N_ext). Returns the horizon average, i.e. the
 *  same normalization as mse_channel over the extrapolation window. */
double score_prediction(PredictionResult& pred, const TapTrajectories& truth);

/**
 * Reduced-rank MMSE prediction of one demodulated tap trajectory at an
 * out-of-window time: rho E U_r diag(1/lambda) U_r^H E^H h, with rho the
 * prolate cross-correlation row at n_target. Fed the true trajectory this
 * is the oracle the extrapolation predictor is compared against.
 */
Complex reduced_rank_mmse(const CVec& h_lq, int q, int rank, std::int64_t n_target,
                          const DpssBasis& basis, double lambda_floor = 1e-12);

/** Dense prolate kernel rows C_{n,k}, n in [n_begin, n_end), k in [0, N):
 *  the batch form of the oracle's cross-correlation rows. */
RMat prolate_rows(int N, double W, std::int64_t n_begin, std::int64_t n_end);

/**
 * Batch oracle: predictions for n in [n_begin, n_end) of one tap, using a
 * precomputed prolate_rows block (pass nullptr to build it internally).
 */
CVec reduced_rank_mmse_batch(const CVec& h_lq, int q, int rank, std::int64_t n_begin,
                             std::int64_t n_end, const DpssBasis& basis,
                             double lambda_floor = 1e-12, const RMat* cross_rows = nullptr);

// ---- multi-band single-BEM baseline ----

/** Multi-band prolate matrix: C̆_{k,n} = Σ_{q in bins} e^{i2πq(k-n)/N} C_{k,n}
 *  (Hermitian). Dense; guarded to N <= 1024. */
CMat multiband_prolate(int N, double W, const std::vector<int>& bins);

struct SingleBemBasis {
    int N = 0;
    double W = 0.0;
    std::vector<int> bins;
    CMat V;      // N x Q̌: leading eigenvectors of the multi-band matrix
    RVec lambda; // descending
};

/** Leading Q̌ eigenpairs of multiband_prolate; each eigenvector's phase is
 *  fixed by making its largest-magnitude entry real positive. */
SingleBemBasis compute_singlebem(int N, double W, const std::vector<int>& bins, int order);

struct SingleBemResult {
    CVec coeffs;  // V^H h
    CVec h_hat;   // V coeffs over [0, N)
    CVec h_ext;   // extrapolation over [N, N+N_ext)
};

/** Project one observed tap trajectory on the multi-band basis, reconstruct,
 *  and extrapolate via the multi-band kernel analogue of the band-limited
 *  continuation. */
SingleBemResult singlebem_baseline(const CVec& h_l, const SingleBemBasis& basis, int N_ext,
                                   double lambda_floor = 1e-12);

/**
 * Codebook bookkeeping for the baseline: every distinct (delay, active-bin
 * pattern) key needs its own basis of `order` vectors, whereas the
 * multiple-shifted representation always uses order*L*(2Q+1) vectors total.
 * Registration is lazy: keys are counted without materializing bases.
 */
class SingleBemCache {
public:
    explicit SingleBemCache(int order) : order_(order) {}

    /** Registers every active (delay, bin-pattern) of the support; returns
     *  the number of previously unseen keys. */
    int register_support(const SupportMask& support);

    long long distinct_keys() const { return static_cast<long long>(keys_.size()); }
    long long basis_vectors() const { return distinct_keys() * order_; }

    /** Codebook size of the multiple-shifted representation at these dims. */
    static long long shifted_codebook_size(const GridDims& dims, int order) {
        return static_cast<long long>(order) * dims.L * dims.doppler_bins();
    }

    /** Basis vectors needed if every possible key were materialized: one
     *  order-sized basis per delay per nonempty bin pattern,
     *  L * (2^(2Q+1) - 1) * order. Requires 2Q+1 <= 62. */
    static long long combinatorial_codebook_size(const GridDims& dims, int order) {
        require(dims.doppler_bins() <= 62, "combinatorial_codebook_size: too many bins");
        const long long patterns = (1LL << dims.doppler_bins()) - 1;
        return patterns * dims.L * order;
    }

private:
    int order_;
    std::map<std::pair<int, std::uint64_t>, long long> keys_;  // (delay, bin bitmask) -> hits
};

}  // namespace dsltv
