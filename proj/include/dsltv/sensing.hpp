// Measurement-matrix assembly (columns built by end-to-end simulation of the
// pilot frame through single-path probe channels), hierarchical hard
// thresholding pursuit for on-grid recovery, and an empirical probe of the
// hierarchical restricted-isometry constant.
#pragma once

#include <tuple>
#include <utility>
#include <vector>

#include "dsltv/common.hpp"
#include "dsltv/dpss.hpp"
#include "dsltv/grid.hpp"
#include "dsltv/parallel.hpp"
#include "dsltv/rng.hpp"
#include "dsltv/waveform.hpp"

namespace dsltv {

struct MeasurementMatrix {
    CMat A;  // (reduced measurement rows) x D
    // Exactly one of the two column maps is populated.
    std::vector<std::pair<int, int>> ongrid_cols;          // (l, q), delay-major
    std::vector<std::tuple<int, int, int>> offgrid_cols;   // (l, q, b), basis fastest
    GridDims dims;
    WaveformConfig cfg;  // provenance
    PilotPlan plan;      // provenance

    int rows() const { return static_cast<int>(A.rows()); }
    int cols() const { return static_cast<int>(A.cols()); }
};

/**
 * On-grid dictionary: column (l, q) is the reduced demodulated response of
 * the pilot frame through the single-path channel h_{l,t} = e^{i2πqt/N},
 * with t the physical receive time of each frame position. D = L(2Q+1)
 * columns, delay-major. The AFDM guard-edge overlap-add (and its 1/sqrt(2)
 * whitening) is baked in via plan.reduce.
 */
MeasurementMatrix build_measurement_ongrid(const WaveformConfig& cfg, const PilotPlan& plan,
                                           const GridDims& dims,
                                           const ExecPolicy& policy = ExecPolicy::serial());

/**
 * Off-grid dictionary restricted to a known support: column (l, q, b) probes
 * h_{l,t(n)} = e^{i2πq·t(n)/N} u_{b,n} (basis envelope on the frame clock,
 * Doppler phase on the physical clock). Columns ordered support-major with
 * the basis index fastest, matching BemCoefficients stacking.
 */
MeasurementMatrix build_measurement_offgrid(const WaveformConfig& cfg, const PilotPlan& plan,
                                            const SupportMask& support, const DpssBasis& basis,
                                            const ExecPolicy& policy = ExecPolicy::serial());

struct HierSupport {
    std::vector<int> blocks;                // active delays, ascending
    std::vector<std::vector<int>> entries;  // per block: bin offsets 0..2Q, ascending

    bool operator==(const HierSupport& o) const {
        return blocks == o.blocks && entries == o.entries;
    }
    /** Flat column indices l*(2Q+1) + offset, ascending. */
    std::vector<int> flat(int bins) const;
    int count() const;
};

/**
 * Best (s_d, s_D)-hierarchically-sparse approximation support of x: per
 * delay block keep the s_D largest-magnitude entries, then keep the s_d
 * blocks with the largest thresholded Euclidean norms. Ties break toward the
 * lower index, so the result is deterministic.
 */
HierSupport hier_threshold(const CVec& x, int L, int bins, int s_d, int s_D);

struct HihtpResult {
    CVec alpha;            // length L(2Q+1), zero off the final support
    HierSupport support;
    int iterations = 0;
    bool converged = false;       // support fixed point reached before k_max
    bool rank_deficient = false;  // any restricted LS fell back to min-norm
    std::vector<double> residual_history;  // ||y - A alpha^{(k)}|| per iteration
};

/**
 * Hierarchical hard thresholding pursuit: starting from alpha = 0, iterate
 * (gradient step -> hierarchical threshold -> least squares restricted to
 * the support) until the support repeats or k_max iterations.
 */
HihtpResult hihtp(const MeasurementMatrix& M, const CVec& y, int s_d, int s_D, int k_max);

struct HiripProbe {
    double delta_hat = 0.0;  // max |‖Ax‖² - 1| over probed unit-norm x
    bool exhaustive = false;  // true when all supports were enumerated exactly
    long long supports_probed = 0;
};

/**
 * Empirical lower bound on the hierarchical RIP constant of M.A: when the
 * number of (s_d, s_D)-supports is at most `trials`, enumerate them all and
 * take per-support Gram eigenvalue extremes (exact delta over hierarchical
 * vectors); otherwise sample random unit-norm hierarchically sparse vectors.
 */
HiripProbe hirip_probe(const MeasurementMatrix& M, int s_d, int s_D, long long trials, Rng& rng);

/** All (s_d, s_D) hierarchical supports of an L x bins grid (test/oracle
 *  helper; count = C(L,s_d)*C(bins,s_D)^{s_d}, guarded to <= 200000). */
std::vector<HierSupport> enumerate_hier_supports(int L, int bins, int s_d, int s_D);

}  // namespace dsltv
