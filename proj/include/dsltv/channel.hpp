// Doubly sparse linear time-varying channel generation: complex gains on the
// active delay-Doppler grid points (integer Doppler bins, or clusters of
// fractionally shifted sub-paths around them), materialization of per-tap
// time trajectories, and application of the channel to a transmit stream.
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "dsltv/common.hpp"
#include "dsltv/grid.hpp"
#include "dsltv/rng.hpp"

namespace dsltv {

struct OnGridChannel {
    GridDims dims;
    CMat gains;  // L × (2Q+1), α_{l,q}; zero wherever the support is inactive
    double sigma_alpha_sq = 0.0;
};

struct OffGridChannel {
    GridDims dims;
    SupportMask support;
    int N_D = 1;  // sub-paths per active grid point
    // Row p of both matrices belongs to active point support.active_points()[p]
    // (delay-major, Doppler ascending); columns are the N_D sub-paths.
    CMat subpath_gains;    // α_{l,q,i}
    RMat fractional_shifts;  // κ_i ∈ (-1/2, 1/2]
    double sigma_alpha_sq = 0.0;
};

/** Per-tap complex gain trajectories h_{l,·} sampled at explicit times. */
struct TapTrajectories {
    GridDims dims;
    std::vector<std::int64_t> times;  // physical sample index of each column
    CMat h;                           // L × times.size()

    void validate() const {
        require(h.rows() == dims.L && h.cols() == static_cast<Eigen::Index>(times.size()),
                "TapTrajectories: h must be L x #times");
    }
};

/** Default evaluation clock: n = 0 .. count-1. */
std::vector<std::int64_t> frame_times(std::int64_t count);

/**
 * Per-gain variance making the expected total channel power 1:
 * on-grid 1/(L p_d (2Q+1) p_D); off-grid divides once more by N_D.
 * Type-3 profiles use the p_D = cluster_len/(2Q+1) convention.
 */
double ongrid_gain_variance(const SparsityProfile& profile, const GridDims& dims);
double offgrid_gain_variance(const SparsityProfile& profile, const GridDims& dims, int N_D);

/**
 * Draws i.i.d. circular complex Gaussian gains (variance sigma_alpha_sq) on
 * the active points (delay-major, Doppler ascending draw order) and
 * materializes h_{l,n} = Σ_q α_{l,q} e^{i2πnq/N} over n = 0..N-1.
 */
std::pair<OnGridChannel, TapTrajectories> gen_ongrid(const SupportMask& support,
                                                     const GridDims& dims,
                                                     double sigma_alpha_sq, Rng& rng);

/**
 * Per active point, N_D i.i.d. gains and fractional Doppler shifts
 * κ_i ~ U((-1/2, 1/2]) (draw order: gain then shift, sub-path ascending);
 * h_{l,n} = Σ_q Σ_i α_{l,q,i} e^{i2πn(q+κ_i)/N} over n = 0..N-1.
 */
std::pair<OffGridChannel, TapTrajectories> gen_offgrid(const SupportMask& support, int N_D,
                                                       const GridDims& dims,
                                                       double sigma_alpha_sq, Rng& rng);

/**
 * Re-evaluates trajectories at arbitrary integer times from the same gains
 * and shifts — the extended range for prediction ground truth, or the
 * physical sample positions of multi-prefix waveforms.
 */
TapTrajectories materialize_ongrid(const OnGridChannel& chan,
                                   const std::vector<std::int64_t>& times);
TapTrajectories materialize_offgrid(const OffGridChannel& chan,
                                    const std::vector<std::int64_t>& times);

/**
 * r_n = Σ_{l=0}^{L-1} s_{n-l} h_{l,n} + z_n for the N frame positions
 * n = 0..N-1, with z_n i.i.d. circular complex Gaussian of variance
 * sigma_w_sq. The transmit stream s covers positions -(L-1)..N-1 (the L-1
 * prefix samples come first), so every delayed copy is defined.
 * Requires traj.times == 0..N-1.
 */
CVec apply_channel(const TapTrajectories& traj, const CVec& s, double sigma_w_sq, Rng& rng);

/**
 * Stream-position variant: s covers positions [s_begin, s_begin + s.size());
 * output sample c is read at position traj.times[c], so
 * r_c = Σ_l s_{times[c]-l} h_{l,c} + z_c. Every times[c]-l must fall inside
 * the stream. This is the form multi-prefix waveforms need.
 */
CVec apply_channel_stream(const TapTrajectories& traj, const CVec& s, std::int64_t s_begin,
                          double sigma_w_sq, Rng& rng);

}  // namespace dsltv
