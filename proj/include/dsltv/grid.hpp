// Delay-Doppler grid geometry and the random activation patterns that make a
// channel doubly sparse: few active delay taps (Bernoulli p_d over L), few
// active Doppler bins per active tap (Bernoulli p_D over 2Q+1, or a shared
// row, or one contiguous cluster, depending on the profile kind).
#pragma once

#include <utility>
#include <vector>

#include "dsltv/common.hpp"
#include "dsltv/rng.hpp"

namespace dsltv {

struct GridDims {
    int L = 1;  // delay-tap count; max delay = L-1 samples
    int Q = 0;  // max integer Doppler; bins span -Q..Q
    int N = 2;  // frame length in samples

    int doppler_bins() const { return 2 * Q + 1; }
    /** Flat index of grid point (l, q), delay-major: l*(2Q+1) + (Q+q). */
    int flat(int l, int q) const { return l * doppler_bins() + Q + q; }
    void validate() const {
        require(L >= 1, "GridDims: L must be >= 1");
        require(Q >= 0, "GridDims: Q must be >= 0");
        require(N > L, "GridDims: N must exceed L");
        require(doppler_bins() <= N, "GridDims: 2Q+1 must not exceed N");
    }
};

enum class ProfileKind {
    Type1,  // all active delays share one Doppler activation row
    Type2,  // independent Doppler activations per active delay
    Type3,  // one contiguous, non-wrapping Doppler cluster per active delay
};

struct SparsityProfile {
    ProfileKind kind = ProfileKind::Type2;
    double p_d = 0.2;     // delay activation probability
    double p_D = 0.2;     // Doppler activation probability
    int cluster_len = 1;  // Type3 only

    void validate(const GridDims& dims) const {
        require(p_d > 0.0 && p_d < 1.0, "SparsityProfile: p_d must lie in (0,1)");
        require(p_D > 0.0 && p_D < 1.0, "SparsityProfile: p_D must lie in (0,1)");
        if (kind == ProfileKind::Type3) {
            require(cluster_len >= 1 && cluster_len <= dims.doppler_bins(),
                    "SparsityProfile: cluster_len must lie in [1, 2Q+1]");
        }
    }
};

struct SupportMask {
    GridDims dims;
    // mask(l, Q+q) = 1 iff grid point (l, q) is active.
    Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> mask;

    bool active(int l, int q) const { return mask(l, dims.Q + q) != 0; }

    /** Delays with at least one active Doppler bin. */
    std::vector<int> active_delays() const {
        std::vector<int> out;
        for (int l = 0; l < dims.L; ++l) {
            if (mask.row(l).sum() > 0) out.push_back(l);
        }
        return out;
    }

    /** Active Doppler bins (values in [-Q, Q]) of delay l, ascending. */
    std::vector<int> active_bins(int l) const {
        std::vector<int> out;
        for (int q = -dims.Q; q <= dims.Q; ++q) {
            if (active(l, q)) out.push_back(q);
        }
        return out;
    }

    /** All active (l, q) pairs, delay-major then Doppler ascending. */
    std::vector<std::pair<int, int>> active_points() const {
        std::vector<std::pair<int, int>> out;
        for (int l = 0; l < dims.L; ++l) {
            for (int q = -dims.Q; q <= dims.Q; ++q) {
                if (active(l, q)) out.emplace_back(l, q);
            }
        }
        return out;
    }

    int count() const { return static_cast<int>(mask.sum()); }
};

/**
 * Draws an activation pattern. Delays are i.i.d. Bernoulli(p_d); the Doppler
 * row of each active delay follows the profile kind (shared row / i.i.d. rows
 * / uniformly placed contiguous cluster of cluster_len, no wraparound).
 */
SupportMask sample_support(const SparsityProfile& profile, const GridDims& dims, Rng& rng);

/**
 * Draws an activation pattern whose counts equal the sparsity levels exactly:
 * round(p_d L) active delays chosen uniformly without replacement, and
 * round(p_D (2Q+1)) active Doppler bins per active delay (one shared uniform
 * pattern for Type1, independent uniform patterns for Type2, a uniformly
 * placed cluster_len run for Type3). Monte Carlo sweeps use this sampler so
 * that a recoverer sized for the sparsity levels faces no capacity mismatch;
 * sample_support keeps the Bernoulli law of the generative model.
 */
SupportMask sample_support_fixed(const SparsityProfile& profile, const GridDims& dims, Rng& rng);

/**
 * Expected sparsity levels (s_d, s_D) = (p_d L, p_D (2Q+1)). Type-3 profiles
 * wanting s_D to match the cluster size should set p_D = cluster_len/(2Q+1).
 */
std::pair<double, double> sparsity_levels(const SparsityProfile& profile, const GridDims& dims);

}  // namespace dsltv
