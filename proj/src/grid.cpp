#include "dsltv/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dsltv {

namespace {

/** One Doppler activation row of length 2Q+1 for the given profile kind. */
Eigen::RowVectorXi sample_row(const SparsityProfile& profile, const GridDims& dims, Rng& rng) {
    const int bins = dims.doppler_bins();
    Eigen::RowVectorXi row = Eigen::RowVectorXi::Zero(bins);
    switch (profile.kind) {
        case ProfileKind::Type1:
        case ProfileKind::Type2:
            for (int b = 0; b < bins; ++b) row(b) = rng.bernoulli(profile.p_D) ? 1 : 0;
            break;
        case ProfileKind::Type3: {
            // Contiguous run of cluster_len bins, start uniform over the
            // positions where the run fits without wrapping.
            const int starts = bins - profile.cluster_len + 1;
            const int s = static_cast<int>(rng.integer(static_cast<std::uint64_t>(starts)));
            row.segment(s, profile.cluster_len).setOnes();
            break;
        }
    }
    return row;
}

/** k distinct indices drawn uniformly from [0, n), ascending. */
std::vector<int> choose_uniform(int n, int k, Rng& rng) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < k; ++i) {
        const int j = i + static_cast<int>(rng.integer(static_cast<std::uint64_t>(n - i)));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(k));
    std::sort(idx.begin(), idx.end());
    return idx;
}

/** Sparsity level rounded to the nearest attainable count. */
int level_count(double level, int cap) {
    const long long r = std::llround(level);
    return static_cast<int>(std::clamp<long long>(r, 0, cap));
}

}  // namespace

SupportMask sample_support(const SparsityProfile& profile, const GridDims& dims, Rng& rng) {
    dims.validate();
    profile.validate(dims);

    SupportMask out;
    out.dims = dims;
    out.mask = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>::Zero(dims.L, dims.doppler_bins());

    std::vector<int> delays;
    for (int l = 0; l < dims.L; ++l) {
        if (rng.bernoulli(profile.p_d)) delays.push_back(l);
    }

    if (delays.empty()) return out;

    if (profile.kind == ProfileKind::Type1) {
        const Eigen::RowVectorXi shared = sample_row(profile, dims, rng);
        for (int l : delays) out.mask.row(l) = shared;
    } else {
        for (int l : delays) out.mask.row(l) = sample_row(profile, dims, rng);
    }
    return out;
}

SupportMask sample_support_fixed(const SparsityProfile& profile, const GridDims& dims, Rng& rng) {
    dims.validate();
    profile.validate(dims);

    SupportMask out;
    out.dims = dims;
    const int bins = dims.doppler_bins();
    out.mask = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>::Zero(dims.L, bins);

    const auto [sd, sD] = sparsity_levels(profile, dims);
    const int n_delays = level_count(sd, dims.L);
    const int n_bins = profile.kind == ProfileKind::Type3 ? profile.cluster_len
                                                          : level_count(sD, bins);
    if (n_delays == 0 || n_bins == 0) return out;

    const std::vector<int> delays = choose_uniform(dims.L, n_delays, rng);

    auto fixed_row = [&]() {
        Eigen::RowVectorXi row = Eigen::RowVectorXi::Zero(bins);
        if (profile.kind == ProfileKind::Type3) {
            const int starts = bins - profile.cluster_len + 1;
            const int s = static_cast<int>(rng.integer(static_cast<std::uint64_t>(starts)));
            row.segment(s, profile.cluster_len).setOnes();
        } else {
            for (int b : choose_uniform(bins, n_bins, rng)) row(b) = 1;
        }
        return row;
    };

    if (profile.kind == ProfileKind::Type1) {
        const Eigen::RowVectorXi shared = fixed_row();
        for (int l : delays) out.mask.row(l) = shared;
    } else {
        for (int l : delays) out.mask.row(l) = fixed_row();
    }
    return out;
}

std::pair<double, double> sparsity_levels(const SparsityProfile& profile, const GridDims& dims) {
    dims.validate();
    profile.validate(dims);
    return {profile.p_d * dims.L, profile.p_D * dims.doppler_bins()};
}

}  // namespace dsltv
