#include "dsltv/channel.hpp"

namespace dsltv {

std::vector<std::int64_t> frame_times(std::int64_t count) {
    std::vector<std::int64_t> t(static_cast<std::size_t>(count));
    for (std::int64_t i = 0; i < count; ++i) t[static_cast<std::size_t>(i)] = i;
    return t;
}

double ongrid_gain_variance(const SparsityProfile& profile, const GridDims& dims) {
    dims.validate();
    profile.validate(dims);
    const double bins_mean = (profile.kind == ProfileKind::Type3)
                                 ? static_cast<double>(profile.cluster_len)
                                 : profile.p_D * dims.doppler_bins();
    return 1.0 / (profile.p_d * dims.L * bins_mean);
}

double offgrid_gain_variance(const SparsityProfile& profile, const GridDims& dims, int N_D) {
    require(N_D >= 1, "offgrid_gain_variance: N_D must be >= 1");
    return ongrid_gain_variance(profile, dims) / N_D;
}

TapTrajectories materialize_ongrid(const OnGridChannel& chan,
                                   const std::vector<std::int64_t>& times) {
    const GridDims& d = chan.dims;
    require(chan.gains.rows() == d.L && chan.gains.cols() == d.doppler_bins(),
            "materialize_ongrid: gains must be L x (2Q+1)");
    TapTrajectories traj;
    traj.dims = d;
    traj.times = times;
    traj.h = CMat::Zero(d.L, static_cast<Eigen::Index>(times.size()));
    for (int l = 0; l < d.L; ++l) {
        for (int q = -d.Q; q <= d.Q; ++q) {
            const Complex a = chan.gains(l, d.Q + q);
            if (a == Complex{0.0, 0.0}) continue;
            for (std::size_t c = 0; c < times.size(); ++c) {
                traj.h(l, static_cast<Eigen::Index>(c)) +=
                    a * unit_phasor(static_cast<double>(times[c]) * q / d.N);
            }
        }
    }
    return traj;
}

TapTrajectories materialize_offgrid(const OffGridChannel& chan,
                                    const std::vector<std::int64_t>& times) {
    const GridDims& d = chan.dims;
    const auto points = chan.support.active_points();
    require(chan.subpath_gains.rows() == static_cast<Eigen::Index>(points.size()) &&
                chan.subpath_gains.cols() == chan.N_D,
            "materialize_offgrid: gain matrix must be #active x N_D");
    TapTrajectories traj;
    traj.dims = d;
    traj.times = times;
    traj.h = CMat::Zero(d.L, static_cast<Eigen::Index>(times.size()));
    for (std::size_t p = 0; p < points.size(); ++p) {
        const auto [l, q] = points[p];
        for (int i = 0; i < chan.N_D; ++i) {
            const Complex a = chan.subpath_gains(static_cast<Eigen::Index>(p), i);
            const double f = (q + chan.fractional_shifts(static_cast<Eigen::Index>(p), i)) / d.N;
            for (std::size_t c = 0; c < times.size(); ++c) {
                traj.h(l, static_cast<Eigen::Index>(c)) +=
                    a * unit_phasor(static_cast<double>(times[c]) * f);
            }
        }
    }
    return traj;
}

std::pair<OnGridChannel, TapTrajectories> gen_ongrid(const SupportMask& support,
                                                     const GridDims& dims,
                                                     double sigma_alpha_sq, Rng& rng) {
    dims.validate();
    require(sigma_alpha_sq > 0.0, "gen_ongrid: sigma_alpha_sq must be positive");
    OnGridChannel chan;
    chan.dims = dims;
    chan.sigma_alpha_sq = sigma_alpha_sq;
    chan.gains = CMat::Zero(dims.L, dims.doppler_bins());
    for (const auto& [l, q] : support.active_points()) {
        chan.gains(l, dims.Q + q) = rng.cnormal(sigma_alpha_sq);
    }
    return {chan, materialize_ongrid(chan, frame_times(dims.N))};
}

std::pair<OffGridChannel, TapTrajectories> gen_offgrid(const SupportMask& support, int N_D,
                                                       const GridDims& dims,
                                                       double sigma_alpha_sq, Rng& rng) {
    dims.validate();
    require(N_D >= 1, "gen_offgrid: N_D must be >= 1");
    require(sigma_alpha_sq > 0.0, "gen_offgrid: sigma_alpha_sq must be positive");
    OffGridChannel chan;
    chan.dims = dims;
    chan.support = support;
    chan.N_D = N_D;
    chan.sigma_alpha_sq = sigma_alpha_sq;
    const auto points = support.active_points();
    chan.subpath_gains.resize(static_cast<Eigen::Index>(points.size()), N_D);
    chan.fractional_shifts.resize(static_cast<Eigen::Index>(points.size()), N_D);
    for (std::size_t p = 0; p < points.size(); ++p) {
        for (int i = 0; i < N_D; ++i) {
            chan.subpath_gains(static_cast<Eigen::Index>(p), i) = rng.cnormal(sigma_alpha_sq);
            // 1/2 - U[0,1) lands in (-1/2, 1/2].
            chan.fractional_shifts(static_cast<Eigen::Index>(p), i) = 0.5 - rng.uniform01();
        }
    }
    return {chan, materialize_offgrid(chan, frame_times(dims.N))};
}

CVec apply_channel_stream(const TapTrajectories& traj, const CVec& s, std::int64_t s_begin,
                          double sigma_w_sq, Rng& rng) {
    traj.validate();
    require(sigma_w_sq >= 0.0, "apply_channel: noise variance must be >= 0");
    const int L = traj.dims.L;
    const std::int64_t s_end = s_begin + s.size();
    CVec r(static_cast<Eigen::Index>(traj.times.size()));
    for (std::size_t c = 0; c < traj.times.size(); ++c) {
        const std::int64_t t = traj.times[c];
        require(t - (L - 1) >= s_begin && t < s_end,
                "apply_channel: transmit stream does not cover all delayed reads");
        Complex acc{0.0, 0.0};
        for (int l = 0; l < L; ++l) {
            acc += s(static_cast<Eigen::Index>(t - l - s_begin)) *
                   traj.h(l, static_cast<Eigen::Index>(c));
        }
        if (sigma_w_sq > 0.0) acc += rng.cnormal(sigma_w_sq);
        r(static_cast<Eigen::Index>(c)) = acc;
    }
    return r;
}

CVec apply_channel(const TapTrajectories& traj, const CVec& s, double sigma_w_sq, Rng& rng) {
    const GridDims& d = traj.dims;
    require(static_cast<Eigen::Index>(traj.times.size()) == d.N,
            "apply_channel: trajectories must cover the N frame positions");
    for (std::size_t c = 0; c < traj.times.size(); ++c) {
        require(traj.times[c] == static_cast<std::int64_t>(c),
                "apply_channel: frame-clock form requires times 0..N-1");
    }
    require(s.size() == d.N + d.L - 1,
            "apply_channel: transmit stream must have N+L-1 samples");
    return apply_channel_stream(traj, s, -(d.L - 1), sigma_w_sq, rng);
}

}  // namespace dsltv
