#include "dsltv/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dsltv {

namespace {

/** Shared column builder: reduced response of the pilot frame through the
 *  single-path channel h_{l,t} = e^{i2πq t/N} * envelope(n). */
struct ColumnProbe {
    const WaveformConfig& cfg;
    const PilotPlan& plan;
    TxFrame frame;

    explicit ColumnProbe(const WaveformConfig& c, const PilotPlan& p)
        : cfg(c), plan(p), frame(modulate(c, p.x)) {}

    CVec column(int l, int q, const double* envelope) const {
        const int N = cfg.N;
        CVec r(N);
        for (int n = 0; n < N; ++n) {
            const std::int64_t t = frame.rx_times[static_cast<std::size_t>(n)];
            Complex v = frame.s(static_cast<Eigen::Index>(t - l - frame.s_begin)) *
                        unit_phasor(static_cast<double>(t) * q / N);
            if (envelope != nullptr) v *= envelope[n];
            r(n) = v;
        }
        return plan.reduce(demodulate(cfg, r));
    }
};

}  // namespace

MeasurementMatrix build_measurement_ongrid(const WaveformConfig& cfg, const PilotPlan& plan,
                                           const GridDims& dims, const ExecPolicy& policy) {
    dims.validate();
    require(cfg.N == dims.N && cfg.L == dims.L && cfg.Q == dims.Q,
            "build_measurement_ongrid: waveform and grid dims must agree");
    MeasurementMatrix M;
    M.dims = dims;
    M.cfg = cfg;
    M.plan = plan;
    const int bins = dims.doppler_bins();
    for (int l = 0; l < dims.L; ++l) {
        for (int q = -dims.Q; q <= dims.Q; ++q) M.ongrid_cols.emplace_back(l, q);
    }
    const ColumnProbe probe(cfg, plan);
    M.A.resize(plan.rows(), dims.L * bins);
    parallel_for(static_cast<std::int64_t>(M.A.cols()), policy, [&](std::int64_t j) {
        const auto [l, q] = M.ongrid_cols[static_cast<std::size_t>(j)];
        M.A.col(j) = probe.column(l, q, nullptr);
    });
    return M;
}

MeasurementMatrix build_measurement_offgrid(const WaveformConfig& cfg, const PilotPlan& plan,
                                            const SupportMask& support, const DpssBasis& basis,
                                            const ExecPolicy& policy) {
    const GridDims dims = support.dims;
    dims.validate();
    require(cfg.N == dims.N && cfg.L == dims.L && cfg.Q == dims.Q,
            "build_measurement_offgrid: waveform and grid dims must agree");
    require(basis.N == dims.N, "build_measurement_offgrid: basis window must match N");
    const auto points = support.active_points();
    require(!points.empty(), "build_measurement_offgrid: empty support");

    MeasurementMatrix M;
    M.dims = dims;
    M.cfg = cfg;
    M.plan = plan;
    const int K = basis.order();
    for (const auto& [l, q] : points) {
        for (int b = 0; b < K; ++b) M.offgrid_cols.emplace_back(l, q, b);
    }
    const ColumnProbe probe(cfg, plan);
    M.A.resize(plan.rows(), static_cast<Eigen::Index>(points.size()) * K);
    parallel_for(static_cast<std::int64_t>(M.A.cols()), policy, [&](std::int64_t j) {
        const auto [l, q, b] = M.offgrid_cols[static_cast<std::size_t>(j)];
        M.A.col(j) = probe.column(l, q, basis.U.col(b).data());
    });
    return M;
}

std::vector<int> HierSupport::flat(int bins) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        for (int e : entries[i]) out.push_back(blocks[i] * bins + e);
    }
    return out;
}

int HierSupport::count() const {
    int c = 0;
    for (const auto& e : entries) c += static_cast<int>(e.size());
    return c;
}

HierSupport hier_threshold(const CVec& x, int L, int bins, int s_d, int s_D) {
    require(x.size() == static_cast<Eigen::Index>(L) * bins,
            "hier_threshold: x must have L*bins entries");
    require(s_d >= 1 && s_d <= L && s_D >= 1 && s_D <= bins,
            "hier_threshold: sparsity levels out of range");

    // Per block: top-s_D entries by magnitude, lower index wins ties.
    std::vector<std::vector<int>> kept(static_cast<std::size_t>(L));
    std::vector<double> score(static_cast<std::size_t>(L));
    std::vector<int> order(static_cast<std::size_t>(bins));
    for (int l = 0; l < L; ++l) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return std::abs(x(l * bins + a)) > std::abs(x(l * bins + b));
        });
        auto& k = kept[static_cast<std::size_t>(l)];
        k.assign(order.begin(), order.begin() + s_D);
        std::sort(k.begin(), k.end());
        double s2 = 0.0;
        for (int e : k) s2 += std::norm(x(l * bins + e));
        score[static_cast<std::size_t>(l)] = s2;
    }

    // Top-s_d blocks by thresholded norm, lower index wins ties.
    std::vector<int> blk(static_cast<std::size_t>(L));
    std::iota(blk.begin(), blk.end(), 0);
    std::stable_sort(blk.begin(), blk.end(), [&](int a, int b) {
        return score[static_cast<std::size_t>(a)] > score[static_cast<std::size_t>(b)];
    });
    blk.resize(static_cast<std::size_t>(s_d));
    std::sort(blk.begin(), blk.end());

    HierSupport s;
    for (int l : blk) {
        s.blocks.push_back(l);
        s.entries.push_back(kept[static_cast<std::size_t>(l)]);
    }
    return s;
}

HihtpResult hihtp(const MeasurementMatrix& M, const CVec& y, int s_d, int s_D, int k_max) {
    require(!M.ongrid_cols.empty(), "hihtp: needs an on-grid measurement matrix");
    require(y.size() == M.A.rows(), "hihtp: measurement length mismatch");
    require(k_max >= 1, "hihtp: k_max must be >= 1");
    const int L = M.dims.L;
    const int bins = M.dims.doppler_bins();

    HihtpResult res;
    res.alpha = CVec::Zero(M.A.cols());
    HierSupport prev;
    for (int k = 0; k < k_max; ++k) {
        const CVec grad = res.alpha + M.A.adjoint() * (y - M.A * res.alpha);
        HierSupport next = hier_threshold(grad, L, bins, s_d, s_D);
        const std::vector<int> cols = next.flat(bins);
        CMat As(M.A.rows(), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t j = 0; j < cols.size(); ++j) As.col(static_cast<Eigen::Index>(j)) = M.A.col(cols[j]);
        // Rank-revealing minimum-norm solve; plain QR would silently blow up
        // on rank-deficient supports.
        Eigen::CompleteOrthogonalDecomposition<CMat> cod(As);
        if (cod.rank() < As.cols()) res.rank_deficient = true;
        const CVec sol = cod.solve(y);
        res.alpha.setZero();
        for (std::size_t j = 0; j < cols.size(); ++j) res.alpha(cols[j]) = sol(static_cast<Eigen::Index>(j));
        res.support = next;
        res.iterations = k + 1;
        res.residual_history.push_back((y - M.A * res.alpha).norm());
        if (k > 0 && next == prev) {
            res.converged = true;
            break;
        }
        prev = std::move(next);
    }
    return res;
}

namespace {

long long choose(int n, int k) {
    if (k < 0 || k > n) return 0;
    long long c = 1;
    for (int i = 0; i < k; ++i) {
        c = c * (n - i) / (i + 1);
        if (c > (1LL << 60)) return 1LL << 60;  // saturate; only compared against trials
    }
    return c;
}

long long hier_support_count(int L, int bins, int s_d, int s_D) {
    long long per_block = choose(bins, s_D);
    long long total = choose(L, s_d);
    for (int i = 0; i < s_d; ++i) {
        if (total > (1LL << 60) / std::max(per_block, 1LL)) return 1LL << 60;
        total *= per_block;
    }
    return total;
}

void enumerate_combinations(int n, int k, std::vector<std::vector<int>>& out) {
    std::vector<int> idx(static_cast<std::size_t>(k));
    std::iota(idx.begin(), idx.end(), 0);
    while (true) {
        out.push_back(idx);
        int i = k - 1;
        while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - k + i) --i;
        if (i < 0) break;
        ++idx[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < k; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    }
}

}  // namespace

std::vector<HierSupport> enumerate_hier_supports(int L, int bins, int s_d, int s_D) {
    require(hier_support_count(L, bins, s_d, s_D) <= 200000,
            "enumerate_hier_supports: support count too large");
    std::vector<std::vector<int>> block_sets;
    enumerate_combinations(L, s_d, block_sets);
    std::vector<std::vector<int>> entry_sets;
    enumerate_combinations(bins, s_D, entry_sets);

    std::vector<HierSupport> out;
    // Odometer over per-block entry patterns.
    for (const auto& blocks : block_sets) {
        std::vector<std::size_t> pick(blocks.size(), 0);
        while (true) {
            HierSupport s;
            s.blocks = blocks;
            for (std::size_t i = 0; i < blocks.size(); ++i) s.entries.push_back(entry_sets[pick[i]]);
            out.push_back(std::move(s));
            std::size_t i = 0;
            while (i < pick.size()) {
                if (++pick[i] < entry_sets.size()) break;
                pick[i] = 0;
                ++i;
            }
            if (i == pick.size()) break;
        }
    }
    return out;
}

HiripProbe hirip_probe(const MeasurementMatrix& M, int s_d, int s_D, long long trials, Rng& rng) {
    require(trials >= 1, "hirip_probe: trials must be >= 1");
    const int L = M.dims.L;
    const int bins = M.dims.doppler_bins();
    HiripProbe probe;

    const long long all = hier_support_count(L, bins, s_d, s_D);
    if (all <= trials && all <= 200000) {
        probe.exhaustive = true;
        for (const HierSupport& s : enumerate_hier_supports(L, bins, s_d, s_D)) {
            const std::vector<int> cols = s.flat(bins);
            CMat As(M.A.rows(), static_cast<Eigen::Index>(cols.size()));
            for (std::size_t j = 0; j < cols.size(); ++j) As.col(static_cast<Eigen::Index>(j)) = M.A.col(cols[j]);
            Eigen::SelfAdjointEigenSolver<CMat> eig(As.adjoint() * As);
            const double lo = eig.eigenvalues().minCoeff();
            const double hi = eig.eigenvalues().maxCoeff();
            probe.delta_hat = std::max({probe.delta_hat, hi - 1.0, 1.0 - lo});
            ++probe.supports_probed;
        }
        return probe;
    }

    for (long long t = 0; t < trials; ++t) {
        // Uniform hierarchical support: s_d distinct blocks, s_D distinct
        // entries per block, then a unit-norm complex Gaussian on it.
        std::vector<int> blocks;
        while (static_cast<int>(blocks.size()) < s_d) {
            const int c = static_cast<int>(rng.integer(static_cast<std::uint64_t>(L)));
            if (std::find(blocks.begin(), blocks.end(), c) == blocks.end()) blocks.push_back(c);
        }
        std::sort(blocks.begin(), blocks.end());
        CVec x = CVec::Zero(M.A.cols());
        for (int l : blocks) {
            std::vector<int> es;
            while (static_cast<int>(es.size()) < s_D) {
                const int e = static_cast<int>(rng.integer(static_cast<std::uint64_t>(bins)));
                if (std::find(es.begin(), es.end(), e) == es.end()) es.push_back(e);
            }
            for (int e : es) x(l * bins + e) = rng.cnormal(1.0);
        }
        x /= x.norm();
        probe.delta_hat = std::max(probe.delta_hat, std::abs((M.A * x).squaredNorm() - 1.0));
        ++probe.supports_probed;
    }
    return probe;
}

}  // namespace dsltv
