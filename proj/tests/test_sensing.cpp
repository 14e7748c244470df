// Measurement assembly and hierarchical recovery: dictionary columns against
// end-to-end frame simulation, the closed-form single-carrier block structure,
// off-grid columns against hand-built tap trajectories, hierarchical
// thresholding against brute-force best approximation, HiHTP recovery on
// orthonormal/random dictionaries, and the restricted-isometry probe against
// an exhaustive per-support eigenvalue sweep.
#include <algorithm>
#include <cmath>
#include <set>
#include <utility>
#include <vector>

#include "doctest.h"
#include "dsltv/channel.hpp"
#include "dsltv/sensing.hpp"

using namespace dsltv;

namespace {

CVec random_cvec(int n, std::uint64_t seed) {
    Rng rng(seed);
    CVec v(n);
    for (int i = 0; i < n; ++i) v(i) = rng.cnormal(1.0);
    return v;
}

CMat random_cmat(int rows, int cols, std::uint64_t seed) {
    Rng rng(seed);
    CMat m(rows, cols);
    for (int c = 0; c < cols; ++c) {
        for (int r = 0; r < rows; ++r) m(r, c) = rng.cnormal(1.0);
    }
    return m;
}

/** Reduced measurement of the pilot frame through the given trajectories. */
CVec measure_through(const WaveformConfig& cfg, const PilotPlan& plan,
                     const TapTrajectories& traj) {
    const TxFrame frame = modulate(cfg, plan.x);
    Rng noise(0);
    const CVec r = apply_channel_stream(traj, frame.s, frame.s_begin, 0.0, noise);
    return plan.reduce(demodulate(cfg, r));
}

/** Single on-grid path (l, q) with unit gain, materialized on the frame's
 *  receive clock. */
TapTrajectories unit_path(const WaveformConfig& cfg, int l, int q) {
    OnGridChannel chan;
    chan.dims = GridDims{cfg.L, cfg.Q, cfg.N};
    chan.gains = CMat::Zero(cfg.L, 2 * cfg.Q + 1);
    chan.gains(l, cfg.Q + q) = 1.0;
    return materialize_ongrid(chan, rx_times(cfg));
}

/** Measurement struct around a hand-built dictionary (recovery tests). */
MeasurementMatrix wrap_matrix(CMat A, int L, int Q, int N) {
    MeasurementMatrix M;
    M.A = std::move(A);
    M.dims = GridDims{L, Q, N};
    for (int l = 0; l < L; ++l) {
        for (int q = -Q; q <= Q; ++q) M.ongrid_cols.emplace_back(l, q);
    }
    return M;
}

/** Unitary D x D matrix from the QR factors of a random complex matrix. */
CMat random_unitary(int D, std::uint64_t seed) {
    const CMat G = random_cmat(D, D, seed);
    Eigen::HouseholderQR<CMat> qr(G);
    CMat U = qr.householderQ() * CMat::Identity(D, D);
    return U;
}

/** Energy of x captured by a hierarchical support (flat indices). */
double captured_energy(const CVec& x, const HierSupport& s, int bins) {
    double e = 0.0;
    for (int idx : s.flat(bins)) e += std::norm(x(idx));
    return e;
}

}  // namespace

TEST_CASE("on-grid dictionary columns equal end-to-end probe simulation") {
    const GridDims dims{8, 2, 256};
    for (WaveformKind kind : {WaveformKind::SCM, WaveformKind::AFDM}) {
        WaveformConfig cfg;
        cfg.kind = kind;
        cfg.N = 256;
        cfg.L = 8;
        cfg.Q = 2;
        cfg.P_afdm = 1;
        PilotBudget budget;
        budget.N_p_t = 2;
        budget.N_p = 2;
        Rng rng(1);
        const PilotPlan plan = plan_pilots(cfg, budget, PilotPower::Frame, rng);
        const MeasurementMatrix M = build_measurement_ongrid(cfg, plan, dims);
        REQUIRE(M.cols() == 8 * 5);
        REQUIRE(M.rows() == plan.rows());
        REQUIRE(M.ongrid_cols.size() == 40);
        for (int l = 0; l < dims.L; ++l) {
            for (int q = -dims.Q; q <= dims.Q; ++q) {
                const int j = dims.flat(l, q);
                CHECK(M.ongrid_cols[static_cast<std::size_t>(j)] == std::make_pair(l, q));
                const CVec col = measure_through(cfg, plan, unit_path(cfg, l, q));
                CHECK((M.A.col(j) - col).norm() < 1e-10);
            }
        }
    }
}

TEST_CASE("single-carrier dictionary has the closed-form block structure") {
    // Row (p, d) reads frame index m_p + d; only the transmitted pilot x_{m_p}
    // can reach it through delay d, so the entry at column (l, q) is
    // x_{m_p} e^{i 2 pi q (m_p + d) / N} when l = d and zero otherwise:
    // delay blocks never mix.
    WaveformConfig cfg;
    cfg.kind = WaveformKind::SCM;
    cfg.N = 64;
    cfg.L = 4;
    cfg.Q = 1;
    const GridDims dims{cfg.L, cfg.Q, cfg.N};
    PilotBudget budget;
    budget.N_p_t = 3;
    Rng rng(2);
    const PilotPlan plan = plan_pilots(cfg, budget, PilotPower::Frame, rng);
    const MeasurementMatrix M = build_measurement_ongrid(cfg, plan, dims);

    REQUIRE(M.rows() == 3 * 4);
    CMat expect(M.rows(), M.cols());
    for (int p = 0; p < 3; ++p) {
        const int m_p = plan.pilot_positions[static_cast<std::size_t>(p)];
        const Complex pilot = plan.x(m_p);
        for (int d = 0; d < 4; ++d) {
            const int row = p * 4 + d;
            REQUIRE(plan.kept[static_cast<std::size_t>(row)] == m_p + d);
            for (int l = 0; l < 4; ++l) {
                for (int q = -1; q <= 1; ++q) {
                    expect(row, dims.flat(l, q)) =
                        l == d ? pilot * unit_phasor(q * (m_p + d) / 64.0) : Complex{0.0, 0.0};
                }
            }
        }
    }
    CHECK((M.A - expect).norm() < 1e-12);
}

TEST_CASE("full-stride chirp dictionary columns collide only via guard folds") {
    // With P_afdm = 2Q+1 every (l, q) maps to a distinct transform offset
    // o = P l - q from the pilot, so each column's response occupies a single
    // reduced row. The guard-edge overlap-add deliberately aliases the edge
    // offsets o in [-Q, -1] onto rows stride + o and o in (stride, stride + Q]
    // onto rows o - stride; only those aliased pairs can overlap.
    WaveformConfig cfg;
    cfg.kind = WaveformKind::AFDM;
    cfg.N = 128;
    cfg.L = 5;
    cfg.Q = 2;
    cfg.P_afdm = 5;
    const GridDims dims{cfg.L, cfg.Q, cfg.N};
    PilotBudget budget;
    budget.N_p = 1;
    Rng rng(3);
    const PilotPlan plan = plan_pilots(cfg, budget, PilotPower::Unit, rng);
    const MeasurementMatrix M = build_measurement_ongrid(cfg, plan, dims);

    const int stride = (cfg.L - 1) * cfg.P_afdm;
    const auto reduced_row = [&](int l, int q) {
        const int o = cfg.P_afdm * l - q;
        if (o < 0) return stride + o;
        if (o > stride) return o - stride;
        return o;
    };
    const CMat gram = M.A.adjoint() * M.A;
    for (int i = 0; i < gram.rows(); ++i) {
        const auto [li, qi] = M.ongrid_cols[static_cast<std::size_t>(i)];
        for (int j = 0; j < gram.cols(); ++j) {
            const auto [lj, qj] = M.ongrid_cols[static_cast<std::size_t>(j)];
            const double g = std::abs(gram(i, j));
            if (reduced_row(li, qi) != reduced_row(lj, qj)) {
                CHECK(g < 1e-12);  // disjoint rows: exactly orthogonal
            } else if (i == j) {
                // Unit pilot, unit-modulus response: 1 on unfolded rows, 1/2
                // where the 1/sqrt(2) whitening weight applies.
                CHECK((std::abs(g - 1.0) < 1e-12 || std::abs(g - 0.5) < 1e-12));
            } else {
                CHECK(g == doctest::Approx(0.5).epsilon(1e-12));  // aliased pair
            }
        }
    }
}

TEST_CASE("off-grid dictionary columns match hand-built tap trajectories") {
    // Basis envelope runs on the frame clock n, the Doppler phasor on the
    // physical receive clock t(n); OFDM separates the two via its CP gaps.
    for (int variant = 0; variant < 2; ++variant) {
        WaveformConfig cfg;
        cfg.N = 64;
        cfg.L = 4;
        cfg.Q = 1;
        PilotBudget budget;
        if (variant == 0) {
            cfg.kind = WaveformKind::AFDM;
            cfg.P_afdm = 1;
            budget.N_p = 2;
        } else {
            cfg.kind = WaveformKind::OFDM;
            cfg.N_fft = 16;
            cfg.N_cp = 3;
            cfg.N_ofdm_symb = 4;
            budget.N_p_t = 2;
            budget.N_p_f = 4;
        }
        Rng rng(4);
        const PilotPlan plan = plan_pilots(cfg, budget, PilotPower::Frame, rng);

        const GridDims dims{cfg.L, cfg.Q, cfg.N};
        SupportMask support;
        support.dims = dims;
        support.mask.setZero(dims.L, dims.doppler_bins());
        support.mask(0, dims.Q + 1) = 1;
        support.mask(2, dims.Q - 1) = 1;
        support.mask(2, dims.Q + 0) = 1;
        const int Q_BEM = 3;
        const DpssBasis basis = compute_dpss(ProlateSpec::for_frame(cfg.N, Q_BEM));

        const MeasurementMatrix M = build_measurement_offgrid(cfg, plan, support, basis);
        REQUIRE(M.cols() == 3 * Q_BEM);
        const std::vector<std::int64_t> times = rx_times(cfg);
        int j = 0;
        for (const auto& [l, q] : support.active_points()) {
            for (int b = 0; b < Q_BEM; ++b, ++j) {
                CHECK(M.offgrid_cols[static_cast<std::size_t>(j)] == std::make_tuple(l, q, b));
                TapTrajectories traj;
                traj.dims = dims;
                traj.times = times;
                traj.h = CMat::Zero(dims.L, cfg.N);
                for (int n = 0; n < cfg.N; ++n) {
                    traj.h(l, n) = unit_phasor(q * static_cast<double>(times[static_cast<std::size_t>(n)]) / cfg.N) *
                                   basis.U(n, b);
                }
                const CVec col = measure_through(cfg, plan, traj);
                CHECK((M.A.col(j) - col).norm() < 1e-10);
            }
        }
    }
}

TEST_CASE("off-grid measurement is linear in the stacked coefficients") {
    WaveformConfig cfg;
    cfg.kind = WaveformKind::AFDM;
    cfg.N = 64;
    cfg.L = 4;
    cfg.Q = 1;
    cfg.P_afdm = 1;
    PilotBudget budget;
    budget.N_p = 2;
    Rng rng(5);
    const PilotPlan plan = plan_pilots(cfg, budget, PilotPower::Frame, rng);

    const GridDims dims{cfg.L, cfg.Q, cfg.N};
    SupportMask support;
    support.dims = dims;
    support.mask.setZero(dims.L, dims.doppler_bins());
    support.mask(0, dims.Q + 1) = 1;
    support.mask(2, dims.Q - 1) = 1;
    const int Q_BEM = 3;
    const DpssBasis basis = compute_dpss(ProlateSpec::for_frame(cfg.N, Q_BEM));
    const MeasurementMatrix M = build_measurement_offgrid(cfg, plan, support, basis);

    const CVec beta = random_cvec(M.cols(), 6);
    TapTrajectories traj;
    traj.dims = dims;
    traj.times = rx_times(cfg);
    traj.h = CMat::Zero(dims.L, cfg.N);
    int point = 0;
    for (const auto& [l, q] : support.active_points()) {
        const CVec h_lq = bem_reconstruct(beta.segment(point * Q_BEM, Q_BEM), q, basis);
        traj.h.row(l) += h_lq.transpose();
        ++point;
    }
    const CVec y = measure_through(cfg, plan, traj);
    CHECK((y - M.A * beta).norm() < 1e-9);
}

TEST_CASE("hierarchical threshold hand cases") {
    const int bins = 3;
    CVec x(6);
    x << 1.0, 0.5, 0.1, 0.2, 0.3, 0.1;
    const HierSupport s = hier_threshold(x, 2, bins, 1, 2);
    CHECK(s.blocks == std::vector<int>{0});
    REQUIRE(s.entries.size() == 1);
    CHECK(s.entries[0] == std::vector<int>{0, 1});
    CHECK(s.flat(bins) == std::vector<int>{0, 1});
    CHECK(s.count() == 2);

    // Both blocks kept: per-block picks are independent.
    const HierSupport s2 = hier_threshold(x, 2, bins, 2, 1);
    CHECK(s2.blocks == std::vector<int>{0, 1});
    CHECK(s2.entries[0] == std::vector<int>{0});
    CHECK(s2.entries[1] == std::vector<int>{1});

    // Ties break toward the lower index, making the result deterministic.
    const CVec ones = CVec::Ones(4);
    const HierSupport tie = hier_threshold(ones, 2, 2, 1, 1);
    CHECK(tie.blocks == std::vector<int>{0});
    CHECK(tie.entries[0] == std::vector<int>{0});

    const CVec zero = CVec::Zero(6);
    const HierSupport z = hier_threshold(zero, 2, 3, 1, 1);
    CHECK(z.blocks == std::vector<int>{0});
    CHECK(z.entries[0] == std::vector<int>{0});
}

TEST_CASE("hierarchical threshold maximizes captured energy") {
    const int L = 3, bins = 3, s_d = 2, s_D = 2;
    const std::vector<HierSupport> all = enumerate_hier_supports(L, bins, s_d, s_D);
    REQUIRE(all.size() == 27);  // C(3,2) * C(3,2)^2
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const CVec x = random_cvec(L * bins, 100 + seed);
        const HierSupport best = hier_threshold(x, L, bins, s_d, s_D);
        const double e_best = captured_energy(x, best, bins);
        for (const HierSupport& s : all) {
            CHECK(e_best >= captured_energy(x, s, bins) - 1e-12);
        }
    }
}

TEST_CASE("HiHTP recovers exactly through an orthonormal dictionary") {
    const int L = 4, Q = 1, bins = 3, D = L * bins;
    const MeasurementMatrix M = wrap_matrix(random_unitary(D, 7), L, Q, 16);
    CVec alpha = CVec::Zero(D);
    alpha(1) = Complex{0.9, -0.3};   // block 0, offset 1
    alpha(7) = Complex{-0.2, 1.1};   // block 2, offset 1
    const CVec y = M.A * alpha;
    const HihtpResult res = hihtp(M, y, 2, 1, 10);
    CHECK(res.converged);
    CHECK_FALSE(res.rank_deficient);
    CHECK(res.iterations <= 3);
    CHECK((res.alpha - alpha).norm() < 1e-12);
    CHECK(res.support.blocks == std::vector<int>{0, 2});
    CHECK(res.support.flat(bins) == std::vector<int>{1, 7});
    REQUIRE(!res.residual_history.empty());
    CHECK(res.residual_history.back() < 1e-12);
}

TEST_CASE("HiHTP matches the exhaustive least-squares oracle") {
    const int L = 4, Q = 1, bins = 3, D = L * bins, rows = 12;
    const std::vector<HierSupport> all = enumerate_hier_supports(L, bins, 2, 1);
    REQUIRE(all.size() == 54);
    int agreements = 0;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        // 1/sqrt(rows) makes the Gaussian dictionary a near-isometry, the
        // regime the unit-step gradient iteration is built for.
        const MeasurementMatrix M = wrap_matrix(
            random_cmat(rows, D, 200 + seed) / std::sqrt(static_cast<double>(rows)), L, Q, 16);
        Rng rng(300 + seed);
        // Hierarchically (2,1)-sparse truth with well-separated magnitudes.
        CVec alpha = CVec::Zero(D);
        const int l0 = rng.integer(L);
        int l1 = rng.integer(L);
        while (l1 == l0) l1 = rng.integer(L);
        alpha(l0 * bins + rng.integer(bins)) = rng.cnormal(1.0);
        alpha(l1 * bins + rng.integer(bins)) = rng.cnormal(1.0);
        const CVec y = M.A * alpha;

        // Oracle: smallest restricted-LS residual over every support.
        double best_res = std::numeric_limits<double>::infinity();
        const HierSupport* best = nullptr;
        for (const HierSupport& s : all) {
            const std::vector<int> idx = s.flat(bins);
            CMat B(rows, idx.size());
            for (std::size_t k = 0; k < idx.size(); ++k) B.col(static_cast<Eigen::Index>(k)) = M.A.col(idx[k]);
            const CVec coef = B.colPivHouseholderQr().solve(y);
            const double r = (y - B * coef).norm();
            if (r < best_res) {
                best_res = r;
                best = &s;
            }
        }
        REQUIRE(best != nullptr);
        CHECK(best_res < 1e-10);  // noiseless: the true support fits exactly

        const HihtpResult res = hihtp(M, y, 2, 1, 20);
        if (res.support == *best) {
            ++agreements;
            CHECK((res.alpha - alpha).norm() < 1e-8);
            CHECK(res.residual_history.back() < 1e-10);
        }
    }
    CHECK(agreements >= 28);  // random 10x12 Gaussian: near-certain recovery
}

TEST_CASE("HiHTP output respects the support budget and zero pattern") {
    const int L = 5, Q = 2, bins = 5, D = L * bins, rows = 8;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const MeasurementMatrix M = wrap_matrix(
            random_cmat(rows, D, 400 + seed) / std::sqrt(static_cast<double>(rows)), L, Q, 32);
        const CVec y = random_cvec(rows, 500 + seed);  // unstructured target
        const HihtpResult res = hihtp(M, y, 2, 2, 15);
        CHECK(res.support.blocks.size() <= 2);
        std::set<int> on;
        for (std::size_t bi = 0; bi < res.support.blocks.size(); ++bi) {
            CHECK(res.support.entries[bi].size() <= 2);
            for (int off : res.support.entries[bi]) {
                CHECK(off >= 0);
                CHECK(off < bins);
                on.insert(res.support.blocks[bi] * bins + off);
            }
        }
        for (int i = 0; i < D; ++i) {
            if (!on.count(i)) CHECK(res.alpha(i) == Complex{0.0, 0.0});
        }
        CHECK(static_cast<int>(res.residual_history.size()) == res.iterations);
        // Convergence means the support repeated, so the final restricted LS
        // reproduced the previous iterate exactly.
        if (res.converged) {
            REQUIRE(res.residual_history.size() >= 2);
            CHECK(res.residual_history.back() ==
                  res.residual_history[res.residual_history.size() - 2]);
        }
    }
}

TEST_CASE("HiHTP flags min-norm fallbacks on underdetermined supports") {
    const int L = 2, Q = 1, bins = 3, D = 6;
    const MeasurementMatrix M = wrap_matrix(random_cmat(1, D, 9), L, Q, 16);
    const CVec y = random_cvec(1, 10);
    const HihtpResult res = hihtp(M, y, 1, 2, 10);  // 2 unknowns, 1 equation
    CHECK(res.rank_deficient);
    CHECK(res.residual_history.back() < 1e-10);  // min-norm still interpolates
}

TEST_CASE("isometry probe is exact zero for unitary dictionaries") {
    const int L = 4, Q = 1, D = 12;
    const MeasurementMatrix M = wrap_matrix(random_unitary(D, 11), L, Q, 16);
    Rng rng(12);
    const HiripProbe probe = hirip_probe(M, 2, 1, 100, rng);
    CHECK(probe.exhaustive);
    CHECK(probe.supports_probed == 54);
    CHECK(probe.delta_hat < 1e-12);
}

TEST_CASE("exhaustive isometry probe equals the per-support eigenvalue sweep") {
    const int L = 4, Q = 1, bins = 3, D = 12, rows = 9;
    CMat A = random_cmat(rows, D, 13);
    A *= 1.0 / std::sqrt(static_cast<double>(rows));  // near-isometry scaling
    const MeasurementMatrix M = wrap_matrix(A, L, Q, 16);
    Rng rng(14);
    const HiripProbe probe = hirip_probe(M, 2, 1, 1000, rng);
    REQUIRE(probe.exhaustive);

    double expect = 0.0;
    for (const HierSupport& s : enumerate_hier_supports(L, bins, 2, 1)) {
        const std::vector<int> idx = s.flat(bins);
        CMat B(rows, idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) B.col(static_cast<Eigen::Index>(k)) = M.A.col(idx[k]);
        Eigen::SelfAdjointEigenSolver<CMat> eig(B.adjoint() * B);
        expect = std::max(expect, std::abs(eig.eigenvalues().maxCoeff() - 1.0));
        expect = std::max(expect, std::abs(eig.eigenvalues().minCoeff() - 1.0));
    }
    CHECK(probe.delta_hat == doctest::Approx(expect).epsilon(1e-12));
    CHECK(probe.delta_hat > 0.0);
}

TEST_CASE("sampled isometry probe lower-bounds the exhaustive constant") {
    const int L = 5, Q = 2, D = 25, rows = 15;
    CMat A = random_cmat(rows, D, 15);
    A *= 1.0 / std::sqrt(static_cast<double>(rows));
    const MeasurementMatrix M = wrap_matrix(A, L, Q, 32);
    Rng rng_s(16), rng_e(17);
    // C(5,2)*C(5,2)^2 = 1000 supports: cap trials below that to force sampling.
    const HiripProbe sampled = hirip_probe(M, 2, 2, 200, rng_s);
    CHECK_FALSE(sampled.exhaustive);
    CHECK(sampled.supports_probed == 200);
    const HiripProbe exact = hirip_probe(M, 2, 2, 1000, rng_e);
    REQUIRE(exact.exhaustive);
    CHECK(sampled.delta_hat > 0.0);
    CHECK(sampled.delta_hat <= exact.delta_hat + 1e-12);
}
