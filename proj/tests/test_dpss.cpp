// Slepian basis computation and its uses: prolate kernel values, eigenpairs
// against a dense-eigensolver oracle, the trace identity, modulated-basis
// projection/reconstruction, the frequency-domain mapping-matrix oracle, and
// band-limited extrapolation (in-window identity, energy split, spectrum).
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <vector>

#include "doctest.h"
#include "dsltv/channel.hpp"
#include "dsltv/dpss.hpp"
#include "dsltv/fft.hpp"
#include "dsltv/rng.hpp"

using namespace dsltv;

namespace {

// Dense prolate matrix, built in the test from the defining formula.
RMat dense_prolate(int N, double W) {
    RMat C(N, N);
    for (int k = 0; k < N; ++k) {
        for (int n = 0; n < N; ++n) {
            if (k == n) {
                C(k, n) = 2.0 * W;
            } else {
                const double d = static_cast<double>(k - n);
                C(k, n) = std::sin(kTwoPi * W * d) / (kPi * d);
            }
        }
    }
    return C;
}

CVec random_offgrid_tap(int N, int N_D, std::uint64_t seed) {
    GridDims dims{1, 0, N};
    SupportMask sup;
    sup.dims = dims;
    sup.mask.setOnes(1, 1);
    Rng rng(seed);
    auto [chan, traj] = gen_offgrid(sup, N_D, dims, 1.0 / N_D, rng);
    return traj.h.row(0).transpose();
}

}  // namespace

TEST_CASE("prolate_entry closed-form values") {
    CHECK(prolate_entry(5, 5, 64, 0.125) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(prolate_entry(1, 0, 64, 0.25) == doctest::Approx(1.0 / kPi).epsilon(1e-14));
    CHECK(prolate_entry(2, 0, 64, 0.5) == doctest::Approx(0.0).epsilon(1e-15));
    // Symmetry and shift invariance of the Toeplitz generator.
    CHECK(prolate_entry(7, 3, 64, 0.01) == prolate_entry(3, 7, 64, 0.01));
    CHECK(prolate_entry(12, 8, 64, 0.01) == prolate_entry(112, 108, 64, 0.01));
}

TEST_CASE("prolate_matvec matches a direct double loop") {
    const int N = 64;
    const double W = 0.03;
    Rng rng(4);
    RVec x(N);
    for (int i = 0; i < N; ++i) x(i) = rng.normal();
    const std::int64_t k_offset = -10;
    const int rows = 90;
    const RVec got = prolate_matvec(N, W, x, k_offset, rows);
    REQUIRE(got.size() == rows);
    for (int r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (int n = 0; n < N; ++n) acc += prolate_entry(k_offset + r, n, N, W) * x(n);
        CHECK(got(r) == doctest::Approx(acc).epsilon(1e-12));
    }
}

TEST_CASE("basis columns are orthonormal with descending eigenvalues in [0,1]") {
    const DpssBasis basis = compute_dpss(ProlateSpec::for_frame(512, 6));
    REQUIRE(basis.order() == 6);
    const RMat gram = basis.U.transpose() * basis.U;
    CHECK((gram - RMat::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-10);
    for (int b = 0; b < 6; ++b) {
        CHECK(basis.lambda(b) >= 0.0);
        CHECK(basis.lambda(b) <= 1.0);
        if (b > 0) CHECK(basis.lambda(b) < basis.lambda(b - 1));
    }
}

TEST_CASE("sign convention: first nonzero entry of each column is positive") {
    const DpssBasis basis = compute_dpss(ProlateSpec::for_frame(256, 5));
    for (int b = 0; b < basis.order(); ++b) {
        int i = 0;
        while (i < basis.N && basis.U(i, b) == 0.0) ++i;
        REQUIRE(i < basis.N);
        CHECK(basis.U(i, b) > 0.0);
    }
}

TEST_CASE("eigen-residual against the dense prolate matrix") {
    const int N = 512;
    const double W = 0.5 / N;
    const DpssBasis basis = compute_dpss({N, W, 6});
    const RMat C = dense_prolate(N, W);
    for (int b = 0; b < basis.order(); ++b) {
        const RVec residual = C * basis.U.col(b) - basis.lambda(b) * basis.U.col(b);
        CHECK(residual.norm() < 1e-8);
    }
}

TEST_CASE("eigenpairs agree with a dense symmetric eigensolver at N=128") {
    const int N = 128;
    const double W = 0.5 / N;
    const int order = 6;
    const DpssBasis basis = compute_dpss({N, W, order});
    Eigen::SelfAdjointEigenSolver<RMat> es(dense_prolate(N, W));
    REQUIRE(es.info() == Eigen::Success);
    for (int b = 0; b < order; ++b) {
        const double lambda_dense = es.eigenvalues()(N - 1 - b);  // ascending storage
        CHECK(std::abs(basis.lambda(b) - lambda_dense) < 1e-8);
    }
    // Eigenvector agreement where the spectral gaps are far above the solver
    // noise (indices 0..4 here; the gap below index 5 is ~1e-8).
    for (int b = 0; b < 5; ++b) {
        const double align = std::abs(es.eigenvectors().col(N - 1 - b).dot(basis.U.col(b)));
        CHECK(align == doctest::Approx(1.0).epsilon(1e-8));
    }
}

TEST_CASE("trace identity: all N eigenvalues sum to 2WN = 1") {
    const int N = 256;
    const DpssBasis basis = compute_dpss(ProlateSpec::for_frame(N, N));
    CHECK(std::abs(basis.lambda.sum() - 1.0) < 1e-6);
    // Partial sums stay below the full trace.
    double partial = 0.0;
    for (int b = 0; b < N; ++b) {
        partial += basis.lambda(b);
        CHECK(partial <= 1.0 + 1e-9);
    }
}

TEST_CASE("projection identity, idempotence, and residual orthogonality") {
    const int N = 256;
    const int q = 3;
    const DpssBasis basis = compute_dpss(ProlateSpec::for_frame(N, 4));

    // h exactly in span{E_q U}: round trip is exact.
    Rng rng(31);
    CVec c(4);
    for (int b = 0; b < 4; ++b) c(b) = rng.cnormal(1.0);
    const CVec h_span = bem_reconstruct(c, q, basis);
    CHECK((bem_project(h_span, q, basis) - c).norm() < 1e-10);
    CHECK((bem_reconstruct(bem_project(h_span, q, basis), q, basis) - h_span).norm() < 1e-10);

    // Generic tap: projecting the reconstruction returns identical
    // coefficients, and the residual is orthogonal to every basis column.
    const CVec h = random_offgrid_tap(N, 3, 77);
    const CVec beta = bem_project(h, q, basis);
    const CVec h_rec = bem_reconstruct(beta, q, basis);
    CHECK((bem_project(h_rec, q, basis) - beta).norm() < 1e-10);
    const CVec residual = h - h_rec;
    for (int b = 0; b < 4; ++b) {
        CVec col(N);
        for (int n = 0; n < N; ++n) {
            col(n) = unit_phasor(static_cast<double>(q) * n / N) * basis.U(n, b);
        }
        CHECK(std::abs(col.dot(residual)) < 1e-9);
    }
}

TEST_CASE("representation error decays log-linearly in the basis order") {
    const int N = 512;
    const int N_D = 3;
    const int taps = 25;
    std::vector<double> nmse;
    for (int order = 1; order <= 6; ++order) {
        const DpssBasis basis = compute_dpss(ProlateSpec::for_frame(N, order));
        double num = 0.0, den = 0.0;
        for (int t = 0; t < taps; ++t) {
            const CVec h = random_offgrid_tap(N, N_D, 1000 + static_cast<std::uint64_t>(t));
            const CVec h_rec = bem_reconstruct(bem_project(h, 0, basis), 0, basis);
            num += (h - h_rec).squaredNorm();
            den += h.squaredNorm();
        }
        nmse.push_back(num / den);
    }
    for (std::size_t i = 1; i < nmse.size(); ++i) CHECK(nmse[i] < nmse[i - 1]);
    // Log-affine fit quality over order = 1..6.
    const int n = static_cast<int>(nmse.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (int i = 0; i < n; ++i) {
        const double x = i + 1.0, y = std::log10(nmse[static_cast<std::size_t>(i)]);
        sx += x; sy += y; sxx += x * x; sxy += x * y; syy += y * y;
    }
    const double cov = sxy - sx * sy / n;
    const double vx = sxx - sx * sx / n;
    const double vy = syy - sy * sy / n;
    const double r2 = cov * cov / (vx * vy);
    CHECK(r2 >= 0.9);
}

TEST_CASE("mapping matrix: shape, column norms, time-domain equivalence") {
    const int N = 64;
    const GridDims dims{4, 2, N};
    const int order = 3;
    const DpssBasis basis = compute_dpss(ProlateSpec::for_frame(N, order));
    const CMat B = build_B(dims, order, basis);
    REQUIRE(B.rows() == N);
    REQUIRE(B.cols() == dims.doppler_bins() * order);
    for (int j = 0; j < B.cols(); ++j) {
        CHECK(B.col(j).norm() == doctest::Approx(1.0 / std::sqrt(static_cast<double>(N)))
                                     .epsilon(1e-12));
    }

    // For any beta, sqrt(N) * invDFT(B beta) equals the direct time-domain
    // synthesis sum_{q,b} beta_{q,b} e^{i2pi q n / N} u_{b,n}.
    Rng rng(5);
    CVec beta(B.cols());
    for (int j = 0; j < beta.size(); ++j) beta(j) = rng.cnormal(1.0);
    CVec freq = B * beta;
    fft::inverse(freq);
    const CVec via_B = std::sqrt(static_cast<double>(N)) * freq;
    CVec direct = CVec::Zero(N);
    int j = 0;
    for (int q = -dims.Q; q <= dims.Q; ++q) {
        for (int b = 0; b < order; ++b, ++j) {
            for (int n = 0; n < N; ++n) {
                direct(n) += beta(j) * unit_phasor(static_cast<double>(q) * n / N) *
                             basis.U(n, b);
            }
        }
    }
    CHECK((via_B - direct).norm() < 1e-9);
}

TEST_CASE("extension reproduces in-window samples exactly") {
    const DpssBasis basis = compute_dpss(ProlateSpec::for_frame(256, 4));
    const ExtendedBasis ext = extend_dpss(basis, -20, 300);
    REQUIRE(ext.n_begin == -20);
    REQUIRE(ext.n_end == 300);
    CHECK((ext.U_ext.block(20, 0, 256, 4).array() == basis.U.array()).all());
    CHECK(ext.excluded.empty());
}

TEST_CASE("out-of-window extension matches the defining sum") {
    const int N = 256;
    const DpssBasis basis = compute_dpss(ProlateSpec::for_frame(N, 3));
    const ExtendedBasis ext = extend_dpss(basis, N, N + 10);
    for (int b = 0; b < 3; ++b) {
        for (int r = 0; r < 10; ++r) {
            double acc = 0.0;
            for (int k = 0; k < N; ++k) {
                acc += prolate_entry(N + r, k, N, basis.W) * basis.U(k, b);
            }
            acc /= basis.lambda(b);
            CHECK(ext.U_ext(r, b) == doctest::Approx(acc).epsilon(1e-10));
        }
    }
}

TEST_CASE("lambda floor excludes ill-conditioned basis indices") {
    // At 2WN = 1 the eighth eigenvalue is ~1.9e-13, below the 1e-12 floor.
    const DpssBasis basis = compute_dpss(ProlateSpec::for_frame(256, 8));
    REQUIRE(basis.lambda(7) < 1e-12);
    REQUIRE(basis.lambda(6) > 1e-12);
    const ExtendedBasis ext = extend_dpss(basis, 256, 300);
    CHECK(ext.excluded == std::vector<int>{7});
    CHECK(ext.U_ext.col(7).norm() == 0.0);
    CHECK(ext.U_ext.col(6).norm() > 0.0);

    // Raising the floor drops more indices.
    const ExtendedBasis strict = extend_dpss(basis, 256, 300, 1e-6);
    CHECK(strict.excluded == std::vector<int>{5, 6, 7});
}

TEST_CASE("empty extension range yields zero rows") {
    const DpssBasis basis = compute_dpss(ProlateSpec::for_frame(128, 2));
    const ExtendedBasis ext = extend_dpss(basis, 128, 128);
    CHECK(ext.U_ext.rows() == 0);
    CHECK(ext.U_ext.cols() == 2);
}

TEST_CASE("in-window energy fraction of the continuation approximates lambda") {
    const int N = 2048;
    const DpssBasis basis = compute_dpss(ProlateSpec::for_frame(N, 4));
    const std::int64_t M = 24LL * N;  // truncation range for the energy sum
    const ExtendedBasis ext =
        extend_dpss(basis, -M, N + M, 1e-12, ExecPolicy::max_parallel());
    for (int b = 0; b < 4; ++b) {
        // In-window energy is exactly 1, so the fraction is 1/total.
        const double fraction = 1.0 / ext.U_ext.col(b).squaredNorm();
        CHECK(std::abs(fraction - basis.lambda(b)) < 1e-2);
    }
}

TEST_CASE("the first continuation is band-limited to |f| <= W") {
    const int N = 256;
    const double W = 0.5 / N;
    const DpssBasis basis = compute_dpss({N, W, 1});
    const std::int64_t M = 256LL * N;
    const ExtendedBasis ext =
        extend_dpss(basis, -M, N + M, 1e-12, ExecPolicy::max_parallel());
    const std::int64_t len = 2 * M + N;
    std::int64_t nfft = 1;
    while (nfft < len) nfft <<= 1;
    CVec padded = CVec::Zero(nfft);
    for (std::int64_t i = 0; i < len; ++i) padded(i) = ext.U_ext(i, 0);
    fft::forward(padded);
    const double f_cut = W * static_cast<double>(nfft);
    double in_band = 0.0, total = 0.0;
    for (std::int64_t k = 0; k < nfft; ++k) {
        const double e = std::norm(padded(k));
        total += e;
        const double dist = std::min(static_cast<double>(k), static_cast<double>(nfft - k));
        if (dist <= f_cut) in_band += e;
    }
    CHECK(in_band / total >= 0.999);
}

TEST_CASE("save/load round trip is bitwise and the cache name is canonical") {
    const ProlateSpec spec{128, 0.5 / 128, 3};
    const DpssBasis basis = compute_dpss(spec);
    const std::string path = "/tmp/dsltv_test_dpss_cache.bin";
    save_dpss(basis, path);
    const DpssBasis loaded = load_dpss(path);
    CHECK(loaded.N == basis.N);
    CHECK(loaded.W == basis.W);
    CHECK(loaded.order() == basis.order());
    CHECK((loaded.U.array() == basis.U.array()).all());
    CHECK((loaded.lambda.array() == basis.lambda.array()).all());
    std::remove(path.c_str());

    CHECK(dpss_cache_name(ProlateSpec{2048, 0.000244140625, 8}) ==
          "dpss_N2048_W0.000244140625_Q8.bin");
}
