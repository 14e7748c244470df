// Scheduling never changes results: every kernel that accepts an ExecPolicy
// must produce bitwise-identical output under the serial reference path and
// the OpenMP path, because iterations own disjoint output slots.
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "dsltv/dpss.hpp"
#include "dsltv/parallel.hpp"
#include "dsltv/rng.hpp"
#include "dsltv/sensing.hpp"
#include "dsltv/waveform.hpp"

using namespace dsltv;

namespace {

bool bitwise_equal(const RMat& a, const RMat& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           (a.array() == b.array()).all();
}

bool bitwise_equal(const CMat& a, const CMat& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           (a.array() == b.array()).all();
}

}  // namespace

TEST_CASE("parallel_for covers every index exactly once under both paths") {
    const std::int64_t n = 10007;
    for (const ExecPolicy& policy : {ExecPolicy::serial(), ExecPolicy::max_parallel()}) {
        std::vector<std::uint64_t> out(static_cast<std::size_t>(n), 0);
        parallel_for(n, policy, [&](std::int64_t i) {
            out[static_cast<std::size_t>(i)] = Rng::mix(static_cast<std::uint64_t>(i));
        });
        bool ok = true;
        for (std::int64_t i = 0; i < n; ++i) {
            ok = ok && out[static_cast<std::size_t>(i)] ==
                           Rng::mix(static_cast<std::uint64_t>(i));
        }
        CHECK(ok);
    }
}

TEST_CASE("serial_for equals parallel_for with one worker") {
    const std::int64_t n = 257;
    std::vector<double> a(static_cast<std::size_t>(n)), b(a);
    serial_for(n, [&](std::int64_t i) { a[static_cast<std::size_t>(i)] = 0.5 * i; });
    parallel_for(n, ExecPolicy::serial(),
                 [&](std::int64_t i) { b[static_cast<std::size_t>(i)] = 0.5 * i; });
    CHECK(a == b);
}

TEST_CASE("max_parallel reports at least one worker") {
    CHECK(ExecPolicy::max_parallel().workers >= 1);
}

TEST_CASE("prolate_matvec is policy-invariant bitwise") {
    const int N = 512;
    const double W = 0.5 / N;
    Rng rng(3);
    RVec x(N);
    for (int i = 0; i < N; ++i) x(i) = rng.normal();
    const RVec serial = prolate_matvec(N, W, x, -100, 300, ExecPolicy::serial());
    const RVec parallel = prolate_matvec(N, W, x, -100, 300, ExecPolicy::max_parallel());
    CHECK((serial.array() == parallel.array()).all());
}

TEST_CASE("extend_dpss matches its serial reference bitwise") {
    const DpssBasis basis = compute_dpss(ProlateSpec::for_frame(256, 4));
    const ExtendedBasis ref = extend_dpss_serial(basis, 256, 600);
    const ExtendedBasis par = extend_dpss(basis, 256, 600, 1e-12, ExecPolicy::max_parallel());
    const ExtendedBasis ser = extend_dpss(basis, 256, 600, 1e-12, ExecPolicy::serial());
    CHECK(ref.n_begin == par.n_begin);
    CHECK(ref.n_end == par.n_end);
    CHECK(ref.excluded == par.excluded);
    CHECK(bitwise_equal(ref.U_ext, par.U_ext));
    CHECK(bitwise_equal(ref.U_ext, ser.U_ext));
}

TEST_CASE("measurement assembly is policy-invariant bitwise") {
    GridDims dims{4, 1, 64};
    WaveformConfig cfg;
    cfg.kind = WaveformKind::AFDM;
    cfg.N = dims.N;
    cfg.L = dims.L;
    cfg.Q = dims.Q;
    cfg.P_afdm = 1;
    PilotBudget budget;
    budget.N_p = 2;

    Rng rng_a(21), rng_b(21);
    const PilotPlan plan_a = plan_pilots(cfg, budget, PilotPower::Frame, rng_a);
    const PilotPlan plan_b = plan_pilots(cfg, budget, PilotPower::Frame, rng_b);
    const MeasurementMatrix ser =
        build_measurement_ongrid(cfg, plan_a, dims, ExecPolicy::serial());
    const MeasurementMatrix par =
        build_measurement_ongrid(cfg, plan_b, dims, ExecPolicy::max_parallel());
    CHECK(ser.ongrid_cols == par.ongrid_cols);
    CHECK(bitwise_equal(ser.A, par.A));

    // Off-grid assembly: one fixed support, both policies.
    SupportMask support;
    support.dims = dims;
    support.mask.setZero(dims.L, dims.doppler_bins());
    support.mask(0, dims.Q + 1) = 1;
    support.mask(2, dims.Q - 1) = 1;
    const DpssBasis basis = compute_dpss(ProlateSpec::for_frame(dims.N, 3));
    const MeasurementMatrix off_ser =
        build_measurement_offgrid(cfg, plan_a, support, basis, ExecPolicy::serial());
    const MeasurementMatrix off_par =
        build_measurement_offgrid(cfg, plan_a, support, basis, ExecPolicy::max_parallel());
    CHECK(off_ser.offgrid_cols == off_par.offgrid_cols);
    CHECK(bitwise_equal(off_ser.A, off_par.A));
}
