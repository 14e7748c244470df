// Times the OpenMP kernel paths against their serial reference
// implementations and checks that both produce bitwise-identical results
// (the scheduling contract in parallel.hpp).
#include <chrono>
#include <cstdio>
#include <functional>

#include "dsltv/channel.hpp"
#include "dsltv/dpss.hpp"
#include "dsltv/estimate.hpp"
#include "dsltv/harness.hpp"
#include "dsltv/sensing.hpp"

using namespace dsltv;

namespace {

double time_ms(const std::function<void()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

void report(const char* name, double serial_ms, double parallel_ms, bool identical) {
    std::printf("%-28s serial %9.2f ms   parallel %9.2f ms   speedup %5.2fx   bitwise %s\n",
                name, serial_ms, parallel_ms, serial_ms / parallel_ms,
                identical ? "identical" : "DIFFERENT");
}

}  // namespace

int main() {
    const ExecPolicy par = ExecPolicy::max_parallel();
    std::printf("worker threads: %d\n\n", par.workers);

    {  // prolate matvec (Rayleigh-quotient workhorse)
        const int N = 4096;
        const double W = 0.5 / N;
        RVec x(N);
        Rng rng(7);
        for (int i = 0; i < N; ++i) x(i) = rng.normal();
        RVec a, b;
        const double ts = time_ms([&] { a = prolate_matvec(N, W, x, 0, N); });
        const double tp = time_ms([&] { b = prolate_matvec(N, W, x, 0, N, par); });
        report("prolate_matvec N=4096", ts, tp, (a.array() == b.array()).all());
    }

    {  // basis extension (prediction kernel)
        const DpssBasis basis = compute_dpss(ProlateSpec::for_frame(2048, 8));
        ExtendedBasis a, b;
        const double ts = time_ms([&] { a = extend_dpss_serial(basis, 2048, 2048 + 4000); });
        const double tp = time_ms([&] { b = extend_dpss(basis, 2048, 2048 + 4000, 1e-12, par); });
        report("extend_dpss N=2048 ext=4000", ts, tp,
               (a.U_ext.array() == b.U_ext.array()).all());
    }

    {  // measurement-matrix assembly (column-parallel)
        GridDims dims{30, 7, 4096};
        WaveformConfig cfg;
        cfg.kind = WaveformKind::AFDM;
        cfg.N = dims.N;
        cfg.L = dims.L;
        cfg.Q = dims.Q;
        cfg.P_afdm = 1;
        Rng rng(11);
        PilotPlan plan = plan_pilots(cfg, PilotBudget{21, 1, 1}, PilotPower::Frame, rng);
        MeasurementMatrix a, b;
        const double ts = time_ms([&] { a = build_measurement_ongrid(cfg, plan, dims); });
        const double tp = time_ms([&] { b = build_measurement_ongrid(cfg, plan, dims, par); });
        report("measurement AFDM 450 cols", ts, tp, (a.A.array() == b.A.array()).all());
    }

    {  // Monte Carlo trials (trial-parallel sweep)
        ExperimentConfig config;
        config.mode = RunMode::OffgridLmmse;
        config.dims = {20, 7, 2048};
        config.profile = {ProfileKind::Type1, 0.2, 0.2, 1};
        config.N_D = 3;
        config.Q_BEM = 4;
        config.trials = 24;
        config.snr_db = {20.0};
        WaveformRun w;
        w.cfg.kind = WaveformKind::AFDM;
        w.cfg.N = 2048;
        w.cfg.L = 20;
        w.cfg.Q = 7;
        w.budget.N_p = 21;
        config.waveforms = {w};
        MetricsReport a, b;
        ExperimentConfig cs = config;
        cs.workers = 1;
        ExperimentConfig cp = config;
        cp.workers = par.workers;
        const double ts = time_ms([&] { a = run(cs); });
        const double tp = time_ms([&] { b = run(cp); });
        // Reports echo the worker count, so compare the emitted rows instead.
        a.config_json.clear();
        b.config_json.clear();
        report("MC sweep 24 trials", ts, tp, a == b);
    }
    return 0;
}
