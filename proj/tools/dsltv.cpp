// Command-line front end: experiment runner plus small inspection
// subcommands (overhead tables, basis dumps, isometry probes, single-channel
// estimate/predict replays, channel generation).
#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dsltv/harness.hpp"

namespace {

using namespace dsltv;

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f.good()) throw std::runtime_error("cannot write " + path);
    f << text;
    if (!f.good()) throw std::runtime_error("write failed: " + path);
}

void print_or_write(const std::string& out_path, const std::string& text) {
    if (out_path.empty()) {
        std::cout << text;
    } else {
        write_text(out_path, text);
        std::cerr << "wrote " << out_path << "\n";
    }
}

struct CommonOverrides {
    std::uint64_t seed = 0;
    bool has_seed = false;
    int workers = 0;
    std::string out_dir;
};

void apply_overrides(ExperimentConfig& config, const CommonOverrides& ov) {
    if (ov.has_seed) config.seed = ov.seed;
    if (ov.workers > 0) config.workers = ov.workers;
    if (!ov.out_dir.empty()) config.out_dir = ov.out_dir;
}

int cmd_run(const std::string& config_path, const CommonOverrides& ov) {
    ExperimentConfig config = load_config(config_path);
    apply_overrides(config, ov);
    const MetricsReport report = run(config);
    const EmitPaths paths = emit(report, config.out_dir, config.tag);
    std::cerr << "wrote " << paths.csv << " and " << paths.json << "\n";
    const double rate = report.max_excluded_rate();
    if (rate > config.exclude_threshold) {
        std::cerr << "excluded-trial rate " << rate << " exceeds threshold "
                  << config.exclude_threshold << "\n";
        return 2;
    }
    return 0;
}

int cmd_overhead(const std::string& config_path, const std::string& out_path,
                 const std::string& plans_dir) {
    ExperimentConfig config = load_config(config_path);
    config.mode = RunMode::Overhead;
    if (!plans_dir.empty()) {
        // Pilot values use the same seed derivation as experiment runs, so the
        // exported plan is exactly the one a run with this config would use.
        for (std::size_t w = 0; w < config.waveforms.size(); ++w) {
            const WaveformRun& wr = config.waveforms[w];
            Rng rng(Rng::derive(config.seed, kTagPilots, static_cast<std::uint64_t>(w)));
            const PilotPlan plan = plan_pilots(wr.cfg, wr.budget, config.pilot_power, rng);
            const std::string path = plans_dir + "/plan_" + std::to_string(w) + "_" +
                                     waveform_name(wr.cfg.kind) + ".json";
            std::ofstream out(path, std::ios::binary);
            if (!out.good()) throw std::runtime_error("cannot write " + path);
            out << pilot_plan_json(plan);
        }
    }
    print_or_write(out_path, report_csv(run(config)));
    return 0;
}

int cmd_dpss(int n, double w, int count, const std::string& cache_dir,
             const std::string& out_path) {
    ProlateSpec spec{n, w, count};
    spec.validate();
    DpssBasis basis;
    bool loaded = false;
    std::string cache_path;
    if (!cache_dir.empty()) {
        cache_path = cache_dir + "/" + dpss_cache_name(spec);
        std::ifstream probe(cache_path, std::ios::binary);
        if (probe.good()) {
            basis = load_dpss(cache_path);
            loaded = basis.N == n && basis.W == w && basis.order() == count;
        }
    }
    if (!loaded) {
        basis = compute_dpss(spec);
        if (!cache_path.empty()) save_dpss(basis, cache_path);
    }
    std::string csv = "b,lambda,n,u\n";
    char buf[96];
    for (int b = 0; b < basis.order(); ++b) {
        for (int i = 0; i < basis.N; ++i) {
            std::snprintf(buf, sizeof buf, "%d,%.17g,%d,%.17g\n", b, basis.lambda(b), i,
                          basis.U(i, b));
            csv += buf;
        }
    }
    print_or_write(out_path, csv);
    return 0;
}

int cmd_hirip(const std::string& config_path, long long trials, const CommonOverrides& ov,
              const std::string& out_path) {
    ExperimentConfig config = load_config(config_path);
    config.mode = RunMode::HiripProbe;
    if (trials > 0) config.probe_trials = trials;
    apply_overrides(config, ov);
    print_or_write(out_path, report_csv(run(config)));
    return 0;
}

/** Shared replay path for `estimate` and `predict`: one serialized channel
 *  through one configured waveform at one SNR. */
int cmd_replay(const std::string& channel_path, const std::string& config_path,
               double snr_db, std::size_t wave_index, int horizon,
               const std::string& out_dir) {
    std::ifstream cf(channel_path);
    if (!cf.good()) throw std::runtime_error("cannot read " + channel_path);
    std::string ctext((std::istreambuf_iterator<char>(cf)), std::istreambuf_iterator<char>());
    const ChannelRecord rec = channel_from_json(ctext);

    ExperimentConfig config = load_config(config_path);
    require(wave_index < config.waveforms.size(), "replay: waveform index out of range");
    const WaveformRun& wrun = config.waveforms[wave_index];
    const GridDims dims = rec.ongrid ? rec.on.dims : rec.off.dims;
    require(dims.L == config.dims.L && dims.Q == config.dims.Q && dims.N == config.dims.N,
            "replay: channel dims do not match config dims");

    Rng prng(Rng::derive(config.seed, kTagPilots, wave_index));
    PilotPlan plan = plan_pilots(wrun.cfg, wrun.budget, config.pilot_power, prng);
    TxFrame frame = modulate(wrun.cfg, plan.x);
    std::vector<std::int64_t> times = rx_times(wrun.cfg);

    TapTrajectories traj = rec.ongrid ? materialize_ongrid(rec.on, times)
                                      : materialize_offgrid(rec.off, times);
    const double sigma_w_sq = std::pow(10.0, -snr_db / 10.0);
    Rng rng_n(Rng::derive(config.seed, kTagNoise, 0));
    CVec r = apply_channel_stream(traj, frame.s, frame.s_begin, sigma_w_sq, rng_n);
    CVec y = plan.reduce(demodulate(wrun.cfg, r));

    TapTrajectories hat;
    hat.dims = dims;
    hat.times = times;
    BemCoefficients beta_hat;
    DpssBasis basis;
    if (rec.ongrid) {
        MeasurementMatrix M = build_measurement_ongrid(wrun.cfg, plan, dims,
                                                       ExecPolicy{config.workers});
        const double scale = std::sqrt(M.A.squaredNorm() / static_cast<double>(M.A.cols()));
        M.A /= scale;
        const auto [sd_f, sD_f] = sparsity_levels(config.profile, dims);
        HihtpResult res = hihtp(M, y, std::max(1, static_cast<int>(std::ceil(sd_f - 1e-9))),
                                std::max(1, static_cast<int>(std::ceil(sD_f - 1e-9))),
                                config.k_max);
        CVec alpha_hat = res.alpha / scale;
        hat.h = CMat::Zero(dims.L, dims.N);
        for (int l = 0; l < dims.L; ++l)
            for (int q = -dims.Q; q <= dims.Q; ++q) {
                const Complex a = alpha_hat(dims.flat(l, q));
                if (a == Complex{0.0, 0.0}) continue;
                for (int n = 0; n < dims.N; ++n)
                    hat.h(l, n) += a * unit_phasor(static_cast<double>(q) *
                                                   static_cast<double>(times[n]) / dims.N);
            }
    } else {
        basis = compute_dpss(ProlateSpec::for_frame(dims.N, config.Q_BEM));
        MeasurementMatrix M =
            build_measurement_offgrid(wrun.cfg, plan, rec.off.support, basis,
                                      ExecPolicy{config.workers});
        EstimationResult est = estimate_offgrid(M, y, basis, rec.off.sigma_alpha_sq,
                                                rec.off.N_D, sigma_w_sq, config.prior, &times);
        hat.h = est.h_hat;
        beta_hat = est.beta_hat;
    }

    std::string per_tap = "tap,mse\n";
    char buf[96];
    for (int l = 0; l < dims.L; ++l) {
        const double m = (traj.h.row(l) - hat.h.row(l)).squaredNorm() / dims.N;
        std::snprintf(buf, sizeof buf, "%d,%.17g\n", l, m);
        per_tap += buf;
    }
    write_text(out_dir + "/replay_per_tap_mse.csv", per_tap);
    write_text(out_dir + "/replay_h_hat.csv", trajectories_csv(hat));
    std::cout << "channel_mse," << mse_channel(traj.h, hat.h, dims.N) << "\n";

    if (horizon > 0) {
        require(!rec.ongrid, "predict replay needs an off-grid channel record");
        PredictionResult pr = predict(beta_hat, basis, dims, horizon, config.lambda_floor,
                                      ExecPolicy{config.workers});
        std::vector<std::int64_t> ext_times(static_cast<std::size_t>(horizon));
        for (int j = 0; j < horizon; ++j) ext_times[static_cast<std::size_t>(j)] = dims.N + j;
        TapTrajectories truth_ext = materialize_offgrid(rec.off, ext_times);
        TapTrajectories pred;
        pred.dims = dims;
        pred.times = ext_times;
        pred.h = pr.h_ext;
        write_text(out_dir + "/replay_h_pred.csv", trajectories_csv(pred));
        const double pmse = score_prediction(pr, truth_ext);
        std::cout << "pred_mse," << pmse << "\n";
    }
    std::cerr << "wrote replay CSVs under " << out_dir << "\n";
    return 0;
}

int cmd_gen_channel(const std::string& config_path, const CommonOverrides& ov, bool ongrid,
                    const std::string& out_path, const std::string& traj_path,
                    std::int64_t extent) {
    ExperimentConfig config = load_config(config_path);
    apply_overrides(config, ov);
    Rng rng(Rng::derive(config.seed, kTagChannel, 0));
    SupportMask sup = sample_support(config.profile, config.dims, rng);
    std::string text;
    TapTrajectories traj;
    if (extent <= 0) extent = config.dims.N;
    std::vector<std::int64_t> times(static_cast<std::size_t>(extent));
    for (std::int64_t i = 0; i < extent; ++i) times[static_cast<std::size_t>(i)] = i;
    if (ongrid) {
        auto [chan, t0] = gen_ongrid(sup, config.dims,
                                     ongrid_gain_variance(config.profile, config.dims), rng);
        text = channel_to_json(chan, config.seed);
        traj = materialize_ongrid(chan, times);
    } else {
        auto [chan, t0] = gen_offgrid(
            sup, config.N_D, config.dims,
            offgrid_gain_variance(config.profile, config.dims, config.N_D), rng);
        text = channel_to_json(chan, config.seed);
        traj = materialize_offgrid(chan, times);
    }
    print_or_write(out_path, text);
    if (!traj_path.empty()) write_text(traj_path, trajectories_csv(traj));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"doubly sparse LTV channel estimation/prediction simulator"};
    app.require_subcommand(1);

    CommonOverrides ov;
    std::string config_path, out_path, out_dir = ".";

    auto add_common = [&](CLI::App* sub, bool with_out_dir) {
        sub->add_option("--config", config_path, "experiment config JSON")->required();
        auto* seed_opt = sub->add_option("--seed", ov.seed, "master seed override");
        sub->callback([seed_opt, &ov] { ov.has_seed = seed_opt->count() > 0; });
        sub->add_option("--workers", ov.workers, "worker thread override");
        if (with_out_dir) sub->add_option("--out", ov.out_dir, "output directory override");
    };

    CLI::App* c_run = app.add_subcommand("run", "execute the configured experiment sweep");
    add_common(c_run, true);

    std::string plans_dir;
    CLI::App* c_oh = app.add_subcommand("overhead", "print the pilot-overhead table as CSV");
    c_oh->add_option("--config", config_path, "experiment config JSON")->required();
    c_oh->add_option("--out", out_path, "output file (default stdout)");
    c_oh->add_option("--plans", plans_dir, "also write each waveform's pilot plan JSON here");

    int dpss_n = 2048, dpss_count = 8;
    double dpss_w = 0.0;
    std::string cache_dir;
    CLI::App* c_dpss = app.add_subcommand("dpss", "emit basis eigenvalues/samples as CSV");
    c_dpss->add_option("--n", dpss_n, "window length")->required();
    c_dpss->add_option("--w", dpss_w, "half-bandwidth (default 1/(2N))");
    c_dpss->add_option("--count", dpss_count, "basis order")->required();
    c_dpss->add_option("--cache", cache_dir, "basis cache directory");
    c_dpss->add_option("--out", out_path, "output file (default stdout)");

    long long probe_trials = 0;
    CLI::App* c_hirip =
        app.add_subcommand("hirip-probe", "empirical restricted-isometry constants");
    add_common(c_hirip, false);
    c_hirip->add_option("--trials", probe_trials, "probe sample budget");
    c_hirip->add_option("--out", out_path, "output file (default stdout)");

    std::string channel_path;
    double snr_db = 20.0;
    std::size_t wave_index = 0;
    int horizon = 0;
    CLI::App* c_est = app.add_subcommand("estimate", "replay one serialized channel");
    c_est->add_option("--channel", channel_path, "channel record JSON")->required();
    c_est->add_option("--config", config_path, "experiment config JSON")->required();
    c_est->add_option("--snr", snr_db, "SNR in dB (default 20)");
    c_est->add_option("--waveform-index", wave_index, "index into config waveforms");
    c_est->add_option("--out", out_dir, "output directory (default .)");

    CLI::App* c_pred = app.add_subcommand("predict", "replay + extrapolate one channel");
    c_pred->add_option("--channel", channel_path, "channel record JSON")->required();
    c_pred->add_option("--config", config_path, "experiment config JSON")->required();
    c_pred->add_option("--snr", snr_db, "SNR in dB (default 20)");
    c_pred->add_option("--waveform-index", wave_index, "index into config waveforms");
    c_pred->add_option("--horizon", horizon, "extrapolation length")->required();
    c_pred->add_option("--out", out_dir, "output directory (default .)");

    bool gen_ongrid_flag = false;
    std::string traj_path;
    std::int64_t extent = 0;
    CLI::App* c_gen = app.add_subcommand("gen-channel", "draw and serialize one channel");
    add_common(c_gen, false);
    c_gen->add_flag("--ongrid", gen_ongrid_flag, "integer-Doppler channel (default off-grid)");
    c_gen->add_option("--out", out_path, "channel JSON file (default stdout)");
    c_gen->add_option("--trajectories", traj_path, "also dump trajectories CSV here");
    c_gen->add_option("--extent", extent, "trajectory length (default N)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (c_run->parsed()) return cmd_run(config_path, ov);
        if (c_oh->parsed()) return cmd_overhead(config_path, out_path, plans_dir);
        if (c_dpss->parsed()) {
            if (dpss_w == 0.0) dpss_w = 0.5 / dpss_n;
            return cmd_dpss(dpss_n, dpss_w, dpss_count, cache_dir, out_path);
        }
        if (c_hirip->parsed()) return cmd_hirip(config_path, probe_trials, ov, out_path);
        if (c_est->parsed())
            return cmd_replay(channel_path, config_path, snr_db, wave_index, 0, out_dir);
        if (c_pred->parsed())
            return cmd_replay(channel_path, config_path, snr_db, wave_index, horizon, out_dir);
        if (c_gen->parsed())
            return cmd_gen_channel(config_path, ov, gen_ongrid_flag, out_path, traj_path,
                                   extent);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
