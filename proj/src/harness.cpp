#include "dsltv/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace dsltv {

using nlohmann::json;

std::string mode_name(RunMode mode) {
    switch (mode) {
        case RunMode::OngridHihtp: return "ongrid-hihtp";
        case RunMode::OffgridLmmse: return "offgrid-lmmse";
        case RunMode::Predict: return "predict";
        case RunMode::Overhead: return "overhead";
        case RunMode::HiripProbe: return "hirip-probe";
        case RunMode::DpssDump: return "dpss-dump";
    }
    throw DimensionError("mode_name: unknown mode");
}

RunMode mode_from_name(const std::string& name) {
    if (name == "ongrid-hihtp") return RunMode::OngridHihtp;
    if (name == "offgrid-lmmse") return RunMode::OffgridLmmse;
    if (name == "predict") return RunMode::Predict;
    if (name == "overhead") return RunMode::Overhead;
    if (name == "hirip-probe") return RunMode::HiripProbe;
    if (name == "dpss-dump") return RunMode::DpssDump;
    throw DimensionError("unknown mode: " + name);
}

// ---- config parsing ----

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
    require(j.is_object(), std::string(where) + ": expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed) {
            if (it.key() == k) {
                ok = true;
                break;
            }
        }
        require(ok, std::string(where) + ": unknown key '" + it.key() + "'");
    }
}

ProfileKind profile_kind_from_json(const json& v) {
    if (v.is_number_integer()) {
        const int t = v.get<int>();
        require(t >= 1 && t <= 3, "profile.type must be 1, 2 or 3");
        return t == 1 ? ProfileKind::Type1 : (t == 2 ? ProfileKind::Type2 : ProfileKind::Type3);
    }
    const std::string s = v.get<std::string>();
    if (s == "type1") return ProfileKind::Type1;
    if (s == "type2") return ProfileKind::Type2;
    if (s == "type3") return ProfileKind::Type3;
    throw DimensionError("unknown profile type: " + s);
}

int profile_kind_number(ProfileKind k) {
    return k == ProfileKind::Type1 ? 1 : (k == ProfileKind::Type2 ? 2 : 3);
}

WaveformRun parse_waveform(const json& j, const GridDims& dims) {
    check_keys(j, {"kind", "P", "c2", "N_fft", "N_cp", "N_symb", "N_otfs", "M_otfs", "budget"},
               "waveforms[]");
    WaveformRun w;
    w.cfg.kind = waveform_from_name(j.at("kind").get<std::string>());
    w.cfg.N = dims.N;
    w.cfg.L = dims.L;
    w.cfg.Q = dims.Q;
    switch (w.cfg.kind) {
        case WaveformKind::AFDM:
            w.cfg.P_afdm = j.value("P", 1);
            w.cfg.c2 = j.value("c2", 0.0);
            break;
        case WaveformKind::OFDM: {
            w.cfg.N_fft = j.at("N_fft").get<int>();
            require(w.cfg.N_fft > 0 && dims.N % w.cfg.N_fft == 0,
                    "OFDM N_fft must divide N");
            w.cfg.N_ofdm_symb = j.value("N_symb", dims.N / w.cfg.N_fft);
            w.cfg.N_cp = j.value("N_cp", dims.L - 1);
            break;
        }
        case WaveformKind::OTFS: {
            w.cfg.N_otfs = j.at("N_otfs").get<int>();
            require(w.cfg.N_otfs > 0 && dims.N % w.cfg.N_otfs == 0,
                    "OTFS N_otfs must divide N");
            w.cfg.M_otfs = j.value("M_otfs", dims.N / w.cfg.N_otfs);
            break;
        }
        case WaveformKind::SCM:
            break;
    }
    w.cfg.validate();
    if (j.contains("budget")) {
        const json& b = j.at("budget");
        check_keys(b, {"N_p", "N_p_t", "N_p_f"}, "waveforms[].budget");
        w.budget.N_p = b.value("N_p", 1);
        w.budget.N_p_t = b.value("N_p_t", 1);
        w.budget.N_p_f = b.value("N_p_f", 1);
    }
    return w;
}

}  // namespace

void ExperimentConfig::validate() const {
    dims.validate();
    profile.validate(dims);
    require(N_D >= 1, "config: N_D must be >= 1");
    require(Q_BEM >= 1 && Q_BEM <= dims.N, "config: Q_BEM must lie in [1, N]");
    require(workers >= 1, "config: workers must be >= 1");
    require(exclude_threshold >= 0.0 && exclude_threshold <= 1.0,
            "config: exclude_threshold must lie in [0, 1]");
    if (mode != RunMode::DpssDump)
        require(!waveforms.empty(), "config: at least one waveform required");
    for (const WaveformRun& w : waveforms) w.cfg.validate();
    const bool has_trials = mode == RunMode::OngridHihtp || mode == RunMode::OffgridLmmse ||
                            mode == RunMode::Predict;
    if (has_trials) {
        require(trials >= 1, "config: trials must be >= 1");
        require(!snr_db.empty(), "config: SNR grid must be nonempty");
        require(k_max >= 1, "config: k_max must be >= 1");
    }
    if (mode == RunMode::Predict) {
        require(!horizons.empty(), "config: predict mode needs a horizon list");
        for (int h : horizons) require(h >= 1, "config: horizons must be >= 1");
        for (const WaveformRun& w : waveforms)
            require(w.cfg.kind != WaveformKind::OFDM,
                    "config: prediction extrapolates the frame clock; the multi-prefix "
                    "OFDM clock is not supported");
    }
    if (mode == RunMode::HiripProbe)
        require(probe_trials >= 1, "config: probe_trials must be >= 1");
}

ExperimentConfig parse_config(const std::string& json_text) {
    const json j = json::parse(json_text);
    check_keys(j,
               {"mode", "dims", "profile", "channel", "N_D", "Q_BEM", "waveforms", "snr_db",
                "horizons", "trials", "k_max", "lambda_floor", "prior", "pilot_power",
                "probe_trials", "exclude_threshold", "seed", "workers", "out_dir", "tag"},
               "config");
    ExperimentConfig c;
    c.mode = mode_from_name(j.at("mode").get<std::string>());

    const json& d = j.at("dims");
    check_keys(d, {"L", "Q", "N"}, "dims");
    c.dims.L = d.at("L").get<int>();
    c.dims.Q = d.at("Q").get<int>();
    c.dims.N = d.at("N").get<int>();

    if (j.contains("profile")) {
        const json& p = j.at("profile");
        check_keys(p, {"type", "p_d", "p_D", "cluster_len"}, "profile");
        if (p.contains("type")) c.profile.kind = profile_kind_from_json(p.at("type"));
        c.profile.p_d = p.value("p_d", 0.2);
        c.profile.p_D = p.value("p_D", 0.2);
        c.profile.cluster_len = p.value("cluster_len", 1);
    }
    if (j.contains("channel")) {
        const std::string s = j.at("channel").get<std::string>();
        if (s == "random")
            c.channel = ChannelSource::Random;
        else if (s == "identity")
            c.channel = ChannelSource::Identity;
        else
            throw DimensionError("unknown channel source: " + s);
    }
    c.N_D = j.value("N_D", 3);
    c.Q_BEM = j.value("Q_BEM", 4);
    if (j.contains("waveforms"))
        for (const json& w : j.at("waveforms")) c.waveforms.push_back(parse_waveform(w, c.dims));
    c.snr_db = j.value("snr_db", std::vector<double>{20.0});
    c.horizons = j.value("horizons", std::vector<int>{});
    c.trials = j.value("trials", 100);
    c.k_max = j.value("k_max", 20);
    c.lambda_floor = j.value("lambda_floor", 1e-12);
    if (j.contains("prior")) {
        const std::string s = j.at("prior").get<std::string>();
        if (s == "isotropic")
            c.prior = PriorKind::Isotropic;
        else if (s == "spectral")
            c.prior = PriorKind::Spectral;
        else
            throw DimensionError("unknown prior: " + s);
    }
    if (j.contains("pilot_power")) {
        const std::string s = j.at("pilot_power").get<std::string>();
        if (s == "frame")
            c.pilot_power = PilotPower::Frame;
        else if (s == "unit")
            c.pilot_power = PilotPower::Unit;
        else
            throw DimensionError("unknown pilot_power: " + s);
    }
    c.probe_trials = j.value("probe_trials", 200LL);
    c.exclude_threshold = j.value("exclude_threshold", 0.1);
    c.seed = j.value("seed", std::uint64_t{1});
    c.workers = j.value("workers", 1);
    c.out_dir = j.value("out_dir", std::string("."));
    c.tag = j.value("tag", std::string("report"));
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    require(f.good(), "cannot read config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

std::string config_echo(const ExperimentConfig& c) {
    json j;
    j["mode"] = mode_name(c.mode);
    j["dims"] = {{"L", c.dims.L}, {"Q", c.dims.Q}, {"N", c.dims.N}};
    j["profile"] = {{"type", profile_kind_number(c.profile.kind)},
                    {"p_d", c.profile.p_d},
                    {"p_D", c.profile.p_D},
                    {"cluster_len", c.profile.cluster_len}};
    j["channel"] = c.channel == ChannelSource::Random ? "random" : "identity";
    j["N_D"] = c.N_D;
    j["Q_BEM"] = c.Q_BEM;
    json ws = json::array();
    for (const WaveformRun& w : c.waveforms) {
        json wj;
        wj["kind"] = waveform_name(w.cfg.kind);
        switch (w.cfg.kind) {
            case WaveformKind::AFDM:
                wj["P"] = w.cfg.P_afdm;
                wj["c2"] = w.cfg.c2;
                wj["budget"] = {{"N_p", w.budget.N_p}};
                break;
            case WaveformKind::OFDM:
                wj["N_fft"] = w.cfg.N_fft;
                wj["N_cp"] = w.cfg.N_cp;
                wj["N_symb"] = w.cfg.N_ofdm_symb;
                wj["budget"] = {{"N_p_t", w.budget.N_p_t}, {"N_p_f", w.budget.N_p_f}};
                break;
            case WaveformKind::OTFS:
                wj["N_otfs"] = w.cfg.N_otfs;
                wj["M_otfs"] = w.cfg.M_otfs;
                wj["budget"] = {{"N_p", w.budget.N_p}};
                break;
            case WaveformKind::SCM:
                wj["budget"] = {{"N_p_t", w.budget.N_p_t}};
                break;
        }
        ws.push_back(wj);
    }
    j["waveforms"] = ws;
    j["snr_db"] = c.snr_db;
    j["horizons"] = c.horizons;
    j["trials"] = c.trials;
    j["k_max"] = c.k_max;
    j["lambda_floor"] = c.lambda_floor;
    j["prior"] = c.prior == PriorKind::Isotropic ? "isotropic" : "spectral";
    j["pilot_power"] = c.pilot_power == PilotPower::Frame ? "frame" : "unit";
    j["probe_trials"] = c.probe_trials;
    j["exclude_threshold"] = c.exclude_threshold;
    j["seed"] = c.seed;
    j["workers"] = c.workers;
    j["out_dir"] = c.out_dir;
    j["tag"] = c.tag;
    return j.dump();
}

// ---- metrics ----

MetricStat summarize(const std::vector<double>& values) {
    MetricStat s;
    s.count = static_cast<long long>(values.size());
    if (values.empty()) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    if (values.size() >= 2) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        const double var = ss / static_cast<double>(values.size() - 1);
        s.ci95 = 1.96 * std::sqrt(var / static_cast<double>(values.size()));
    }
    return s;
}

bool SweepRow::operator==(const SweepRow& o) const {
    return waveform == o.waveform && snr_db == o.snr_db && has_snr == o.has_snr &&
           horizon == o.horizon && trials == o.trials && reported == o.reported &&
           excluded == o.excluded && overhead_formula == o.overhead_formula &&
           overhead_occupied == o.overhead_occupied && coeff_mse == o.coeff_mse &&
           channel_mse == o.channel_mse && channel_power == o.channel_power &&
           pred_mse == o.pred_mse && value_name == o.value_name && value == o.value &&
           has_value == o.has_value;
}

double MetricsReport::max_excluded_rate() const {
    double worst = 0.0;
    for (const SweepRow& r : rows) {
        if (r.trials > 0)
            worst = std::max(worst, static_cast<double>(r.excluded) /
                                        static_cast<double>(r.trials));
    }
    return worst;
}

bool MetricsReport::operator==(const MetricsReport& o) const {
    return schema_version == o.schema_version && mode == o.mode && seed == o.seed &&
           config_json == o.config_json && rows == o.rows;
}

double mse_channel(const CMat& h_true, const CMat& h_hat, int N) {
    require(h_true.rows() == h_hat.rows() && h_true.cols() == h_hat.cols(),
            "mse_channel: shape mismatch");
    require(h_true.cols() == N, "mse_channel: column count must equal N");
    return (h_true - h_hat).squaredNorm() / static_cast<double>(N);
}

// ---- sweep engine ----

namespace {

/** ceil with a tolerance so p_d*L = 6 - 1e-16 still maps to 6. */
int int_sparsity(double v) {
    return std::max(1, static_cast<int>(std::ceil(v - 1e-9)));
}

struct WaveCtx {
    WaveformConfig cfg;
    PilotBudget budget;
    PilotPlan plan;
    TxFrame frame;
    std::vector<std::int64_t> times;
    OverheadReport oh;
    MeasurementMatrix M;     // on-grid dictionary (OngridHihtp / HiripProbe)
    double col_scale = 1.0;  // RMS column norm divided out of M.A
};

WaveCtx make_ctx(const ExperimentConfig& config, std::size_t w, bool want_ongrid_matrix) {
    const WaveformRun& run = config.waveforms[w];
    WaveCtx ctx;
    ctx.cfg = run.cfg;
    ctx.budget = run.budget;
    Rng prng(Rng::derive(config.seed, kTagPilots, w));
    ctx.plan = plan_pilots(ctx.cfg, ctx.budget, config.pilot_power, prng);
    ctx.frame = modulate(ctx.cfg, ctx.plan.x);
    ctx.times = rx_times(ctx.cfg);
    ctx.oh = overhead(ctx.cfg, ctx.budget);
    if (want_ongrid_matrix) {
        ctx.M = build_measurement_ongrid(ctx.cfg, ctx.plan, config.dims,
                                         ExecPolicy{config.workers});
        ctx.col_scale = std::sqrt(ctx.M.A.squaredNorm() /
                                  static_cast<double>(ctx.M.A.cols()));
        require(ctx.col_scale > 0.0, "measurement matrix is identically zero");
        ctx.M.A /= ctx.col_scale;
    }
    return ctx;
}

OnGridChannel identity_ongrid(const GridDims& dims) {
    OnGridChannel chan;
    chan.dims = dims;
    chan.gains = CMat::Zero(dims.L, dims.doppler_bins());
    chan.gains(0, dims.Q) = 1.0;
    chan.sigma_alpha_sq = 1.0;
    return chan;
}

OffGridChannel identity_offgrid(const GridDims& dims, int N_D) {
    OffGridChannel chan;
    chan.dims = dims;
    chan.support.dims = dims;
    chan.support.mask.setZero(dims.L, dims.doppler_bins());
    chan.support.mask(0, dims.Q) = 1;
    chan.N_D = N_D;
    chan.subpath_gains = CMat::Zero(1, N_D);
    chan.subpath_gains(0, 0) = 1.0;
    chan.fractional_shifts = RMat::Zero(1, N_D);
    chan.sigma_alpha_sq = 1.0;
    return chan;
}

/** Best-representation coefficients of the true channel: per active point,
 *  the basis projection of its frame-clock sub-path envelope. */
CVec project_truth(const OffGridChannel& chan, const DpssBasis& basis) {
    const auto pts = chan.support.active_points();
    const int K = basis.order();
    const int N = chan.dims.N;
    CVec beta(static_cast<Eigen::Index>(pts.size()) * K);
    for (std::size_t p = 0; p < pts.size(); ++p) {
        const auto [l, q] = pts[p];
        CVec g = CVec::Zero(N);
        for (int i = 0; i < chan.N_D; ++i) {
            const double freq = q + chan.fractional_shifts(static_cast<Eigen::Index>(p), i);
            const Complex a = chan.subpath_gains(static_cast<Eigen::Index>(p), i);
            for (int n = 0; n < N; ++n) g(n) += a * unit_phasor(freq * n / N);
        }
        beta.segment(static_cast<Eigen::Index>(p) * K, K) = bem_project(g, q, basis);
    }
    return beta;
}

CMat ongrid_reconstruct(const CVec& alpha, const GridDims& dims,
                        const std::vector<std::int64_t>& times) {
    CMat h = CMat::Zero(dims.L, dims.N);
    for (int l = 0; l < dims.L; ++l) {
        for (int q = -dims.Q; q <= dims.Q; ++q) {
            const Complex a = alpha(dims.flat(l, q));
            if (a == Complex{0.0, 0.0}) continue;
            for (int n = 0; n < dims.N; ++n)
                h(l, n) += a * unit_phasor(static_cast<double>(q) *
                                           static_cast<double>(times[n]) / dims.N);
        }
    }
    return h;
}

struct Cell {
    bool ok = false;
    double coeff = 0.0;
    double chan = 0.0;
    double power = 0.0;
    std::vector<double> pred;  // per configured horizon
};

void run_trial_modes(const ExperimentConfig& config, MetricsReport& rep) {
    const GridDims dims = config.dims;
    const std::size_t W = config.waveforms.size();
    const std::size_t S = config.snr_db.size();
    const bool ongrid = config.mode == RunMode::OngridHihtp;
    const bool predicting = config.mode == RunMode::Predict;

    std::vector<WaveCtx> ctxs;
    ctxs.reserve(W);
    for (std::size_t w = 0; w < W; ++w) ctxs.push_back(make_ctx(config, w, ongrid));

    DpssBasis basis;
    ExtendedBasis ext;
    int max_h = 0;
    if (!ongrid) {
        basis = compute_dpss(ProlateSpec::for_frame(dims.N, config.Q_BEM));
        if (predicting) {
            max_h = *std::max_element(config.horizons.begin(), config.horizons.end());
            ext = extend_dpss(basis, dims.N, static_cast<std::int64_t>(dims.N) + max_h,
                              config.lambda_floor, ExecPolicy{config.workers});
        }
    }
    std::vector<std::int64_t> ext_times(static_cast<std::size_t>(max_h));
    for (int j = 0; j < max_h; ++j) ext_times[static_cast<std::size_t>(j)] = dims.N + j;

    const auto [sd_f, sD_f] = sparsity_levels(config.profile, dims);
    const int s_d = int_sparsity(sd_f);
    const int s_D = int_sparsity(sD_f);
    const double gain_var =
        config.channel == ChannelSource::Identity
            ? 1.0
            : (ongrid ? ongrid_gain_variance(config.profile, dims)
                      : offgrid_gain_variance(config.profile, dims, config.N_D));

    std::vector<std::vector<Cell>> cells(static_cast<std::size_t>(config.trials));

    auto run_trial = [&](std::int64_t t) {
        std::vector<Cell> out(W * S);
        for (Cell& c : out) c.pred.assign(config.horizons.size(), 0.0);
        try {
            Rng rng_ch(Rng::derive(config.seed, kTagChannel, static_cast<std::uint64_t>(t)));

            OnGridChannel on_chan;
            OffGridChannel off_chan;
            CVec alpha_true;  // on-grid truth, flat grid stacking
            CVec beta_true;   // off-grid best-representation coefficients
            if (ongrid) {
                if (config.channel == ChannelSource::Identity) {
                    on_chan = identity_ongrid(dims);
                } else {
                    SupportMask sup = sample_support_fixed(config.profile, dims, rng_ch);
                    on_chan = gen_ongrid(sup, dims, gain_var, rng_ch).first;
                }
                alpha_true.resize(dims.L * dims.doppler_bins());
                for (int l = 0; l < dims.L; ++l)
                    for (int q = -dims.Q; q <= dims.Q; ++q)
                        alpha_true(dims.flat(l, q)) = on_chan.gains(l, dims.Q + q);
            } else {
                if (config.channel == ChannelSource::Identity) {
                    off_chan = identity_offgrid(dims, config.N_D);
                } else {
                    SupportMask sup = sample_support_fixed(config.profile, dims, rng_ch);
                    off_chan = gen_offgrid(sup, config.N_D, dims, gain_var, rng_ch).first;
                }
                beta_true = project_truth(off_chan, basis);
            }

            for (std::size_t w = 0; w < W; ++w) {
                const WaveCtx& ctx = ctxs[w];
                TapTrajectories traj = ongrid ? materialize_ongrid(on_chan, ctx.times)
                                              : materialize_offgrid(off_chan, ctx.times);
                MeasurementMatrix M_t;
                TapTrajectories truth_ext;
                if (!ongrid) {
                    M_t = build_measurement_offgrid(ctx.cfg, ctx.plan, off_chan.support, basis);
                    if (predicting) truth_ext = materialize_offgrid(off_chan, ext_times);
                }
                for (std::size_t s = 0; s < S; ++s) {
                    Cell& cell = out[w * S + s];
                    try {
                        const double sigma_w_sq = std::pow(10.0, -config.snr_db[s] / 10.0);
                        Rng rng_n(Rng::derive(
                            config.seed, kTagNoise,
                            (static_cast<std::uint64_t>(t) * W + w) * S + s));
                        CVec r = apply_channel_stream(traj, ctx.frame.s, ctx.frame.s_begin,
                                                      sigma_w_sq, rng_n);
                        CVec y = ctx.plan.reduce(demodulate(ctx.cfg, r));
                        if (ongrid) {
                            HihtpResult res = hihtp(ctx.M, y, s_d, s_D, config.k_max);
                            CVec alpha_hat = res.alpha / ctx.col_scale;
                            cell.coeff = (alpha_hat - alpha_true).squaredNorm();
                            CMat h_hat = ongrid_reconstruct(alpha_hat, dims, ctx.times);
                            cell.chan = mse_channel(traj.h, h_hat, dims.N);
                        } else {
                            EstimationResult est =
                                estimate_offgrid(M_t, y, basis, gain_var, config.N_D,
                                                 sigma_w_sq, config.prior, &ctx.times);
                            cell.coeff = (est.beta_hat.beta - beta_true).squaredNorm();
                            cell.chan = mse_channel(traj.h, est.h_hat, dims.N);
                            if (predicting) {
                                PredictionResult pr =
                                    predict_with(est.beta_hat, ext, basis, dims);
                                double acc = 0.0;
                                for (int j = 0; j < max_h; ++j) {
                                    acc += (pr.h_ext.col(j) - truth_ext.h.col(j)).squaredNorm();
                                    for (std::size_t hi = 0; hi < config.horizons.size(); ++hi)
                                        if (config.horizons[hi] == j + 1)
                                            cell.pred[hi] = acc / (j + 1);
                                }
                            }
                        }
                        cell.power = traj.h.squaredNorm() / static_cast<double>(dims.N);
                        cell.ok = true;
                    } catch (const std::exception&) {
                        cell.ok = false;
                    }
                }
            }
        } catch (...) {
            for (Cell& c : out) c.ok = false;
        }
        cells[static_cast<std::size_t>(t)] = std::move(out);
    };
    parallel_for(config.trials, ExecPolicy{config.workers}, run_trial);

    // Sequential reduction in trial order: worker count cannot change sums.
    for (std::size_t w = 0; w < W; ++w) {
        for (std::size_t s = 0; s < S; ++s) {
            std::vector<double> coeffs, chans, powers;
            std::vector<std::vector<double>> preds(config.horizons.size());
            long long excluded = 0;
            for (int t = 0; t < config.trials; ++t) {
                const Cell& cell = cells[static_cast<std::size_t>(t)][w * S + s];
                if (!cell.ok) {
                    ++excluded;
                    continue;
                }
                coeffs.push_back(cell.coeff);
                chans.push_back(cell.chan);
                powers.push_back(cell.power);
                for (std::size_t hi = 0; hi < preds.size(); ++hi)
                    preds[hi].push_back(cell.pred[hi]);
            }
            SweepRow row;
            row.waveform = waveform_name(ctxs[w].cfg.kind);
            row.snr_db = config.snr_db[s];
            row.has_snr = true;
            row.trials = config.trials;
            row.reported = static_cast<long long>(coeffs.size());
            row.excluded = excluded;
            row.overhead_formula = ctxs[w].oh.total_formula;
            row.overhead_occupied = ctxs[w].oh.total_occupied;
            row.coeff_mse = summarize(coeffs);
            row.channel_mse = summarize(chans);
            row.channel_power = summarize(powers);
            rep.rows.push_back(row);
            for (std::size_t hi = 0; hi < config.horizons.size(); ++hi) {
                SweepRow hrow;
                hrow.waveform = row.waveform;
                hrow.snr_db = row.snr_db;
                hrow.has_snr = true;
                hrow.horizon = config.horizons[hi];
                hrow.trials = row.trials;
                hrow.reported = row.reported;
                hrow.excluded = row.excluded;
                hrow.overhead_formula = row.overhead_formula;
                hrow.overhead_occupied = row.overhead_occupied;
                hrow.pred_mse = summarize(preds[hi]);
                rep.rows.push_back(hrow);
            }
        }
    }
}

void run_overhead_mode(const ExperimentConfig& config, MetricsReport& rep) {
    for (const WaveformRun& w : config.waveforms) {
        const OverheadReport oh = overhead(w.cfg, w.budget);
        SweepRow row;
        row.waveform = waveform_name(w.cfg.kind);
        row.overhead_formula = oh.total_formula;
        row.overhead_occupied = oh.total_occupied;
        rep.rows.push_back(row);
    }
}

void run_hirip_mode(const ExperimentConfig& config, MetricsReport& rep) {
    const auto [sd_f, sD_f] = sparsity_levels(config.profile, config.dims);
    const int s_d = int_sparsity(sd_f);
    const int s_D = int_sparsity(sD_f);
    for (std::size_t w = 0; w < config.waveforms.size(); ++w) {
        WaveCtx ctx = make_ctx(config, w, true);
        Rng prng(Rng::derive(config.seed, kTagProbe, w));
        const HiripProbe probe = hirip_probe(ctx.M, s_d, s_D, config.probe_trials, prng);
        SweepRow row;
        row.waveform = waveform_name(ctx.cfg.kind);
        row.trials = config.probe_trials;
        row.reported = probe.supports_probed;
        row.overhead_formula = ctx.oh.total_formula;
        row.overhead_occupied = ctx.oh.total_occupied;
        row.value_name = probe.exhaustive ? "delta_hat_exact" : "delta_hat";
        row.value = probe.delta_hat;
        row.has_value = true;
        rep.rows.push_back(row);
    }
}

void run_dpss_dump_mode(const ExperimentConfig& config, MetricsReport& rep) {
    const DpssBasis basis = compute_dpss(ProlateSpec::for_frame(config.dims.N, config.Q_BEM));
    for (int b = 0; b < basis.order(); ++b) {
        SweepRow row;
        row.horizon = b;  // basis index rides the horizon column
        row.value_name = "lambda";
        row.value = basis.lambda(b);
        row.has_value = true;
        rep.rows.push_back(row);
    }
}

}  // namespace

MetricsReport run(const ExperimentConfig& config) {
    config.validate();
    MetricsReport rep;
    rep.mode = mode_name(config.mode);
    rep.seed = config.seed;
    rep.config_json = config_echo(config);
    switch (config.mode) {
        case RunMode::Overhead:
            run_overhead_mode(config, rep);
            break;
        case RunMode::HiripProbe:
            run_hirip_mode(config, rep);
            break;
        case RunMode::DpssDump:
            run_dpss_dump_mode(config, rep);
            break;
        default:
            run_trial_modes(config, rep);
            break;
    }
    return rep;
}

// ---- emission ----

namespace {

std::string fmt17(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

json stat_to_json(const MetricStat& s) {
    return json{{"mean", s.mean}, {"ci95", s.ci95}, {"count", s.count}};
}

MetricStat stat_from_json(const json& j) {
    MetricStat s;
    s.mean = j.at("mean").get<double>();
    s.ci95 = j.at("ci95").get<double>();
    s.count = j.at("count").get<long long>();
    return s;
}

}  // namespace

std::string report_csv(const MetricsReport& report) {
    std::string out =
        "schema,mode,waveform,snr_db,horizon,trials,reported,excluded,"
        "overhead_formula,overhead_occupied,coeff_mse,coeff_mse_ci95,"
        "channel_mse,channel_mse_ci95,channel_power,channel_mse_norm,"
        "pred_mse,pred_mse_ci95,value_name,value\n";
    for (const SweepRow& r : report.rows) {
        out += std::to_string(report.schema_version);
        out += ',' + report.mode;
        out += ',' + r.waveform;
        out += ',';
        if (r.has_snr) out += fmt17(r.snr_db);
        out += ',';
        if (r.horizon >= 0) out += std::to_string(r.horizon);
        out += ',' + std::to_string(r.trials);
        out += ',' + std::to_string(r.reported);
        out += ',' + std::to_string(r.excluded);
        out += ',';
        if (r.overhead_formula >= 0) out += std::to_string(r.overhead_formula);
        out += ',';
        if (r.overhead_occupied >= 0) out += std::to_string(r.overhead_occupied);
        for (const MetricStat* s : {&r.coeff_mse, &r.channel_mse}) {
            out += ',';
            if (s->count > 0) out += fmt17(s->mean);
            out += ',';
            if (s->count > 0) out += fmt17(s->ci95);
        }
        out += ',';
        if (r.channel_power.count > 0) out += fmt17(r.channel_power.mean);
        out += ',';
        if (r.channel_mse.count > 0 && r.channel_power.count > 0 &&
            r.channel_power.mean > 0.0)
            out += fmt17(r.channel_mse.mean / r.channel_power.mean);
        out += ',';
        if (r.pred_mse.count > 0) out += fmt17(r.pred_mse.mean);
        out += ',';
        if (r.pred_mse.count > 0) out += fmt17(r.pred_mse.ci95);
        out += ',' + r.value_name;
        out += ',';
        if (r.has_value) out += fmt17(r.value);
        out += '\n';
    }
    return out;
}

std::string report_json(const MetricsReport& report) {
    json j;
    j["schema_version"] = report.schema_version;
    j["mode"] = report.mode;
    j["seed"] = report.seed;
    if (report.config_json.empty()) {
        j["config"] = nullptr;
    } else {
        j["config"] = json::parse(report.config_json);
    }
    json rows = json::array();
    for (const SweepRow& r : report.rows) {
        json rj;
        rj["waveform"] = r.waveform;
        if (r.has_snr) rj["snr_db"] = r.snr_db;
        if (r.horizon >= 0) rj["horizon"] = r.horizon;
        rj["trials"] = r.trials;
        rj["reported"] = r.reported;
        rj["excluded"] = r.excluded;
        if (r.overhead_formula >= 0) rj["overhead_formula"] = r.overhead_formula;
        if (r.overhead_occupied >= 0) rj["overhead_occupied"] = r.overhead_occupied;
        if (r.coeff_mse.count > 0) rj["coeff_mse"] = stat_to_json(r.coeff_mse);
        if (r.channel_mse.count > 0) rj["channel_mse"] = stat_to_json(r.channel_mse);
        if (r.channel_power.count > 0) rj["channel_power"] = stat_to_json(r.channel_power);
        if (r.pred_mse.count > 0) rj["pred_mse"] = stat_to_json(r.pred_mse);
        if (r.has_value) {
            rj["value_name"] = r.value_name;
            rj["value"] = r.value;
        }
        rows.push_back(rj);
    }
    j["rows"] = rows;
    return j.dump(2) + "\n";
}

MetricsReport report_from_json(const std::string& json_text) {
    const json j = json::parse(json_text);
    MetricsReport rep;
    rep.schema_version = j.at("schema_version").get<int>();
    rep.mode = j.at("mode").get<std::string>();
    rep.seed = j.at("seed").get<std::uint64_t>();
    if (!j.at("config").is_null()) rep.config_json = j.at("config").dump();
    for (const json& rj : j.at("rows")) {
        SweepRow r;
        r.waveform = rj.at("waveform").get<std::string>();
        if (rj.contains("snr_db")) {
            r.snr_db = rj.at("snr_db").get<double>();
            r.has_snr = true;
        }
        if (rj.contains("horizon")) r.horizon = rj.at("horizon").get<int>();
        r.trials = rj.at("trials").get<long long>();
        r.reported = rj.at("reported").get<long long>();
        r.excluded = rj.at("excluded").get<long long>();
        if (rj.contains("overhead_formula"))
            r.overhead_formula = rj.at("overhead_formula").get<long long>();
        if (rj.contains("overhead_occupied"))
            r.overhead_occupied = rj.at("overhead_occupied").get<long long>();
        if (rj.contains("coeff_mse")) r.coeff_mse = stat_from_json(rj.at("coeff_mse"));
        if (rj.contains("channel_mse")) r.channel_mse = stat_from_json(rj.at("channel_mse"));
        if (rj.contains("channel_power"))
            r.channel_power = stat_from_json(rj.at("channel_power"));
        if (rj.contains("pred_mse")) r.pred_mse = stat_from_json(rj.at("pred_mse"));
        if (rj.contains("value")) {
            r.value_name = rj.at("value_name").get<std::string>();
            r.value = rj.at("value").get<double>();
            r.has_value = true;
        }
        rep.rows.push_back(r);
    }
    return rep;
}

EmitPaths emit(const MetricsReport& report, const std::string& dir,
               const std::string& basename) {
    EmitPaths paths;
    paths.csv = dir + "/" + basename + ".csv";
    paths.json = dir + "/" + basename + ".json";
    {
        std::ofstream f(paths.csv, std::ios::binary);
        if (!f.good()) throw std::runtime_error("cannot write " + paths.csv);
        f << report_csv(report);
        if (!f.good()) throw std::runtime_error("write failed: " + paths.csv);
    }
    {
        std::ofstream f(paths.json, std::ios::binary);
        if (!f.good()) throw std::runtime_error("cannot write " + paths.json);
        f << report_json(report);
        if (!f.good()) throw std::runtime_error("write failed: " + paths.json);
    }
    return paths;
}

// ---- channel replay records ----

namespace {

json dims_to_json(const GridDims& d) {
    return json{{"L", d.L}, {"Q", d.Q}, {"N", d.N}};
}

GridDims dims_from_json(const json& j) {
    GridDims d;
    d.L = j.at("L").get<int>();
    d.Q = j.at("Q").get<int>();
    d.N = j.at("N").get<int>();
    d.validate();
    return d;
}

}  // namespace

std::string channel_to_json(const OnGridChannel& chan, std::uint64_t seed) {
    json j;
    j["kind"] = "ongrid";
    j["seed"] = seed;
    j["dims"] = dims_to_json(chan.dims);
    j["sigma_alpha_sq"] = chan.sigma_alpha_sq;
    json points = json::array();
    json gains = json::array();
    for (int l = 0; l < chan.dims.L; ++l) {
        for (int q = -chan.dims.Q; q <= chan.dims.Q; ++q) {
            const Complex a = chan.gains(l, chan.dims.Q + q);
            if (a == Complex{0.0, 0.0}) continue;
            points.push_back(json::array({l, q}));
            gains.push_back(json::array({a.real(), a.imag()}));
        }
    }
    j["points"] = points;
    j["gains"] = gains;
    return j.dump(2) + "\n";
}

std::string channel_to_json(const OffGridChannel& chan, std::uint64_t seed) {
    json j;
    j["kind"] = "offgrid";
    j["seed"] = seed;
    j["dims"] = dims_to_json(chan.dims);
    j["N_D"] = chan.N_D;
    j["sigma_alpha_sq"] = chan.sigma_alpha_sq;
    const auto pts = chan.support.active_points();
    json points = json::array();
    json gains = json::array();
    json shifts = json::array();
    for (std::size_t p = 0; p < pts.size(); ++p) {
        points.push_back(json::array({pts[p].first, pts[p].second}));
        json grow = json::array();
        json srow = json::array();
        for (int i = 0; i < chan.N_D; ++i) {
            const Complex a = chan.subpath_gains(static_cast<Eigen::Index>(p), i);
            grow.push_back(a.real());
            grow.push_back(a.imag());
            srow.push_back(chan.fractional_shifts(static_cast<Eigen::Index>(p), i));
        }
        gains.push_back(grow);
        shifts.push_back(srow);
    }
    j["points"] = points;
    j["gains"] = gains;
    j["shifts"] = shifts;
    return j.dump(2) + "\n";
}

ChannelRecord channel_from_json(const std::string& json_text) {
    const json j = json::parse(json_text);
    ChannelRecord rec;
    rec.seed = j.value("seed", std::uint64_t{0});
    const std::string kind = j.at("kind").get<std::string>();
    const GridDims dims = dims_from_json(j.at("dims"));
    const json& points = j.at("points");
    const json& gains = j.at("gains");
    require(points.size() == gains.size(), "channel record: points/gains size mismatch");
    if (kind == "ongrid") {
        rec.ongrid = true;
        rec.on.dims = dims;
        rec.on.gains = CMat::Zero(dims.L, dims.doppler_bins());
        rec.on.sigma_alpha_sq = j.value("sigma_alpha_sq", 0.0);
        for (std::size_t p = 0; p < points.size(); ++p) {
            const int l = points[p].at(0).get<int>();
            const int q = points[p].at(1).get<int>();
            rec.on.gains(l, dims.Q + q) =
                Complex{gains[p].at(0).get<double>(), gains[p].at(1).get<double>()};
        }
    } else if (kind == "offgrid") {
        rec.ongrid = false;
        rec.off.dims = dims;
        rec.off.support.dims = dims;
        rec.off.support.mask.setZero(dims.L, dims.doppler_bins());
        rec.off.N_D = j.at("N_D").get<int>();
        rec.off.sigma_alpha_sq = j.value("sigma_alpha_sq", 0.0);
        const json& shifts = j.at("shifts");
        require(shifts.size() == points.size(), "channel record: shifts size mismatch");
        const auto np = static_cast<Eigen::Index>(points.size());
        rec.off.subpath_gains = CMat::Zero(np, rec.off.N_D);
        rec.off.fractional_shifts = RMat::Zero(np, rec.off.N_D);
        // Mark the support first; active_points() ordering must match rows.
        std::vector<std::pair<int, int>> pts;
        for (std::size_t p = 0; p < points.size(); ++p) {
            const int l = points[p].at(0).get<int>();
            const int q = points[p].at(1).get<int>();
            rec.off.support.mask(l, dims.Q + q) = 1;
            pts.emplace_back(l, q);
        }
        require(pts == rec.off.support.active_points(),
                "channel record: points must be delay-major, Doppler ascending");
        for (std::size_t p = 0; p < points.size(); ++p) {
            require(gains[p].size() == static_cast<std::size_t>(2 * rec.off.N_D) &&
                        shifts[p].size() == static_cast<std::size_t>(rec.off.N_D),
                    "channel record: row width must match N_D");
            for (int i = 0; i < rec.off.N_D; ++i) {
                rec.off.subpath_gains(static_cast<Eigen::Index>(p), i) =
                    Complex{gains[p].at(2 * i).get<double>(),
                            gains[p].at(2 * i + 1).get<double>()};
                rec.off.fractional_shifts(static_cast<Eigen::Index>(p), i) =
                    shifts[p].at(i).get<double>();
            }
        }
    } else {
        throw DimensionError("channel record: unknown kind '" + kind + "'");
    }
    return rec;
}

std::string trajectories_csv(const TapTrajectories& traj) {
    traj.validate();
    std::string out = "tap";
    for (std::int64_t t : traj.times) {
        out += ",re_" + std::to_string(t);
        out += ",im_" + std::to_string(t);
    }
    out += '\n';
    for (int l = 0; l < traj.dims.L; ++l) {
        out += std::to_string(l);
        for (Eigen::Index c = 0; c < traj.h.cols(); ++c) {
            out += ',' + fmt17(traj.h(l, c).real());
            out += ',' + fmt17(traj.h(l, c).imag());
        }
        out += '\n';
    }
    return out;
}

}  // namespace dsltv
