// Experiment orchestration: JSON experiment configs, seeded Monte Carlo
// sweeps over waveform × SNR × horizon, metric accumulation with
// normal-approximation confidence intervals, CSV/JSON report emission, and
// JSON replay records for individual channel realizations.
//
// Determinism contract: the whole pipeline is a pure function of
// (config, master seed). Trial t draws its channel from the engine seed
// Rng::derive(seed, kTagChannel, t); the noise stream of trial t, waveform
// index w, SNR index s uses Rng::derive(seed, kTagNoise, (t*W + w)*S + s)
// with W = #waveforms and S = #SNR points; pilot phases of waveform w use
// Rng::derive(seed, kTagPilots, w). Worker count never changes results:
// trials fill disjoint slots and are reduced in trial order.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dsltv/channel.hpp"
#include "dsltv/common.hpp"
#include "dsltv/estimate.hpp"
#include "dsltv/grid.hpp"
#include "dsltv/parallel.hpp"
#include "dsltv/sensing.hpp"
#include "dsltv/waveform.hpp"

namespace dsltv {

inline constexpr std::uint64_t kTagChannel = 0x6368616e6e656cULL;  // "channel"
inline constexpr std::uint64_t kTagNoise = 0x6e6f697365ULL;        // "noise"
inline constexpr std::uint64_t kTagPilots = 0x70696c6f7473ULL;     // "pilots"
inline constexpr std::uint64_t kTagProbe = 0x70726f6265ULL;        // "probe"

enum class RunMode {
    OngridHihtp,   // integer-Doppler channels, hierarchical pursuit recovery
    OffgridLmmse,  // fractional-Doppler channels, basis-coefficient LMMSE
    Predict,       // OffgridLmmse plus extrapolation over horizon list
    Overhead,      // closed-form pilot overhead table, no trials
    HiripProbe,    // empirical restricted-isometry constants per waveform
    DpssDump,      // basis eigenvalues for the configured (N, Q_BEM)
};
std::string mode_name(RunMode mode);
RunMode mode_from_name(const std::string& name);

struct WaveformRun {
    WaveformConfig cfg;  // N, L, Q are filled from dims at parse time
    PilotBudget budget;
};

enum class ChannelSource {
    Random,    // profile-driven random support and gains
    Identity,  // deterministic single tap: h_{0,n} = 1
};

struct ExperimentConfig {
    RunMode mode = RunMode::OffgridLmmse;
    GridDims dims;
    SparsityProfile profile;
    ChannelSource channel = ChannelSource::Random;
    int N_D = 3;    // sub-paths per active point (off-grid modes)
    int Q_BEM = 4;  // basis order (off-grid modes)
    std::vector<WaveformRun> waveforms;
    std::vector<double> snr_db;
    std::vector<int> horizons;  // Predict mode: extrapolation lengths, ascending
    int trials = 100;
    int k_max = 20;                  // pursuit iteration cap
    double lambda_floor = 1e-12;
    PriorKind prior = PriorKind::Isotropic;
    PilotPower pilot_power = PilotPower::Frame;
    long long probe_trials = 200;    // HiripProbe sampling budget
    double exclude_threshold = 0.1;  // CLI failure gate on excluded-trial rate
    std::uint64_t seed = 1;
    int workers = 1;
    std::string out_dir = ".";
    std::string tag = "report";  // output file basename

    void validate() const;
};

/** Parses the documented JSON schema (see README); unknown keys rejected. */
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
/** Canonical JSON echo of a parsed config (alphabetical keys). */
std::string config_echo(const ExperimentConfig& config);

struct MetricStat {
    double mean = 0.0;
    double ci95 = 0.0;  // half-width, normal approximation 1.96 s/sqrt(n)
    long long count = 0;

    bool operator==(const MetricStat& o) const {
        return mean == o.mean && ci95 == o.ci95 && count == o.count;
    }
};
/** Mean and 95% half-width of a sample set (ci95 = 0 for n < 2). */
MetricStat summarize(const std::vector<double>& values);

struct SweepRow {
    std::string waveform;        // empty when not waveform-specific
    double snr_db = 0.0;
    bool has_snr = false;
    int horizon = -1;            // -1: not a prediction row
    long long trials = 0;        // configured
    long long reported = 0;      // trials that produced this row's metrics
    long long excluded = 0;      // trials aborted by a module error
    long long overhead_formula = -1;
    long long overhead_occupied = -1;
    MetricStat coeff_mse;     // E||alpha_hat - alpha||^2 or E||beta_hat - beta||^2
    MetricStat channel_mse;   // (1/N) sum_l ||h_l - h_hat_l||^2
    MetricStat channel_power; // (1/N) sum_l ||h_l||^2 (normalization reference)
    MetricStat pred_mse;      // same normalization over the horizon window
    std::string value_name;   // generic scalar channel (delta_hat, lambda)
    double value = 0.0;
    bool has_value = false;

    bool operator==(const SweepRow& o) const;
};

struct MetricsReport {
    int schema_version = 1;
    std::string mode;
    std::uint64_t seed = 0;
    std::string config_json;  // canonical echo of the config that produced this
    std::vector<SweepRow> rows;

    /** Largest excluded/configured ratio over rows (0 when no trials ran). */
    double max_excluded_rate() const;
    bool operator==(const MetricsReport& o) const;
};

/** Executes the configured sweep. Per-trial module errors abort only the
 *  affected trial; it is counted in `excluded` (reported + excluded =
 *  configured trials on every row). */
MetricsReport run(const ExperimentConfig& config);

/** (1/N) sum over taps of the squared row difference. */
double mse_channel(const CMat& h_true, const CMat& h_hat, int N);

// ---- report emission ----
// CSV schema (one row per sweep point, %.17g doubles, empty cell = not
// applicable):
//   schema,mode,waveform,snr_db,horizon,trials,reported,excluded,
//   overhead_formula,overhead_occupied,coeff_mse,coeff_mse_ci95,
//   channel_mse,channel_mse_ci95,channel_power,channel_mse_norm,
//   pred_mse,pred_mse_ci95,value_name,value
// channel_mse_norm = channel_mse / channel_power.
std::string report_csv(const MetricsReport& report);
std::string report_json(const MetricsReport& report);
MetricsReport report_from_json(const std::string& json_text);

struct EmitPaths {
    std::string csv;
    std::string json;
};
/** Writes <dir>/<basename>.csv and .json; throws with the path on failure. */
EmitPaths emit(const MetricsReport& report, const std::string& dir,
               const std::string& basename);

// ---- channel replay records ----
std::string channel_to_json(const OnGridChannel& chan, std::uint64_t seed);
std::string channel_to_json(const OffGridChannel& chan, std::uint64_t seed);

struct ChannelRecord {
    bool ongrid = false;
    std::uint64_t seed = 0;
    OnGridChannel on;    // valid when ongrid
    OffGridChannel off;  // valid when !ongrid
};
ChannelRecord channel_from_json(const std::string& json_text);

/** One row per delay tap: tap index, then re/im interleaved per time. */
std::string trajectories_csv(const TapTrajectories& traj);

}  // namespace dsltv
