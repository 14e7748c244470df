// Modulation/demodulation operator pairs for the four studied waveforms
// (single-carrier, OFDM, AFDM chirp multiplexing, OTFS delay-Doppler
// multiplexing), embedded-pilot frame planning with guard accounting, the
// AFDM delay-Doppler-to-transform-index map, and closed-form pilot-overhead
// formulas. All operator chains are unitary: demodulate(modulate(x)) = x.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dsltv/common.hpp"
#include "dsltv/rng.hpp"

namespace dsltv {

enum class WaveformKind { SCM, OFDM, AFDM, OTFS };

std::string waveform_name(WaveformKind kind);
WaveformKind waveform_from_name(const std::string& name);

struct WaveformConfig {
    WaveformKind kind = WaveformKind::SCM;
    int N = 2;  // frame length (body samples)
    int L = 1;  // delay taps covered by prefixes/guards
    int Q = 0;  // max integer Doppler covered by guards

    // AFDM: time-domain chirp rate c1 = P_afdm/(2N) controls how far one
    // delay tap strides in the transform domain; c2 is the transform-domain
    // chirp (unit-modulus diagonal, cancels in the round trip).
    int P_afdm = 1;
    double c2 = 0.0;

    // OFDM: N_ofdm_symb symbols of N_fft subcarriers, N_fft*N_ofdm_symb = N,
    // cyclic prefix of N_cp >= L-1 samples per symbol.
    int N_fft = 0;
    int N_cp = 0;
    int N_ofdm_symb = 0;

    // OTFS: N_otfs Doppler bins x M_otfs delay bins, N_otfs*M_otfs = N.
    // Transform-domain index = k*M_otfs + l (Doppler-major).
    int N_otfs = 0;
    int M_otfs = 0;

    double c1() const { return P_afdm / (2.0 * N); }
    /** Prefix samples prepended to the N body samples. */
    int prefix_len() const {
        return kind == WaveformKind::OFDM ? N_ofdm_symb * N_cp : L - 1;
    }
    int stream_len() const { return N + prefix_len(); }
    /** Stream position of the first transmitted sample (first body sample
     *  of the frame sits at position 0). */
    std::int64_t stream_begin() const {
        return kind == WaveformKind::OFDM ? -static_cast<std::int64_t>(N_cp)
                                          : -static_cast<std::int64_t>(L - 1);
    }
    void validate() const;
};

/** Stream positions of the N samples the receiver demodulates from, in
 *  frame order: n for single-prefix kinds, n + (symbol index)*N_cp for OFDM
 *  (cyclic prefixes advance the physical clock between symbols). */
std::vector<std::int64_t> rx_times(const WaveformConfig& cfg);

struct TxFrame {
    CVec s;                   // full transmit stream, prefix first
    std::int64_t s_begin;     // stream position of s(0)
    std::vector<std::int64_t> rx_times;  // positions feeding demodulate
};

/** s = Phi_tx x: transform-domain frame to time-domain stream with prefix. */
TxFrame modulate(const WaveformConfig& cfg, const CVec& x);

/** y = Phi_rx r: accepts the full received stream (prefix included, dropped
 *  here) or just the N body samples, and applies the adjoint chain. */
CVec demodulate(const WaveformConfig& cfg, const CVec& r);

/** Dense (N+prefix) x N modulation matrix built entry-by-entry from the
 *  defining formulas (no FFT path shared with modulate); test oracle,
 *  guarded to N <= 256. */
CMat dense_modulator(const WaveformConfig& cfg);

/** Dense N x (N+prefix) demodulation matrix; adjoint chain on body samples,
 *  zero columns at prefix positions. Guarded to N <= 256. */
CMat dense_demodulator(const WaveformConfig& cfg);

/** AFDM: transform index receiving pilot index k through path (l, q):
 *  (k - q + P_afdm*l) mod N. */
int daft_index(int k, int l, int q, const WaveformConfig& cfg);

/** Pilot entries per waveform: SCM uses N_p_t time pilots, OFDM an
 *  N_p_t x N_p_f symbol-by-subcarrier lattice, AFDM N_p transform-domain
 *  pilots, OTFS always one delay-Doppler pilot. */
struct PilotBudget {
    int N_p = 1;    // AFDM pilot count
    int N_p_t = 1;  // SCM time pilots / OFDM pilot symbols
    int N_p_f = 1;  // OFDM pilot subcarriers
};

enum class PilotPower {
    Frame,  // amplitude sqrt(N / #pilot entries): mean per-sample power 1
    Unit,   // amplitude 1
};

struct PilotPlan {
    WaveformKind kind = WaveformKind::SCM;
    std::vector<int> pilot_positions;  // transform-domain indices, ascending
    CVec pilot_values;                 // matching pilot_positions
    CVec x;                            // full frame: values at pilots, zero elsewhere
    std::vector<int> sensing_indices;  // P: all transform indices read for sensing, sorted

    // Reduction from demodulated frame y to the measurement vector: row i is
    // row_weight[i] * (y[kept[i]] + y[fold_from[i]]), fold_from[i] = -1 when
    // nothing is folded in. Only AFDM folds (guard-edge overlap-add); folded
    // rows carry doubled noise, whitened by the 1/sqrt(2) weight.
    std::vector<int> kept;
    std::vector<int> fold_from;
    RVec row_weight;

    std::vector<int> guard_indices;  // transform-domain guards (pilots excluded)

    /** Applies the kept/fold/whiten recipe to a demodulated frame. */
    CVec reduce(const CVec& y) const;
    int rows() const { return static_cast<int>(kept.size()); }
};

/**
 * Deterministic pilot placement (transform-domain lattices with rounding
 * fallbacks when the exact lattice does not fit), unit-modulus pilot values
 * with pseudo-random phases drawn from rng, scaled per the power mode.
 * Throws when the requested budget cannot fit without guard overlap.
 */
PilotPlan plan_pilots(const WaveformConfig& cfg, const PilotBudget& budget, PilotPower power,
                      Rng& rng);

struct OverheadReport {
    WaveformKind kind = WaveformKind::SCM;
    long long prefix = 0;
    long long pilots = 0;
    long long guards = 0;
    long long total_formula = 0;   // closed-form accounting (see overhead())
    long long total_occupied = 0;  // prefix + pilots + guards by direct count
};

/**
 * Closed-form pilot overhead:
 *   SCM:  L-1 + (2L-1) N_p_t
 *   OFDM: (L-1 + N_p_f) N_p_t          (counts CP only on pilot symbols)
 *   AFDM: L-2 + (N_p+1)((L-1)P + 2Q+1)
 *   OTFS: L-1 + min(4Q+1, N_otfs) * min(2L-1, M_otfs)
 * total_occupied instead counts every prefix/pilot/guard sample actually
 * reserved in the frame (for OFDM that includes every symbol's CP).
 */
OverheadReport overhead(const WaveformConfig& cfg, const PilotBudget& budget);

/**
 * Serializes a pilot plan for inspection: waveform kind, pilot positions and
 * complex values, sensing/guard index sets, and the kept/fold_from/row_weight
 * reduction recipe. Deterministic key order; parse with any JSON library.
 */
std::string pilot_plan_json(const PilotPlan& plan);

}  // namespace dsltv
