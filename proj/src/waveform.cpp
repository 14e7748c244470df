#include "dsltv/waveform.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "dsltv/fft.hpp"
#include "json.hpp"

namespace dsltv {

std::string waveform_name(WaveformKind kind) {
    switch (kind) {
        case WaveformKind::SCM: return "scm";
        case WaveformKind::OFDM: return "ofdm";
        case WaveformKind::AFDM: return "afdm";
        case WaveformKind::OTFS: return "otfs";
    }
    return "?";
}

WaveformKind waveform_from_name(const std::string& name) {
    if (name == "scm") return WaveformKind::SCM;
    if (name == "ofdm") return WaveformKind::OFDM;
    if (name == "afdm") return WaveformKind::AFDM;
    if (name == "otfs") return WaveformKind::OTFS;
    throw DimensionError("unknown waveform: " + name);
}

void WaveformConfig::validate() const {
    require(N >= 2 && L >= 1 && Q >= 0 && N > L, "WaveformConfig: bad N/L/Q");
    switch (kind) {
        case WaveformKind::SCM:
            break;
        case WaveformKind::OFDM:
            require(N_fft >= 1 && N_ofdm_symb >= 1 && N_fft * N_ofdm_symb == N,
                    "WaveformConfig: N_fft * N_ofdm_symb must equal N");
            require(N_cp >= L - 1, "WaveformConfig: N_cp must cover the delay spread (>= L-1)");
            break;
        case WaveformKind::AFDM:
            require(P_afdm >= 1, "WaveformConfig: P_afdm must be >= 1");
            break;
        case WaveformKind::OTFS:
            require(N_otfs >= 1 && M_otfs >= 1 && N_otfs * M_otfs == N,
                    "WaveformConfig: N_otfs * M_otfs must equal N");
            break;
    }
}

std::vector<std::int64_t> rx_times(const WaveformConfig& cfg) {
    cfg.validate();
    std::vector<std::int64_t> t(static_cast<std::size_t>(cfg.N));
    if (cfg.kind == WaveformKind::OFDM) {
        for (int n = 0; n < cfg.N; ++n) {
            t[static_cast<std::size_t>(n)] = n + static_cast<std::int64_t>(n / cfg.N_fft) * cfg.N_cp;
        }
    } else {
        for (int n = 0; n < cfg.N; ++n) t[static_cast<std::size_t>(n)] = n;
    }
    return t;
}

namespace {

/** CPP continuation factor: s(-j) = body(N-j) * e^{-i2π c1 (N² - 2Nj)}. */
Complex cpp_factor(const WaveformConfig& cfg, int j) {
    const double turns = -cfg.c1() * (static_cast<double>(cfg.N) * cfg.N - 2.0 * cfg.N * j);
    return unit_phasor(turns);
}

CVec afdm_body(const WaveformConfig& cfg, const CVec& x) {
    const int N = cfg.N;
    CVec u(N);
    for (int k = 0; k < N; ++k) u(k) = unit_phasor(cfg.c2 * k * static_cast<double>(k)) * x(k);
    fft::forward(u);
    const double c1 = cfg.c1();
    for (int n = 0; n < N; ++n) u(n) *= unit_phasor(c1 * n * static_cast<double>(n));
    return u;
}

CVec afdm_unbody(const WaveformConfig& cfg, const CVec& body) {
    const int N = cfg.N;
    const double c1 = cfg.c1();
    CVec w(N);
    for (int n = 0; n < N; ++n) w(n) = unit_phasor(-c1 * n * static_cast<double>(n)) * body(n);
    fft::inverse(w);
    for (int m = 0; m < N; ++m) w(m) *= unit_phasor(-cfg.c2 * m * static_cast<double>(m));
    return w;
}

CVec otfs_body(const WaveformConfig& cfg, const CVec& x) {
    const int Nd = cfg.N_otfs;
    const int M = cfg.M_otfs;
    CVec body(cfg.N);
    CVec tmp(Nd);
    for (int l = 0; l < M; ++l) {
        for (int k = 0; k < Nd; ++k) tmp(k) = x(k * M + l);
        fft::inverse(tmp);
        for (int m = 0; m < Nd; ++m) body(m * M + l) = tmp(m);
    }
    return body;
}

CVec otfs_unbody(const WaveformConfig& cfg, const CVec& body) {
    const int Nd = cfg.N_otfs;
    const int M = cfg.M_otfs;
    CVec y(cfg.N);
    CVec tmp(Nd);
    for (int l = 0; l < M; ++l) {
        for (int m = 0; m < Nd; ++m) tmp(m) = body(m * M + l);
        fft::forward(tmp);
        for (int k = 0; k < Nd; ++k) y(k * M + l) = tmp(k);
    }
    return y;
}

}  // namespace

TxFrame modulate(const WaveformConfig& cfg, const CVec& x) {
    cfg.validate();
    require(x.size() == cfg.N, "modulate: x must have N entries");
    TxFrame frame;
    frame.s_begin = cfg.stream_begin();
    frame.rx_times = rx_times(cfg);

    switch (cfg.kind) {
        case WaveformKind::SCM: {
            frame.s.resize(cfg.stream_len());
            frame.s.head(cfg.L - 1) = x.tail(cfg.L - 1);
            frame.s.tail(cfg.N) = x;
            break;
        }
        case WaveformKind::OFDM: {
            const int S = cfg.N_cp + cfg.N_fft;
            frame.s.resize(cfg.stream_len());
            for (int j = 0; j < cfg.N_ofdm_symb; ++j) {
                CVec body = x.segment(static_cast<Eigen::Index>(j) * cfg.N_fft, cfg.N_fft);
                fft::inverse(body);
                frame.s.segment(static_cast<Eigen::Index>(j) * S, cfg.N_cp) = body.tail(cfg.N_cp);
                frame.s.segment(static_cast<Eigen::Index>(j) * S + cfg.N_cp, cfg.N_fft) = body;
            }
            break;
        }
        case WaveformKind::AFDM: {
            const CVec body = afdm_body(cfg, x);
            frame.s.resize(cfg.stream_len());
            frame.s.tail(cfg.N) = body;
            for (int j = 1; j <= cfg.L - 1; ++j) {
                frame.s(cfg.L - 1 - j) = body(cfg.N - j) * cpp_factor(cfg, j);
            }
            break;
        }
        case WaveformKind::OTFS: {
            const CVec body = otfs_body(cfg, x);
            frame.s.resize(cfg.stream_len());
            frame.s.head(cfg.L - 1) = body.tail(cfg.L - 1);
            frame.s.tail(cfg.N) = body;
            break;
        }
    }
    return frame;
}

CVec demodulate(const WaveformConfig& cfg, const CVec& r) {
    cfg.validate();
    CVec body(cfg.N);
    if (r.size() == cfg.stream_len()) {
        if (cfg.kind == WaveformKind::OFDM) {
            const int S = cfg.N_cp + cfg.N_fft;
            for (int j = 0; j < cfg.N_ofdm_symb; ++j) {
                body.segment(static_cast<Eigen::Index>(j) * cfg.N_fft, cfg.N_fft) =
                    r.segment(static_cast<Eigen::Index>(j) * S + cfg.N_cp, cfg.N_fft);
            }
        } else {
            body = r.tail(cfg.N);
        }
    } else {
        require(r.size() == cfg.N, "demodulate: r must hold the stream or the N body samples");
        body = r;
    }

    switch (cfg.kind) {
        case WaveformKind::SCM:
            return body;
        case WaveformKind::OFDM: {
            CVec y(cfg.N);
            for (int j = 0; j < cfg.N_ofdm_symb; ++j) {
                CVec sym = body.segment(static_cast<Eigen::Index>(j) * cfg.N_fft, cfg.N_fft);
                fft::forward(sym);
                y.segment(static_cast<Eigen::Index>(j) * cfg.N_fft, cfg.N_fft) = sym;
            }
            return y;
        }
        case WaveformKind::AFDM:
            return afdm_unbody(cfg, body);
        case WaveformKind::OTFS:
            return otfs_unbody(cfg, body);
    }
    throw DimensionError("demodulate: unreachable");
}

namespace {

/** N x N body-synthesis matrix from the defining per-entry formulas. */
CMat dense_body_matrix(const WaveformConfig& cfg) {
    const int N = cfg.N;
    CMat M = CMat::Zero(N, N);
    switch (cfg.kind) {
        case WaveformKind::SCM:
            M.setIdentity();
            break;
        case WaveformKind::OFDM: {
            const double s = 1.0 / std::sqrt(static_cast<double>(cfg.N_fft));
            for (int j = 0; j < cfg.N_ofdm_symb; ++j) {
                for (int i = 0; i < cfg.N_fft; ++i) {
                    for (int m = 0; m < cfg.N_fft; ++m) {
                        M(j * cfg.N_fft + i, j * cfg.N_fft + m) =
                            s * unit_phasor(static_cast<double>(i) * m / cfg.N_fft);
                    }
                }
            }
            break;
        }
        case WaveformKind::AFDM: {
            const double s = 1.0 / std::sqrt(static_cast<double>(N));
            const double c1 = cfg.c1();
            for (int n = 0; n < N; ++n) {
                for (int k = 0; k < N; ++k) {
                    M(n, k) = s * unit_phasor(c1 * n * static_cast<double>(n) -
                                              static_cast<double>(n) * k / N +
                                              cfg.c2 * k * static_cast<double>(k));
                }
            }
            break;
        }
        case WaveformKind::OTFS: {
            const double s = 1.0 / std::sqrt(static_cast<double>(cfg.N_otfs));
            for (int m = 0; m < cfg.N_otfs; ++m) {
                for (int l = 0; l < cfg.M_otfs; ++l) {
                    for (int k = 0; k < cfg.N_otfs; ++k) {
                        M(m * cfg.M_otfs + l, k * cfg.M_otfs + l) =
                            s * unit_phasor(static_cast<double>(k) * m / cfg.N_otfs);
                    }
                }
            }
            break;
        }
    }
    return M;
}

}  // namespace

CMat dense_modulator(const WaveformConfig& cfg) {
    cfg.validate();
    require(cfg.N <= 256, "dense_modulator: oracle restricted to N <= 256");
    const CMat body = dense_body_matrix(cfg);
    CMat S = CMat::Zero(cfg.stream_len(), cfg.N);
    if (cfg.kind == WaveformKind::OFDM) {
        const int span = cfg.N_cp + cfg.N_fft;
        for (int j = 0; j < cfg.N_ofdm_symb; ++j) {
            S.middleRows(j * span, cfg.N_cp) =
                body.middleRows(j * cfg.N_fft + cfg.N_fft - cfg.N_cp, cfg.N_cp);
            S.middleRows(j * span + cfg.N_cp, cfg.N_fft) = body.middleRows(j * cfg.N_fft, cfg.N_fft);
        }
    } else {
        for (int j = 1; j <= cfg.L - 1; ++j) {
            S.row(cfg.L - 1 - j) = body.row(cfg.N - j);
            if (cfg.kind == WaveformKind::AFDM) S.row(cfg.L - 1 - j) *= cpp_factor(cfg, j);
        }
        S.bottomRows(cfg.N) = body;
    }
    return S;
}

CMat dense_demodulator(const WaveformConfig& cfg) {
    cfg.validate();
    require(cfg.N <= 256, "dense_demodulator: oracle restricted to N <= 256");
    const CMat bodyH = dense_body_matrix(cfg).adjoint();
    CMat D = CMat::Zero(cfg.N, cfg.stream_len());
    if (cfg.kind == WaveformKind::OFDM) {
        const int span = cfg.N_cp + cfg.N_fft;
        for (int j = 0; j < cfg.N_ofdm_symb; ++j) {
            D.middleCols(j * span + cfg.N_cp, cfg.N_fft) =
                bodyH.middleCols(j * cfg.N_fft, cfg.N_fft);
        }
    } else {
        D.rightCols(cfg.N) = bodyH;
    }
    return D;
}

int daft_index(int k, int l, int q, const WaveformConfig& cfg) {
    require(cfg.kind == WaveformKind::AFDM, "daft_index: AFDM only");
    const long long m = static_cast<long long>(k) - q + static_cast<long long>(cfg.P_afdm) * l;
    return static_cast<int>(((m % cfg.N) + cfg.N) % cfg.N);
}

namespace {

int wrap(int idx, int n) { return ((idx % n) + n) % n; }

std::vector<int> spaced_positions(int count, double modulus) {
    std::vector<int> out(static_cast<std::size_t>(count));
    for (int p = 0; p < count; ++p) {
        out[static_cast<std::size_t>(p)] = static_cast<int>(std::llround(p * modulus / count));
    }
    return out;
}

void fill_values(PilotPlan& plan, int N, PilotPower power, Rng& rng) {
    const auto entries = static_cast<Eigen::Index>(plan.pilot_positions.size());
    const double amp = power == PilotPower::Frame
                           ? std::sqrt(static_cast<double>(N) / static_cast<double>(entries))
                           : 1.0;
    plan.pilot_values.resize(entries);
    plan.x = CVec::Zero(N);
    for (Eigen::Index i = 0; i < entries; ++i) {
        plan.pilot_values(i) = amp * unit_phasor(rng.uniform01());
        plan.x(plan.pilot_positions[static_cast<std::size_t>(i)]) = plan.pilot_values(i);
    }
}

void default_reduce_rows(PilotPlan& plan) {
    plan.kept = plan.sensing_indices;
    plan.fold_from.assign(plan.kept.size(), -1);
    plan.row_weight = RVec::Ones(static_cast<Eigen::Index>(plan.kept.size()));
}

}  // namespace

CVec PilotPlan::reduce(const CVec& y) const {
    CVec out(static_cast<Eigen::Index>(kept.size()));
    for (std::size_t i = 0; i < kept.size(); ++i) {
        Complex v = y(kept[i]);
        if (fold_from[i] >= 0) v += y(fold_from[i]);
        out(static_cast<Eigen::Index>(i)) = row_weight(static_cast<Eigen::Index>(i)) * v;
    }
    return out;
}

PilotPlan plan_pilots(const WaveformConfig& cfg, const PilotBudget& budget, PilotPower power,
                      Rng& rng) {
    cfg.validate();
    PilotPlan plan;
    plan.kind = cfg.kind;

    switch (cfg.kind) {
        case WaveformKind::SCM: {
            const int np = budget.N_p_t;
            require(np >= 1, "plan_pilots: SCM needs N_p_t >= 1");
            std::vector<int> pos;
            const int bins = 2 * cfg.Q + 1;
            if (np <= bins && cfg.N % bins == 0) {
                // Doppler-resolving lattice: q_p * N/(2Q+1).
                for (int p = 0; p < np; ++p) pos.push_back(p * (cfg.N / bins));
            } else {
                pos = spaced_positions(np, static_cast<double>(cfg.N));
            }
            for (int p = 0; p < np; ++p) {
                require(pos[static_cast<std::size_t>(p)] + cfg.L - 1 <= cfg.N - 1,
                        "plan_pilots: SCM pilot read region exceeds the frame");
                if (p > 0) {
                    require(pos[static_cast<std::size_t>(p)] - pos[static_cast<std::size_t>(p - 1)] >= cfg.L,
                            "plan_pilots: SCM pilot read regions overlap");
                }
            }
            plan.pilot_positions = pos;
            std::set<int> reads;
            std::set<int> guards;
            for (int p : pos) {
                for (int j = 0; j < cfg.L; ++j) reads.insert(p + j);
                for (int j = -(cfg.L - 1); j <= cfg.L - 1; ++j) {
                    const int g = p + j;
                    if (g != p && g >= 0 && g < cfg.N) guards.insert(g);
                }
            }
            plan.sensing_indices.assign(reads.begin(), reads.end());
            plan.guard_indices.assign(guards.begin(), guards.end());
            default_reduce_rows(plan);
            break;
        }
        case WaveformKind::OFDM: {
            require(budget.N_p_t >= 1 && budget.N_p_t <= cfg.N_ofdm_symb,
                    "plan_pilots: OFDM N_p_t must lie in [1, N_ofdm_symb]");
            require(budget.N_p_f >= 1 && budget.N_p_f <= cfg.N_fft,
                    "plan_pilots: OFDM N_p_f must lie in [1, N_fft]");
            const std::vector<int> sym = spaced_positions(budget.N_p_t, cfg.N_ofdm_symb);
            const std::vector<int> sub = spaced_positions(budget.N_p_f, cfg.N_fft);
            for (int j : sym) {
                for (int f : sub) plan.pilot_positions.push_back(j * cfg.N_fft + f);
            }
            plan.sensing_indices = plan.pilot_positions;
            default_reduce_rows(plan);
            break;
        }
        case WaveformKind::AFDM: {
            const int np = budget.N_p;
            require(np >= 1, "plan_pilots: AFDM needs N_p >= 1");
            const int stride = (cfg.L - 1) * cfg.P_afdm;  // span of the delay axis
            const int span = stride + 2 * cfg.Q + 1;      // full pilot footprint
            require(stride >= 2 * cfg.Q + 1,
                    "plan_pilots: AFDM fold regions collide ((L-1)P < 2Q+1)");
            require(static_cast<long long>(np) * span <= cfg.N,
                    "plan_pilots: AFDM pilot regions exceed the frame");
            const int ceil_qp = (cfg.Q + cfg.P_afdm - 1) / cfg.P_afdm;
            const int modulus = 2 * ceil_qp + 1;
            std::vector<int> pos;
            if (np <= modulus) {
                if (cfg.N % modulus == 0) {
                    for (int p = 0; p < np; ++p) pos.push_back(p * (cfg.N / modulus));
                } else {
                    // Lattice rounding fallback for non-divisible N.
                    for (int p = 0; p < np; ++p) {
                        pos.push_back(static_cast<int>(
                            std::llround(p * static_cast<double>(cfg.N) / modulus)));
                    }
                }
            } else {
                pos = spaced_positions(np, static_cast<double>(cfg.N));
            }
            // Circular non-overlap of the footprints.
            for (int p = 0; p < np; ++p) {
                const int gap = (p + 1 < np)
                                    ? pos[static_cast<std::size_t>(p + 1)] - pos[static_cast<std::size_t>(p)]
                                    : pos[0] + cfg.N - pos[static_cast<std::size_t>(p)];
                require(gap >= span, "plan_pilots: AFDM pilot guard regions overlap");
            }
            plan.pilot_positions = pos;

            std::set<int> reads;
            std::set<int> guards;
            struct Row {
                int kept;
                int fold;
                double w;
            };
            std::vector<Row> rows;
            const double half = 1.0 / std::sqrt(2.0);
            for (int p : pos) {
                for (int d = 0; d <= stride; ++d) {
                    const int idx = wrap(p + d, cfg.N);
                    int fold = -1;
                    double w = 1.0;
                    if (d >= 1 && d <= cfg.Q) {
                        fold = wrap(p + stride + d, cfg.N);  // trailing edge folds back
                        w = half;
                    } else if (d >= stride - cfg.Q && d <= stride - 1) {
                        fold = wrap(p - (stride - d), cfg.N);  // leading edge folds forward
                        w = half;
                    }
                    rows.push_back({idx, fold, w});
                    reads.insert(idx);
                    if (fold >= 0) reads.insert(fold);
                }
                for (int d = -cfg.Q; d <= stride + cfg.Q; ++d) {
                    const int g = wrap(p + d, cfg.N);
                    if (g != p) guards.insert(g);
                }
            }
            std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
                return a.kept < b.kept;
            });
            plan.row_weight.resize(static_cast<Eigen::Index>(rows.size()));
            for (std::size_t i = 0; i < rows.size(); ++i) {
                plan.kept.push_back(rows[i].kept);
                plan.fold_from.push_back(rows[i].fold);
                plan.row_weight(static_cast<Eigen::Index>(i)) = rows[i].w;
            }
            plan.sensing_indices.assign(reads.begin(), reads.end());
            plan.guard_indices.assign(guards.begin(), guards.end());
            break;
        }
        case WaveformKind::OTFS: {
            const int Nd = cfg.N_otfs;
            const int M = cfg.M_otfs;
            const int k_p = Nd / 2;
            const int l_p = M / 2;
            const int dspan = std::min(cfg.L, M);  // delay reads
            require(l_p + dspan - 1 < M, "plan_pilots: OTFS delay read region exceeds the axis");
            plan.pilot_positions = {k_p * M + l_p};
            std::set<int> reads;
            std::set<int> dop_read;
            for (int o = -cfg.Q; o <= cfg.Q; ++o) dop_read.insert(wrap(k_p + o, Nd));
            for (int k : dop_read) {
                for (int d = 0; d < dspan; ++d) reads.insert(k * M + l_p + d);
            }
            std::set<int> guards;
            std::set<int> dop_guard;
            for (int o = -2 * cfg.Q; o <= 2 * cfg.Q; ++o) dop_guard.insert(wrap(k_p + o, Nd));
            const int g_lo = std::max(0, l_p - (cfg.L - 1));
            const int g_hi = std::min(M - 1, l_p + cfg.L - 1);
            for (int k : dop_guard) {
                for (int l = g_lo; l <= g_hi; ++l) {
                    const int g = k * M + l;
                    if (g != plan.pilot_positions[0]) guards.insert(g);
                }
            }
            plan.sensing_indices.assign(reads.begin(), reads.end());
            plan.guard_indices.assign(guards.begin(), guards.end());
            default_reduce_rows(plan);
            break;
        }
    }

    fill_values(plan, cfg.N, power, rng);
    return plan;
}

OverheadReport overhead(const WaveformConfig& cfg, const PilotBudget& budget) {
    cfg.validate();
    OverheadReport rep;
    rep.kind = cfg.kind;
    switch (cfg.kind) {
        case WaveformKind::SCM:
            rep.total_formula = (cfg.L - 1) + static_cast<long long>(2 * cfg.L - 1) * budget.N_p_t;
            break;
        case WaveformKind::OFDM:
            rep.total_formula = static_cast<long long>(cfg.L - 1 + budget.N_p_f) * budget.N_p_t;
            break;
        case WaveformKind::AFDM:
            rep.total_formula = (cfg.L - 2) +
                                static_cast<long long>(budget.N_p + 1) *
                                    ((cfg.L - 1) * cfg.P_afdm + 2 * cfg.Q + 1);
            break;
        case WaveformKind::OTFS:
            rep.total_formula = (cfg.L - 1) +
                                static_cast<long long>(std::min(4 * cfg.Q + 1, cfg.N_otfs)) *
                                    std::min(2 * cfg.L - 1, cfg.M_otfs);
            break;
    }
    Rng rng(0);  // placement is deterministic; values are not counted
    const PilotPlan plan = plan_pilots(cfg, budget, PilotPower::Unit, rng);
    rep.prefix = cfg.prefix_len();
    rep.pilots = static_cast<long long>(plan.pilot_positions.size());
    rep.guards = static_cast<long long>(plan.guard_indices.size());
    rep.total_occupied = rep.prefix + rep.pilots + rep.guards;
    return rep;
}

std::string pilot_plan_json(const PilotPlan& plan) {
    nlohmann::json j;
    j["waveform"] = waveform_name(plan.kind);
    j["pilot_positions"] = plan.pilot_positions;
    nlohmann::json values = nlohmann::json::array();
    for (int i = 0; i < plan.pilot_values.size(); ++i) {
        values.push_back({plan.pilot_values(i).real(), plan.pilot_values(i).imag()});
    }
    j["pilot_values"] = std::move(values);
    j["sensing_indices"] = plan.sensing_indices;
    j["guard_indices"] = plan.guard_indices;
    j["kept"] = plan.kept;
    j["fold_from"] = plan.fold_from;
    j["row_weight"] = std::vector<double>(plan.row_weight.data(),
                                          plan.row_weight.data() + plan.row_weight.size());
    j["rows"] = plan.rows();
    j["frame_len"] = static_cast<long long>(plan.x.size());
    return j.dump(2) + "\n";
}

}  // namespace dsltv
