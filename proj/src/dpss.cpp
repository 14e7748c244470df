#include "dsltv/dpss.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <vector>

#include <lapacke.h>

#include "dsltv/fft.hpp"

namespace dsltv {

double prolate_entry(std::int64_t k, std::int64_t n, std::int64_t /*N*/, double W) {
    const std::int64_t d = k - n;
    if (d == 0) return 2.0 * W;
    const double pd = kPi * static_cast<double>(d);
    return std::sin(2.0 * W * pd) / pd;
}

namespace {

/** c(d) = prolate_entry(d, 0) tabulated over d ∈ [d_min, d_min + count). */
std::vector<double> entry_table(double W, std::int64_t d_min, std::int64_t count) {
    std::vector<double> t(static_cast<std::size_t>(count));
    for (std::int64_t j = 0; j < count; ++j) {
        t[static_cast<std::size_t>(j)] = prolate_entry(d_min + j, 0, 0, W);
    }
    return t;
}

}  // namespace

RVec prolate_matvec(int N, double W, const RVec& x, std::int64_t k_offset, int rows,
                    const ExecPolicy& policy) {
    require(x.size() == N, "prolate_matvec: x length must be N");
    require(rows >= 0, "prolate_matvec: rows must be >= 0");
    // Differences (k + k_offset) - n span [k_offset - (N-1), k_offset + rows - 1].
    const std::int64_t d_min = k_offset - (N - 1);
    const std::vector<double> table = entry_table(W, d_min, rows + N - 1);
    RVec y(rows);
    parallel_for(rows, policy, [&](std::int64_t k) {
        // table[k + (N-1) - n] = c(k + k_offset - n); contiguous descending in n.
        const double* t = table.data() + k + (N - 1);
        double acc = 0.0;
        for (int n = 0; n < N; ++n) acc += t[-n] * x(n);
        y(k) = acc;
    });
    return y;
}

DpssBasis compute_dpss(const ProlateSpec& spec) {
    spec.validate();
    const int N = spec.N;
    const int K = spec.Q_BEM;

    // Slepian's commuting tridiagonal: same eigenvectors as the prolate
    // matrix, but a well-separated spectrum the solver can resolve. Its
    // largest eigenvalues correspond to the most concentrated sequences.
    std::vector<double> diag(static_cast<std::size_t>(N));
    std::vector<double> off(static_cast<std::size_t>(N > 1 ? N - 1 : 1), 0.0);
    const double c2w = std::cos(kTwoPi * spec.W);
    for (int i = 0; i < N; ++i) {
        const double half = (N - 1 - 2.0 * i) / 2.0;
        diag[static_cast<std::size_t>(i)] = half * half * c2w;
    }
    for (int i = 0; i + 1 < N; ++i) {
        off[static_cast<std::size_t>(i)] = (i + 1.0) * (N - 1.0 - i) / 2.0;
    }

    std::vector<double> w(static_cast<std::size_t>(N));
    RMat z(N, K);
    std::vector<lapack_int> isuppz(static_cast<std::size_t>(2 * K));
    lapack_int found = 0;
    const lapack_int info = LAPACKE_dstevr(
        LAPACK_COL_MAJOR, 'V', 'I', N, diag.data(), off.data(), 0.0, 0.0,
        /*il=*/N - K + 1, /*iu=*/N, /*abstol=*/0.0, &found, w.data(), z.data(),
        /*ldz=*/N, isuppz.data());
    require(info == 0 && found == K, "compute_dpss: tridiagonal eigensolver failed");

    DpssBasis basis;
    basis.N = N;
    basis.W = spec.W;
    basis.U.resize(N, K);
    basis.lambda.resize(K);
    for (int b = 0; b < K; ++b) {
        // dstevr returns ascending order; concentration order is the reverse.
        RVec u = z.col(K - 1 - b);
        u.normalize();
        for (int i = 0; i < N; ++i) {
            if (u(i) != 0.0) {
                if (u(i) < 0.0) u = -u;
                break;
            }
        }
        basis.U.col(b) = u;
        // λ_b as the Rayleigh quotient against the true prolate matrix; the
        // clamps only absorb rounding noise at the 1e-16 scale.
        double rq = u.dot(prolate_matvec(N, spec.W, u, 0, N));
        rq = std::min(1.0, std::max(0.0, rq));
        if (b > 0) rq = std::min(rq, basis.lambda(b - 1));
        basis.lambda(b) = rq;
    }
    return basis;
}

CVec bem_project(const CVec& h_lq, int q, const DpssBasis& basis) {
    require(h_lq.size() == basis.N, "bem_project: trajectory length must match basis window");
    CVec demod(basis.N);
    for (int n = 0; n < basis.N; ++n) {
        demod(n) = unit_phasor(-static_cast<double>(q) * n / basis.N) * h_lq(n);
    }
    return real_complex_product(basis.U.transpose(), demod);
}

CVec bem_reconstruct(const CVec& beta_lq, int q, const DpssBasis& basis) {
    require(beta_lq.size() == basis.order(), "bem_reconstruct: coefficient length must match order");
    const CVec mixed = real_complex_product(basis.U, beta_lq);
    CVec h(basis.N);
    for (int n = 0; n < basis.N; ++n) {
        h(n) = unit_phasor(static_cast<double>(q) * n / basis.N) * mixed(n);
    }
    return h;
}

CMat build_B(const GridDims& dims, int Q_BEM, const DpssBasis& basis) {
    dims.validate();
    require(dims.N == basis.N, "build_B: dims.N must match basis window");
    require(Q_BEM >= 1 && Q_BEM <= basis.order(), "build_B: Q_BEM exceeds basis order");
    require(dims.N <= 4096, "build_B: dense mapping matrix restricted to N <= 4096");

    const int N = dims.N;
    const int bins = dims.doppler_bins();
    const double scale = 1.0 / std::sqrt(static_cast<double>(N));

    // Ũ_b: unitary DFT of each basis column.
    CMat Ut(N, Q_BEM);
    for (int b = 0; b < Q_BEM; ++b) {
        CVec col = basis.U.col(b).cast<Complex>();
        fft::forward(col);
        Ut.col(b) = col;
    }

    CMat B(N, bins * Q_BEM);
    for (int q = -dims.Q; q <= dims.Q; ++q) {
        for (int b = 0; b < Q_BEM; ++b) {
            const int col = (dims.Q + q) * Q_BEM + b;
            for (int k = 0; k < N; ++k) {
                const int src = ((k - q) % N + N) % N;
                B(k, col) = scale * Ut(src, b);
            }
        }
    }
    return B;
}

namespace {

ExtendedBasis extend_core(const DpssBasis& basis, std::int64_t n_begin, std::int64_t n_end,
                          double lambda_floor, const ExecPolicy* policy) {
    require(n_end >= n_begin, "extend_dpss: empty or inverted range");
    const int N = basis.N;
    const int K = basis.order();

    ExtendedBasis out;
    out.n_begin = n_begin;
    out.n_end = n_end;
    out.U_ext = RMat::Zero(n_end - n_begin, K);
    std::vector<char> keep(static_cast<std::size_t>(K), 1);
    for (int b = 0; b < K; ++b) {
        if (basis.lambda(b) < lambda_floor) {
            keep[static_cast<std::size_t>(b)] = 0;
            out.excluded.push_back(b);
        }
    }
    const std::int64_t rows = n_end - n_begin;
    if (rows == 0) return out;

    if (policy != nullptr) {
        // Tabulated kernel values shared across rows; the sum over k runs in
        // the same ascending order as the serial reference, so the two paths
        // agree bitwise.
        const std::int64_t d_min = n_begin - (N - 1);
        const std::vector<double> table = entry_table(basis.W, d_min, rows + N - 1);
        parallel_for(rows, *policy, [&](std::int64_t r) {
            const std::int64_t n = n_begin + r;
            if (n >= 0 && n < N) {
                for (int b = 0; b < K; ++b) {
                    if (keep[static_cast<std::size_t>(b)]) out.U_ext(r, b) = basis.U(n, b);
                }
                return;
            }
            // table[r + (N-1) - k] = c(n - k); contiguous descending in k.
            const double* t = table.data() + r + (N - 1);
            for (int b = 0; b < K; ++b) {
                if (!keep[static_cast<std::size_t>(b)]) continue;
                double acc = 0.0;
                for (int k = 0; k < N; ++k) acc += t[-k] * basis.U(k, b);
                out.U_ext(r, b) = acc / basis.lambda(b);
            }
        });
    } else {
        for (std::int64_t r = 0; r < rows; ++r) {
            const std::int64_t n = n_begin + r;
            if (n >= 0 && n < N) {
                for (int b = 0; b < K; ++b) {
                    if (keep[static_cast<std::size_t>(b)]) out.U_ext(r, b) = basis.U(n, b);
                }
                continue;
            }
            for (int b = 0; b < K; ++b) {
                if (!keep[static_cast<std::size_t>(b)]) continue;
                double acc = 0.0;
                for (int k = 0; k < N; ++k) {
                    acc += prolate_entry(k, n, N, basis.W) * basis.U(k, b);
                }
                out.U_ext(r, b) = acc / basis.lambda(b);
            }
        }
    }
    return out;
}

}  // namespace

ExtendedBasis extend_dpss(const DpssBasis& basis, std::int64_t n_begin, std::int64_t n_end,
                          double lambda_floor, const ExecPolicy& policy) {
    return extend_core(basis, n_begin, n_end, lambda_floor, &policy);
}

ExtendedBasis extend_dpss_serial(const DpssBasis& basis, std::int64_t n_begin, std::int64_t n_end,
                                 double lambda_floor) {
    return extend_core(basis, n_begin, n_end, lambda_floor, nullptr);
}

namespace {
constexpr char kDpssMagic[10] = {'D', 'S', 'L', 'T', 'V', 'D', 'P', 'S', 'S', '\x01'};
}

void save_dpss(const DpssBasis& basis, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    require(f.good(), "save_dpss: cannot open " + path);
    f.write(kDpssMagic, sizeof(kDpssMagic));
    const std::int64_t n = basis.N;
    const std::int32_t k = basis.order();
    f.write(reinterpret_cast<const char*>(&n), sizeof(n));
    f.write(reinterpret_cast<const char*>(&basis.W), sizeof(basis.W));
    f.write(reinterpret_cast<const char*>(&k), sizeof(k));
    f.write(reinterpret_cast<const char*>(basis.lambda.data()),
            static_cast<std::streamsize>(sizeof(double)) * k);
    f.write(reinterpret_cast<const char*>(basis.U.data()),
            static_cast<std::streamsize>(sizeof(double)) * n * k);
    require(f.good(), "save_dpss: write failed for " + path);
}

DpssBasis load_dpss(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), "load_dpss: cannot open " + path);
    char magic[sizeof(kDpssMagic)];
    f.read(magic, sizeof(magic));
    require(f.good() && std::equal(magic, magic + sizeof(magic), kDpssMagic),
            "load_dpss: bad header in " + path);
    std::int64_t n = 0;
    std::int32_t k = 0;
    DpssBasis basis;
    f.read(reinterpret_cast<char*>(&n), sizeof(n));
    f.read(reinterpret_cast<char*>(&basis.W), sizeof(basis.W));
    f.read(reinterpret_cast<char*>(&k), sizeof(k));
    require(f.good() && n >= 2 && k >= 1 && k <= n, "load_dpss: corrupt dimensions in " + path);
    basis.N = static_cast<int>(n);
    basis.lambda.resize(k);
    basis.U.resize(n, k);
    f.read(reinterpret_cast<char*>(basis.lambda.data()),
           static_cast<std::streamsize>(sizeof(double)) * k);
    f.read(reinterpret_cast<char*>(basis.U.data()),
           static_cast<std::streamsize>(sizeof(double)) * n * k);
    require(f.good(), "load_dpss: truncated payload in " + path);
    return basis;
}

std::string dpss_cache_name(const ProlateSpec& spec) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "dpss_N%d_W%.17g_Q%d.bin", spec.N, spec.W, spec.Q_BEM);
    return buf;
}

}  // namespace dsltv
