#include "dsltv/estimate.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace dsltv {

RVec beta_prior_variances(const DpssBasis& basis, double sigma_alpha_sq, int N_D,
                          PriorKind kind) {
    require(basis.order() > 0, "beta_prior_variances: empty basis");
    require(sigma_alpha_sq > 0.0 && N_D > 0, "beta_prior_variances: nonpositive prior power");
    const double scale = static_cast<double>(basis.N) * N_D * sigma_alpha_sq;
    RVec v(basis.order());
    for (int b = 0; b < basis.order(); ++b) v(b) = scale * std::max(basis.lambda(b), 0.0);
    if (kind == PriorKind::Isotropic) v.setConstant(v.mean());
    return v;
}

namespace {

RVec tile_variances(const RVec& per_order, Eigen::Index cols) {
    const Eigen::Index order = per_order.size();
    require(order > 0 && cols % order == 0, "lmmse_beta: column count not a multiple of order");
    RVec d(cols);
    for (Eigen::Index j = 0; j < cols; ++j) d(j) = per_order(j % order);
    return d;
}

CVec min_norm_solve(const CMat& A, const CVec& y, LmmseDiagnostics* diag) {
    Eigen::CompleteOrthogonalDecomposition<CMat> cod(A);
    if (diag != nullptr) diag->min_norm_fallback = true;
    return cod.solve(y);
}

}  // namespace

CVec lmmse_beta(const CMat& A, const CVec& y, const RVec& per_order_var, double sigma_w_sq,
                LmmseForm form, LmmseDiagnostics* diag) {
    require(A.rows() == y.size(), "lmmse_beta: measurement size mismatch");
    require(sigma_w_sq >= 0.0, "lmmse_beta: negative noise variance");
    const RVec d = tile_variances(per_order_var, A.cols());
    require((d.array() >= 0.0).all(), "lmmse_beta: negative prior variance");
    if (diag != nullptr) *diag = LmmseDiagnostics{};

    CVec beta;
    if (sigma_w_sq == 0.0) {
        // Noiseless limit: the LMMSE solution degenerates to the prior-weighted
        // minimum-norm interpolator; a plain minimum-norm least squares solve
        // on the scaled columns reproduces it.
        RVec sqrt_d = d.array().sqrt();
        CMat As = A * sqrt_d.asDiagonal();
        CVec z = min_norm_solve(As, y, diag);
        beta = sqrt_d.asDiagonal() * z;
    } else {
        LmmseForm chosen = form;
        const bool has_zero_var = (d.array() <= 0.0).any();
        if (chosen == LmmseForm::Auto)
            chosen = (A.rows() <= A.cols() || has_zero_var) ? LmmseForm::Covariance
                                                            : LmmseForm::Gram;
        if (chosen == LmmseForm::Gram) {
            require(!has_zero_var, "lmmse_beta: Gram form needs strictly positive priors");
            CMat G = A.adjoint() * A;
            G += (sigma_w_sq * d.array().inverse()).matrix().asDiagonal();
            beta = G.ldlt().solve(A.adjoint() * y);
        } else {
            CMat B = A * d.asDiagonal();  // A D
            CMat S = B * A.adjoint();
            S.diagonal().array() += sigma_w_sq;
            beta = B.adjoint() * S.ldlt().solve(y);  // D A^H S^{-1} y
        }
    }
    if (diag != nullptr) diag->residual_norm = (y - A * beta).norm();
    return beta;
}

CMat reconstruct(const BemCoefficients& beta, const DpssBasis& basis, const GridDims& dims,
                 const std::vector<std::int64_t>* times) {
    beta.validate();
    require(basis.N == dims.N && basis.order() == beta.order,
            "reconstruct: basis does not match coefficients");
    if (times != nullptr)
        require(static_cast<int>(times->size()) == dims.N,
                "reconstruct: time map length must equal N");
    CMat h = CMat::Zero(dims.L, dims.N);
    for (std::size_t i = 0; i < beta.support.size(); ++i) {
        const auto [l, q] = beta.support[i];
        require(l >= 0 && l < dims.L && q >= -dims.Q && q <= dims.Q,
                "reconstruct: support point out of range");
        CVec w = real_complex_product(basis.U, beta.block(i));
        for (int n = 0; n < dims.N; ++n) {
            const std::int64_t t = (times != nullptr) ? (*times)[n] : n;
            h(l, n) += unit_phasor(static_cast<double>(q) * static_cast<double>(t) / dims.N) *
                       w(n);
        }
    }
    return h;
}

EstimationResult estimate_offgrid(const MeasurementMatrix& M, const CVec& y,
                                  const DpssBasis& basis, double sigma_alpha_sq, int N_D,
                                  double sigma_w_sq, PriorKind prior,
                                  const std::vector<std::int64_t>* times) {
    require(!M.offgrid_cols.empty(), "estimate_offgrid: measurement has no basis columns");
    const int order = basis.order();
    require(M.cols() % order == 0, "estimate_offgrid: column count not a multiple of order");

    EstimationResult out;
    RVec per_order = beta_prior_variances(basis, sigma_alpha_sq, N_D, prior);
    out.beta_hat.order = order;
    out.beta_hat.beta = lmmse_beta(M.A, y, per_order, sigma_w_sq, LmmseForm::Auto,
                                   &out.diagnostics);
    out.beta_hat.support.reserve(M.offgrid_cols.size() / order);
    for (std::size_t j = 0; j < M.offgrid_cols.size(); j += order) {
        const auto& [l, q, b] = M.offgrid_cols[j];
        require(b == 0, "estimate_offgrid: columns not grouped by support point");
        out.beta_hat.support.emplace_back(l, q);
    }
    out.h_hat = reconstruct(out.beta_hat, basis, M.dims, times);
    return out;
}

PredictionResult predict(const BemCoefficients& beta, const DpssBasis& basis,
                         const GridDims& dims, int N_ext, double lambda_floor,
                         const ExecPolicy& policy) {
    require(N_ext >= 0, "predict: negative horizon");
    if (N_ext == 0) {
        PredictionResult out;
        out.h_ext = CMat::Zero(dims.L, 0);
        return out;
    }
    ExtendedBasis ext = extend_dpss(basis, dims.N, static_cast<std::int64_t>(dims.N) + N_ext,
                                    lambda_floor, policy);
    return predict_with(beta, ext, basis, dims);
}

PredictionResult predict_with(const BemCoefficients& beta, const ExtendedBasis& ext,
                              const DpssBasis& basis, const GridDims& dims) {
    beta.validate();
    require(basis.N == dims.N && basis.order() == beta.order,
            "predict: basis does not match coefficients");
    require(ext.n_begin == dims.N && ext.U_ext.cols() == basis.order(),
            "predict: extension does not continue this basis");

    PredictionResult out;
    const int N_ext = static_cast<int>(ext.n_end - ext.n_begin);
    out.horizon = N_ext;
    out.excluded_basis = ext.excluded;
    out.h_ext = CMat::Zero(dims.L, N_ext);
    for (std::size_t i = 0; i < beta.support.size(); ++i) {
        const auto [l, q] = beta.support[i];
        CVec w = real_complex_product(ext.U_ext, beta.block(i));
        for (int j = 0; j < N_ext; ++j) {
            const double t = static_cast<double>(dims.N) + j;
            out.h_ext(l, j) += unit_phasor(static_cast<double>(q) * t / dims.N) * w(j);
        }
    }
    return out;
}

double score_prediction(PredictionResult& pred, const TapTrajectories& truth) {
    truth.validate();
    require(truth.dims.L == pred.h_ext.rows(), "score_prediction: tap count mismatch");
    const int N = truth.dims.N;
    std::unordered_map<std::int64_t, int> col_of;
    col_of.reserve(truth.times.size());
    for (std::size_t c = 0; c < truth.times.size(); ++c)
        col_of.emplace(truth.times[c], static_cast<int>(c));

    pred.per_horizon_mse.resize(pred.horizon);
    double total = 0.0;
    for (int j = 0; j < pred.horizon; ++j) {
        auto it = col_of.find(static_cast<std::int64_t>(N) + j);
        require(it != col_of.end(), "score_prediction: truth does not cover the horizon");
        const double e = (pred.h_ext.col(j) - truth.h.col(it->second)).squaredNorm();
        pred.per_horizon_mse(j) = e;
        total += e;
    }
    return pred.horizon > 0 ? total / pred.horizon : 0.0;
}

RMat prolate_rows(int N, double W, std::int64_t n_begin, std::int64_t n_end) {
    require(N > 0 && n_end >= n_begin, "prolate_rows: bad range");
    RMat rows(n_end - n_begin, N);
    for (std::int64_t n = n_begin; n < n_end; ++n)
        for (int k = 0; k < N; ++k) rows(n - n_begin, k) = prolate_entry(n, k, N, W);
    return rows;
}

namespace {

/** Demodulated reduced-rank filter output U_r diag(1/lambda_r) U_r^T E^H h;
 *  shared by the scalar and batch oracle entry points. */
CVec reduced_rank_filter(const CVec& h_lq, int q, int rank, const DpssBasis& basis,
                         double lambda_floor) {
    require(h_lq.size() == basis.N, "reduced_rank_mmse: trajectory length must equal N");
    require(rank > 0, "reduced_rank_mmse: rank must be positive");
    const int N = basis.N;
    CVec g(N);
    for (int n = 0; n < N; ++n)
        g(n) = unit_phasor(-static_cast<double>(q) * n / N) * h_lq(n);
    const int r = std::min(rank, basis.order());
    CVec scaled = CVec::Zero(N);
    for (int b = 0; b < r; ++b) {
        if (basis.lambda(b) < lambda_floor) break;  // descending ordering
        const Complex c = basis.U.col(b).cast<Complex>().dot(g) / basis.lambda(b);
        scaled += c * basis.U.col(b).cast<Complex>();
    }
    return scaled;
}

}  // namespace

Complex reduced_rank_mmse(const CVec& h_lq, int q, int rank, std::int64_t n_target,
                          const DpssBasis& basis, double lambda_floor) {
    CVec v = reduced_rank_filter(h_lq, q, rank, basis, lambda_floor);
    Complex acc = 0.0;
    for (int k = 0; k < basis.N; ++k) acc += prolate_entry(n_target, k, basis.N, basis.W) * v(k);
    return unit_phasor(static_cast<double>(q) * static_cast<double>(n_target) / basis.N) * acc;
}

CVec reduced_rank_mmse_batch(const CVec& h_lq, int q, int rank, std::int64_t n_begin,
                             std::int64_t n_end, const DpssBasis& basis, double lambda_floor,
                             const RMat* cross_rows) {
    CVec v = reduced_rank_filter(h_lq, q, rank, basis, lambda_floor);
    RMat local;
    if (cross_rows == nullptr) {
        local = prolate_rows(basis.N, basis.W, n_begin, n_end);
        cross_rows = &local;
    }
    require(cross_rows->rows() == n_end - n_begin && cross_rows->cols() == basis.N,
            "reduced_rank_mmse_batch: cross-correlation block shape mismatch");
    CVec out = real_complex_product(*cross_rows, v);
    for (std::int64_t n = n_begin; n < n_end; ++n)
        out(n - n_begin) *= unit_phasor(static_cast<double>(q) * static_cast<double>(n) /
                                        basis.N);
    return out;
}

// ---- multi-band single-BEM baseline ----

namespace {

/** Multi-band kernel value at lag d: c(d) * sum_{q in bins} e^{i2πqd/N}. */
Complex multiband_entry(std::int64_t d, int N, double W, const std::vector<int>& bins) {
    Complex phase_sum = 0.0;
    for (int q : bins) phase_sum += unit_phasor(static_cast<double>(q) * d / N);
    return phase_sum * prolate_entry(d, 0, N, W);
}

}  // namespace

CMat multiband_prolate(int N, double W, const std::vector<int>& bins) {
    require(N > 0 && N <= 1024, "multiband_prolate: dense kernel guarded to N <= 1024");
    require(!bins.empty(), "multiband_prolate: empty bin set");
    std::vector<Complex> by_lag(2 * N - 1);
    for (std::int64_t d = -(N - 1); d <= N - 1; ++d)
        by_lag[d + N - 1] = multiband_entry(d, N, W, bins);
    CMat C(N, N);
    for (int k = 0; k < N; ++k)
        for (int n = 0; n < N; ++n) C(k, n) = by_lag[k - n + N - 1];
    return C;
}

SingleBemBasis compute_singlebem(int N, double W, const std::vector<int>& bins, int order) {
    require(order > 0 && order <= N, "compute_singlebem: bad order");
    CMat C = multiband_prolate(N, W, bins);
    Eigen::SelfAdjointEigenSolver<CMat> es(C);
    require(es.info() == Eigen::Success, "compute_singlebem: eigensolver failed");

    SingleBemBasis out;
    out.N = N;
    out.W = W;
    out.bins = bins;
    out.V.resize(N, order);
    out.lambda.resize(order);
    for (int b = 0; b < order; ++b) {
        const int src = N - 1 - b;  // solver returns ascending eigenvalues
        out.lambda(b) = std::max(es.eigenvalues()(src), 0.0);
        CVec v = es.eigenvectors().col(src);
        Eigen::Index imax = 0;
        v.cwiseAbs().maxCoeff(&imax);
        const double mag = std::abs(v(imax));
        if (mag > 0.0) v *= std::conj(v(imax)) / mag;  // largest entry real positive
        out.V.col(b) = v;
    }
    return out;
}

SingleBemResult singlebem_baseline(const CVec& h_l, const SingleBemBasis& basis, int N_ext,
                                   double lambda_floor) {
    require(h_l.size() == basis.N, "singlebem_baseline: trajectory length must equal N");
    require(N_ext >= 0, "singlebem_baseline: negative horizon");
    const int N = basis.N;
    const int order = static_cast<int>(basis.V.cols());

    SingleBemResult out;
    out.coeffs = basis.V.adjoint() * h_l;
    out.h_hat = basis.V * out.coeffs;
    out.h_ext = CVec::Zero(N_ext);
    if (N_ext == 0) return out;

    // Kernel continuation: v_b extends as (1/lambda_b) sum_k C̆(n,k) v_b(k),
    // so h_ext(n) = row_n · sum_b (coeffs_b / lambda_b) v_b.
    CVec w = CVec::Zero(N);
    for (int b = 0; b < order; ++b) {
        if (basis.lambda(b) < lambda_floor) continue;
        w += (out.coeffs(b) / basis.lambda(b)) * basis.V.col(b);
    }
    for (int j = 0; j < N_ext; ++j) {
        const std::int64_t n = static_cast<std::int64_t>(N) + j;
        Complex acc = 0.0;
        for (int k = 0; k < N; ++k) acc += multiband_entry(n - k, N, basis.W, basis.bins) * w(k);
        out.h_ext(j) = acc;
    }
    return out;
}

int SingleBemCache::register_support(const SupportMask& support) {
    const GridDims& dims = support.dims;
    require(dims.doppler_bins() <= 64, "SingleBemCache: bin pattern exceeds 64 bits");
    int fresh = 0;
    for (int l : support.active_delays()) {
        std::uint64_t bits = 0;
        for (int b = 0; b < dims.doppler_bins(); ++b)
            if (support.mask(l, b) != 0) bits |= (std::uint64_t{1} << b);
        auto [it, inserted] = keys_.try_emplace({l, bits}, 0);
        it->second += 1;
        if (inserted) ++fresh;
    }
    return fresh;
}

}  // namespace dsltv
