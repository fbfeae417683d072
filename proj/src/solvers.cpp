#include "flexdecode/solvers.hpp"

#include <algorithm>
#include <cmath>

namespace flexdecode {

namespace {

void check_shapes(const Matrix& X, const Matrix& Y) {
    if (X.rows() < 1) throw ParameterError("regression needs at least one row");
    if (X.rows() != Y.rows()) throw ParameterError("X and Y row counts differ");
    if (!X.allFinite() || !Y.allFinite()) throw ParameterError("regression inputs must be finite");
}

}  // namespace

RidgeGram::RidgeGram(const Matrix& X, const Matrix& Y, bool fit_bias)
    : n_(X.rows()), fit_bias_(fit_bias) {
    check_shapes(X, Y);
    if (fit_bias_) {
        x_mean_ = X.colwise().mean().transpose();
        y_mean_ = Y.colwise().mean().transpose();
        const Matrix Xc = X.rowwise() - x_mean_.transpose();
        const Matrix Yc = Y.rowwise() - y_mean_.transpose();
        gram_.noalias() = Xc.transpose() * Xc;
        cross_.noalias() = Xc.transpose() * Yc;
    } else {
        x_mean_ = Vector::Zero(X.cols());
        y_mean_ = Vector::Zero(Y.cols());
        gram_.noalias() = X.transpose() * X;
        cross_.noalias() = X.transpose() * Y;
    }
}

double RidgeGram::mean_diagonal() const {
    return gram_.rows() == 0 ? 0.0 : gram_.diagonal().mean();
}

Matrix RidgeGram::solve(double lambda) const {
    std::vector<Index> cols(static_cast<std::size_t>(gram_.rows()));
    for (Index i = 0; i < gram_.rows(); ++i) cols[static_cast<std::size_t>(i)] = i;
    return solve(lambda, cols);
}

Matrix RidgeGram::solve(double lambda, const std::vector<Index>& cols) const {
    if (!(lambda > 0.0)) throw ParameterError("Gram ridge solve needs lambda > 0");
    const auto d = static_cast<Index>(cols.size());
    Matrix A(d, d);
    Matrix rhs(d, cross_.cols());
    Vector xm(d);
    for (Index a = 0; a < d; ++a) {
        for (Index b = 0; b < d; ++b) A(a, b) = gram_(cols[a], cols[b]);
        rhs.row(a) = cross_.row(cols[a]);
        xm(a) = x_mean_(cols[a]);
    }
    A.diagonal().array() += lambda;
    const Eigen::LLT<Matrix> llt(A);
    if (llt.info() != Eigen::Success) throw NumericalError("ridge system is not positive definite");
    const Matrix W = llt.solve(rhs);
    if (!fit_bias_) return W;
    Matrix H(d + 1, W.cols());
    H.topRows(d) = W;
    H.row(d) = (y_mean_ - W.transpose() * xm).transpose();
    return H;
}

RidgeSolution ridge_fit(const Matrix& X, const Matrix& Y, double lambda, bool fit_bias) {
    check_shapes(X, Y);
    if (lambda < 0.0 || !std::isfinite(lambda)) throw ParameterError("ridge lambda must be >= 0");

    RidgeSolution sol;
    sol.lambda = lambda;
    sol.has_bias = fit_bias;
    const Index d = X.cols();

    if (lambda > 0.0) {
        sol.H = RidgeGram(X, Y, fit_bias).solve(lambda);
    } else {
        Matrix Xc = X;
        Matrix Yc = Y;
        Vector xm = Vector::Zero(d), ym = Vector::Zero(Y.cols());
        if (fit_bias) {
            xm = X.colwise().mean().transpose();
            ym = Y.colwise().mean().transpose();
            Xc = X.rowwise() - xm.transpose();
            Yc = Y.rowwise() - ym.transpose();
        }
        Eigen::ColPivHouseholderQR<Matrix> qr(Xc);
        // Pivots below 1e-10 of the largest count as zero; Eigen's default
        // (a few ulps) lets exactly collinear columns through after centering.
        qr.setThreshold(1e-10);
        if (qr.rank() < d) {
            throw RankDeficiencyError("design matrix is rank deficient (rank " + std::to_string(qr.rank()) +
                                      " < " + std::to_string(d) + "); use lambda > 0");
        }
        const Matrix W = qr.solve(Yc);
        if (fit_bias) {
            sol.H.resize(d + 1, Y.cols());
            sol.H.topRows(d) = W;
            sol.H.row(d) = (ym - W.transpose() * xm).transpose();
        } else {
            sol.H = W;
        }
    }

    Matrix residual = Y - X * sol.H.topRows(d);
    if (fit_bias) residual.rowwise() -= sol.H.row(d);
    sol.train_residual = residual.norm();
    return sol;
}

Vector group_soft_threshold(const Vector& u, double theta) {
    if (theta < 0.0) throw ParameterError("threshold must be >= 0");
    const double norm = u.norm();
    if (norm <= theta) return Vector::Zero(u.size());
    return (1.0 - theta / norm) * u;
}

double ssa_objective(const Matrix& X, const Matrix& Y, const Matrix& C, double lambda_s) {
    if (X.rows() != Y.rows() || X.cols() != C.rows() || Y.cols() != C.cols()) {
        throw ParameterError("shape mismatch in SSA objective");
    }
    return (Y - X * C).squaredNorm() + lambda_s * C.rowwise().norm().sum();
}

namespace {

// Shared by ssa_lambda_max and SsaGram so both round identically; the
// early exit at lambda_s >= lambda_max relies on that.
double twice_max_row_norm(const Matrix& B, const std::vector<Index>& rows) {
    double best = 0.0;
    for (Index r : rows) best = std::max(best, B.row(r).norm());
    return 2.0 * best;
}

std::vector<Index> all_indices(Index n) {
    std::vector<Index> v(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = i;
    return v;
}

}  // namespace

double ssa_lambda_max(const Matrix& X, const Matrix& Y) {
    check_shapes(X, Y);
    Matrix B;
    B.noalias() = X.transpose() * Y;
    return twice_max_row_norm(B, all_indices(B.rows()));
}

SsaSolution ssa_fit(const Matrix& X, const Matrix& Y, double lambda_s, const SsaOptions& opts) {
    return SsaGram(X, Y).fit(lambda_s, all_indices(X.cols()), opts);
}

SsaGram::SsaGram(const Matrix& X, const Matrix& Y) {
    check_shapes(X, Y);
    gram_.noalias() = X.transpose() * X;
    cross_.noalias() = X.transpose() * Y;
    y_sq_ = Y.squaredNorm();
}

double SsaGram::lambda_max(const std::vector<Index>& cols) const {
    return twice_max_row_norm(cross_, cols);
}

SsaSolution SsaGram::fit(double lambda_s, const std::vector<Index>& cols, const SsaOptions& opts,
                         const Matrix* warm_start) const {
    if (lambda_s < 0.0 || !std::isfinite(lambda_s)) throw ParameterError("lambda_s must be >= 0");
    if (!(opts.tol > 0.0) || opts.max_iter < 1) throw ParameterError("invalid SSA options");

    const auto d = static_cast<Index>(cols.size());
    const Index m = cross_.cols();
    SsaSolution sol;
    sol.lambda_s = lambda_s;
    sol.C = Matrix::Zero(d, m);

    std::vector<Index> kept;  // positions in cols
    for (Index i = 0; i < d; ++i) {
        const Index c = cols[static_cast<std::size_t>(i)];
        if (c < 0 || c >= gram_.rows()) throw ParameterError("SSA column index out of range");
        if (gram_(c, c) > 0.0) {
            kept.push_back(i);
        } else {
            sol.warnings.push_back("feature column " + std::to_string(c) + " is all zero; its row is fixed to 0");
        }
    }
    const auto q = static_cast<Index>(kept.size());

    // Scaled problem: unit-norm columns, Cs = D C, per-row penalty lambda / d_i.
    Vector scale(q);
    for (Index a = 0; a < q; ++a) {
        const Index c = cols[static_cast<std::size_t>(kept[a])];
        scale(a) = std::sqrt(gram_(c, c));
    }
    Matrix G(q, q);
    Matrix B(q, m);
    Vector half_penalty(q);
    for (Index a = 0; a < q; ++a) {
        const Index ca = cols[static_cast<std::size_t>(kept[a])];
        for (Index b = 0; b < q; ++b) {
            G(a, b) = gram_(ca, cols[static_cast<std::size_t>(kept[b])]) / (scale(a) * scale(b));
        }
        B.row(a) = cross_.row(ca) / scale(a);
        half_penalty(a) = (lambda_s / 2.0) / scale(a);
    }

    Matrix Cs = Matrix::Zero(q, m);
    // C = 0 satisfies the optimality conditions; deciding it here keeps the
    // boundary case lambda_s == lambda_max exact instead of leaving rounding
    // residue from the scaled row updates.
    if (lambda_s >= lambda_max(cols)) {
        sol.objective_trace.push_back(y_sq_);
        sol.converged = true;
        return sol;
    }
    if (warm_start) {
        if (warm_start->rows() != d || warm_start->cols() != m) throw ParameterError("warm start has the wrong shape");
        for (Index a = 0; a < q; ++a) Cs.row(a) = warm_start->row(kept[a]) * scale(a);
    }
    Matrix GC = G * Cs;
    auto objective = [&]() {
        double f = y_sq_;
        for (Index a = 0; a < q; ++a) {
            const auto row = Cs.row(a);
            f += row.dot(GC.row(a) - 2.0 * B.row(a)) + 2.0 * half_penalty(a) * row.norm();
        }
        return std::max(f, 0.0);
    };
    sol.objective_trace.push_back(objective());

    for (int it = 0; it < opts.max_iter; ++it) {
        double max_change = 0.0;
        double decrease = 0.0;
        for (Index a = 0; a < q; ++a) {
            // X_a^T (Y - X C + X_a C_a) in scaled coordinates.
            const Vector u = (B.row(a) - GC.row(a) + G(a, a) * Cs.row(a)).transpose();
            const Vector updated = group_soft_threshold(u, half_penalty(a)) / G(a, a);
            const Vector delta = updated - Cs.row(a).transpose();
            if (delta.squaredNorm() == 0.0) continue;
            // Objective restricted to this row: G_aa |c|^2 - 2 c.u + 2 h |c|.
            // `updated` is its exact minimizer, so the decrease is >= 0 up to
            // rounding; accumulating it keeps the trace monotone where
            // recomputing the full objective would cancel catastrophically.
            auto row_objective = [&](const Vector& c) {
                return G(a, a) * c.squaredNorm() - 2.0 * c.dot(u) + 2.0 * half_penalty(a) * c.norm();
            };
            decrease += std::max(0.0, row_objective(Cs.row(a).transpose()) - row_objective(updated));
            GC.noalias() += G.col(a) * delta.transpose();
            Cs.row(a) = updated.transpose();
            const double change = delta.norm() / scale(a) / (1.0 + updated.norm() / scale(a));
            max_change = std::max(max_change, change);
        }
        sol.objective_trace.push_back(std::max(sol.objective_trace.back() - decrease, 0.0));
        sol.iterations = it + 1;
        if (max_change < opts.tol) {
            sol.converged = true;
            break;
        }
    }
    if (!sol.converged) {
        sol.warnings.push_back("block-coordinate descent did not converge in " +
                               std::to_string(opts.max_iter) + " sweeps");
    }

    for (Index a = 0; a < q; ++a) sol.C.row(kept[a]) = Cs.row(a) / scale(a);
    for (Index i = 0; i < d; ++i) {
        if (sol.C.row(i).squaredNorm() > 0.0) sol.active_rows.push_back(i);
    }
    return sol;
}

}  // namespace flexdecode
