#pragma once

#include "flexdecode/core.hpp"

#include <string>
#include <vector>

namespace flexdecode {

struct RidgeSolution {
    Matrix H;  // (d + 1) x m with a bias row last, or d x m without bias
    double lambda = 0.0;
    double train_residual = 0.0;  // Frobenius norm of Y - [X 1] H
    bool has_bias = true;
};

/// Multi-output ridge regression min ||Y - [X 1] H||_F^2 + lambda ||W||_F^2,
/// where W excludes the bias row. With fit_bias = false there is no bias row.
/// lambda = 0 requires X (centered, when fitting a bias) to have full column
/// rank; otherwise RankDeficiencyError.
RidgeSolution ridge_fit(const Matrix& X, const Matrix& Y, double lambda, bool fit_bias = true);

/// Sufficient statistics for repeated ridge fits on the same rows, e.g. when
/// sweeping lambda or restricting to column subsets. Solutions match
/// ridge_fit up to rounding.
class RidgeGram {
public:
    RidgeGram(const Matrix& X, const Matrix& Y, bool fit_bias = true);

    Index n_rows() const { return n_; }
    Index n_features() const { return gram_.rows(); }
    /// Mean diagonal of the (centered) Gram matrix; a natural lambda scale.
    double mean_diagonal() const;

    /// Fit on all columns. lambda must be > 0.
    Matrix solve(double lambda) const;
    /// Fit on the listed columns only; rows of the result follow `cols`.
    Matrix solve(double lambda, const std::vector<Index>& cols) const;

private:
    Index n_;
    bool fit_bias_;
    Matrix gram_;
    Matrix cross_;
    Vector x_mean_;
    Vector y_mean_;
};

/// Proximal operator of theta * ||.||_2: (1 - theta / ||u||)_+ u.
Vector group_soft_threshold(const Vector& u, double theta);

struct SsaOptions {
    double tol = 1e-6;
    int max_iter = 1000;
};

struct SsaSolution {
    Matrix C;  // d x m
    double lambda_s = 0.0;
    std::vector<double> objective_trace;  // initial value, then one entry per sweep
    std::vector<Index> active_rows;
    bool converged = false;
    int iterations = 0;
    std::vector<std::string> warnings;
};

/// ||Y - X C||_F^2 + lambda_s * sum_i ||C_i,.||_2
double ssa_objective(const Matrix& X, const Matrix& Y, const Matrix& C, double lambda_s);

/// Smallest lambda_s for which C = 0 is optimal: 2 max_i ||X_{.,i}^T Y||_2.
double ssa_lambda_max(const Matrix& X, const Matrix& Y);

/// Row-sparse multi-task regression by cyclic block-coordinate descent.
/// Each row update is the exact minimizer over that row with the others
/// fixed. Columns of X are normalized internally (with the penalty reweighted
/// so the problem is unchanged); all-zero columns are skipped and come back
/// as zero rows. Never throws on non-convergence; check `converged`.
SsaSolution ssa_fit(const Matrix& X, const Matrix& Y, double lambda_s, const SsaOptions& opts = {});

/// X^T X, X^T Y and ||Y||^2 for repeated SSA fits on column subsets.
/// fit(lambda, cols) equals ssa_fit on X restricted to `cols` up to rounding;
/// rows of the result follow `cols`.
class SsaGram {
public:
    SsaGram(const Matrix& X, const Matrix& Y);

    Index n_features() const { return gram_.rows(); }
    double lambda_max(const std::vector<Index>& cols) const;
    /// `warm_start` (rows following `cols`) seeds the descent; the optimum is
    /// the same, only the number of sweeps changes.
    SsaSolution fit(double lambda_s, const std::vector<Index>& cols, const SsaOptions& opts = {},
                    const Matrix* warm_start = nullptr) const;

private:
    Matrix gram_;
    Matrix cross_;
    double y_sq_ = 0.0;
};

}  // namespace flexdecode
