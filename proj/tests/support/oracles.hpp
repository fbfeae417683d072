#pragma once

// Reference computations for the tests. Each one takes the most direct route
// to the answer (dense solves on the textbook formula) and shares no code
// with the library.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Seeded standard-normal matrix.
inline Matrix randn(Index rows, Index cols, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j) {
        for (Index i = 0; i < rows; ++i) m(i, j) = nd(gen);
    }
    return m;
}

/// Penalized normal equations on [X 1] with the bias left unpenalized:
/// ([X 1]^T [X 1] + lambda diag(1..1, 0)) H = [X 1]^T Y, solved by full-pivot LU.
inline Matrix ridge_normal_equations(const Matrix& X, const Matrix& Y, double lambda, bool bias) {
    const Index n = X.rows();
    const Index d = X.cols();
    Matrix A(n, d + (bias ? 1 : 0));
    A.leftCols(d) = X;
    if (bias) A.col(d).setOnes();
    Matrix P = Matrix::Zero(A.cols(), A.cols());
    for (Index i = 0; i < d; ++i) P(i, i) = lambda;
    return (A.transpose() * A + P).fullPivLu().solve(A.transpose() * Y);
}

/// Unregularized least squares through the SVD.
inline Matrix least_squares(const Matrix& X, const Matrix& Y) {
    return X.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(Y);
}

/// x_t = sum_i a_i x_{t-i} + noise * e_t, started from `init` (most recent last).
inline Vector ar_series(const std::vector<double>& a, Index n, double noise, std::uint64_t seed,
                        const std::vector<double>& init = {}) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    const auto p = static_cast<Index>(a.size());
    const Index burn = init.empty() ? 500 : 0;
    std::vector<double> x(init.begin(), init.end());
    while (static_cast<Index>(x.size()) < p) x.insert(x.begin(), 0.0);
    const Index start = static_cast<Index>(x.size());
    for (Index t = 0; t < burn + n; ++t) {
        double v = noise * nd(gen);
        for (Index i = 0; i < p; ++i) v += a[static_cast<std::size_t>(i)] * x[x.size() - 1 - static_cast<std::size_t>(i)];
        x.push_back(v);
    }
    Vector out(n);
    for (Index t = 0; t < n; ++t) out(t) = x[static_cast<std::size_t>(start + burn + t)];
    return out;
}

/// Local polynomial fit evaluated at the window center: solves the
/// Vandermonde least-squares problem on absolute sample positions.
inline double savgol_center(const Vector& x, Index center, Index half, int order) {
    const Index w = 2 * half + 1;
    Matrix V(w, order + 1);
    Vector y(w);
    for (Index i = 0; i < w; ++i) {
        const double u = static_cast<double>(i - half);
        double p = 1.0;
        for (int j = 0; j <= order; ++j) {
            V(i, j) = p;
            p *= u;
        }
        y(i) = x(center - half + i);
    }
    const Vector coef = V.colPivHouseholderQr().solve(y);
    return coef(0);
}

/// Natural cubic spline through (xs, ys) evaluated at t, from the dense
/// second-derivative system.
inline double natural_spline(const std::vector<double>& xs, const std::vector<double>& ys, double t) {
    const auto n = static_cast<Index>(xs.size());
    Matrix A = Matrix::Zero(n, n);
    Vector r = Vector::Zero(n);
    A(0, 0) = 1.0;
    A(n - 1, n - 1) = 1.0;
    for (Index i = 1; i + 1 < n; ++i) {
        const double h0 = xs[i] - xs[i - 1];
        const double h1 = xs[i + 1] - xs[i];
        A(i, i - 1) = h0 / 6.0;
        A(i, i) = (h0 + h1) / 3.0;
        A(i, i + 1) = h1 / 6.0;
        r(i) = (ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0;
    }
    const Vector m = A.fullPivLu().solve(r);
    Index k = 0;
    while (k + 2 < n && t > xs[k + 1]) ++k;
    const double h = xs[k + 1] - xs[k];
    const double a = (xs[k + 1] - t) / h;
    const double b = (t - xs[k]) / h;
    return a * ys[k] + b * ys[k + 1] + ((a * a * a - a) * m(k) + (b * b * b - b) * m(k + 1)) * h * h / 6.0;
}

/// Two-pass Pearson correlation in long double.
inline double pearson(const Vector& a, const Vector& b) {
    long double ma = 0, mb = 0;
    for (Index i = 0; i < a.size(); ++i) {
        ma += a(i);
        mb += b(i);
    }
    ma /= a.size();
    mb /= b.size();
    long double sab = 0, saa = 0, sbb = 0;
    for (Index i = 0; i < a.size(); ++i) {
        const long double da = a(i) - ma;
        const long double db = b(i) - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    return static_cast<double>(sab / std::sqrt(saa * sbb));
}

}  // namespace oracle
