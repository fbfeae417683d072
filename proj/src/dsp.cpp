#include "flexdecode/dsp.hpp"

#include <algorithm>
#include <cmath>

namespace flexdecode {

namespace {

Matrix decimate_rows(const Matrix& m, int factor) {
    const Index n_out = (m.rows() + factor - 1) / factor;
    Matrix out(n_out, m.cols());
    for (Index i = 0; i < n_out; ++i) out.row(i) = m.row(i * factor);
    return out;
}

void check_factor(int factor, Index n) {
    if (factor <= 0) throw ParameterError("downsample factor must be positive");
    if (n < factor) throw ParameterError("signal shorter than the downsample factor");
}

// Weights that evaluate, at offset 0, the least-squares polynomial fit of
// degree `order` to samples at integer offsets [lo, hi].
Vector savgol_weights(Index lo, Index hi, int order) {
    const Index len = hi - lo + 1;
    const int degree = static_cast<int>(std::min<Index>(order, len - 1));
    const double scale = static_cast<double>(std::max<Index>({-lo, hi, Index{1}}));
    Matrix V(len, degree + 1);
    for (Index r = 0; r < len; ++r) {
        const double x = static_cast<double>(lo + r) / scale;
        double p = 1.0;
        for (int c = 0; c <= degree; ++c) {
            V(r, c) = p;
            p *= x;
        }
    }
    const Eigen::CompleteOrthogonalDecomposition<Matrix> cod(V);
    return cod.pseudoInverse().row(0).transpose();
}

}  // namespace

MultichannelSignal downsample(const MultichannelSignal& sig, int factor) {
    check_factor(factor, sig.n_samples());
    return {decimate_rows(sig.samples(), factor), sig.rate_hz() / factor, sig.channel_ids()};
}

FlexionRecord downsample(const FlexionRecord& flex, int factor) {
    check_factor(factor, flex.n_samples());
    return {decimate_rows(flex.flexion(), factor), flex.rate_hz() / factor};
}

Index savgol_window_length(double width_s, double rate_hz) {
    if (!(width_s > 0.0) || !(rate_hz > 0.0)) {
        throw ParameterError("Savitzky-Golay width and rate must be positive");
    }
    const double span = width_s * rate_hz;
    return 2 * static_cast<Index>(std::floor(span / 2.0)) + 1;
}

Vector savgol_smooth(const Vector& x, int order, Index window) {
    if (order < 0) throw ParameterError("Savitzky-Golay order must be >= 0");
    if (window % 2 == 0 || window < 1) throw ParameterError("Savitzky-Golay window must be odd");
    if (window <= order) throw ParameterError("Savitzky-Golay window must exceed the order");
    const Index n = x.size();
    if (window > n) throw ParameterError("Savitzky-Golay window longer than the signal");

    const Index h = window / 2;
    Vector y(n);
    const Vector interior = savgol_weights(-h, h, order);
    for (Index i = h; i < n - h; ++i) {
        y(i) = interior.dot(x.segment(i - h, window));
    }
    for (Index i = 0; i < std::min(h, n); ++i) {
        const Index lo = -std::min(h, i);
        const Index hi = std::min(h, n - 1 - i);
        y(i) = savgol_weights(lo, hi, order).dot(x.segment(i + lo, hi - lo + 1));
    }
    for (Index i = std::max(n - h, h); i < n; ++i) {
        const Index lo = -std::min(h, i);
        const Index hi = std::min(h, n - 1 - i);
        y(i) = savgol_weights(lo, hi, order).dot(x.segment(i + lo, hi - lo + 1));
    }
    return y;
}

MultichannelSignal savgol_filter(const MultichannelSignal& sig, int order, double width_s) {
    const Index window = savgol_window_length(width_s, sig.rate_hz());
    Matrix out(sig.n_samples(), sig.n_channels());
    for (Index c = 0; c < sig.n_channels(); ++c) {
        out.col(c) = savgol_smooth(sig.samples().col(c), order, window);
    }
    return {std::move(out), sig.rate_hz(), sig.channel_ids()};
}

Vector fit_ar(const Vector& segment, int order) {
    if (order < 1) throw ParameterError("AR order must be >= 1");
    const Index n = segment.size();
    const Index rows = n - order;
    if (rows < order) {
        throw DegenerateSegmentError("segment too short for AR order " + std::to_string(order));
    }
    if (segment.maxCoeff() == segment.minCoeff()) {
        throw DegenerateSegmentError("constant segment has no AR structure");
    }
    Matrix X(rows, order);
    for (int i = 0; i < order; ++i) X.col(i) = segment.segment(order - 1 - i, rows);
    const Vector y = segment.tail(rows);

    const Eigen::ColPivHouseholderQR<Matrix> qr(X);
    if (qr.rank() < order) throw DegenerateSegmentError("singular AR normal matrix");
    return qr.solve(y);
}

ArWindowTrack ar_window_track(const Vector& channel, Index window_len, int order) {
    if (window_len < 1) throw ParameterError("AR window length must be positive");
    const Index n_windows = channel.size() / window_len;
    if (n_windows < 1) throw ParameterError("signal shorter than one AR window");

    ArWindowTrack track;
    track.window_len = window_len;
    track.coeffs.resize(n_windows, order);
    track.knot_indices.reserve(static_cast<std::size_t>(n_windows));
    for (Index w = 0; w < n_windows; ++w) {
        const Index start = w * window_len;
        try {
            track.coeffs.row(w) = fit_ar(channel.segment(start, window_len), order).transpose();
        } catch (const DegenerateSegmentError& e) {
            throw DegenerateSegmentError("AR window " + std::to_string(w) + ": " + e.what());
        }
        track.knot_indices.push_back(start + (window_len - 1) / 2);
    }
    return track;
}

Matrix spline_interpolate(const ArWindowTrack& track, Index n_samples) {
    const auto n_knots = static_cast<Index>(track.knot_indices.size());
    if (n_knots < 2) throw ParameterError("spline interpolation needs at least two knots");
    if (n_samples < track.knot_indices.back() + 1) {
        throw ParameterError("output shorter than the last knot");
    }
    const Index p = track.coeffs.cols();

    Vector x(n_knots);
    for (Index i = 0; i < n_knots; ++i) x(i) = static_cast<double>(track.knot_indices[i]);
    Vector h = x.tail(n_knots - 1) - x.head(n_knots - 1);

    Matrix out(n_samples, p);
    for (Index c = 0; c < p; ++c) {
        const Vector y = track.coeffs.col(c);
        // Second derivatives with natural boundary (M_0 = M_{n-1} = 0), Thomas algorithm.
        Vector M = Vector::Zero(n_knots);
        const Index m = n_knots - 2;
        if (m > 0) {
            Vector diag(m), upper(m), rhs(m);
            for (Index i = 0; i < m; ++i) {
                diag(i) = 2.0 * (h(i) + h(i + 1));
                upper(i) = h(i + 1);
                rhs(i) = 6.0 * ((y(i + 2) - y(i + 1)) / h(i + 1) - (y(i + 1) - y(i)) / h(i));
            }
            for (Index i = 1; i < m; ++i) {
                const double w = h(i) / diag(i - 1);
                diag(i) -= w * upper(i - 1);
                rhs(i) -= w * rhs(i - 1);
            }
            M(m) = rhs(m - 1) / diag(m - 1);
            for (Index i = m - 2; i >= 0; --i) {
                M(i + 1) = (rhs(i) - upper(i) * M(i + 2)) / diag(i);
            }
        }

        Index seg = 0;
        for (Index t = 0; t < n_samples; ++t) {
            const double tt = static_cast<double>(t);
            if (tt <= x(0)) {
                out(t, c) = y(0);
                continue;
            }
            if (tt >= x(n_knots - 1)) {
                out(t, c) = y(n_knots - 1);
                continue;
            }
            while (tt > x(seg + 1)) ++seg;
            if (tt == x(seg + 1)) {
                out(t, c) = y(seg + 1);
                continue;
            }
            const double a = x(seg + 1) - tt;
            const double b = tt - x(seg);
            const double hi = h(seg);
            out(t, c) = (M(seg) * a * a * a + M(seg + 1) * b * b * b) / (6.0 * hi) +
                        (y(seg) / hi - M(seg) * hi / 6.0) * a +
                        (y(seg + 1) / hi - M(seg + 1) * hi / 6.0) * b;
        }
    }
    return out;
}

}  // namespace flexdecode
