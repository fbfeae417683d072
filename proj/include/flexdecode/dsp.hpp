#pragma once

#include "flexdecode/core.hpp"

namespace flexdecode {

/// AR coefficients estimated on consecutive non-overlapping windows.
struct ArWindowTrack {
    std::vector<Index> knot_indices;  // window centers
    Matrix coeffs;                    // n_windows x order
    Index window_len = 0;
};

/// Keeps every `factor`-th sample starting at index 0; the rate is divided by `factor`.
MultichannelSignal downsample(const MultichannelSignal& sig, int factor);
FlexionRecord downsample(const FlexionRecord& flex, int factor);

/// Nearest odd integer to width_s * rate_hz (exact halves round up).
Index savgol_window_length(double width_s, double rate_hz);

/// Savitzky-Golay smoothing of a single track with an explicit odd window.
/// Near the edges the window is truncated and the polynomial is refit on the
/// samples that exist (degree capped at n_available - 1).
Vector savgol_smooth(const Vector& x, int order, Index window);

/// Savitzky-Golay low-pass of every channel; window derived from width_s.
MultichannelSignal savgol_filter(const MultichannelSignal& sig, int order, double width_s);

/// Least-squares (covariance method) AR fit: x_t ~ sum_i a_i x_{t-i}.
Vector fit_ar(const Vector& segment, int order);

/// One AR fit per complete non-overlapping window; knot = start + (len - 1) / 2.
ArWindowTrack ar_window_track(const Vector& channel, Index window_len, int order);

/// Natural cubic spline through the knots of every coefficient, sampled at
/// 0..n_samples-1 and held constant outside the first/last knot.
Matrix spline_interpolate(const ArWindowTrack& track, Index n_samples);

}  // namespace flexdecode
