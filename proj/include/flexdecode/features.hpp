#pragma once

#include "flexdecode/core.hpp"

namespace flexdecode {

struct StateFeatureConfig {
    Index window_len = 300;
    int ar_order = 2;
    int n_ar_used = 2;
    int shift_ts = 50;

    void validate() const;
};

struct FlexFeatureConfig {
    int sg_order = 3;
    double sg_width_s = 0.4;
    int shift_tau = 25;

    void validate() const;
};

/// Windowed-AR state features. For every shift s in (-t_s, 0, +t_s) the
/// signal x[t + s] is windowed, AR-fit and spline-interpolated; the first
/// n_ar_used coefficients of every channel are kept. Column blocks are
/// ordered by shift, then channel, then coefficient. Rows cover the source
/// samples [t_s, n - t_s).
FeatureMatrix build_state_features(const MultichannelSignal& sig, const StateFeatureConfig& cfg);

/// Unshifted windowed-AR features (first n_used coefficients per channel),
/// one row per source sample.
FeatureMatrix build_ar_features(const MultichannelSignal& sig, Index window_len, int ar_order, int n_used);

/// Savitzky-Golay filtered samples at t, t - tau and t + tau (one block each,
/// channels inside a block). Rows cover the source samples [tau, n - tau).
FeatureMatrix build_flex_features(const MultichannelSignal& sig, const FlexFeatureConfig& cfg);

}  // namespace flexdecode
