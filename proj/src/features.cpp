#include "flexdecode/features.hpp"

#include "flexdecode/dsp.hpp"

#include <array>

namespace flexdecode {

namespace {

// Block order of the three time offsets.
constexpr std::array<int, 3> kStateDirections{-1, 0, 1};
constexpr std::array<int, 3> kFlexDirections{0, -1, 1};

std::string name_of(const std::string& channel, int direction, int shift, const std::string& kind) {
    return FeatureName{channel, direction, shift, kind}.encode();
}

FeatureMatrix stack_shifted(const MultichannelSignal& smoothed, int shift_tau, const std::string& kind) {
    const Index n = smoothed.n_samples();
    const Index tau = shift_tau;
    const Index rows = n - 2 * tau;
    if (rows < 1) throw ParameterError("signal too short for the flexion feature shift");
    const Index n_ch = smoothed.n_channels();

    Matrix values(rows, 3 * n_ch);
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(3 * n_ch));
    for (std::size_t b = 0; b < kFlexDirections.size(); ++b) {
        const int dir = kFlexDirections[b];
        values.middleCols(static_cast<Index>(b) * n_ch, n_ch) =
            smoothed.samples().middleRows(tau + dir * tau, rows);
        for (const auto& id : smoothed.channel_ids()) names.push_back(name_of(id, dir, shift_tau, kind));
    }
    return {std::move(values), std::move(names), tau};
}


}  // namespace

void StateFeatureConfig::validate() const {
    if (window_len < 1) throw ParameterError("AR window length must be positive");
    if (ar_order < 1) throw ParameterError("AR order must be >= 1");
    if (n_ar_used < 1 || n_ar_used > ar_order) {
        throw ParameterError("number of AR coefficients used must be in 1..ar_order");
    }
    if (shift_ts < 0) throw ParameterError("state feature shift must be >= 0");
}

void FlexFeatureConfig::validate() const {
    if (sg_order < 0) throw ParameterError("Savitzky-Golay order must be >= 0");
    if (!(sg_width_s > 0.0)) throw ParameterError("Savitzky-Golay width must be positive");
    if (shift_tau < 0) throw ParameterError("flexion feature shift must be >= 0");
}

FeatureMatrix build_state_features(const MultichannelSignal& sig, const StateFeatureConfig& cfg) {
    cfg.validate();
    const Index n = sig.n_samples();
    const Index ts = cfg.shift_ts;
    const Index rows = n - 2 * ts;
    if (rows < 2 * cfg.window_len) {
        throw ParameterError("signal too short for two AR windows after shifting (" +
                             std::to_string(n) + " samples, shift " + std::to_string(ts) + ")");
    }

    const Index n_ch = sig.n_channels();
    const Index per_block = n_ch * cfg.n_ar_used;
    Matrix values(rows, 3 * per_block);
    std::vector<std::string> names(static_cast<std::size_t>(3 * per_block));

    for (std::size_t b = 0; b < kStateDirections.size(); ++b) {
        const int dir = kStateDirections[b];
        const Index raw_begin = ts + dir * ts;
        for (Index c = 0; c < n_ch; ++c) {
            const std::string& id = sig.channel_ids()[static_cast<std::size_t>(c)];
            Matrix interp;
            try {
                const Vector shifted = sig.samples().col(c).segment(raw_begin, rows);
                interp = spline_interpolate(ar_window_track(shifted, cfg.window_len, cfg.ar_order), rows);
            } catch (const DegenerateSegmentError& e) {
                throw DegenerateSegmentError("channel " + id + ", shift " + std::to_string(dir * ts) +
                                             ": " + e.what());
            }
            const Index col0 = static_cast<Index>(b) * per_block + c * cfg.n_ar_used;
            values.middleCols(col0, cfg.n_ar_used) = interp.leftCols(cfg.n_ar_used);
            for (int a = 0; a < cfg.n_ar_used; ++a) {
                names[static_cast<std::size_t>(col0 + a)] =
                    name_of(id, dir, cfg.shift_ts, "ar" + std::to_string(a + 1));
            }
        }
    }
    return {std::move(values), std::move(names), ts};
}

FeatureMatrix build_ar_features(const MultichannelSignal& sig, Index window_len, int ar_order, int n_used) {
    const StateFeatureConfig cfg{window_len, ar_order, n_used, 0};
    cfg.validate();
    const Index n = sig.n_samples();
    if (n < 2 * window_len) throw ParameterError("signal too short for two AR windows");
    Matrix values(n, sig.n_channels() * n_used);
    std::vector<std::string> names;
    for (Index c = 0; c < sig.n_channels(); ++c) {
        const std::string& id = sig.channel_ids()[static_cast<std::size_t>(c)];
        try {
            values.middleCols(c * n_used, n_used) =
                spline_interpolate(ar_window_track(sig.samples().col(c), window_len, ar_order), n).leftCols(n_used);
        } catch (const DegenerateSegmentError& e) {
            throw DegenerateSegmentError("channel " + id + ": " + e.what());
        }
        for (int a = 0; a < n_used; ++a) names.push_back(name_of(id, 0, 0, "ar" + std::to_string(a + 1)));
    }
    return {std::move(values), std::move(names), 0};
}

FeatureMatrix build_flex_features(const MultichannelSignal& sig, const FlexFeatureConfig& cfg) {
    cfg.validate();
    const Index window = savgol_window_length(cfg.sg_width_s, sig.rate_hz());
    if (sig.n_samples() <= window + 2 * static_cast<Index>(cfg.shift_tau)) {
        throw ParameterError("signal must be longer than the Savitzky-Golay window plus twice the shift");
    }
    return stack_shifted(savgol_filter(sig, cfg.sg_order, cfg.sg_width_s), cfg.shift_tau, "sg");
}

}  // namespace flexdecode
