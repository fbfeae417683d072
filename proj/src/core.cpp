#include "flexdecode/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace flexdecode {

namespace {

void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) {
        throw ValidationError(std::string(what) + " contains NaN or Inf");
    }
}

std::vector<std::string> default_ids(Index n) {
    std::vector<std::string> ids;
    ids.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) ids.push_back(std::to_string(i + 1));
    return ids;
}

}  // namespace

MultichannelSignal::MultichannelSignal(Matrix samples, double rate_hz,
                                       std::vector<std::string> channel_ids)
    : samples_(std::move(samples)), rate_hz_(rate_hz), channel_ids_(std::move(channel_ids)) {
    if (samples_.rows() < 1 || samples_.cols() < 1) {
        throw ValidationError("signal needs at least one sample and one channel");
    }
    if (!(rate_hz_ > 0.0) || !std::isfinite(rate_hz_)) {
        throw ValidationError("sampling rate must be positive");
    }
    if (static_cast<Index>(channel_ids_.size()) != samples_.cols()) {
        throw ValidationError("channel id count does not match channel count");
    }
    std::set<std::string> seen(channel_ids_.begin(), channel_ids_.end());
    if (seen.size() != channel_ids_.size()) {
        throw ValidationError("channel ids must be unique");
    }
    require_finite(samples_, "signal");
}

MultichannelSignal::MultichannelSignal(Matrix samples, double rate_hz)
    : MultichannelSignal(samples, rate_hz, default_ids(samples.cols())) {}

Index MultichannelSignal::channel_index(const std::string& id) const {
    auto it = std::find(channel_ids_.begin(), channel_ids_.end(), id);
    return it == channel_ids_.end() ? -1 : static_cast<Index>(it - channel_ids_.begin());
}

MultichannelSignal MultichannelSignal::slice(Index begin, Index end) const {
    if (begin < 0 || end > n_samples() || begin >= end) {
        throw ParameterError("invalid signal slice");
    }
    return {samples_.middleRows(begin, end - begin), rate_hz_, channel_ids_};
}

MultichannelSignal MultichannelSignal::select_channels(const std::vector<std::string>& ids) const {
    Matrix out(n_samples(), static_cast<Index>(ids.size()));
    for (std::size_t j = 0; j < ids.size(); ++j) {
        const Index src = channel_index(ids[j]);
        if (src < 0) throw ParameterError("unknown channel id '" + ids[j] + "'");
        out.col(static_cast<Index>(j)) = samples_.col(src);
    }
    return {std::move(out), rate_hz_, ids};
}

FlexionRecord::FlexionRecord(Matrix flexion, double rate_hz)
    : flexion_(std::move(flexion)), rate_hz_(rate_hz) {
    if (flexion_.cols() != kNumFingers) {
        throw ValidationError("flexion record must have exactly 5 columns");
    }
    if (flexion_.rows() < 1) throw ValidationError("flexion record is empty");
    if (!(rate_hz_ > 0.0) || !std::isfinite(rate_hz_)) {
        throw ValidationError("sampling rate must be positive");
    }
    require_finite(flexion_, "flexion record");
}

FlexionRecord FlexionRecord::slice(Index begin, Index end) const {
    if (begin < 0 || end > n_samples() || begin >= end) {
        throw ParameterError("invalid flexion slice");
    }
    return {flexion_.middleRows(begin, end - begin), rate_hz_};
}

FeatureMatrix::FeatureMatrix(Matrix values, std::vector<std::string> names, Index first_sample)
    : values_(std::move(values)), names_(std::move(names)), first_sample_(first_sample) {
    if (static_cast<Index>(names_.size()) != values_.cols()) {
        throw ValidationError("feature name count does not match column count");
    }
    std::set<std::string> seen(names_.begin(), names_.end());
    if (seen.size() != names_.size()) throw ValidationError("feature names must be unique");
    if (first_sample_ < 0) throw ValidationError("negative feature row offset");
    require_finite(values_, "feature matrix");
}

// Names look like "ch=<id>;at=t-<s>;kind=<k>" (also "at=t" and "at=t+<s>").
// The explicit sign keeps the three blocks distinct when the shift is zero.
// Channel ids may not contain ';'.
std::string FeatureName::encode() const {
    std::ostringstream os;
    os << "ch=" << channel << ";at=t";
    if (direction < 0) os << "-" << shift;
    if (direction > 0) os << "+" << shift;
    os << ";kind=" << kind;
    return os.str();
}

FeatureName FeatureName::decode(const std::string& name) {
    FeatureName out;
    bool have_ch = false, have_at = false, have_kind = false;
    std::istringstream is(name);
    std::string part;
    while (std::getline(is, part, ';')) {
        const auto eq = part.find('=');
        if (eq == std::string::npos) throw ParseError("malformed feature name '" + name + "'");
        const std::string key = part.substr(0, eq);
        const std::string val = part.substr(eq + 1);
        if (key == "ch") {
            out.channel = val;
            have_ch = true;
        } else if (key == "at") {
            if (val.empty() || val[0] != 't') {
                throw ParseError("malformed offset in feature name '" + name + "'");
            }
            if (val.size() == 1) {
                out.direction = 0;
                out.shift = 0;
            } else {
                if (val[1] != '-' && val[1] != '+') {
                    throw ParseError("malformed offset in feature name '" + name + "'");
                }
                out.direction = val[1] == '-' ? -1 : 1;
                const std::string digits = val.substr(2);
                if (digits.empty() ||
                    !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
                    throw ParseError("malformed offset in feature name '" + name + "'");
                }
                out.shift = std::stoi(digits);
            }
            have_at = true;
        } else if (key == "kind") {
            out.kind = val;
            have_kind = true;
        } else {
            throw ParseError("unknown key in feature name '" + name + "'");
        }
    }
    if (!have_ch || !have_at || !have_kind) {
        throw ParseError("incomplete feature name '" + name + "'");
    }
    return out;
}

StateSequence::StateSequence(std::vector<int> states) : states_(std::move(states)) {
    for (std::size_t t = 0; t < states_.size(); ++t) {
        if (states_[t] < 1 || states_[t] > kNumStates) {
            throw ValidationError("state at sample " + std::to_string(t) + " is outside 1..6");
        }
    }
}

StateSequence StateSequence::slice(Index begin, Index end) const {
    if (begin < 0 || end > size() || begin > end) throw ParameterError("invalid state slice");
    return StateSequence(std::vector<int>(states_.begin() + begin, states_.begin() + end));
}

StateLabelMatrix::StateLabelMatrix(Matrix Y) : Y_(std::move(Y)) {
    if (Y_.cols() != kNumStates) throw ValidationError("label matrix must have 6 columns");
    for (Index t = 0; t < Y_.rows(); ++t) {
        int positives = 0;
        for (Index k = 0; k < kNumStates; ++k) {
            const double v = Y_(t, k);
            if (v == 1.0) {
                ++positives;
            } else if (v != -1.0) {
                throw ValidationError("label entries must be +1 or -1");
            }
        }
        if (positives != 1) {
            throw InconsistentLabelError("label row " + std::to_string(t) + " has " +
                                         std::to_string(positives) + " positive entries");
        }
    }
}

SegmentList::SegmentList(std::vector<Segment> segments, Index n_samples)
    : segments_(std::move(segments)), n_samples_(n_samples) {
    Index prev_end = 0;
    for (const auto& s : segments_) {
        if (s.start < 0 || s.start >= s.end || s.end > n_samples_) {
            throw ValidationError("segment [" + std::to_string(s.start) + ", " +
                                  std::to_string(s.end) + ") is out of range");
        }
        if (s.state < 1 || s.state > kNumStates) {
            throw ValidationError("segment state outside 1..6");
        }
        if (s.start < prev_end) throw ValidationError("segments overlap or are unsorted");
        prev_end = s.end;
    }
}

SegmentList SegmentList::from_states(const StateSequence& states) {
    std::vector<Segment> out;
    const Index n = states.size();
    Index start = 0;
    for (Index t = 1; t <= n; ++t) {
        if (t == n || states[t] != states[start]) {
            out.push_back({start, t, states[start]});
            start = t;
        }
    }
    return {std::move(out), n};
}

StateSequence SegmentList::to_states(int fill_state) const {
    std::vector<int> s(static_cast<std::size_t>(n_samples_), fill_state);
    for (const auto& seg : segments_) {
        std::fill(s.begin() + seg.start, s.begin() + seg.end, seg.state);
    }
    return StateSequence(std::move(s));
}

SegmentList SegmentList::clip(Index begin, Index end) const {
    if (begin < 0 || end < begin) throw ParameterError("invalid clip range");
    std::vector<Segment> out;
    for (const auto& s : segments_) {
        const Index a = std::max(s.start, begin);
        const Index b = std::min(s.end, end);
        if (a < b) out.push_back({a - begin, b - begin, s.state});
    }
    return {std::move(out), end - begin};
}

void StateModel::validate() const {
    if (C.cols() != kNumStates) throw ValidationError("state model needs 6 columns");
    if (!C.allFinite()) throw ValidationError("state model has non-finite coefficients");
    if (static_cast<Index>(feature_names.size()) != C.rows()) {
        throw ValidationError("state model feature names do not match coefficient rows");
    }
    if (shift_ts < 0) throw ValidationError("negative state feature shift");
}

void FlexModelBank::validate(Index n_flex_features) const {
    for (int k = 0; k < kNumStates; ++k) {
        const auto& m = models[static_cast<std::size_t>(k)];
        const auto msize = static_cast<Index>(m.feature_index_set.size());
        if (m.H.cols() != kNumFingers || m.H.rows() != msize + 1) {
            throw ValidationError("flexion model " + std::to_string(k + 1) + " has wrong shape");
        }
        if (!m.H.allFinite()) throw ValidationError("flexion model has non-finite weights");
        if (m.lambda < 0.0) throw ValidationError("negative ridge parameter");
        std::set<Index> seen;
        for (Index idx : m.feature_index_set) {
            if (idx < 0 || idx >= n_flex_features || !seen.insert(idx).second) {
                throw ValidationError("flexion model " + std::to_string(k + 1) +
                                      " has an invalid feature index set");
            }
        }
    }
}

Index delay_samples(double delay_ms, double rate_hz) {
    if (delay_ms < 0.0 || !std::isfinite(delay_ms)) throw ParameterError("delay must be >= 0");
    return static_cast<Index>(std::llround(delay_ms * rate_hz / 1000.0));
}

AlignedPair validate_alignment(const MultichannelSignal& ecog, const FlexionRecord& flex,
                               double delay_ms, DelayDirection direction) {
    if (ecog.rate_hz() != flex.rate_hz()) {
        throw AlignmentError("ECoG and flexion sampling rates differ");
    }
    const Index shift = delay_samples(delay_ms, ecog.rate_hz());
    Index ecog_begin = 0, flex_begin = 0;
    if (direction == DelayDirection::EcogLeads) {
        flex_begin = shift;
    } else {
        ecog_begin = shift;
    }
    const Index n = std::min(ecog.n_samples() - ecog_begin, flex.n_samples() - flex_begin);
    if (n < 1) throw AlignmentError("no overlap left after delay correction");
    return {ecog.slice(ecog_begin, ecog_begin + n), flex.slice(flex_begin, flex_begin + n), shift};
}

StateSequence states_from_labels(const StateLabelMatrix& Y) {
    std::vector<int> s(static_cast<std::size_t>(Y.n_rows()));
    const Matrix& v = Y.values();
    for (Index t = 0; t < v.rows(); ++t) {
        Index k = 0;
        v.row(t).maxCoeff(&k);
        s[static_cast<std::size_t>(t)] = static_cast<int>(k) + 1;
    }
    return StateSequence(std::move(s));
}

}  // namespace flexdecode
