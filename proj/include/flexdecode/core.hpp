#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace flexdecode {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr int kNumFingers = 5;
inline constexpr int kNumStates = 6;
inline constexpr int kRestState = 6;

// ---------------------------------------------------------------------------
// Errors. Everything thrown by the library derives from Error; the CLI maps
// NumericalError to exit code 3 and every other Error to exit code 2.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParameterError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class AlignmentError : public Error {
public:
    using Error::Error;
};

class InconsistentLabelError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

class DegenerateSegmentError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class RankDeficiencyError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class EmptyTrainingSetError : public Error {
public:
    using Error::Error;
};

class UndefinedCorrelationError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

// ---------------------------------------------------------------------------
// Domain containers. All of them validate on construction and are immutable
// afterwards.
// ---------------------------------------------------------------------------

/// Time-major multichannel recording (rows = samples, columns = channels).
class MultichannelSignal {
public:
    MultichannelSignal(Matrix samples, double rate_hz, std::vector<std::string> channel_ids);

    /// Channel ids default to "1".."n".
    MultichannelSignal(Matrix samples, double rate_hz);

    const Matrix& samples() const { return samples_; }
    double rate_hz() const { return rate_hz_; }
    const std::vector<std::string>& channel_ids() const { return channel_ids_; }
    Index n_samples() const { return samples_.rows(); }
    Index n_channels() const { return samples_.cols(); }

    /// Index of a channel id, or -1.
    Index channel_index(const std::string& id) const;

    /// Rows [begin, end).
    MultichannelSignal slice(Index begin, Index end) const;
    /// Subset of channels in the given order.
    MultichannelSignal select_channels(const std::vector<std::string>& ids) const;

private:
    Matrix samples_;
    double rate_hz_;
    std::vector<std::string> channel_ids_;
};

/// Five-finger flexion trajectory (thumb .. little finger).
class FlexionRecord {
public:
    FlexionRecord(Matrix flexion, double rate_hz);

    const Matrix& flexion() const { return flexion_; }
    double rate_hz() const { return rate_hz_; }
    Index n_samples() const { return flexion_.rows(); }

    FlexionRecord slice(Index begin, Index end) const;

private:
    Matrix flexion_;
    double rate_hz_;
};

/// Feature rows for a contiguous range of source samples. Row r describes
/// source sample first_sample() + r.
class FeatureMatrix {
public:
    FeatureMatrix(Matrix values, std::vector<std::string> names, Index first_sample = 0);

    const Matrix& values() const { return values_; }
    const std::vector<std::string>& names() const { return names_; }
    Index n_rows() const { return values_.rows(); }
    Index n_features() const { return values_.cols(); }
    Index first_sample() const { return first_sample_; }
    /// One past the last source sample covered.
    Index end_sample() const { return first_sample_ + values_.rows(); }

private:
    Matrix values_;
    std::vector<std::string> names_;
    Index first_sample_;
};

/// Decoded form of a feature name: the channel, which time offset the value
/// is taken at (direction -1/0/+1 times shift samples) and the feature kind.
struct FeatureName {
    std::string channel;
    int direction = 0;
    int shift = 0;
    std::string kind;

    int offset() const { return direction * shift; }

    std::string encode() const;
    static FeatureName decode(const std::string& name);
};

/// Per-sample hidden state in 1..6 (6 = no finger moving).
class StateSequence {
public:
    StateSequence() = default;
    explicit StateSequence(std::vector<int> states);

    const std::vector<int>& states() const { return states_; }
    Index size() const { return static_cast<Index>(states_.size()); }
    int operator[](Index t) const { return states_[static_cast<std::size_t>(t)]; }

    StateSequence slice(Index begin, Index end) const;

private:
    std::vector<int> states_;
};

/// n x 6 matrix with entries +1/-1 and exactly one +1 per row.
class StateLabelMatrix {
public:
    explicit StateLabelMatrix(Matrix Y);

    const Matrix& values() const { return Y_; }
    Index n_rows() const { return Y_.rows(); }

private:
    Matrix Y_;
};

struct Segment {
    Index start = 0;
    Index end = 0;
    int state = kRestState;

    bool operator==(const Segment&) const = default;
};

/// Sorted, non-overlapping half-open segments.
class SegmentList {
public:
    SegmentList() = default;
    SegmentList(std::vector<Segment> segments, Index n_samples);

    const std::vector<Segment>& segments() const { return segments_; }
    Index n_samples() const { return n_samples_; }
    std::size_t size() const { return segments_.size(); }

    /// Maximal constant-state runs of a sequence.
    static SegmentList from_states(const StateSequence& states);
    /// Expands to a per-sample sequence; uncovered samples get `fill_state`.
    StateSequence to_states(int fill_state = kRestState) const;
    /// Keeps only the parts inside [begin, end) and re-bases them to begin.
    SegmentList clip(Index begin, Index end) const;

private:
    std::vector<Segment> segments_;
    Index n_samples_ = 0;
};

struct StateModel {
    Matrix C;  // n_state_features x 6
    std::vector<std::string> selected_channels;
    std::vector<std::string> feature_names;
    int shift_ts = 1;
    std::vector<Index> active_rows;
    bool degenerate = false;

    void validate() const;
};

struct FlexStateModel {
    Matrix H;  // (m_k + 1) x 5, last row = bias
    std::vector<Index> feature_index_set;
    double lambda = 0.0;
};

struct FlexModelBank {
    std::array<FlexStateModel, kNumStates> models;
    int shift_tau = 1;

    void validate(Index n_flex_features) const;
};

struct AlignedPair {
    MultichannelSignal ecog;
    FlexionRecord flex;
    Index dropped = 0;
};

enum class DelayDirection {
    EcogLeads,   // ECoG at t - delay is paired with flexion at t
    EcogLags,    // ECoG at t + delay is paired with flexion at t
};

/// Shift in samples for a delay at the given rate: round(delay_ms * rate / 1000).
Index delay_samples(double delay_ms, double rate_hz);

/// Applies the acquisition delay correction and truncates both records to a
/// common length. Both records must share the same rate.
AlignedPair validate_alignment(const MultichannelSignal& ecog, const FlexionRecord& flex,
                               double delay_ms,
                               DelayDirection direction = DelayDirection::EcogLeads);

/// Inverse of labels_from_states: the unique +1 column of each row.
StateSequence states_from_labels(const StateLabelMatrix& Y);

}  // namespace flexdecode
