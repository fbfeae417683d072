#pragma once

#include "flexdecode/core.hpp"
#include "flexdecode/features.hpp"
#include "flexdecode/solvers.hpp"

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace flexdecode {

// ---------------------------------------------------------------------------
// Movement labeling
// ---------------------------------------------------------------------------

struct LabelingConfig {
    double threshold_frac = 0.3;
    int smooth_order = 3;
    double smooth_width_s = 0.4;  // 0 disables smoothing of the deviation
};

struct Labeling {
    StateSequence states;
    SegmentList segments;
};

/// Automatic movement segmentation. Per finger, the absolute deviation from
/// the median is smoothed and normalized by its 95th percentile; a finger
/// moves where the normalized deviation exceeds threshold_frac. The state is
/// the moving finger with the largest normalized deviation, or 6.
Labeling labels_from_flexion(const FlexionRecord& flex, const LabelingConfig& cfg = {});

/// Y[t, s[t]] = +1, everything else -1.
StateLabelMatrix labels_from_states(const StateSequence& s);

/// Linear-interpolated percentile (q in [0, 100]) of a vector.
double percentile(Vector values, double q);

// ---------------------------------------------------------------------------
// Channel selection
// ---------------------------------------------------------------------------

struct ChannelScore {
    std::vector<std::string> channel_ids;
    Vector scores;               // one per channel, original order
    std::vector<Index> ranking;  // channel indices, best first
    std::vector<std::string> warnings;
};

/// Regresses each state's +/-1 labels on the first AR coefficient of every
/// channel (no shifts) and scores channel j by sum_k |c_jk|. The regression
/// carries an unscored intercept so the label offset is not absorbed by
/// near-constant channels.
/// `labels` rows align with the signal samples.
ChannelScore score_channels(const MultichannelSignal& sig, const StateLabelMatrix& labels,
                            const StateFeatureConfig& cfg);

/// The K best channels, returned in original channel order.
std::vector<std::string> select_top_channels(const ChannelScore& scores, Index K);

// ---------------------------------------------------------------------------
// Moving-finger state model
// ---------------------------------------------------------------------------

struct StateModelFit {
    StateModel model;
    bool converged = false;
    int iterations = 0;
    std::vector<std::string> warnings;
};

/// Fits C by simultaneous sparse approximation on features whose rows align
/// with the label rows. Selected channels and t_s are read from the feature
/// names.
StateModelFit train_state_model(const FeatureMatrix& features, const StateLabelMatrix& Y, double lambda_s,
                                const SsaOptions& opts = {});

/// Wraps an SSA solution whose rows follow `feature_names`.
StateModelFit state_model_from_solution(const std::vector<std::string>& feature_names, SsaSolution solution);

// ---------------------------------------------------------------------------
// Per-state flexion models
// ---------------------------------------------------------------------------

struct StateTrainingSet {
    Matrix X;
    Matrix Y;
};

/// Concatenates feature rows and 5-finger targets over all segments with
/// state k, in segment order. Segment indices are source-sample indices and
/// must lie inside the feature rows and the flexion record.
StateTrainingSet extract_segments(const FeatureMatrix& features, const FlexionRecord& flex,
                                  const SegmentList& segs, int k);

/// Ranks features by sum_i |h_i| over the five outputs (bias excluded),
/// best first; ties keep the lower index first.
std::vector<Index> rank_features(const Matrix& H_with_bias);

/// Ridge fit, keep the M strongest features (ascending index order) and,
/// when `refit` is set, refit on them; otherwise the kept rows of the full
/// fit are reused.
FlexStateModel fit_flex_state(const Matrix& X, const Matrix& Y, double lambda, Index M, bool refit = true);

/// Same, reusing precomputed statistics for sweeps.
FlexStateModel fit_flex_state(const RidgeGram& gram, double lambda, Index M, bool refit = true);

FlexModelBank train_flex_models(const FeatureMatrix& features, const FlexionRecord& flex, const SegmentList& segs,
                                const std::array<double, kNumStates>& lambdas,
                                const std::array<Index, kNumStates>& M, bool refit = true);

/// Single linear model on every feature row (the non-switching baseline).
FlexStateModel train_global_model(const FeatureMatrix& features, const FlexionRecord& flex, double lambda);

// ---------------------------------------------------------------------------
// Trained decoder
// ---------------------------------------------------------------------------

/// Everything needed to rebuild both feature spaces from raw ECoG.
struct PreprocessSnapshot {
    double delay_ms = 37.0;
    DelayDirection delay_direction = DelayDirection::EcogLeads;
    int downsample_factor = 4;
    double raw_rate_hz = 1000.0;
    double working_rate_hz = 250.0;
    std::vector<std::string> channel_ids;  // full ECoG channel set, in order
    StateFeatureConfig state_features;
    FlexFeatureConfig flex_features;
};

struct TrainedDecoder {
    PreprocessSnapshot preprocessing;
    StateModel state_model;
    FlexModelBank flex_bank;
    std::optional<FlexStateModel> global_model;
    std::map<std::string, double> hyperparameters;
};

/// Flexion rows matching the feature rows.
Matrix flexion_rows(const FeatureMatrix& features, const FlexionRecord& flex);

/// Shift encoded in the feature names (the largest one).
int shift_from_names(const std::vector<std::string>& names);

}  // namespace flexdecode
