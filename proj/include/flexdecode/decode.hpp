#pragma once

#include "flexdecode/core.hpp"
#include "flexdecode/model.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace flexdecode {

struct StatePrediction {
    int state = 1;
    Vector scores;  // 6 entries, x^T c_k
    bool degenerate = false;
};

/// Winner-takes-all over x^T c_k; ties go to the lowest state index.
StatePrediction predict_state(const Vector& x, const StateModel& model);

/// [x restricted to the state's feature set, 1]^T H_k.
Vector decode_sample(const Vector& flex_features, int state, const FlexModelBank& bank);

/// Same product for a single model (used for the global baseline).
Vector apply_flex_model(const Vector& flex_features, const FlexStateModel& model);

struct DecodeOptions {
    /// Centered moving average over state scores, in samples; <= 1 is off.
    Index score_smoothing = 0;
    /// Decode every sample with the global (non-switching) model.
    bool use_global_model = false;
};

struct DecodeResult {
    Matrix flexion_hat;  // n x 5
    StateSequence states_hat;
    Matrix scores;  // n x 6
    Index valid_begin = 0;
    Index valid_end = 0;
    std::vector<std::string> warnings;
};

/// Full switching decode of a working-rate ECoG block. Samples outside the
/// range covered by both feature matrices repeat the nearest decoded sample.
/// With forced_states, the given states replace the WTA estimate.
DecodeResult run_decoder(const MultichannelSignal& ecog, const TrainedDecoder& dec,
                         const std::optional<StateSequence>& forced_states = std::nullopt,
                         const DecodeOptions& opts = {});

/// The decode loop of run_decoder on precomputed features of an n-sample
/// block. `state_features` must match the state model's feature names.
DecodeResult decode_from_features(Index n, const FeatureMatrix& state_features, const StateModel& state_model,
                                  const FeatureMatrix& flex_features, const FlexModelBank& bank,
                                  const std::optional<FlexStateModel>& global_model,
                                  const std::optional<StateSequence>& forced_states = std::nullopt,
                                  const DecodeOptions& opts = {});

/// Zero-lag Pearson correlation. Throws UndefinedCorrelationError on a
/// constant input.
double pearson_corr(const Vector& a, const Vector& b);

struct CorrelationReport {
    std::array<double, kNumFingers> correlation{};
    std::array<bool, kNumFingers> defined{};
    std::array<bool, kNumFingers> in_average{};
    double average = 0.0;
    bool exclude_finger4 = true;
    std::vector<std::string> warnings;
};

/// Per-finger correlations and their average over fingers {1,2,3,5} (mask on)
/// or all five. Undefined fingers are left out of the average with a warning.
CorrelationReport evaluate(const Matrix& flexion_hat, const Matrix& truth, bool exclude_finger4 = true);
CorrelationReport evaluate(const DecodeResult& result, const FlexionRecord& truth, bool exclude_finger4 = true);

/// Mean of the per-subject averages.
double average_over_subjects(const std::vector<CorrelationReport>& reports);

/// Sample-and-hold expansion of every row by `factor`.
Matrix hold_upsample(const Matrix& m, int factor);

}  // namespace flexdecode
