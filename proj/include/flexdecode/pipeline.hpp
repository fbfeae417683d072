#pragma once

#include "flexdecode/config.hpp"
#include "flexdecode/core.hpp"
#include "flexdecode/decode.hpp"
#include "flexdecode/model.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace flexdecode {

/// A recording after delay correction and downsampling. Segment indices are
/// working-rate samples of this aligned record.
struct PreparedData {
    MultichannelSignal ecog;
    std::optional<FlexionRecord> flex;
    std::optional<SegmentList> segments;
    Index dropped = 0;  // raw samples removed by the delay correction
};

PreparedData prepare_data(const MultichannelSignal& ecog_raw, const std::optional<FlexionRecord>& flex_raw,
                          const std::optional<std::vector<Segment>>& segments, double delay_ms,
                          DelayDirection direction, int downsample_factor);

/// Same, with the decoder's preprocessing snapshot; the raw rate must match.
PreparedData prepare_data(const MultichannelSignal& ecog_raw, const std::optional<FlexionRecord>& flex_raw,
                          const std::optional<std::vector<Segment>>& segments, const TrainedDecoder& dec);

using ProgressFn = std::function<void(const std::string&)>;

struct TrainOutput {
    TrainedDecoder decoder;
    nlohmann::json report;
};

/// Splits the prepared record by index (train first, validation last),
/// labels both parts independently, selects every hyperparameter on the
/// validation part and fits every coefficient on the training part only.
TrainOutput train_decoder(const PreparedData& data, const PipelineConfig& cfg, const ProgressFn& progress = {});

enum class DecodeMode { Estimated, Forced };

struct DecodeRequest {
    DecodeMode mode = DecodeMode::Estimated;
    bool use_global_model = false;
    std::optional<Index> score_smoothing;  // default: the decoder's setting
    std::optional<bool> exclude_finger4;   // default: the decoder's setting
};

struct DecodeOutput {
    DecodeResult result;
    std::optional<CorrelationReport> correlation;  // when flexion is available
    nlohmann::json report;
};

/// Forced mode takes states from the segments, else from labels_from_flexion
/// with the labeling settings stored in the decoder.
DecodeOutput decode_prepared(const PreparedData& data, const TrainedDecoder& dec, const DecodeRequest& req = {});

nlohmann::json correlation_to_json(const CorrelationReport& rep);
std::string format_correlation(const CorrelationReport& rep);

}  // namespace flexdecode
