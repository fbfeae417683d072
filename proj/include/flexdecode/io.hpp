#pragma once

#include "flexdecode/core.hpp"
#include "flexdecode/decode.hpp"
#include "flexdecode/model.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>

namespace flexdecode::io {

// Signal container, little-endian:
//   char[4]  magic "FXDS"
//   u32      version (1)
//   u64      n_samples
//   u32      n_channels
//   f64      rate_hz
//   n_channels x { u16 length, bytes } channel ids
//   f32      samples, time-major (n_samples x n_channels)
inline constexpr char kSignalMagic[4] = {'F', 'X', 'D', 'S'};
inline constexpr std::uint32_t kSignalVersion = 1;
inline constexpr int kArchiveVersion = 1;

/// Reads a binary signal file, or a CSV file when the extension is .csv.
MultichannelSignal read_signal(const std::filesystem::path& path);
void write_signal(const std::filesystem::path& path, const MultichannelSignal& sig);

/// A signal file with exactly 5 channels.
FlexionRecord read_flexion(const std::filesystem::path& path);
void write_flexion(const std::filesystem::path& path, const FlexionRecord& flex);

/// CSV layout: "# rate_hz=<r>" line, a header line of channel ids, then one
/// comma-separated row per sample.
MultichannelSignal read_signal_csv(const std::filesystem::path& path);
void write_signal_csv(const std::filesystem::path& path, const MultichannelSignal& sig);

/// Plain text, one "start end state" triple per line; '#' starts a comment.
SegmentList read_segments(const std::filesystem::path& path, Index n_samples);
/// The raw triples, before validation against a record length.
std::vector<Segment> read_segment_entries(const std::filesystem::path& path);
void write_segments(const std::filesystem::path& path, const SegmentList& segs);

/// Columns f1..f5 plus the decoded state, at the working rate.
void write_predictions(const std::filesystem::path& path, const DecodeResult& result, double rate_hz);
/// The five flexion columns of a predictions (or flexion) file.
FlexionRecord read_predictions(const std::filesystem::path& path);

nlohmann::json decoder_to_json(const TrainedDecoder& dec);
TrainedDecoder decoder_from_json(const nlohmann::json& j);
void save_decoder(const std::filesystem::path& path, const TrainedDecoder& dec, const nlohmann::json& report = {});
TrainedDecoder load_decoder(const std::filesystem::path& path);

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

/// Writes text with '\n' line endings, replacing the file.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace flexdecode::io
