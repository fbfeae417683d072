#include "flexdecode/config.hpp"
#include "flexdecode/io.hpp"
#include "flexdecode/pipeline.hpp"
#include "flexdecode/synth.hpp"

#include <doctest.h>

#include <fstream>

using namespace flexdecode;

namespace {

PipelineConfig tiny_config() {
    PipelineConfig cfg;
    cfg.delay_ms = 0.0;
    cfg.downsample_factor = 1;
    cfg.window_len = 25;
    cfg.ts_grid = {10};
    cfg.tau_grid = {10};
    cfg.k_grid = {16};
    cfg.lambda_s_grid = {0.01};
    cfg.lambda_k_grid = {1e-2};
    cfg.m_grid = {1.0};
    cfg.global_lambda_grid = {1e-2};
    return cfg;
}

// 60 s at 250 Hz: short enough to train quickly, long enough that every
// finger moves in the validation quarter.
SynthData bundle(std::uint64_t seed, Index n = 15000) {
    SynthSpec spec;
    spec.n_samples = n;
    spec.seed = seed;
    return generate(spec);
}

PreparedData prepared(const SynthData& d, bool with_segments, const PipelineConfig& cfg) {
    std::optional<std::vector<Segment>> segs;
    if (with_segments) segs = d.segments.segments();
    return prepare_data(d.ecog, d.flex, segs, cfg.delay_ms, cfg.delay_direction, cfg.downsample_factor);
}

}  // namespace

TEST_CASE("config defaults, JSON round-trip and validation") {
    const PipelineConfig def;
    CHECK(def.delay_ms == 37.0);
    CHECK(def.downsample_factor == 4);
    CHECK(def.window_len == 300);
    CHECK(def.train_fraction == 0.75);
    const PipelineConfig back = config_from_json(config_to_json(def));
    CHECK(config_to_json(back) == config_to_json(def));

    nlohmann::json j = config_to_json(def);
    j["no_such_key"] = 1;
    CHECK_THROWS_AS(config_from_json(j), ParseError);
    CHECK_THROWS_AS(config_from_json(nlohmann::json{{"k_grid", nlohmann::json::array()}}), ParameterError);
    CHECK_THROWS_AS(config_from_json(nlohmann::json{{"m_grid", {1.5}}}), ParameterError);
    CHECK_THROWS_AS(config_from_json(nlohmann::json{{"train_fraction", 0.5}}), ParameterError);
    CHECK_THROWS_AS(config_from_json(nlohmann::json{{"delay_direction", "sideways"}}), ParseError);
}

TEST_CASE("config overrides") {
    const PipelineConfig cfg =
        apply_overrides(PipelineConfig{}, {"window_len=50", "ts_grid=[5,10]", "ssa.tol=1e-8", "delay_direction=ecog_lags"});
    CHECK(cfg.window_len == 50);
    CHECK(cfg.ts_grid == std::vector<int>{5, 10});
    CHECK(cfg.ssa.tol == 1e-8);
    CHECK(cfg.delay_direction == DelayDirection::EcogLags);
    CHECK_THROWS_AS(apply_overrides(PipelineConfig{}, {"bogus=1"}), ParseError);
    CHECK_THROWS_AS(apply_overrides(PipelineConfig{}, {"window_len"}), ParseError);
    CHECK_THROWS_AS(apply_overrides(PipelineConfig{}, {"window_len=0"}), ParameterError);
}

TEST_CASE("config files accept comments") {
    const auto p = std::filesystem::temp_directory_path() / "flexdecode_cfg_test.json";
    std::ofstream(p) << "{\n  // short windows for short records\n  \"window_len\": 40\n}\n";
    CHECK(load_config(p).window_len == 40);
}

TEST_CASE("prepare_data aligns at the raw rate, then downsamples") {
    const SynthData d = bundle(1, 4000);
    const MultichannelSignal raw(d.ecog.samples(), 1000.0, d.ecog.channel_ids());
    const FlexionRecord flex(d.flex.flexion(), 1000.0);
    const PreparedData p = prepare_data(raw, flex, std::nullopt, 37.0, DelayDirection::EcogLeads, 4);
    CHECK(p.dropped == 37);
    CHECK(p.ecog.n_samples() == (4000 - 37 + 3) / 4);
    CHECK(p.ecog.rate_hz() == 250.0);
    CHECK(p.ecog.samples()(1, 0) == raw.samples()(4, 0));
    CHECK(p.flex->flexion()(1, 0) == flex.flexion()(41, 0));
}

TEST_CASE("training with size-1 grids on synthetic data") {
    const PipelineConfig cfg = tiny_config();
    const SynthData d = bundle(3);
    const TrainOutput out = train_decoder(prepared(d, true, cfg), cfg);
    const auto& rep = out.report;
    CHECK(rep["label_source"] == "segments");
    CHECK(rep["split"]["train"][1] == 11250);
    CHECK(rep["index_audit"]["validation_samples_in_fits"] == false);
    CHECK(rep["index_audit"]["max_sample_used_by_fits"].get<Index>() < 11250);
    CHECK(out.decoder.state_model.shift_ts == 10);
    CHECK(out.decoder.flex_bank.shift_tau == 10);
    CHECK(out.decoder.state_model.selected_channels.size() == 16);
    CHECK(out.decoder.global_model.has_value());
    CHECK(out.decoder.hyperparameters.count("K") == 1);
    const double forced = rep["validation"]["forced"]["average"].get<double>();
    const double estimated = rep["validation"]["estimated"]["average"].get<double>();
    MESSAGE("validation forced " << forced << ", estimated " << estimated);
    CHECK(forced > 0.9);
}

TEST_CASE("coefficients depend on the training part only") {
    // With size-1 grids nothing is selected on validation data, so altering
    // the validation part must leave every fitted coefficient unchanged.
    const PipelineConfig cfg = tiny_config();
    const SynthData d = bundle(4);
    const PreparedData a = prepared(d, true, cfg);
    Matrix ecog = d.ecog.samples();
    Matrix flex = d.flex.flexion();
    ecog.bottomRows(3750).array() *= -3.0;
    flex.bottomRows(3750).array() += 5.0;
    const PreparedData b =
        prepare_data(MultichannelSignal(ecog, d.ecog.rate_hz(), d.ecog.channel_ids()), FlexionRecord(flex, d.flex.rate_hz()),
                     d.segments.segments(), 0.0, DelayDirection::EcogLeads, 1);
    const TrainedDecoder da = train_decoder(a, cfg).decoder;
    const TrainedDecoder db = train_decoder(b, cfg).decoder;
    CHECK(da.state_model.C == db.state_model.C);
    for (std::size_t k = 0; k < 6; ++k) CHECK(da.flex_bank.models[k].H == db.flex_bank.models[k].H);
    CHECK(da.global_model->H == db.global_model->H);
}

TEST_CASE("training without segments labels from the flexion record") {
    const PipelineConfig cfg = tiny_config();
    const SynthData d = bundle(5);
    const TrainOutput out = train_decoder(prepared(d, false, cfg), cfg);
    CHECK(out.report["label_source"] == "labels_from_flexion");

    const SynthData test = bundle(6);
    const PreparedData p = prepared(test, false, cfg);
    DecodeRequest req;
    req.mode = DecodeMode::Forced;
    const DecodeOutput forced = decode_prepared(p, out.decoder, req);
    CHECK(forced.report["state_source"] == "labels_from_flexion");
    REQUIRE(forced.correlation.has_value());
    CHECK(forced.correlation->average > 0.8);
}

TEST_CASE("decoding is deterministic and archives reload bit-identically") {
    const PipelineConfig cfg = tiny_config();
    const SynthData d = bundle(7);
    const TrainOutput a = train_decoder(prepared(d, true, cfg), cfg);
    const TrainOutput b = train_decoder(prepared(d, true, cfg), cfg);
    CHECK(io::decoder_to_json(a.decoder).dump() == io::decoder_to_json(b.decoder).dump());
    CHECK(a.report.dump() == b.report.dump());

    const auto path = std::filesystem::temp_directory_path() / "flexdecode_pipeline_dec.json";
    io::save_decoder(path, a.decoder, a.report);
    const TrainedDecoder loaded = io::load_decoder(path);
    const SynthData test = bundle(8);
    const PreparedData p = prepared(test, true, cfg);
    const DecodeOutput x = decode_prepared(p, a.decoder);
    const DecodeOutput y = decode_prepared(p, loaded);
    CHECK(x.result.flexion_hat == y.result.flexion_hat);
    CHECK(x.result.states_hat.states() == y.result.states_hat.states());
}

TEST_CASE("decoder preprocessing must match the input") {
    const PipelineConfig cfg = tiny_config();
    const SynthData d = bundle(9);
    const TrainOutput out = train_decoder(prepared(d, true, cfg), cfg);
    const MultichannelSignal other_rate(d.ecog.samples(), 500.0);
    CHECK_THROWS_AS(prepare_data(other_rate, std::nullopt, std::nullopt, out.decoder), ValidationError);
    const PreparedData no_flex = prepare_data(d.ecog, std::nullopt, std::nullopt, out.decoder);
    DecodeRequest req;
    req.mode = DecodeMode::Forced;
    CHECK_THROWS_AS(decode_prepared(no_flex, out.decoder, req), Error);
    CHECK_FALSE(decode_prepared(no_flex, out.decoder).correlation.has_value());
}

TEST_CASE("training rejects records without flexion or too short") {
    const PipelineConfig cfg = tiny_config();
    const SynthData d = bundle(10);
    PreparedData p = prepared(d, true, cfg);
    p.flex.reset();
    CHECK_THROWS_AS(train_decoder(p, cfg), Error);
    const SynthData tiny = bundle(10, 120);
    CHECK_THROWS_AS(train_decoder(prepared(tiny, true, cfg), cfg), Error);
}
