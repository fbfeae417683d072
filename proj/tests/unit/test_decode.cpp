#include "flexdecode/decode.hpp"
#include "flexdecode/features.hpp"
#include "flexdecode/synth.hpp"

#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace flexdecode;

namespace {

StateModel one_feature_model(std::initializer_list<double> scores) {
    StateModel m;
    m.C = Matrix(1, kNumStates);
    Index j = 0;
    for (double s : scores) m.C(0, j++) = s;
    m.feature_names = {FeatureName{"1", 0, 0, "ar1"}.encode()};
    m.selected_channels = {"1"};
    m.shift_ts = 0;
    return m;
}

FlexModelBank bank_of(const FlexStateModel& m) {
    FlexModelBank b;
    b.models.fill(m);
    return b;
}

SegmentList source_segments(const SegmentList& all, const FeatureMatrix& f) {
    std::vector<Segment> out;
    const SegmentList clipped = all.clip(f.first_sample(), f.end_sample());
    for (const auto& s : clipped.segments()) {
        out.push_back({s.start + f.first_sample(), s.end + f.first_sample(), s.state});
    }
    return SegmentList(out, all.n_samples());
}

// A decoder trained directly on a synthetic bundle with its true segments.
TrainedDecoder synthetic_decoder(const SynthData& d) {
    const StateFeatureConfig scfg{25, 2, 2, 10};
    const FlexFeatureConfig fcfg{3, 0.4, 10};
    const FeatureMatrix sf = build_state_features(d.ecog, scfg);
    const StateLabelMatrix Y = labels_from_states(d.states.slice(sf.first_sample(), sf.end_sample()));
    const StateModelFit st = train_state_model(sf, Y, 1e-3 * ssa_lambda_max(sf.values(), Y.values()));

    const FeatureMatrix ff = build_flex_features(d.ecog, fcfg);
    std::array<double, kNumStates> lambdas{};
    lambdas.fill(1e-2);
    std::array<Index, kNumStates> M{};
    M.fill(ff.n_features());

    TrainedDecoder dec;
    dec.preprocessing.delay_ms = 0.0;
    dec.preprocessing.downsample_factor = 1;
    dec.preprocessing.raw_rate_hz = d.ecog.rate_hz();
    dec.preprocessing.working_rate_hz = d.ecog.rate_hz();
    dec.preprocessing.channel_ids = d.ecog.channel_ids();
    dec.preprocessing.state_features = scfg;
    dec.preprocessing.flex_features = fcfg;
    dec.state_model = st.model;
    dec.flex_bank = train_flex_models(ff, d.flex, source_segments(d.segments, ff), lambdas, M);
    dec.global_model = train_global_model(ff, d.flex, 1e-2);
    return dec;
}

SynthData bundle(std::uint64_t seed) {
    SynthSpec spec;
    spec.n_samples = 8000;
    spec.seed = seed;
    return generate(spec);
}

}  // namespace

TEST_CASE("predict_state examples") {
    const Vector x = Vector::Ones(1);
    const StatePrediction p = predict_state(x, one_feature_model({0.1, 0.9, 0.2, 0, 0, 0}));
    CHECK(p.state == 2);
    CHECK(p.scores(1) == doctest::Approx(0.9));
    CHECK_FALSE(p.degenerate);
    CHECK(predict_state(x, one_feature_model({0.3, 0.3, 0.3, 0.3, 0.3, 0.3})).state == 1);
    CHECK(predict_state(x, one_feature_model({0, 0, 0, 0, 0.5, 0.5})).state == 5);
    const StatePrediction z = predict_state(x, one_feature_model({0, 0, 0, 0, 0, 0}));
    CHECK(z.state == 1);
    CHECK(z.scores.isZero(0.0));
    CHECK(z.degenerate);
}

TEST_CASE("predict_state is invariant to positive scaling of the input") {
    StateModel m;
    m.C = oracle::randn(8, 6, 3);
    for (int i = 0; i < 8; ++i) m.feature_names.push_back(FeatureName{std::to_string(i), 0, 0, "ar1"}.encode());
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const Vector x = oracle::randn(8, 1, 100 + seed).col(0);
        const StatePrediction a = predict_state(x, m);
        const StatePrediction b = predict_state(3.5 * x, m);
        CHECK(a.state == b.state);
        CHECK((b.scores - 3.5 * a.scores).norm() < 1e-12 * (1.0 + a.scores.norm()));
    }
}

TEST_CASE("decode_sample examples") {
    FlexStateModel bias_only;
    bias_only.H = Matrix::Zero(4, 5);
    bias_only.H.row(3) << 1, 2, 3, 4, 5;
    bias_only.feature_index_set = {0, 2, 5};
    const FlexModelBank b = bank_of(bias_only);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Vector y = decode_sample(oracle::randn(6, 1, seed).col(0), 3, b);
        CHECK(y == bias_only.H.row(3).transpose());
    }

    FlexStateModel pass;
    pass.H = Matrix::Zero(6, 5);
    pass.H.topRows(5) = Matrix::Identity(5, 5);
    pass.feature_index_set = {1, 2, 3, 4, 5};
    const Vector x = oracle::randn(7, 1, 9).col(0);
    CHECK(decode_sample(x, 6, bank_of(pass)) == x.segment(1, 5));
    CHECK(apply_flex_model(x, pass) == x.segment(1, 5));
}

TEST_CASE("pearson correlation") {
    const Vector a = oracle::randn(100, 1, 1).col(0);
    const Vector b = oracle::randn(100, 1, 2).col(0) + 0.5 * a;
    CHECK(pearson_corr(a, a) == doctest::Approx(1.0));
    CHECK(pearson_corr(a, -a) == doctest::Approx(-1.0));
    CHECK(pearson_corr(a, b) == doctest::Approx(oracle::pearson(a, b)).epsilon(1e-12));
    CHECK(pearson_corr(a, b) == doctest::Approx(pearson_corr(b, a)).epsilon(1e-14));
    const Vector affine = (3.0 * b.array() + 10.0).matrix();
    CHECK(pearson_corr(a, affine) == doctest::Approx(pearson_corr(a, b)).epsilon(1e-12));
    CHECK_THROWS_AS(pearson_corr(a, Vector::Constant(100, 2.0)), UndefinedCorrelationError);
    CHECK_THROWS_AS(pearson_corr(a, a.head(50)), ParameterError);
}

TEST_CASE("evaluate applies the finger mask and skips undefined fingers") {
    const Matrix truth = oracle::randn(200, 5, 4);
    const CorrelationReport perfect = evaluate(truth, truth);
    CHECK(perfect.average == doctest::Approx(1.0));
    for (double c : perfect.correlation) CHECK(c == doctest::Approx(1.0));
    CHECK_FALSE(perfect.in_average[3]);

    Matrix pred = truth;
    pred.col(3) = oracle::randn(200, 1, 5).col(0);
    CHECK(evaluate(pred, truth, true).average == doctest::Approx(1.0));
    const CorrelationReport all = evaluate(pred, truth, false);
    const double c4 = oracle::pearson(pred.col(3), truth.col(3));
    CHECK(all.average == doctest::Approx((4.0 + c4) / 5.0));

    Matrix flat = truth;
    flat.col(0).setConstant(1.0);
    const CorrelationReport u = evaluate(flat, truth);
    CHECK_FALSE(u.defined[0]);
    CHECK_FALSE(u.in_average[0]);
    CHECK(u.average == doctest::Approx(1.0));
    CHECK_FALSE(u.warnings.empty());

    std::vector<CorrelationReport> subjects{perfect, all};
    CHECK(average_over_subjects(subjects) == doctest::Approx((1.0 + all.average) / 2.0));
}

TEST_CASE("hold_upsample repeats rows") {
    Matrix m(2, 2);
    m << 1, 2, 3, 4;
    const Matrix u = hold_upsample(m, 3);
    REQUIRE(u.rows() == 6);
    CHECK(u.row(2) == m.row(0));
    CHECK(u.row(3) == m.row(1));
}

TEST_CASE("switching decode on a synthetic bundle") {
    const SynthData train = bundle(21);
    const TrainedDecoder dec = synthetic_decoder(train);
    const SynthData test = bundle(22);

    const DecodeResult est = run_decoder(test.ecog, dec);
    const DecodeResult forced = run_decoder(test.ecog, dec, test.states);
    REQUIRE(forced.flexion_hat.rows() == test.ecog.n_samples());
    CHECK(forced.flexion_hat.allFinite());

    SUBCASE("forced true states give high per-finger correlation") {
        const Index b = forced.valid_begin, n = forced.valid_end - forced.valid_begin;
        for (Index j = 0; j < 5; ++j) {
            const double r = pearson_corr(forced.flexion_hat.col(j).segment(b, n), test.flex.flexion().col(j).segment(b, n));
            CHECK(r > 0.95);
        }
    }

    SUBCASE("states_hat is the argmax of the score rows") {
        for (Index t = est.valid_begin; t < est.valid_end; ++t) {
            Index k = 0;
            est.scores.row(t).maxCoeff(&k);
            CHECK(est.states_hat[t] == k + 1);
        }
    }

    SUBCASE("forcing the estimated states is bit-identical") {
        const DecodeResult again = run_decoder(test.ecog, dec, est.states_hat);
        CHECK(again.flexion_hat == est.flexion_hat);
        CHECK(again.states_hat.states() == est.states_hat.states());
    }

    SUBCASE("estimated and forced outputs differ only where the states differ") {
        for (Index t = est.valid_begin; t < est.valid_end; ++t) {
            if (est.states_hat[t] == test.states[t]) CHECK(est.flexion_hat.row(t) == forced.flexion_hat.row(t));
        }
    }

    SUBCASE("all-rest forcing decodes with the rest model everywhere") {
        const StateSequence rest(std::vector<int>(static_cast<std::size_t>(test.ecog.n_samples()), 6));
        const DecodeResult r = run_decoder(test.ecog, dec, rest);
        const FeatureMatrix ff = build_flex_features(test.ecog, dec.preprocessing.flex_features);
        for (Index t = r.valid_begin; t < r.valid_end; t += 37) {
            const Vector expected = decode_sample(ff.values().row(t - ff.first_sample()).transpose(), 6, dec.flex_bank);
            CHECK((r.flexion_hat.row(t).transpose() - expected).norm() < 1e-12);
        }
        // The generator holds every finger at baseline in the rest state, so
        // the rest model's response is nearly constant.
        const Index b = r.valid_begin, n = r.valid_end - r.valid_begin;
        for (Index j = 0; j < 5; ++j) {
            const Vector col = r.flexion_hat.col(j).segment(b, n);
            const Vector tcol = test.flex.flexion().col(j).segment(b, n);
            const double sd = std::sqrt((col.array() - col.mean()).square().mean());
            const double tsd = std::sqrt((tcol.array() - tcol.mean()).square().mean());
            CHECK(sd < 0.1 * tsd);
        }
    }

    SUBCASE("the global baseline decodes without switching") {
        DecodeOptions opts;
        opts.use_global_model = true;
        const DecodeResult g = run_decoder(test.ecog, dec, std::nullopt, opts);
        const FeatureMatrix ff = build_flex_features(test.ecog, dec.preprocessing.flex_features);
        const Index t = g.valid_begin + 100;
        CHECK((g.flexion_hat.row(t).transpose() -
               apply_flex_model(ff.values().row(t - ff.first_sample()).transpose(), *dec.global_model))
                  .norm() < 1e-12);
    }

    SUBCASE("edges repeat the nearest decoded sample") {
        for (Index t = 0; t < est.valid_begin; ++t) CHECK(est.flexion_hat.row(t) == est.flexion_hat.row(est.valid_begin));
        const Index last = est.valid_end - 1;
        for (Index t = est.valid_end; t < est.flexion_hat.rows(); ++t) CHECK(est.flexion_hat.row(t) == est.flexion_hat.row(last));
    }

    SUBCASE("input validation") {
        const MultichannelSignal wrong_rate(test.ecog.samples(), 100.0);
        CHECK_THROWS_AS(run_decoder(wrong_rate, dec), ValidationError);
        CHECK_THROWS_AS(run_decoder(test.ecog, dec, test.states.slice(0, 10)), ValidationError);
    }
}
