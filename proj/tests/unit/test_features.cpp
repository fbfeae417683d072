#include "flexdecode/dsp.hpp"
#include "flexdecode/features.hpp"

#include "support/oracles.hpp"

#include <doctest.h>

#include <set>
#include <tuple>

using namespace flexdecode;

namespace {

MultichannelSignal ar_signal(Index n, Index channels, std::uint64_t seed) {
    Matrix m(n, channels);
    for (Index c = 0; c < channels; ++c) {
        m.col(c) = oracle::ar_series({0.3 + 0.01 * static_cast<double>(c % 20), 0.1}, n, 1.0, seed + static_cast<std::uint64_t>(c));
    }
    return MultichannelSignal(m, 250.0);
}

void check_names(const FeatureMatrix& f) {
    CHECK(static_cast<Index>(f.names().size()) == f.n_features());
    std::set<std::tuple<std::string, int, int, std::string>> seen;
    for (const auto& n : f.names()) {
        const FeatureName d = FeatureName::decode(n);
        CHECK(d.encode() == n);
        seen.insert({d.channel, d.direction, d.shift, d.kind});
    }
    CHECK(static_cast<Index>(seen.size()) == f.n_features());
}

}  // namespace

TEST_CASE("state feature dimension is channels x 3 shifts x 2 coefficients") {
    StateFeatureConfig cfg{30, 2, 2, 5};
    const auto f48 = build_state_features(ar_signal(80, 48, 1), cfg);
    CHECK(f48.n_features() == 48 * 3 * 2);
    CHECK(f48.first_sample() == 5);
    CHECK(f48.n_rows() == 70);
    check_names(f48);
    CHECK(build_state_features(ar_signal(80, 64, 2), cfg).n_features() == 384);
}

TEST_CASE("flexion feature dimension is channels x 3 shifts") {
    const FlexFeatureConfig cfg{3, 0.1, 4};
    const auto f = build_flex_features(ar_signal(80, 48, 3), cfg);
    CHECK(f.n_features() == 144);
    CHECK(f.first_sample() == 4);
    CHECK(f.end_sample() == 76);
    check_names(f);
}

TEST_CASE("zero shift makes the three blocks identical") {
    const auto sig = ar_signal(200, 4, 4);
    const auto s = build_state_features(sig, {50, 2, 2, 0});
    const Index b = s.n_features() / 3;
    CHECK(s.values().leftCols(b) == s.values().middleCols(b, b));
    CHECK(s.values().leftCols(b) == s.values().rightCols(b));
    check_names(s);

    const auto f = build_flex_features(sig, {3, 0.1, 0});
    const Index fb = f.n_features() / 3;
    CHECK(f.values().leftCols(fb) == f.values().middleCols(fb, fb));
    CHECK(f.values().leftCols(fb) == f.values().rightCols(fb));
    check_names(f);
}

TEST_CASE("constant channels give constant flexion features") {
    const MultichannelSignal sig(Matrix::Constant(120, 3, -1.5), 250.0);
    const auto f = build_flex_features(sig, {3, 0.1, 7});
    CHECK((f.values().array() + 1.5).abs().maxCoeff() < 1e-12);
}

TEST_CASE("flexion feature blocks hold the smoothed signal at t, t - tau, t + tau") {
    const auto sig = ar_signal(150, 3, 5);
    const FlexFeatureConfig cfg{3, 0.1, 6};
    const auto f = build_flex_features(sig, cfg);
    const Matrix sm = savgol_filter(sig, 3, 0.1).samples();
    for (Index r = 0; r < f.n_rows(); r += 7) {
        const Index t = f.first_sample() + r;
        for (Index c = 0; c < 3; ++c) {
            CHECK(f.values()(r, c) == sm(t, c));
            CHECK(f.values()(r, 3 + c) == sm(t - 6, c));
            CHECK(f.values()(r, 6 + c) == sm(t + 6, c));
        }
    }
}

TEST_CASE("single-channel state features equal the direct dsp pipeline") {
    const auto sig = ar_signal(600, 1, 6);
    const Vector x = sig.samples().col(0);
    const auto f = build_state_features(sig, {100, 3, 2, 0});
    const Matrix direct = spline_interpolate(ar_window_track(x, 100, 3), 600);
    CHECK(f.values().leftCols(2) == direct.leftCols(2));
    CHECK(build_ar_features(sig, 100, 3, 2).values() == direct.leftCols(2));

    // Shifted blocks re-run the pipeline on the shifted signal.
    const Index ts = 20;
    const auto g = build_state_features(sig, {100, 3, 2, static_cast<int>(ts)});
    const Index rows = 600 - 2 * ts;
    const Matrix back = spline_interpolate(ar_window_track(x.segment(0, rows), 100, 3), rows);
    const Matrix mid = spline_interpolate(ar_window_track(x.segment(ts, rows), 100, 3), rows);
    const Matrix fwd = spline_interpolate(ar_window_track(x.segment(2 * ts, rows), 100, 3), rows);
    CHECK(g.values().leftCols(2) == back.leftCols(2));
    CHECK(g.values().middleCols(2, 2) == mid.leftCols(2));
    CHECK(g.values().rightCols(2) == fwd.leftCols(2));
}

TEST_CASE("flexion features are translation equivariant") {
    const auto sig = ar_signal(300, 2, 7);
    const Index s = 17;
    const MultichannelSignal moved(sig.samples().bottomRows(300 - s).eval(), 250.0);
    const FlexFeatureConfig cfg{3, 0.1, 5};
    const auto a = build_flex_features(sig, cfg);
    const auto b = build_flex_features(moved, cfg);
    // Rows whose Savitzky-Golay windows are complete in both signals.
    for (Index t = s + 30; t < 260; ++t) {
        const Matrix ra = a.values().row(t - a.first_sample());
        const Matrix rb = b.values().row(t - s - b.first_sample());
        CHECK((ra - rb).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("state features are translation equivariant away from the ends") {
    const auto sig = ar_signal(2000, 1, 8);
    const Index W = 100;
    const Index s = 2 * W;  // keeps the window grid aligned
    const MultichannelSignal moved(sig.samples().bottomRows(2000 - s).eval(), 250.0);
    const StateFeatureConfig cfg{W, 2, 2, 0};
    const auto a = build_state_features(sig, cfg);
    const auto b = build_state_features(moved, cfg);
    // The natural spline is global; the influence of the dropped knots decays
    // geometrically, so rows several knots inside agree closely.
    double worst = 0.0;
    for (Index t = s + 6 * W; t < 2000 - 6 * W; ++t) {
        worst = std::max(worst, (a.values().row(t) - b.values().row(t - s)).cwiseAbs().maxCoeff());
    }
    const double range = a.values().maxCoeff() - a.values().minCoeff();
    CHECK(worst < 1e-3 * range);
}

TEST_CASE("feature builder errors") {
    const auto sig = ar_signal(100, 2, 9);
    CHECK_THROWS_AS(build_state_features(sig, {60, 2, 2, 0}), ParameterError);
    CHECK_THROWS_AS(build_state_features(sig, {20, 2, 3, 0}), ParameterError);
    CHECK_THROWS_AS(build_state_features(sig, {20, 2, 2, -1}), ParameterError);
    CHECK_THROWS_AS(build_flex_features(sig, {3, 0.4, 0}), ParameterError);
    CHECK_THROWS_AS(build_flex_features(sig, {3, 0.1, 40}), ParameterError);
    const MultichannelSignal flat(Matrix::Ones(200, 1), 250.0);
    CHECK_THROWS_AS(build_state_features(flat, {50, 2, 2, 0}), DegenerateSegmentError);
}
