#include "flexdecode/model.hpp"

#include "flexdecode/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>

namespace flexdecode {

double percentile(Vector values, double q) {
    if (values.size() == 0) throw ParameterError("percentile of an empty vector");
    if (q < 0.0 || q > 100.0) throw ParameterError("percentile must be in [0, 100]");
    std::sort(values.data(), values.data() + values.size());
    const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<Index>(std::floor(pos));
    const Index hi = std::min<Index>(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values(lo) + frac * (values(hi) - values(lo));
}

Labeling labels_from_flexion(const FlexionRecord& flex, const LabelingConfig& cfg) {
    if (!(cfg.threshold_frac > 0.0 && cfg.threshold_frac < 1.0)) {
        throw ParameterError("threshold fraction must be in (0, 1)");
    }
    const Index n = flex.n_samples();
    Matrix normalized = Matrix::Zero(n, kNumFingers);

    Index window = 0;
    if (cfg.smooth_width_s > 0.0) {
        window = std::min(savgol_window_length(cfg.smooth_width_s, flex.rate_hz()), n % 2 == 1 ? n : n - 1);
    }

    for (Index j = 0; j < kNumFingers; ++j) {
        const Vector x = flex.flexion().col(j);
        const double baseline = percentile(x, 50.0);
        Vector dev = (x.array() - baseline).abs().matrix();
        if (window > cfg.smooth_order) dev = savgol_smooth(dev, cfg.smooth_order, window);
        double scale = percentile(dev, 95.0);
        if (!(scale > 0.0)) scale = dev.maxCoeff();
        if (!(scale > 0.0)) continue;  // finger never leaves its baseline
        normalized.col(j) = dev / scale;
    }

    std::vector<int> states(static_cast<std::size_t>(n), kRestState);
    for (Index t = 0; t < n; ++t) {
        double best = cfg.threshold_frac;
        for (Index j = 0; j < kNumFingers; ++j) {
            if (normalized(t, j) > best) {
                best = normalized(t, j);
                states[static_cast<std::size_t>(t)] = static_cast<int>(j) + 1;
            }
        }
    }
    StateSequence seq(std::move(states));
    SegmentList segs = SegmentList::from_states(seq);
    return {std::move(seq), std::move(segs)};
}

StateLabelMatrix labels_from_states(const StateSequence& s) {
    Matrix Y = Matrix::Constant(s.size(), kNumStates, -1.0);
    for (Index t = 0; t < s.size(); ++t) Y(t, s[t] - 1) = 1.0;
    return StateLabelMatrix(std::move(Y));
}

ChannelScore score_channels(const MultichannelSignal& sig, const StateLabelMatrix& labels,
                            const StateFeatureConfig& cfg) {
    if (labels.n_rows() != sig.n_samples()) {
        throw ParameterError("label rows do not match signal samples");
    }
    const FeatureMatrix feats = build_ar_features(sig, cfg.window_len, cfg.ar_order, 1);
    const Matrix& X = feats.values();
    const Matrix& Y = labels.values();

    ChannelScore out;
    out.channel_ids = sig.channel_ids();
    Matrix C;
    try {
        C = ridge_fit(X, Y, 0.0).H;
    } catch (const RankDeficiencyError&) {
        const Matrix Xc = X.rowwise() - X.colwise().mean();
        const double lambda = 1e-8 * Xc.squaredNorm();
        out.warnings.push_back("channel-selection features are rank deficient; using ridge with lambda " +
                               std::to_string(lambda));
        C = ridge_fit(X, Y, lambda > 0.0 ? lambda : 1e-12).H;
    }
    C.conservativeResize(X.cols(), Eigen::NoChange);
    out.scores = C.cwiseAbs().rowwise().sum();

    out.ranking.resize(static_cast<std::size_t>(sig.n_channels()));
    std::iota(out.ranking.begin(), out.ranking.end(), Index{0});
    std::stable_sort(out.ranking.begin(), out.ranking.end(),
                     [&](Index a, Index b) { return out.scores(a) > out.scores(b); });
    return out;
}

std::vector<std::string> select_top_channels(const ChannelScore& scores, Index K) {
    const auto n = static_cast<Index>(scores.channel_ids.size());
    if (K < 1 || K > n) throw ParameterError("K must be in 1..n_channels");
    std::vector<Index> picked(scores.ranking.begin(), scores.ranking.begin() + K);
    std::sort(picked.begin(), picked.end());
    std::vector<std::string> out;
    out.reserve(picked.size());
    for (Index i : picked) out.push_back(scores.channel_ids[static_cast<std::size_t>(i)]);
    return out;
}

int shift_from_names(const std::vector<std::string>& names) {
    int shift = 0;
    for (const auto& n : names) shift = std::max(shift, FeatureName::decode(n).shift);
    return shift;
}

StateModelFit train_state_model(const FeatureMatrix& features, const StateLabelMatrix& Y, double lambda_s,
                                const SsaOptions& opts) {
    if (features.n_rows() != Y.n_rows()) throw ParameterError("feature rows do not match label rows");
    return state_model_from_solution(features.names(), ssa_fit(features.values(), Y.values(), lambda_s, opts));
}

StateModelFit state_model_from_solution(const std::vector<std::string>& feature_names, SsaSolution ssa) {
    StateModelFit fit;
    fit.model.C = std::move(ssa.C);
    fit.model.feature_names = feature_names;
    fit.model.shift_ts = shift_from_names(feature_names);
    fit.model.active_rows = std::move(ssa.active_rows);
    fit.model.degenerate = fit.model.active_rows.empty();
    std::set<std::string> seen;
    for (const auto& n : feature_names) {
        auto ch = FeatureName::decode(n).channel;
        if (seen.insert(ch).second) fit.model.selected_channels.push_back(ch);
    }
    fit.converged = ssa.converged;
    fit.iterations = ssa.iterations;
    fit.warnings = std::move(ssa.warnings);
    if (fit.model.degenerate) fit.warnings.push_back("state model is all zero (lambda_s too large)");
    fit.model.validate();
    return fit;
}

Matrix flexion_rows(const FeatureMatrix& features, const FlexionRecord& flex) {
    if (features.end_sample() > flex.n_samples()) {
        throw ParameterError("flexion record shorter than the feature range");
    }
    return flex.flexion().middleRows(features.first_sample(), features.n_rows());
}

StateTrainingSet extract_segments(const FeatureMatrix& features, const FlexionRecord& flex,
                                  const SegmentList& segs, int k) {
    if (k < 1 || k > kNumStates) throw ParameterError("state must be in 1..6");
    Index rows = 0;
    for (const auto& s : segs.segments()) {
        if (s.state != k) continue;
        if (s.start < features.first_sample() || s.end > features.end_sample() || s.end > flex.n_samples()) {
            throw ParameterError("segment [" + std::to_string(s.start) + ", " + std::to_string(s.end) +
                                 ") lies outside the feature range");
        }
        rows += s.end - s.start;
    }
    if (rows == 0) {
        throw EmptyTrainingSetError("no segment with state " + std::to_string(k));
    }
    StateTrainingSet set{Matrix(rows, features.n_features()), Matrix(rows, kNumFingers)};
    Index r = 0;
    for (const auto& s : segs.segments()) {
        if (s.state != k) continue;
        const Index len = s.end - s.start;
        set.X.middleRows(r, len) = features.values().middleRows(s.start - features.first_sample(), len);
        set.Y.middleRows(r, len) = flex.flexion().middleRows(s.start, len);
        r += len;
    }
    return set;
}

std::vector<Index> rank_features(const Matrix& H_with_bias) {
    const Index d = H_with_bias.rows() - 1;
    const Vector strength = H_with_bias.topRows(d).cwiseAbs().rowwise().sum();
    std::vector<Index> order(static_cast<std::size_t>(d));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return strength(a) > strength(b); });
    return order;
}

namespace {

FlexStateModel prune(const Matrix& full, double lambda, Index M, bool refit,
                     const std::function<Matrix(const std::vector<Index>&)>& refit_fn) {
    const Index d = full.rows() - 1;
    if (M < 1 || M > d) throw ParameterError("M must be in 1..n_features");
    FlexStateModel out;
    out.lambda = lambda;
    if (M == d) {
        out.H = full;
        out.feature_index_set.resize(static_cast<std::size_t>(d));
        std::iota(out.feature_index_set.begin(), out.feature_index_set.end(), Index{0});
        return out;
    }
    std::vector<Index> keep = rank_features(full);
    keep.resize(static_cast<std::size_t>(M));
    std::sort(keep.begin(), keep.end());
    out.feature_index_set = keep;
    if (refit) {
        out.H = refit_fn(keep);
    } else {
        out.H.resize(M + 1, full.cols());
        for (Index a = 0; a < M; ++a) out.H.row(a) = full.row(keep[static_cast<std::size_t>(a)]);
        out.H.row(M) = full.row(d);
    }
    return out;
}

}  // namespace

FlexStateModel fit_flex_state(const Matrix& X, const Matrix& Y, double lambda, Index M, bool refit) {
    const Matrix full = ridge_fit(X, Y, lambda, true).H;
    return prune(full, lambda, M, refit, [&](const std::vector<Index>& keep) {
        Matrix Xs(X.rows(), static_cast<Index>(keep.size()));
        for (std::size_t a = 0; a < keep.size(); ++a) Xs.col(static_cast<Index>(a)) = X.col(keep[a]);
        return ridge_fit(Xs, Y, lambda, true).H;
    });
}

FlexStateModel fit_flex_state(const RidgeGram& gram, double lambda, Index M, bool refit) {
    const Matrix full = gram.solve(lambda);
    return prune(full, lambda, M, refit, [&](const std::vector<Index>& keep) { return gram.solve(lambda, keep); });
}

FlexModelBank train_flex_models(const FeatureMatrix& features, const FlexionRecord& flex, const SegmentList& segs,
                                const std::array<double, kNumStates>& lambdas,
                                const std::array<Index, kNumStates>& M, bool refit) {
    FlexModelBank bank;
    bank.shift_tau = shift_from_names(features.names());
    for (int k = 1; k <= kNumStates; ++k) {
        const auto i = static_cast<std::size_t>(k - 1);
        const StateTrainingSet set = extract_segments(features, flex, segs, k);
        bank.models[i] = fit_flex_state(set.X, set.Y, lambdas[i], M[i], refit);
    }
    bank.validate(features.n_features());
    return bank;
}

FlexStateModel train_global_model(const FeatureMatrix& features, const FlexionRecord& flex, double lambda) {
    const Matrix Y = flexion_rows(features, flex);
    return fit_flex_state(features.values(), Y, lambda, features.n_features(), true);
}

}  // namespace flexdecode
