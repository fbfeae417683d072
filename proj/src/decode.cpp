#include "flexdecode/decode.hpp"

#include "flexdecode/features.hpp"

#include <algorithm>
#include <cmath>

namespace flexdecode {

StatePrediction predict_state(const Vector& x, const StateModel& model) {
    if (x.size() != model.C.rows()) {
        throw ParameterError("state feature dimension " + std::to_string(x.size()) + " does not match model (" +
                             std::to_string(model.C.rows()) + ")");
    }
    StatePrediction p;
    p.scores = model.C.transpose() * x;
    Index best = 0;
    for (Index k = 1; k < kNumStates; ++k) {
        if (p.scores(k) > p.scores(best)) best = k;
    }
    p.state = static_cast<int>(best) + 1;
    p.degenerate = model.degenerate || model.C.isZero(0.0);
    return p;
}

Vector apply_flex_model(const Vector& flex_features, const FlexStateModel& model) {
    const auto m = static_cast<Index>(model.feature_index_set.size());
    Vector z(m + 1);
    for (Index a = 0; a < m; ++a) {
        const Index idx = model.feature_index_set[static_cast<std::size_t>(a)];
        if (idx < 0 || idx >= flex_features.size()) throw ParameterError("feature index out of range");
        z(a) = flex_features(idx);
    }
    z(m) = 1.0;
    return model.H.transpose() * z;
}

Vector decode_sample(const Vector& flex_features, int state, const FlexModelBank& bank) {
    if (state < 1 || state > kNumStates) throw ParameterError("state must be in 1..6");
    return apply_flex_model(flex_features, bank.models[static_cast<std::size_t>(state - 1)]);
}

DecodeResult run_decoder(const MultichannelSignal& ecog, const TrainedDecoder& dec,
                         const std::optional<StateSequence>& forced_states, const DecodeOptions& opts) {
    const auto& pre = dec.preprocessing;
    if (std::abs(ecog.rate_hz() - pre.working_rate_hz) > 1e-9 * pre.working_rate_hz) {
        throw ValidationError("ECoG rate " + std::to_string(ecog.rate_hz()) + " Hz does not match the decoder's " +
                              std::to_string(pre.working_rate_hz) + " Hz working rate");
    }
    if (!pre.channel_ids.empty() && ecog.channel_ids() != pre.channel_ids) {
        throw ValidationError("ECoG channels do not match the channels the decoder was trained on");
    }
    const Index n = ecog.n_samples();
    if (forced_states && forced_states->size() != n) {
        throw ValidationError("forced state sequence length does not match the ECoG length");
    }

    StateFeatureConfig scfg = pre.state_features;
    scfg.shift_ts = dec.state_model.shift_ts;
    FlexFeatureConfig fcfg = pre.flex_features;
    fcfg.shift_tau = dec.flex_bank.shift_tau;

    const FeatureMatrix sfeat = build_state_features(ecog.select_channels(dec.state_model.selected_channels), scfg);
    const FeatureMatrix ffeat = build_flex_features(ecog, fcfg);
    return decode_from_features(n, sfeat, dec.state_model, ffeat, dec.flex_bank, dec.global_model, forced_states,
                                opts);
}

DecodeResult decode_from_features(Index n, const FeatureMatrix& sfeat, const StateModel& state_model,
                                  const FeatureMatrix& ffeat, const FlexModelBank& bank,
                                  const std::optional<FlexStateModel>& global_model,
                                  const std::optional<StateSequence>& forced_states, const DecodeOptions& opts) {
    if (sfeat.names() != state_model.feature_names) {
        throw ValidationError("state features do not match the trained state model");
    }
    if (forced_states && forced_states->size() != n) {
        throw ValidationError("forced state sequence length does not match the ECoG length");
    }

    DecodeResult res;
    res.valid_begin = std::max(sfeat.first_sample(), ffeat.first_sample());
    res.valid_end = std::min({sfeat.end_sample(), ffeat.end_sample(), n});
    if (res.valid_end <= res.valid_begin) throw ParameterError("no sample is covered by both feature sets");

    Matrix scores = sfeat.values() * state_model.C;  // rows aligned with sfeat
    if (opts.score_smoothing > 1) {
        const Index h = opts.score_smoothing / 2;
        Matrix smoothed(scores.rows(), scores.cols());
        for (Index r = 0; r < scores.rows(); ++r) {
            const Index lo = std::max<Index>(0, r - h);
            const Index hi = std::min<Index>(scores.rows() - 1, r + h);
            smoothed.row(r) = scores.middleRows(lo, hi - lo + 1).colwise().mean();
        }
        scores = std::move(smoothed);
    }

    const bool degenerate = state_model.degenerate || state_model.C.isZero(0.0);
    if (degenerate) {
        res.warnings.push_back("WARNING: state model is all zero; every sample is decoded with state 1");
    }
    if (opts.use_global_model && !global_model) {
        throw ValidationError("decoder has no global baseline model");
    }

    res.flexion_hat.resize(n, kNumFingers);
    res.scores.resize(n, kNumStates);
    std::vector<int> states(static_cast<std::size_t>(n), 1);
    for (Index t = res.valid_begin; t < res.valid_end; ++t) {
        const Vector s = scores.row(t - sfeat.first_sample()).transpose();
        Index best = 0;
        for (Index k = 1; k < kNumStates; ++k) {
            if (s(k) > s(best)) best = k;
        }
        const int k_hat = forced_states ? (*forced_states)[t] : static_cast<int>(best) + 1;
        const Vector x = ffeat.values().row(t - ffeat.first_sample()).transpose();
        res.flexion_hat.row(t) = (opts.use_global_model ? apply_flex_model(x, *global_model)
                                                        : decode_sample(x, k_hat, bank))
                                     .transpose();
        res.scores.row(t) = s.transpose();
        states[static_cast<std::size_t>(t)] = k_hat;
    }
    for (Index t = 0; t < n; ++t) {
        if (t >= res.valid_begin && t < res.valid_end) continue;
        const Index src = t < res.valid_begin ? res.valid_begin : res.valid_end - 1;
        res.flexion_hat.row(t) = res.flexion_hat.row(src);
        res.scores.row(t) = res.scores.row(src);
        states[static_cast<std::size_t>(t)] = states[static_cast<std::size_t>(src)];
    }
    res.states_hat = StateSequence(std::move(states));
    return res;
}

double pearson_corr(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw ParameterError("correlation inputs differ in length");
    if (a.size() < 2) throw ParameterError("correlation needs at least two samples");
    const Vector da = a.array() - a.mean();
    const Vector db = b.array() - b.mean();
    const double na = da.norm();
    const double nb = db.norm();
    if (!(na > 0.0) || !(nb > 0.0)) throw UndefinedCorrelationError("correlation with a constant input is undefined");
    return std::clamp(da.dot(db) / (na * nb), -1.0, 1.0);
}

CorrelationReport evaluate(const Matrix& flexion_hat, const Matrix& truth, bool exclude_finger4) {
    if (flexion_hat.rows() != truth.rows()) throw ParameterError("prediction and truth lengths differ");
    if (flexion_hat.cols() != kNumFingers || truth.cols() != kNumFingers) {
        throw ParameterError("prediction and truth need 5 columns");
    }
    CorrelationReport rep;
    rep.exclude_finger4 = exclude_finger4;
    double sum = 0.0;
    int count = 0;
    for (Index j = 0; j < kNumFingers; ++j) {
        const auto i = static_cast<std::size_t>(j);
        try {
            rep.correlation[i] = pearson_corr(flexion_hat.col(j), truth.col(j));
            rep.defined[i] = true;
        } catch (const UndefinedCorrelationError&) {
            rep.correlation[i] = std::nan("");
            rep.defined[i] = false;
            rep.warnings.push_back("finger " + std::to_string(j + 1) + ": correlation undefined (constant signal)");
        }
        rep.in_average[i] = rep.defined[i] && !(exclude_finger4 && j == 3);
        if (rep.in_average[i]) {
            sum += rep.correlation[i];
            ++count;
        }
    }
    rep.average = count > 0 ? sum / count : std::nan("");
    return rep;
}

CorrelationReport evaluate(const DecodeResult& result, const FlexionRecord& truth, bool exclude_finger4) {
    return evaluate(result.flexion_hat, truth.flexion(), exclude_finger4);
}

double average_over_subjects(const std::vector<CorrelationReport>& reports) {
    if (reports.empty()) throw ParameterError("no subject reports to average");
    double sum = 0.0;
    for (const auto& r : reports) sum += r.average;
    return sum / static_cast<double>(reports.size());
}

Matrix hold_upsample(const Matrix& m, int factor) {
    if (factor < 1) throw ParameterError("upsample factor must be positive");
    Matrix out(m.rows() * factor, m.cols());
    for (Index r = 0; r < m.rows(); ++r) {
        out.middleRows(r * factor, factor) = m.row(r).replicate(factor, 1);
    }
    return out;
}

}  // namespace flexdecode
