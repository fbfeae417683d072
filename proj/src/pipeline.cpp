#include "flexdecode/pipeline.hpp"

#include "flexdecode/dsp.hpp"
#include "flexdecode/features.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

namespace flexdecode {

using nlohmann::json;

namespace {

constexpr double kNoScore = -std::numeric_limits<double>::infinity();

void say(const ProgressFn& progress, const std::string& msg) {
    if (progress) progress(msg);
}

// Selection score: like the reported average, except that a constant
// prediction of a finger that does move counts as zero correlation instead
// of dropping out of the average.
double selection_score(const Matrix& pred, const Matrix& truth, bool ex4) {
    double sum = 0.0;
    int count = 0;
    for (Index j = 0; j < kNumFingers; ++j) {
        if (ex4 && j == 3) continue;
        try {
            sum += pearson_corr(pred.col(j), truth.col(j));
            ++count;
        } catch (const UndefinedCorrelationError&) {
            const Vector t = truth.col(j);
            if (t.maxCoeff() > t.minCoeff()) ++count;
        }
    }
    return count > 0 ? sum / count : kNoScore;
}

json finite_or_null(double v) {
    return std::isfinite(v) ? json(v) : json(nullptr);
}

std::vector<Index> rows_with_state(const FeatureMatrix& f, const StateSequence& s, int k) {
    std::vector<Index> rows;
    for (Index r = 0; r < f.n_rows(); ++r) {
        if (s[f.first_sample() + r] == k) rows.push_back(r);
    }
    return rows;
}

Matrix gather_rows(const Matrix& m, const std::vector<Index>& rows) {
    return m(rows, Eigen::all);
}

Matrix predict(const Matrix& X, const FlexStateModel& model) {
    const auto m = static_cast<Index>(model.feature_index_set.size());
    Matrix P = X(Eigen::all, model.feature_index_set) * model.H.topRows(m);
    P.rowwise() += model.H.row(m);
    return P;
}

FeatureMatrix select_columns(const FeatureMatrix& f, const std::vector<Index>& cols) {
    std::vector<std::string> names;
    names.reserve(cols.size());
    for (Index c : cols) names.push_back(f.names()[static_cast<std::size_t>(c)]);
    return FeatureMatrix(f.values()(Eigen::all, cols), std::move(names), f.first_sample());
}

std::vector<Index> unique_m_values(const std::vector<double>& fractions, Index d) {
    std::vector<Index> out;
    for (double f : fractions) {
        const Index m = std::clamp<Index>(static_cast<Index>(std::llround(f * static_cast<double>(d))), 1, d);
        if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    }
    return out;
}

struct FlexCandidate {
    double lambda_rel = 0.0;
    Index M = 0;
    FlexStateModel model;
    Matrix val_pred;  // rows of this state in the validation features
    double val_mse = std::numeric_limits<double>::quiet_NaN();
};

struct TauResult {
    int tau = 0;
    std::array<std::vector<FlexCandidate>, kNumStates> candidates;
    std::array<std::size_t, kNumStates> choice{};
    double corr = kNoScore;
    json report;
};

CorrelationReport evaluate_range(const DecodeResult& res, const FlexionRecord& truth, bool ex4) {
    const Index len = res.valid_end - res.valid_begin;
    return evaluate(res.flexion_hat.middleRows(res.valid_begin, len),
                    truth.flexion().middleRows(res.valid_begin, len), ex4);
}

double selection_score_range(const DecodeResult& res, const FlexionRecord& truth, bool ex4) {
    const Index len = res.valid_end - res.valid_begin;
    return selection_score(res.flexion_hat.middleRows(res.valid_begin, len),
                           truth.flexion().middleRows(res.valid_begin, len), ex4);
}

double state_accuracy(const StateSequence& est, const StateSequence& truth, Index begin, Index end) {
    Index hit = 0;
    for (Index t = begin; t < end; ++t) hit += est[t] == truth[t] ? 1 : 0;
    return end > begin ? static_cast<double>(hit) / static_cast<double>(end - begin) : 0.0;
}

double hyper(const TrainedDecoder& dec, const std::string& key, double fallback) {
    const auto it = dec.hyperparameters.find(key);
    return it == dec.hyperparameters.end() ? fallback : it->second;
}

}  // namespace

// ---------------------------------------------------------------------------
// Preprocessing
// ---------------------------------------------------------------------------

PreparedData prepare_data(const MultichannelSignal& ecog_raw, const std::optional<FlexionRecord>& flex_raw,
                          const std::optional<std::vector<Segment>>& segments, double delay_ms,
                          DelayDirection direction, int downsample_factor) {
    PreparedData out{downsample(ecog_raw, downsample_factor), std::nullopt, std::nullopt, 0};
    if (flex_raw) {
        AlignedPair aligned = validate_alignment(ecog_raw, *flex_raw, delay_ms, direction);
        out.ecog = downsample(aligned.ecog, downsample_factor);
        out.flex = downsample(aligned.flex, downsample_factor);
        out.dropped = aligned.dropped;
    }
    if (segments) out.segments = SegmentList(*segments, out.ecog.n_samples());
    return out;
}

PreparedData prepare_data(const MultichannelSignal& ecog_raw, const std::optional<FlexionRecord>& flex_raw,
                          const std::optional<std::vector<Segment>>& segments, const TrainedDecoder& dec) {
    const auto& pre = dec.preprocessing;
    if (std::abs(ecog_raw.rate_hz() - pre.raw_rate_hz) > 1e-9 * pre.raw_rate_hz) {
        throw ValidationError("recording rate " + std::to_string(ecog_raw.rate_hz()) +
                              " Hz does not match the decoder's raw rate " + std::to_string(pre.raw_rate_hz) + " Hz");
    }
    return prepare_data(ecog_raw, flex_raw, segments, pre.delay_ms, pre.delay_direction, pre.downsample_factor);
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

TrainOutput train_decoder(const PreparedData& data, const PipelineConfig& cfg, const ProgressFn& progress) {
    cfg.validate();
    if (!data.flex) throw ValidationError("training needs a flexion record");
    const Index n = data.ecog.n_samples();
    const auto n_train = static_cast<Index>(std::floor(cfg.train_fraction * static_cast<double>(n)));
    if (n_train < 1 || n_train >= n) throw ValidationError("record too short for the train/validation split");

    const MultichannelSignal ecog_tr = data.ecog.slice(0, n_train);
    const MultichannelSignal ecog_va = data.ecog.slice(n_train, n);
    const FlexionRecord flex_tr = data.flex->slice(0, n_train);
    const FlexionRecord flex_va = data.flex->slice(n_train, n);
    const Index n_va = n - n_train;
    const bool ex4 = cfg.exclude_finger4;

    json report;
    std::vector<std::string> warnings;
    report["n_samples"] = n;
    report["working_rate_hz"] = data.ecog.rate_hz();
    report["split"] = {{"train", {0, n_train}}, {"validation", {n_train, n}}};

    // Labels, computed separately on each side of the split.
    StateSequence states_tr, states_va;
    if (data.segments) {
        states_tr = data.segments->clip(0, n_train).to_states();
        states_va = data.segments->clip(n_train, n).to_states();
        report["label_source"] = "segments";
    } else {
        states_tr = labels_from_flexion(flex_tr, cfg.labeling).states;
        states_va = labels_from_flexion(flex_va, cfg.labeling).states;
        report["label_source"] = "labels_from_flexion";
        say(progress, "no segments given; labeling movements from the flexion record");
    }
    {
        json counts = json::object();
        for (int k = 1; k <= kNumStates; ++k) {
            const auto c_tr = std::count(states_tr.states().begin(), states_tr.states().end(), k);
            const auto c_va = std::count(states_va.states().begin(), states_va.states().end(), k);
            counts[std::to_string(k)] = {{"train", c_tr}, {"validation", c_va}};
        }
        report["state_counts"] = counts;
    }

    // --- Per-state flexion models, swept over tau, lambda_k and M_k -------
    std::vector<TauResult> tau_results;
    json tau_skipped = json::array();
    for (int tau : cfg.tau_grid) {
        const FlexFeatureConfig fcfg = cfg.flex_features(tau);
        std::optional<FeatureMatrix> ff_tr, ff_va;
        try {
            ff_tr = build_flex_features(ecog_tr, fcfg);
            ff_va = build_flex_features(ecog_va, fcfg);
        } catch (const ParameterError& e) {
            tau_skipped.push_back({{"tau", tau}, {"reason", e.what()}});
            continue;
        }
        say(progress, "flexion sweep: tau = " + std::to_string(tau));
        TauResult tr;
        tr.tau = tau;
        const Index d = ff_tr->n_features();
        const Matrix truth_tr = flexion_rows(*ff_tr, flex_tr);
        const Matrix truth_va = flexion_rows(*ff_va, flex_va);
        const std::vector<Index> m_values = unique_m_values(cfg.m_grid, d);
        std::array<std::vector<Index>, kNumStates> val_rows;

        for (int k = 1; k <= kNumStates; ++k) {
            const auto ki = static_cast<std::size_t>(k - 1);
            const std::vector<Index> rows = rows_with_state(*ff_tr, states_tr, k);
            if (rows.size() < 2) {
                throw EmptyTrainingSetError("state " + std::to_string(k) + " has fewer than two training samples");
            }
            const RidgeGram gram(gather_rows(ff_tr->values(), rows), gather_rows(truth_tr, rows));
            double scale = gram.mean_diagonal();
            if (!(scale > 0.0)) scale = 1.0;
            val_rows[ki] = rows_with_state(*ff_va, states_va, k);
            const Matrix Xv = gather_rows(ff_va->values(), val_rows[ki]);
            const Matrix Yv = gather_rows(truth_va, val_rows[ki]);
            for (double lr : cfg.lambda_k_grid) {
                for (Index M : m_values) {
                    FlexCandidate c;
                    c.lambda_rel = lr;
                    c.M = M;
                    c.model = fit_flex_state(gram, lr * scale, M, cfg.refit_pruned);
                    if (!val_rows[ki].empty()) {
                        c.val_pred = predict(Xv, c.model);
                        c.val_mse = (c.val_pred - Yv).squaredNorm() / static_cast<double>(Yv.size());
                    }
                    tr.candidates[ki].push_back(std::move(c));
                }
            }
            // Start from the lowest state-k validation error; without
            // validation rows use the middle lambda with every feature.
            auto& cands = tr.candidates[ki];
            if (val_rows[ki].empty()) {
                tr.choice[ki] = (cfg.lambda_k_grid.size() / 2) * m_values.size() + (m_values.size() - 1);
                warnings.push_back("tau " + std::to_string(tau) + ": state " + std::to_string(k) +
                                   " has no validation samples; default lambda_k and M used");
            } else {
                std::size_t best = 0;
                for (std::size_t c = 1; c < cands.size(); ++c) {
                    if (cands[c].val_mse < cands[best].val_mse) best = c;
                }
                tr.choice[ki] = best;
            }
        }

        // One pass of coordinate ascent on the whole-validation correlation
        // with the true states forced.
        Matrix P(ff_va->n_rows(), kNumFingers);
        auto place = [&](std::size_t ki, const FlexCandidate& c) {
            for (std::size_t a = 0; a < val_rows[ki].size(); ++a) P.row(val_rows[ki][a]) = c.val_pred.row(static_cast<Index>(a));
        };
        for (std::size_t ki = 0; ki < static_cast<std::size_t>(kNumStates); ++ki) {
            if (!val_rows[ki].empty()) place(ki, tr.candidates[ki][tr.choice[ki]]);
        }
        double current = selection_score(P, truth_va, ex4);
        for (std::size_t ki = 0; ki < static_cast<std::size_t>(kNumStates); ++ki) {
            if (val_rows[ki].empty()) continue;
            const auto& cands = tr.candidates[ki];
            for (std::size_t c = 0; c < cands.size(); ++c) {
                if (c == tr.choice[ki]) continue;
                place(ki, cands[c]);
                const double s = selection_score(P, truth_va, ex4);
                if (s > current) {
                    current = s;
                    tr.choice[ki] = c;
                }
            }
            place(ki, cands[tr.choice[ki]]);
        }
        tr.corr = current;

        json states = json::array();
        for (std::size_t ki = 0; ki < static_cast<std::size_t>(kNumStates); ++ki) {
            const auto& c = tr.candidates[ki][tr.choice[ki]];
            json grid = json::array();
            for (const auto& g : tr.candidates[ki]) {
                grid.push_back({{"lambda_rel", g.lambda_rel}, {"M", g.M}, {"validation_mse", finite_or_null(g.val_mse)}});
            }
            states.push_back({{"state", ki + 1},
                              {"lambda_rel", c.lambda_rel},
                              {"lambda", c.model.lambda},
                              {"M", c.M},
                              {"validation_rows", val_rows[ki].size()},
                              {"grid", grid}});
        }
        tr.report = {{"tau", tau}, {"n_features", d}, {"validation_corr_forced", finite_or_null(current)},
                     {"states", states}};
        tau_results.push_back(std::move(tr));
    }
    if (tau_results.empty()) throw ParameterError("no tau in the grid fits the record length");
    std::size_t best_tau = 0;
    for (std::size_t i = 1; i < tau_results.size(); ++i) {
        if (tau_results[i].corr > tau_results[best_tau].corr) best_tau = i;
    }
    const TauResult& tau_star = tau_results[best_tau];
    FlexModelBank bank;
    bank.shift_tau = tau_star.tau;
    for (std::size_t ki = 0; ki < static_cast<std::size_t>(kNumStates); ++ki) {
        bank.models[ki] = tau_star.candidates[ki][tau_star.choice[ki]].model;
    }
    const FlexFeatureConfig fcfg = cfg.flex_features(tau_star.tau);
    const FeatureMatrix ff_tr = build_flex_features(ecog_tr, fcfg);
    const FeatureMatrix ff_va = build_flex_features(ecog_va, fcfg);
    bank.validate(ff_tr.n_features());
    {
        json sweep = json::array();
        for (const auto& t : tau_results) sweep.push_back(t.report);
        report["flex_sweep"] = {{"chosen_tau", tau_star.tau}, {"by_tau", sweep}, {"skipped", tau_skipped}};
    }

    // --- Global (non-switching) baseline --------------------------------
    std::optional<FlexStateModel> global;
    if (cfg.train_global) {
        say(progress, "global baseline sweep");
        const RidgeGram gram(ff_tr.values(), flexion_rows(ff_tr, flex_tr));
        double scale = gram.mean_diagonal();
        if (!(scale > 0.0)) scale = 1.0;
        const Matrix truth_va = flexion_rows(ff_va, flex_va);
        json grid = json::array();
        double best = kNoScore;
        for (double lr : cfg.global_lambda_grid) {
            FlexStateModel m = fit_flex_state(gram, lr * scale, ff_tr.n_features(), true);
            const double s = selection_score(predict(ff_va.values(), m), truth_va, ex4);
            grid.push_back({{"lambda_rel", lr}, {"validation_corr", finite_or_null(s)}});
            if (!global || s > best) {
                best = s;
                global = std::move(m);
                report["global_sweep"]["chosen_lambda_rel"] = lr;
            }
        }
        report["global_sweep"]["grid"] = grid;
    }

    // --- Channel scoring and the state-model sweep ------------------------
    say(progress, "scoring channels");
    const ChannelScore ch_scores = score_channels(ecog_tr, labels_from_states(states_tr), cfg.state_features(1));
    for (const auto& w : ch_scores.warnings) warnings.push_back(w);
    {
        json sc = json::array();
        for (Index r : ch_scores.ranking) {
            sc.push_back({{"channel", ch_scores.channel_ids[static_cast<std::size_t>(r)]}, {"score", ch_scores.scores(r)}});
        }
        report["channel_ranking"] = sc;
    }
    std::vector<Index> k_values;
    for (Index K : cfg.k_grid) {
        if (K <= data.ecog.n_channels() && std::find(k_values.begin(), k_values.end(), K) == k_values.end()) {
            k_values.push_back(K);
        }
    }
    if (k_values.empty()) {
        k_values.push_back(data.ecog.n_channels());
        warnings.push_back("every K in the grid exceeds the channel count; using all " +
                           std::to_string(data.ecog.n_channels()) + " channels");
    }

    struct StateChoice {
        double corr = kNoScore;
        Index K = 0;
        int ts = 0;
        double lambda_rel = 0.0;
        double lambda = 0.0;
        std::optional<StateModelFit> fit;
    } best_state;
    json state_grid = json::array();
    json ts_skipped = json::array();
    DecodeOptions sweep_opts;
    sweep_opts.score_smoothing = cfg.score_smoothing;
    for (int ts : cfg.ts_grid) {
        const StateFeatureConfig scfg = cfg.state_features(ts);
        std::optional<FeatureMatrix> sf_tr, sf_va;
        try {
            sf_tr = build_state_features(ecog_tr, scfg);
            sf_va = build_state_features(ecog_va, scfg);
        } catch (const ParameterError& e) {
            ts_skipped.push_back({{"ts", ts}, {"reason", e.what()}});
            continue;
        }
        say(progress, "state sweep: t_s = " + std::to_string(ts));
        const Matrix Y = labels_from_states(states_tr.slice(sf_tr->first_sample(), sf_tr->end_sample())).values();
        const SsaGram gram(sf_tr->values(), Y);
        std::vector<std::string> column_channel;
        for (const auto& name : sf_tr->names()) column_channel.push_back(FeatureName::decode(name).channel);

        for (Index K : k_values) {
            const std::vector<std::string> chosen = select_top_channels(ch_scores, K);
            const std::set<std::string> chosen_set(chosen.begin(), chosen.end());
            std::vector<Index> cols;
            for (std::size_t c = 0; c < column_channel.size(); ++c) {
                if (chosen_set.count(column_channel[c])) cols.push_back(static_cast<Index>(c));
            }
            const FeatureMatrix sub_va = select_columns(*sf_va, cols);
            const double lmax = gram.lambda_max(cols);
            // Largest lambda first, each fit warm-started from the previous one.
            std::vector<double> lambdas = cfg.lambda_s_grid;
            std::sort(lambdas.begin(), lambdas.end(), std::greater<>());
            Matrix warm = Matrix::Zero(static_cast<Index>(cols.size()), kNumStates);
            for (double lr : lambdas) {
                SsaSolution sol = gram.fit(lr * lmax, cols, cfg.ssa, &warm);
                warm = sol.C;
                StateModelFit fit = state_model_from_solution(sub_va.names(), std::move(sol));
                const DecodeResult res =
                    decode_from_features(n_va, sub_va, fit.model, ff_va, bank, std::nullopt, std::nullopt, sweep_opts);
                const double corr = selection_score_range(res, flex_va, ex4);
                const double acc = state_accuracy(res.states_hat, states_va, res.valid_begin, res.valid_end);
                state_grid.push_back({{"K", K},
                                      {"ts", ts},
                                      {"lambda_s_rel", lr},
                                      {"lambda_s", lr * lmax},
                                      {"active_rows", fit.model.active_rows.size()},
                                      {"converged", fit.converged},
                                      {"iterations", fit.iterations},
                                      {"validation_state_accuracy", acc},
                                      {"validation_corr", finite_or_null(corr)}});
                if (!fit.converged) {
                    warnings.push_back("SSA did not converge at K=" + std::to_string(K) + ", ts=" + std::to_string(ts) +
                                       ", lambda_s_rel=" + std::to_string(lr));
                }
                if (!best_state.fit || corr > best_state.corr) {
                    best_state = {corr, K, ts, lr, lr * lmax, std::move(fit)};
                }
            }
        }
    }
    if (!best_state.fit) throw ParameterError("no t_s in the grid fits the record length");
    report["state_sweep"] = {{"chosen",
                              {{"K", best_state.K},
                               {"ts", best_state.ts},
                               {"lambda_s_rel", best_state.lambda_rel},
                               {"lambda_s", best_state.lambda},
                               {"validation_corr", finite_or_null(best_state.corr)}}},
                             {"grid", state_grid},
                             {"skipped", ts_skipped}};
    for (const auto& w : best_state.fit->warnings) warnings.push_back("chosen state model: " + w);

    // --- Assemble the decoder ---------------------------------------------
    TrainedDecoder dec;
    auto& pre = dec.preprocessing;
    pre.delay_ms = cfg.delay_ms;
    pre.delay_direction = cfg.delay_direction;
    pre.downsample_factor = cfg.downsample_factor;
    pre.working_rate_hz = data.ecog.rate_hz();
    pre.raw_rate_hz = data.ecog.rate_hz() * cfg.downsample_factor;
    pre.channel_ids = data.ecog.channel_ids();
    pre.state_features = cfg.state_features(best_state.ts);
    pre.flex_features = fcfg;
    dec.state_model = best_state.fit->model;
    dec.flex_bank = bank;
    dec.global_model = global;

    auto& h = dec.hyperparameters;
    h["K"] = static_cast<double>(best_state.K);
    h["shift_ts"] = best_state.ts;
    h["lambda_s"] = best_state.lambda;
    h["lambda_s_rel"] = best_state.lambda_rel;
    h["shift_tau"] = tau_star.tau;
    for (int k = 1; k <= kNumStates; ++k) {
        const auto& c = tau_star.candidates[static_cast<std::size_t>(k - 1)][tau_star.choice[static_cast<std::size_t>(k - 1)]];
        h["lambda_k." + std::to_string(k)] = c.model.lambda;
        h["lambda_k_rel." + std::to_string(k)] = c.lambda_rel;
        h["M." + std::to_string(k)] = static_cast<double>(c.M);
    }
    if (global) h["global_lambda"] = global->lambda;
    h["score_smoothing"] = static_cast<double>(cfg.score_smoothing);
    h["exclude_finger4"] = ex4 ? 1.0 : 0.0;
    h["labeling.threshold_frac"] = cfg.labeling.threshold_frac;
    h["labeling.smooth_order"] = cfg.labeling.smooth_order;
    h["labeling.smooth_width_s"] = cfg.labeling.smooth_width_s;

    // --- Final validation figures -----------------------------------------
    const FeatureMatrix sf_va_final =
        build_state_features(ecog_va.select_channels(dec.state_model.selected_channels), pre.state_features);
    const DecodeResult est =
        decode_from_features(n_va, sf_va_final, dec.state_model, ff_va, bank, global, std::nullopt, sweep_opts);
    const DecodeResult forced =
        decode_from_features(n_va, sf_va_final, dec.state_model, ff_va, bank, global, states_va, sweep_opts);
    json validation = {
        {"estimated", correlation_to_json(evaluate_range(est, flex_va, ex4))},
        {"forced", correlation_to_json(evaluate_range(forced, flex_va, ex4))},
        {"state_accuracy", state_accuracy(est.states_hat, states_va, est.valid_begin, est.valid_end)},
        {"range", {n_train + est.valid_begin, n_train + est.valid_end}},
    };
    if (global) {
        DecodeOptions gopts = sweep_opts;
        gopts.use_global_model = true;
        const DecodeResult g =
            decode_from_features(n_va, sf_va_final, dec.state_model, ff_va, bank, global, std::nullopt, gopts);
        validation["global"] = correlation_to_json(evaluate_range(g, flex_va, ex4));
    }
    report["validation"] = validation;

    // --- Index audit ------------------------------------------------------
    // Every fitted quantity comes from features of ecog_tr / flex_tr and
    // labels of the training slice; check the furthest sample they touch.
    const Index flex_reach = ff_tr.end_sample() - 1 + tau_star.tau;
    const FeatureMatrix sf_tr_final =
        build_state_features(ecog_tr.select_channels(dec.state_model.selected_channels), pre.state_features);
    const Index state_reach = sf_tr_final.end_sample() - 1 + best_state.ts;
    const Index max_used = std::max({flex_reach, state_reach, ecog_tr.n_samples() - 1});
    if (max_used >= n_train || flex_tr.n_samples() != n_train || states_tr.size() != n_train) {
        throw Error("index audit failed: a fitted quantity touches validation samples");
    }
    report["index_audit"] = {
        {"train_samples", {0, n_train}},
        {"validation_samples", {n_train, n}},
        {"max_sample_used_by_fits", max_used},
        {"flex_feature_rows", {ff_tr.first_sample(), ff_tr.end_sample()}},
        {"state_feature_rows", {sf_tr_final.first_sample(), sf_tr_final.end_sample()}},
        {"labels_computed_on", {0, n_train}},
        {"validation_samples_in_fits", false},
    };
    report["hyperparameters"] = dec.hyperparameters;
    report["warnings"] = warnings;
    return {std::move(dec), std::move(report)};
}

// ---------------------------------------------------------------------------
// Decoding and reports
// ---------------------------------------------------------------------------

DecodeOutput decode_prepared(const PreparedData& data, const TrainedDecoder& dec, const DecodeRequest& req) {
    std::optional<StateSequence> forced;
    json report;
    report["mode"] = req.use_global_model ? "global" : (req.mode == DecodeMode::Forced ? "forced" : "estimated");
    if (req.mode == DecodeMode::Forced) {
        if (data.segments) {
            forced = data.segments->to_states();
            report["state_source"] = "segments";
        } else if (data.flex) {
            LabelingConfig lab;
            lab.threshold_frac = hyper(dec, "labeling.threshold_frac", lab.threshold_frac);
            lab.smooth_order = static_cast<int>(hyper(dec, "labeling.smooth_order", lab.smooth_order));
            lab.smooth_width_s = hyper(dec, "labeling.smooth_width_s", lab.smooth_width_s);
            forced = labels_from_flexion(*data.flex, lab).states;
            report["state_source"] = "labels_from_flexion";
        } else {
            throw ValidationError("forced mode needs a flexion record or a segments file");
        }
    }
    DecodeOptions opts;
    opts.score_smoothing = req.score_smoothing.value_or(static_cast<Index>(hyper(dec, "score_smoothing", 0.0)));
    opts.use_global_model = req.use_global_model;

    DecodeOutput out;
    out.result = run_decoder(data.ecog, dec, forced, opts);
    report["n_samples"] = data.ecog.n_samples();
    report["valid_range"] = {out.result.valid_begin, out.result.valid_end};
    report["warnings"] = out.result.warnings;
    if (data.flex) {
        const bool ex4 = req.exclude_finger4.value_or(hyper(dec, "exclude_finger4", 1.0) != 0.0);
        out.correlation = evaluate(out.result, *data.flex, ex4);
        report["correlation"] = correlation_to_json(*out.correlation);
    }
    out.report = std::move(report);
    return out;
}

json correlation_to_json(const CorrelationReport& rep) {
    json fingers = json::array();
    for (std::size_t j = 0; j < static_cast<std::size_t>(kNumFingers); ++j) {
        fingers.push_back({{"finger", j + 1},
                           {"correlation", rep.defined[j] ? json(rep.correlation[j]) : json(nullptr)},
                           {"in_average", rep.in_average[j]}});
    }
    return {{"fingers", fingers},
            {"average", finite_or_null(rep.average)},
            {"exclude_finger4", rep.exclude_finger4},
            {"warnings", rep.warnings}};
}

std::string format_correlation(const CorrelationReport& rep) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(4);
    os << "finger  correlation\n";
    for (std::size_t j = 0; j < static_cast<std::size_t>(kNumFingers); ++j) {
        os << "  " << j + 1 << "     ";
        if (rep.defined[j]) {
            os << rep.correlation[j];
        } else {
            os << "undefined";
        }
        if (!rep.in_average[j]) os << "  (not averaged)";
        os << '\n';
    }
    os << "average " << rep.average << (rep.exclude_finger4 ? "  (fingers 1,2,3,5)" : "  (all fingers)") << '\n';
    for (const auto& w : rep.warnings) os << "warning: " << w << '\n';
    return os.str();
}

}  // namespace flexdecode
