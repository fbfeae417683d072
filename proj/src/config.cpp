#include "flexdecode/config.hpp"

#include "flexdecode/io.hpp"

#include <cmath>

namespace flexdecode {

using nlohmann::json;

namespace {

template <typename T>
void require_grid(const std::vector<T>& g, const char* name) {
    if (g.empty()) throw ParameterError(std::string(name) + " must not be empty");
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void reject_unknown(const json& j, const json& reference, const std::string& prefix) {
    for (const auto& [key, value] : j.items()) {
        if (!reference.contains(key)) throw ParseError("unknown config key '" + prefix + key + "'");
        if (value.is_object() && reference.at(key).is_object()) {
            reject_unknown(value, reference.at(key), prefix + key + ".");
        }
    }
}

}  // namespace

void PipelineConfig::validate() const {
    if (!(delay_ms >= 0.0)) throw ParameterError("delay_ms must be >= 0");
    if (downsample_factor < 1) throw ParameterError("downsample_factor must be >= 1");
    require_grid(ts_grid, "ts_grid");
    require_grid(tau_grid, "tau_grid");
    require_grid(k_grid, "k_grid");
    require_grid(lambda_s_grid, "lambda_s_grid");
    require_grid(lambda_k_grid, "lambda_k_grid");
    require_grid(m_grid, "m_grid");
    if (train_global) require_grid(global_lambda_grid, "global_lambda_grid");
    for (int ts : ts_grid) state_features(ts).validate();
    for (int tau : tau_grid) flex_features(tau).validate();
    for (Index k : k_grid) {
        if (k < 1) throw ParameterError("k_grid entries must be >= 1");
    }
    for (double l : lambda_s_grid) {
        if (!(l > 0.0)) throw ParameterError("lambda_s_grid entries must be > 0");
    }
    for (const auto* g : {&lambda_k_grid, &global_lambda_grid}) {
        for (double l : *g) {
            if (!(l > 0.0)) throw ParameterError("ridge lambda grid entries must be > 0");
        }
    }
    for (double m : m_grid) {
        if (!(m > 0.0 && m <= 1.0)) throw ParameterError("m_grid entries must lie in (0, 1]");
    }
    if (!(train_fraction > 0.0 && train_fraction < 1.0 && validation_fraction > 0.0 && validation_fraction < 1.0)) {
        throw ParameterError("split fractions must lie in (0, 1)");
    }
    if (std::abs(train_fraction + validation_fraction - 1.0) > 1e-12) {
        throw ParameterError("split fractions must sum to 1");
    }
    if (!(labeling.threshold_frac > 0.0 && labeling.threshold_frac < 1.0)) {
        throw ParameterError("labeling.threshold_frac must lie in (0, 1)");
    }
    if (!(ssa.tol > 0.0) || ssa.max_iter < 1) throw ParameterError("invalid ssa options");
    if (score_smoothing < 0) throw ParameterError("score_smoothing must be >= 0");
}

StateFeatureConfig PipelineConfig::state_features(int shift_ts) const {
    StateFeatureConfig c;
    c.window_len = window_len;
    c.ar_order = ar_order;
    c.n_ar_used = n_ar_used;
    c.shift_ts = shift_ts;
    return c;
}

FlexFeatureConfig PipelineConfig::flex_features(int shift_tau) const {
    FlexFeatureConfig c;
    c.sg_order = sg_order;
    c.sg_width_s = sg_width_s;
    c.shift_tau = shift_tau;
    return c;
}

json config_to_json(const PipelineConfig& c) {
    return {
        {"delay_ms", c.delay_ms},
        {"delay_direction", c.delay_direction == DelayDirection::EcogLeads ? "ecog_leads" : "ecog_lags"},
        {"downsample_factor", c.downsample_factor},
        {"window_len", c.window_len},
        {"ar_order", c.ar_order},
        {"n_ar_used", c.n_ar_used},
        {"ts_grid", c.ts_grid},
        {"sg_order", c.sg_order},
        {"sg_width_s", c.sg_width_s},
        {"tau_grid", c.tau_grid},
        {"k_grid", c.k_grid},
        {"lambda_s_grid", c.lambda_s_grid},
        {"lambda_k_grid", c.lambda_k_grid},
        {"m_grid", c.m_grid},
        {"global_lambda_grid", c.global_lambda_grid},
        {"refit_pruned", c.refit_pruned},
        {"train_fraction", c.train_fraction},
        {"validation_fraction", c.validation_fraction},
        {"labeling",
         {{"threshold_frac", c.labeling.threshold_frac},
          {"smooth_order", c.labeling.smooth_order},
          {"smooth_width_s", c.labeling.smooth_width_s}}},
        {"ssa", {{"tol", c.ssa.tol}, {"max_iter", c.ssa.max_iter}}},
        {"score_smoothing", c.score_smoothing},
        {"exclude_finger4", c.exclude_finger4},
        {"train_global", c.train_global},
        {"seed", c.seed},
    };
}

PipelineConfig config_from_json(const json& j) {
    PipelineConfig c;
    if (!j.is_object()) throw ParseError("config must be a JSON object");
    reject_unknown(j, config_to_json(c), "");
    try {
        read_field(j, "delay_ms", c.delay_ms);
        if (j.contains("delay_direction")) {
            const auto d = j.at("delay_direction").get<std::string>();
            if (d == "ecog_leads") {
                c.delay_direction = DelayDirection::EcogLeads;
            } else if (d == "ecog_lags") {
                c.delay_direction = DelayDirection::EcogLags;
            } else {
                throw ParseError("delay_direction must be ecog_leads or ecog_lags");
            }
        }
        read_field(j, "downsample_factor", c.downsample_factor);
        read_field(j, "window_len", c.window_len);
        read_field(j, "ar_order", c.ar_order);
        read_field(j, "n_ar_used", c.n_ar_used);
        read_field(j, "ts_grid", c.ts_grid);
        read_field(j, "sg_order", c.sg_order);
        read_field(j, "sg_width_s", c.sg_width_s);
        read_field(j, "tau_grid", c.tau_grid);
        read_field(j, "k_grid", c.k_grid);
        read_field(j, "lambda_s_grid", c.lambda_s_grid);
        read_field(j, "lambda_k_grid", c.lambda_k_grid);
        read_field(j, "m_grid", c.m_grid);
        read_field(j, "global_lambda_grid", c.global_lambda_grid);
        read_field(j, "refit_pruned", c.refit_pruned);
        read_field(j, "train_fraction", c.train_fraction);
        read_field(j, "validation_fraction", c.validation_fraction);
        if (j.contains("labeling")) {
            const auto& l = j.at("labeling");
            read_field(l, "threshold_frac", c.labeling.threshold_frac);
            read_field(l, "smooth_order", c.labeling.smooth_order);
            read_field(l, "smooth_width_s", c.labeling.smooth_width_s);
        }
        if (j.contains("ssa")) {
            read_field(j.at("ssa"), "tol", c.ssa.tol);
            read_field(j.at("ssa"), "max_iter", c.ssa.max_iter);
        }
        read_field(j, "score_smoothing", c.score_smoothing);
        read_field(j, "exclude_finger4", c.exclude_finger4);
        read_field(j, "train_global", c.train_global);
        read_field(j, "seed", c.seed);
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad config value: ") + e.what());
    }
    c.validate();
    return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    try {
        return config_from_json(json::parse(io::read_text(path), nullptr, true, true));
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

PipelineConfig apply_overrides(const PipelineConfig& cfg, const std::vector<std::string>& assignments) {
    json j = config_to_json(cfg);
    for (const auto& a : assignments) {
        const auto eq = a.find('=');
        if (eq == std::string::npos || eq == 0) throw ParseError("override must look like key=value: '" + a + "'");
        const std::string key = a.substr(0, eq);
        const std::string text = a.substr(eq + 1);
        json value = json::parse(text, nullptr, false);
        if (value.is_discarded()) value = text;
        json::json_pointer ptr;
        std::size_t pos = 0;
        while (true) {
            const auto dot = key.find('.', pos);
            ptr /= key.substr(pos, dot - pos);
            if (dot == std::string::npos) break;
            pos = dot + 1;
        }
        if (!j.contains(ptr)) throw ParseError("unknown config key '" + key + "'");
        j[ptr] = value;
    }
    return config_from_json(j);
}

}  // namespace flexdecode
