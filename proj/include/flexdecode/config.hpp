#pragma once

#include "flexdecode/core.hpp"
#include "flexdecode/features.hpp"
#include "flexdecode/model.hpp"
#include "flexdecode/solvers.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace flexdecode {

/// Everything cmd_train needs. Grids expressed as fractions are relative:
/// lambda_s_grid scales ssa_lambda_max of the training data, lambda_k_grid
/// and global_lambda_grid scale the mean diagonal of the feature Gram
/// matrix, m_grid scales the number of flexion features.
struct PipelineConfig {
    double delay_ms = 37.0;
    DelayDirection delay_direction = DelayDirection::EcogLeads;
    int downsample_factor = 4;

    Index window_len = 300;
    int ar_order = 2;
    int n_ar_used = 2;
    std::vector<int> ts_grid{25, 50, 100, 150};

    int sg_order = 3;
    double sg_width_s = 0.4;
    std::vector<int> tau_grid{25, 50, 100, 150};

    std::vector<Index> k_grid{8, 16, 24, 32, 48, 64};
    std::vector<double> lambda_s_grid{0.001, 0.01, 0.05, 0.2};
    std::vector<double> lambda_k_grid{1e-4, 1e-3, 1e-2, 1e-1};
    std::vector<double> m_grid{0.25, 0.5, 1.0};
    std::vector<double> global_lambda_grid{1e-4, 1e-3, 1e-2, 1e-1};
    bool refit_pruned = true;

    double train_fraction = 0.75;
    double validation_fraction = 0.25;

    LabelingConfig labeling;
    SsaOptions ssa;
    Index score_smoothing = 0;
    bool exclude_finger4 = true;
    bool train_global = true;

    std::uint64_t seed = 0;

    void validate() const;

    StateFeatureConfig state_features(int shift_ts) const;
    FlexFeatureConfig flex_features(int shift_tau) const;
};

nlohmann::json config_to_json(const PipelineConfig& cfg);
/// Unknown keys are rejected; missing keys keep their defaults.
PipelineConfig config_from_json(const nlohmann::json& j);

PipelineConfig load_config(const std::filesystem::path& path);

/// Applies "key=value" overrides; the value is parsed as JSON when possible
/// and as a string otherwise. Nested keys use dots ("ssa.tol=1e-8").
PipelineConfig apply_overrides(const PipelineConfig& cfg, const std::vector<std::string>& assignments);

}  // namespace flexdecode
