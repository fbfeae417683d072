// flexdecode command-line tool. Exit codes: 0 success, 2 invalid input or
// parse failure, 3 numerical failure.

#include "flexdecode/config.hpp"
#include "flexdecode/dsp.hpp"
#include "flexdecode/io.hpp"
#include "flexdecode/matfile.hpp"
#include "flexdecode/pipeline.hpp"
#include "flexdecode/synth.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace flexdecode;
using nlohmann::json;

namespace {

constexpr int kExitInvalid = 2;
constexpr int kExitNumerical = 3;

std::optional<std::vector<Segment>> maybe_segments(const std::string& path) {
    if (path.empty()) return std::nullopt;
    return io::read_segment_entries(path);
}

std::optional<FlexionRecord> maybe_flexion(const std::string& path) {
    if (path.empty()) return std::nullopt;
    return io::read_flexion(path);
}

// --------------------------------------------------------------------------
// import
// --------------------------------------------------------------------------

struct ImportArgs {
    std::string mat, text, ecog_var, flex_var, out_ecog, out_flex;
    double rate = 0.0;
    bool transpose = false;
};

Matrix oriented(const Matrix& m, bool transpose, const std::string& what) {
    Matrix out = transpose ? Matrix(m.transpose()) : m;
    if (out.rows() <= out.cols()) {
        throw ValidationError(what + " is " + std::to_string(out.rows()) + " x " + std::to_string(out.cols()) +
                              "; expected samples x channels with more samples than channels (see --transpose)");
    }
    return out;
}

int cmd_import(const ImportArgs& a) {
    if (!(a.rate > 0.0)) throw ValidationError("--rate is required and must be positive");
    if (a.mat.empty() == a.text.empty()) throw ValidationError("give exactly one of --mat or --text");
    Matrix ecog;
    std::optional<Matrix> flex;
    if (!a.mat.empty()) {
        if (a.ecog_var.empty()) throw ValidationError("--ecog-var is required with --mat");
        const auto vars = io::read_mat_file(a.mat);
        ecog = oriented(io::find_variable(vars, a.ecog_var).data, a.transpose, "'" + a.ecog_var + "'");
        if (!a.flex_var.empty()) {
            flex = oriented(io::find_variable(vars, a.flex_var).data, a.transpose, "'" + a.flex_var + "'");
        }
    } else {
        // Whitespace- or comma-separated numeric rows, one sample per line.
        std::istringstream is(io::read_text(a.text));
        std::vector<std::vector<double>> rows;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(is, line)) {
            ++line_no;
            for (char& c : line) {
                if (c == ',' || c == ';' || c == '\t') c = ' ';
            }
            std::istringstream ls(line);
            std::vector<double> row;
            std::string tok;
            while (ls >> tok) {
                try {
                    std::size_t used = 0;
                    row.push_back(std::stod(tok, &used));
                    if (used != tok.size()) throw std::invalid_argument(tok);
                } catch (const std::exception&) {
                    throw ParseError(a.text + ":" + std::to_string(line_no) + ": not a number: '" + tok + "'");
                }
            }
            if (row.empty()) continue;
            if (!rows.empty() && row.size() != rows.front().size()) {
                throw ParseError(a.text + ":" + std::to_string(line_no) + ": ragged row");
            }
            rows.push_back(std::move(row));
        }
        if (rows.empty()) throw ParseError(a.text + ": no numeric rows");
        Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
        }
        ecog = oriented(m, a.transpose, a.text);
    }
    if (flex) {
        if (flex->cols() != kNumFingers) {
            throw ValidationError("flexion variable has " + std::to_string(flex->cols()) + " columns; expected 5");
        }
        if (flex->rows() != ecog.rows()) {
            throw ValidationError("ECoG has " + std::to_string(ecog.rows()) + " samples but flexion has " +
                                  std::to_string(flex->rows()));
        }
        if (a.out_flex.empty()) throw ValidationError("--out-flex is required with --flex-var");
        io::write_flexion(a.out_flex, FlexionRecord(*flex, a.rate));
    }
    if (a.out_ecog.empty()) throw ValidationError("--out-ecog is required");
    io::write_signal(a.out_ecog, MultichannelSignal(ecog, a.rate));
    std::cout << "wrote " << a.out_ecog << " (" << ecog.rows() << " samples x " << ecog.cols() << " channels at "
              << a.rate << " Hz)\n";
    return 0;
}

// --------------------------------------------------------------------------
// synth
// --------------------------------------------------------------------------

struct SynthArgs {
    SynthSpec spec;
    std::string out_dir;
};

int cmd_synth(const SynthArgs& a) {
    const SynthData d = generate(a.spec);
    const fs::path dir(a.out_dir);
    fs::create_directories(dir);
    io::write_signal(dir / "ecog.fxd", d.ecog);
    io::write_flexion(dir / "flex.fxd", d.flex);
    io::write_segments(dir / "segments.txt", d.segments);

    // Generated data is already at the working rate and has no acquisition
    // delay; its states last about a second, so the AR window is shortened.
    PipelineConfig cfg;
    cfg.delay_ms = 0.0;
    cfg.downsample_factor = 1;
    cfg.window_len = 50;
    cfg.ts_grid = {25, 50, 100};
    cfg.seed = a.spec.seed;
    io::write_text(dir / "config.json", config_to_json(cfg).dump(2) + "\n");

    json truth;
    json G = json::array();
    for (const auto& g : d.truth.G) G.push_back(io::matrix_to_json(g));
    truth["G"] = G;
    truth["baseline"] = std::vector<double>(d.truth.baseline.data(), d.truth.baseline.data() + d.truth.baseline.size());
    truth["seed"] = a.spec.seed;
    io::write_text(dir / "truth.json", truth.dump(1) + "\n");
    std::cout << "wrote synthetic bundle to " << dir.string() << " (" << d.ecog.n_samples() << " samples, "
              << d.ecog.n_channels() << " channels, " << d.segments.size() << " segments)\n";
    return 0;
}

// --------------------------------------------------------------------------
// train / decode
// --------------------------------------------------------------------------

struct TrainArgs {
    std::string ecog, flex, segments, config, out, report;
    std::vector<std::string> overrides;
    bool quiet = false;
};

int cmd_train(const TrainArgs& a) {
    PipelineConfig cfg = a.config.empty() ? PipelineConfig{} : load_config(a.config);
    cfg = apply_overrides(cfg, a.overrides);
    const MultichannelSignal ecog = io::read_signal(a.ecog);
    const FlexionRecord flex = io::read_flexion(a.flex);
    const PreparedData data = prepare_data(ecog, flex, maybe_segments(a.segments), cfg.delay_ms,
                                           cfg.delay_direction, cfg.downsample_factor);
    ProgressFn progress;
    if (!a.quiet) progress = [](const std::string& m) { std::cerr << "[train] " << m << '\n'; };
    TrainOutput out = train_decoder(data, cfg, progress);
    out.report["config"] = config_to_json(cfg);
    io::save_decoder(a.out, out.decoder, out.report);
    if (!a.report.empty()) io::write_text(a.report, out.report.dump(2) + "\n");

    const auto& v = out.report["validation"];
    std::cout << "decoder written to " << a.out << "\n";
    std::cout << "validation average correlation: estimated " << v["estimated"]["average"] << ", forced "
              << v["forced"]["average"];
    if (v.contains("global")) std::cout << ", global " << v["global"]["average"];
    std::cout << "\n";
    for (const auto& w : out.report["warnings"]) std::cerr << "warning: " << w.get<std::string>() << '\n';
    return 0;
}

struct DecodeArgs {
    std::string ecog, flex, segments, decoder, out, report, truth_out, mode = "estimated";
    bool global = false;
    bool include_finger4 = false;
    Index score_smoothing = -1;
};

int cmd_decode(const DecodeArgs& a) {
    const TrainedDecoder dec = io::load_decoder(a.decoder);
    const MultichannelSignal ecog = io::read_signal(a.ecog);
    const PreparedData data = prepare_data(ecog, maybe_flexion(a.flex), maybe_segments(a.segments), dec);
    DecodeRequest req;
    req.mode = a.mode == "forced" ? DecodeMode::Forced : DecodeMode::Estimated;
    req.use_global_model = a.global;
    if (a.score_smoothing >= 0) req.score_smoothing = a.score_smoothing;
    if (a.include_finger4) req.exclude_finger4 = false;
    const DecodeOutput out = decode_prepared(data, dec, req);
    io::write_predictions(a.out, out.result, data.ecog.rate_hz());
    if (!a.truth_out.empty()) {
        if (!data.flex) throw ValidationError("--truth-out needs --flex");
        io::write_flexion(a.truth_out, *data.flex);
    }
    if (!a.report.empty()) io::write_text(a.report, out.report.dump(2) + "\n");
    for (const auto& w : out.result.warnings) std::cerr << w << '\n';
    std::cout << "predictions written to " << a.out << " (" << out.result.flexion_hat.rows() << " samples at "
              << data.ecog.rate_hz() << " Hz)\n";
    if (out.correlation) std::cout << format_correlation(*out.correlation);
    return 0;
}

// --------------------------------------------------------------------------
// evaluate
// --------------------------------------------------------------------------

struct EvaluateArgs {
    std::vector<std::string> pred, truth;
    bool include_finger4 = false;
    int upsample = 0;
    std::string json_out, plot;
};

constexpr const char* kPlotScript = R"(
import sys
import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
d = np.genfromtxt(sys.argv[1], delimiter=",", names=True)
fig, axes = plt.subplots(5, 1, sharex=True, figsize=(10, 9))
for j, ax in enumerate(axes, start=1):
    ax.plot(d["t"], d["true_f%d" % j], color="k", lw=0.8, label="measured")
    ax.plot(d["t"], d["est_f%d" % j], color="tab:red", lw=0.8, label="estimated")
    ax.set_ylabel("finger %d" % j)
axes[0].legend(loc="upper right")
axes[-1].set_xlabel("sample")
fig.tight_layout()
fig.savefig(sys.argv[2], dpi=100)
)";

void write_plot(const std::string& prefix, const Matrix& est, const Matrix& truth) {
    std::ostringstream os;
    os << "t";
    for (int j = 1; j <= kNumFingers; ++j) os << ",true_f" << j;
    for (int j = 1; j <= kNumFingers; ++j) os << ",est_f" << j;
    os << '\n';
    os.precision(9);
    for (Index t = 0; t < est.rows(); ++t) {
        os << t;
        for (Index j = 0; j < kNumFingers; ++j) os << ',' << truth(t, j);
        for (Index j = 0; j < kNumFingers; ++j) os << ',' << est(t, j);
        os << '\n';
    }
    const std::string csv = prefix + ".csv";
    io::write_text(csv, os.str());
    const std::string script = prefix + ".plot.py";
    io::write_text(script, kPlotScript);
    const std::string cmd = "python3 '" + script + "' '" + csv + "' '" + prefix + ".png' >/dev/null 2>&1";
    if (std::system(cmd.c_str()) == 0) {
        std::cout << "plot written to " << prefix << ".png\n";
    } else {
        std::cout << "plot data written to " << csv << " (no plotting backend for the image)\n";
    }
    fs::remove(script);
}

int cmd_evaluate(const EvaluateArgs& a) {
    if (a.pred.size() != a.truth.size() || a.pred.empty()) {
        throw ValidationError("give one --truth per --pred");
    }
    const bool ex4 = !a.include_finger4;
    std::vector<CorrelationReport> reports;
    json subjects = json::array();
    for (std::size_t s = 0; s < a.pred.size(); ++s) {
        const FlexionRecord pred = io::read_predictions(a.pred[s]);
        const FlexionRecord truth = io::read_flexion(a.truth[s]);
        json entry = {{"predictions", a.pred[s]}, {"truth", a.truth[s]}};
        Matrix est = pred.flexion();
        Matrix ref = truth.flexion();
        if (a.upsample > 1) {
            if (truth.n_samples() != pred.n_samples() * a.upsample) {
                throw ValidationError("with --upsample " + std::to_string(a.upsample) + " the truth must have " +
                                      std::to_string(pred.n_samples() * a.upsample) + " samples, found " +
                                      std::to_string(truth.n_samples()));
            }
            // Also report the working-rate figure so the difference is visible.
            const CorrelationReport working =
                evaluate(est, downsample(truth, a.upsample).flexion(), ex4);
            entry["working_rate"] = correlation_to_json(working);
            est = hold_upsample(est, a.upsample);
        } else if (truth.n_samples() != pred.n_samples()) {
            throw ValidationError("length mismatch: " + std::to_string(pred.n_samples()) + " predicted vs " +
                                  std::to_string(truth.n_samples()) + " true samples");
        }
        const CorrelationReport rep = evaluate(est, ref, ex4);
        entry["correlation"] = correlation_to_json(rep);
        std::cout << "subject " << s + 1 << " (" << a.pred[s] << ")\n" << format_correlation(rep);
        if (entry.contains("working_rate")) {
            const double w = entry["working_rate"]["average"].is_null() ? std::nan("")
                                                                        : entry["working_rate"]["average"].get<double>();
            std::cout << "working-rate average " << w << ", difference " << rep.average - w << '\n';
        }
        if (!a.plot.empty()) {
            write_plot(a.pred.size() == 1 ? a.plot : a.plot + "_" + std::to_string(s + 1), est, ref);
        }
        subjects.push_back(entry);
        reports.push_back(rep);
    }
    const double overall = average_over_subjects(reports);
    std::cout << "average over " << reports.size() << " subject(s): " << overall << '\n';
    if (!a.json_out.empty()) {
        const json j = {{"subjects", subjects},
                        {"average_over_subjects", std::isfinite(overall) ? json(overall) : json(nullptr)},
                        {"exclude_finger4", ex4}};
        io::write_text(a.json_out, j.dump(2) + "\n");
    }
    return 0;
}

// --------------------------------------------------------------------------
// inspect
// --------------------------------------------------------------------------

int cmd_inspect(bool defaults, const std::string& path) {
    if (defaults) {
        std::cout << config_to_json(PipelineConfig{}).dump(2) << '\n';
        return 0;
    }
    if (path.empty()) throw ValidationError("give a file to inspect or --defaults");
    const std::string head = io::read_text(path).substr(0, 4);
    if (head == std::string(io::kSignalMagic, 4) || fs::path(path).extension() == ".csv") {
        const MultichannelSignal s = io::read_signal(path);
        std::cout << "signal: " << s.n_samples() << " samples x " << s.n_channels() << " channels at " << s.rate_hz()
                  << " Hz\nchannels:";
        for (const auto& id : s.channel_ids()) std::cout << ' ' << id;
        std::cout << '\n';
        return 0;
    }
    const TrainedDecoder dec = io::load_decoder(path);
    const auto& p = dec.preprocessing;
    std::cout << "decoder archive (format version " << io::kArchiveVersion << ")\n"
              << "raw rate " << p.raw_rate_hz << " Hz, working rate " << p.working_rate_hz << " Hz, delay "
              << p.delay_ms << " ms, downsample x" << p.downsample_factor << '\n'
              << "state model: " << dec.state_model.selected_channels.size() << " channels, t_s "
              << dec.state_model.shift_ts << ", " << dec.state_model.active_rows.size() << "/"
              << dec.state_model.C.rows() << " active rows" << (dec.state_model.degenerate ? " (degenerate)" : "")
              << '\n'
              << "flexion models: tau " << dec.flex_bank.shift_tau << '\n';
    for (int k = 1; k <= kNumStates; ++k) {
        const auto& m = dec.flex_bank.models[static_cast<std::size_t>(k - 1)];
        std::cout << "  state " << k << ": " << m.feature_index_set.size() << " features, lambda " << m.lambda << '\n';
    }
    std::cout << "global baseline: " << (dec.global_model ? "present" : "absent") << '\n';
    std::cout << "hyperparameters:\n";
    for (const auto& [k, v] : dec.hyperparameters) std::cout << "  " << k << " = " << v << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Switching linear decoding of finger flexion from ECoG"};
    app.require_subcommand(1);

    ImportArgs imp;
    auto* c_import = app.add_subcommand("import", "Convert MAT v5 or delimited text data to signal files");
    c_import->add_option("--mat", imp.mat, "MAT v5 file");
    c_import->add_option("--text", imp.text, "delimited text file, one sample per line");
    c_import->add_option("--ecog-var", imp.ecog_var, "MAT variable holding ECoG (samples x channels)");
    c_import->add_option("--flex-var", imp.flex_var, "MAT variable holding flexion (samples x 5)");
    c_import->add_option("--rate", imp.rate, "sampling rate in Hz")->required();
    c_import->add_option("--out-ecog", imp.out_ecog, "output ECoG signal file")->required();
    c_import->add_option("--out-flex", imp.out_flex, "output flexion signal file");
    c_import->add_flag("--transpose", imp.transpose, "input arrays are channels x samples");

    SynthArgs syn;
    auto* c_synth = app.add_subcommand("synth", "Generate a synthetic bundle with known ground truth");
    c_synth->add_option("--out-dir", syn.out_dir, "output directory")->required();
    c_synth->add_option("--seed", syn.spec.seed, "random seed")->capture_default_str();
    c_synth->add_option("--n-channels", syn.spec.n_channels)->capture_default_str();
    c_synth->add_option("--n-samples", syn.spec.n_samples)->capture_default_str();
    c_synth->add_option("--rate", syn.spec.rate_hz)->capture_default_str();
    c_synth->add_option("--sigma", syn.spec.sigma, "flexion noise level")->capture_default_str();
    c_synth->add_option("--dwell-mean", syn.spec.dwell_mean, "mean state dwell in samples")->capture_default_str();
    c_synth->add_option("--dwell-min", syn.spec.dwell_min)->capture_default_str();
    c_synth->add_option("--drive-gain", syn.spec.drive_gain)->capture_default_str();

    TrainArgs tr;
    auto* c_train = app.add_subcommand("train", "Train a decoder with validation sweeps");
    c_train->add_option("--ecog", tr.ecog, "ECoG signal file")->required();
    c_train->add_option("--flex", tr.flex, "flexion signal file")->required();
    c_train->add_option("--segments", tr.segments, "segments file (working-rate indices); default: automatic");
    c_train->add_option("--config", tr.config, "JSON config file");
    c_train->add_option("--set", tr.overrides, "config override key=value (repeatable)");
    c_train->add_option("--out", tr.out, "decoder archive to write")->required();
    c_train->add_option("--report", tr.report, "validation report (JSON) to write");
    c_train->add_flag("--quiet", tr.quiet, "no progress messages");

    DecodeArgs de;
    auto* c_decode = app.add_subcommand("decode", "Decode flexion from ECoG with a trained decoder");
    c_decode->add_option("--ecog", de.ecog, "ECoG signal file")->required();
    c_decode->add_option("--decoder", de.decoder, "decoder archive")->required();
    c_decode->add_option("--flex", de.flex, "flexion signal file (for forced mode and scoring)");
    c_decode->add_option("--segments", de.segments, "segments file for forced mode");
    c_decode->add_option("--mode", de.mode, "estimated or forced")
        ->check(CLI::IsMember({"estimated", "forced"}))
        ->capture_default_str();
    c_decode->add_flag("--baseline-global", de.global, "decode with the single global linear model");
    c_decode->add_option("--score-smoothing", de.score_smoothing, "moving average over state scores, samples");
    c_decode->add_flag("--include-finger4", de.include_finger4, "average the report over all five fingers");
    c_decode->add_option("--out", de.out, "predictions file to write")->required();
    c_decode->add_option("--truth-out", de.truth_out, "write the aligned working-rate flexion here");
    c_decode->add_option("--report", de.report, "decode report (JSON) to write");

    EvaluateArgs ev;
    auto* c_eval = app.add_subcommand("evaluate", "Correlate predictions with measured flexion");
    c_eval->add_option("--pred", ev.pred, "predictions file (repeat per subject)")->required();
    c_eval->add_option("--truth", ev.truth, "flexion file (repeat per subject)")->required();
    c_eval->add_flag("--include-finger4", ev.include_finger4, "average over all five fingers");
    c_eval->add_option("--upsample", ev.upsample, "hold-expand predictions by this factor first");
    c_eval->add_option("--json", ev.json_out, "machine-readable report to write");
    c_eval->add_option("--plot", ev.plot, "write true-vs-estimated traces to <prefix>.csv (+ .png)");

    bool defaults = false;
    std::string inspect_path;
    auto* c_inspect = app.add_subcommand("inspect", "Describe a decoder or signal file, or print defaults");
    c_inspect->add_flag("--defaults", defaults, "print the default configuration");
    c_inspect->add_option("file", inspect_path, "decoder archive or signal file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitInvalid;
    }

    try {
        if (*c_import) return cmd_import(imp);
        if (*c_synth) return cmd_synth(syn);
        if (*c_train) return cmd_train(tr);
        if (*c_decode) return cmd_decode(de);
        if (*c_eval) return cmd_evaluate(ev);
        if (*c_inspect) return cmd_inspect(defaults, inspect_path);
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInvalid;
    }
    return kExitInvalid;
}
