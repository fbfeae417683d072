// Thin pybind11 layer over the C++ library. Arrays cross as NumPy float64
// (samples x channels); JSON documents cross as strings and are parsed on
// the Python side.

#include "flexdecode/config.hpp"
#include "flexdecode/decode.hpp"
#include "flexdecode/dsp.hpp"
#include "flexdecode/io.hpp"
#include "flexdecode/model.hpp"
#include "flexdecode/pipeline.hpp"
#include "flexdecode/solvers.hpp"
#include "flexdecode/synth.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace flexdecode;

namespace {

using SegmentTuple = std::tuple<Index, Index, int>;

std::optional<std::vector<Segment>> to_segments(const std::optional<std::vector<SegmentTuple>>& in) {
    if (!in) return std::nullopt;
    std::vector<Segment> out;
    out.reserve(in->size());
    for (const auto& [start, end, state] : *in) out.push_back({start, end, state});
    return out;
}

std::vector<SegmentTuple> from_segments(const std::vector<Segment>& in) {
    std::vector<SegmentTuple> out;
    out.reserve(in.size());
    for (const auto& s : in) out.emplace_back(s.start, s.end, s.state);
    return out;
}

std::optional<FlexionRecord> to_flex(const std::optional<Matrix>& flex, double rate) {
    if (!flex) return std::nullopt;
    return FlexionRecord(*flex, rate);
}

Eigen::VectorXi to_array(const StateSequence& s) {
    return Eigen::Map<const Eigen::VectorXi>(s.states().data(), static_cast<Index>(s.states().size()));
}

py::dict synth(std::uint64_t seed, Index n_channels, Index n_samples, double rate_hz, double sigma,
               double dwell_mean, Index dwell_min) {
    SynthSpec spec;
    spec.seed = seed;
    spec.n_channels = n_channels;
    spec.n_samples = n_samples;
    spec.rate_hz = rate_hz;
    spec.sigma = sigma;
    spec.dwell_mean = dwell_mean;
    spec.dwell_min = dwell_min;
    const SynthData d = generate(spec);
    py::dict out;
    out["ecog"] = d.ecog.samples();
    out["flex"] = d.flex.flexion();
    out["states"] = to_array(d.states);
    out["segments"] = from_segments(d.segments.segments());
    out["rate_hz"] = d.ecog.rate_hz();
    return out;
}

class Decoder {
public:
    explicit Decoder(TrainedDecoder dec, nlohmann::json report = {})
        : dec_(std::move(dec)), report_(std::move(report)) {}

    static Decoder train(const Matrix& ecog, const Matrix& flex, double rate_hz,
                         const std::optional<std::vector<SegmentTuple>>& segments, const std::string& config_json) {
        const PipelineConfig cfg =
            config_json.empty() ? PipelineConfig{} : config_from_json(nlohmann::json::parse(config_json));
        const PreparedData data = prepare_data(MultichannelSignal(ecog, rate_hz), FlexionRecord(flex, rate_hz),
                                               to_segments(segments), cfg.delay_ms, cfg.delay_direction,
                                               cfg.downsample_factor);
        TrainOutput out;
        {
            py::gil_scoped_release release;
            out = train_decoder(data, cfg);
        }
        return Decoder(std::move(out.decoder), std::move(out.report));
    }

    static Decoder load(const std::filesystem::path& path) { return Decoder(io::load_decoder(path)); }

    void save(const std::filesystem::path& path) const { io::save_decoder(path, dec_, report_); }

    py::dict decode(const Matrix& ecog, double rate_hz, const std::string& mode, const std::optional<Matrix>& flex,
                    const std::optional<std::vector<SegmentTuple>>& segments, bool use_global_model) const {
        DecodeRequest req;
        if (mode == "forced") {
            req.mode = DecodeMode::Forced;
        } else if (mode != "estimated") {
            throw ParameterError("mode must be 'estimated' or 'forced'");
        }
        req.use_global_model = use_global_model;
        const PreparedData data =
            prepare_data(MultichannelSignal(ecog, rate_hz), to_flex(flex, rate_hz), to_segments(segments), dec_);
        DecodeOutput out;
        {
            py::gil_scoped_release release;
            out = decode_prepared(data, dec_, req);
        }
        py::dict d;
        d["flexion"] = out.result.flexion_hat;
        d["states"] = to_array(out.result.states_hat);
        d["rate_hz"] = data.ecog.rate_hz();
        d["report"] = out.report.dump();
        if (data.flex) d["truth"] = data.flex->flexion();
        return d;
    }

    std::string archive_json() const { return io::decoder_to_json(dec_).dump(); }
    std::string report_json() const { return report_.dump(); }

private:
    TrainedDecoder dec_;
    nlohmann::json report_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Switching linear decoding of finger flexion from ECoG";

    // Library errors surface as ValueError (bad input) or RuntimeError.
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ParameterError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const ValidationError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const Error& e) {
            PyErr_SetString(PyExc_RuntimeError, e.what());
        }
    });

    m.def("ridge_fit", [](const Matrix& X, const Matrix& Y, double lam, bool fit_bias) {
        return ridge_fit(X, Y, lam, fit_bias).H;
    }, py::arg("X"), py::arg("Y"), py::arg("lam"), py::arg("fit_bias") = true,
       "Multi-output ridge; returns H with the bias row last when fit_bias.");

    m.def("ssa_lambda_max", &ssa_lambda_max, py::arg("X"), py::arg("Y"));

    m.def("ssa_fit", [](const Matrix& X, const Matrix& Y, double lambda_s, double tol, int max_iter) {
        const SsaSolution s = ssa_fit(X, Y, lambda_s, {tol, max_iter});
        py::dict d;
        d["C"] = s.C;
        d["objective_trace"] = s.objective_trace;
        d["active_rows"] = s.active_rows;
        d["converged"] = s.converged;
        d["iterations"] = s.iterations;
        return d;
    }, py::arg("X"), py::arg("Y"), py::arg("lambda_s"), py::arg("tol") = 1e-6, py::arg("max_iter") = 1000);

    m.def("savgol_smooth", &savgol_smooth, py::arg("x"), py::arg("order"), py::arg("window"));
    m.def("fit_ar", &fit_ar, py::arg("x"), py::arg("order"));

    m.def("labels_from_flexion", [](const Matrix& flex, double rate_hz) {
        return to_array(labels_from_flexion(FlexionRecord(flex, rate_hz)).states);
    }, py::arg("flex"), py::arg("rate_hz"));

    m.def("correlations", [](const Matrix& pred, const Matrix& truth, bool exclude_finger4) {
        return correlation_to_json(evaluate(pred, truth, exclude_finger4)).dump();
    }, py::arg("pred"), py::arg("truth"), py::arg("exclude_finger4") = true);

    m.def("synth", &synth, py::arg("seed") = 1, py::arg("n_channels") = 16, py::arg("n_samples") = 15000,
          py::arg("rate_hz") = 250.0, py::arg("sigma") = 0.0, py::arg("dwell_mean") = 250.0,
          py::arg("dwell_min") = 1);

    m.def("default_config", [] { return config_to_json(PipelineConfig{}).dump(); });

    py::class_<Decoder>(m, "Decoder")
        .def_static("train", &Decoder::train, py::arg("ecog"), py::arg("flex"), py::arg("rate_hz"),
                    py::arg("segments") = std::nullopt, py::arg("config_json") = "")
        .def_static("load", &Decoder::load, py::arg("path"))
        .def("save", &Decoder::save, py::arg("path"))
        .def("decode", &Decoder::decode, py::arg("ecog"), py::arg("rate_hz"), py::arg("mode") = "estimated",
             py::arg("flex") = std::nullopt, py::arg("segments") = std::nullopt,
             py::arg("use_global_model") = false)
        .def("archive_json", &Decoder::archive_json)
        .def("report_json", &Decoder::report_json);
}
