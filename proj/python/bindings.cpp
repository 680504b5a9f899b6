#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "neckcheck/cli.hpp"
#include "neckcheck/config.hpp"
#include "neckcheck/error.hpp"
#include "neckcheck/pipeline.hpp"

namespace py = pybind11;
using namespace neckcheck;

namespace {

dsp::EnvelopeMethod envelope_method(const std::string& name) {
    if (name == "rectify_lowpass") return dsp::EnvelopeMethod::rectify_lowpass;
    if (name == "rms_window") return dsp::EnvelopeMethod::rms_window;
    throw ValidationError("envelope method must be rectify_lowpass or rms_window");
}

models::Family family(const std::string& name) {
    const auto f = models::family_from_string(name);
    if (!f) throw ValidationError("unknown model family '" + name + "'");
    return *f;
}

using Frame = std::tuple<double, double, double, double>;

std::vector<ingest::HeadFrame> frames_from(const std::vector<Frame>& rows) {
    std::vector<ingest::HeadFrame> out;
    out.reserve(rows.size());
    for (const auto& [t, r, p, y] : rows) out.push_back({t, r, p, y});
    return out;
}

std::vector<Frame> frames_to(const std::vector<ingest::HeadFrame>& frames) {
    std::vector<Frame> out;
    out.reserve(frames.size());
    for (const auto& f : frames) out.emplace_back(f.t_ms, f.roll_deg, f.pitch_deg, f.yaw_deg);
    return out;
}

models::Dataset dataset_from(const std::vector<models::Features>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ValidationError("features and targets differ in length");
    models::Dataset ds;
    for (std::size_t i = 0; i < x.size(); ++i) ds.rows.push_back({x[i], y[i], static_cast<double>(i)});
    return ds;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Head-posture and neck-EMG toolkit";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    auto validation = py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<ParseError>(m, "ParseError", validation.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());

    // dsp
    m.def(
        "bandpass_magnitude",
        [](const std::vector<double>& freqs, double low, double high, int order, double fs) {
            const double band[] = {low, high};
            const auto bp = dsp::design_butterworth(dsp::FilterKind::bandpass, band, order, fs);
            std::vector<double> out;
            for (double f : freqs) out.push_back(dsp::magnitude_response(bp, f));
            return out;
        },
        py::arg("freqs"), py::arg("low_hz") = 20.0, py::arg("high_hz") = 200.0, py::arg("order") = 4,
        py::arg("sample_rate") = 500.0);
    m.def(
        "bandpass",
        [](const std::vector<double>& values, double fs, double low, double high, int order) {
            const double band[] = {low, high};
            return dsp::filter_forward(dsp::design_butterworth(dsp::FilterKind::bandpass, band, order, fs),
                                       dsp::Series{fs, 0.0, values})
                .values;
        },
        py::arg("values"), py::arg("sample_rate") = 500.0, py::arg("low_hz") = 20.0, py::arg("high_hz") = 200.0,
        py::arg("order") = 4);
    m.def(
        "extract_envelope",
        [](const std::vector<double>& values, double fs, const std::string& method, double lowpass_hz,
           double window_ms) {
            return dsp::extract_envelope(dsp::Series{fs, 0.0, values}, {envelope_method(method), lowpass_hz, window_ms})
                .values;
        },
        py::arg("values"), py::arg("sample_rate") = 500.0, py::arg("method") = "rectify_lowpass",
        py::arg("lowpass_hz") = 2.0, py::arg("window_ms") = 250.0);
    m.def(
        "welch_psd",
        [](const std::vector<double>& values, double fs, std::size_t segment, double overlap) {
            const auto s = dsp::welch_psd(dsp::Series{fs, 0.0, values}, {segment, overlap});
            return std::make_pair(s.freqs, s.power);
        },
        py::arg("values"), py::arg("sample_rate") = 500.0, py::arg("segment_len") = 256, py::arg("overlap") = 0.5);
    m.def(
        "median_frequency",
        [](const std::vector<double>& freqs, const std::vector<double>& power) {
            return dsp::median_frequency(dsp::Spectrum{freqs, power});
        },
        py::arg("freqs"), py::arg("power"));

    // ingest
    m.def(
        "parse_head_frame",
        [](const std::string& line) {
            const auto f = ingest::parse_head_frame(line);
            return Frame{f.t_ms, f.roll_deg, f.pitch_deg, f.yaw_deg};
        },
        py::arg("line"));
    m.def("load_head_csv", [](const std::filesystem::path& p) { return frames_to(ingest::read_head_csv(p)); },
          py::arg("path"));

    // synth
    m.def(
        "synthesize",
        [](std::uint64_t seed, int repeat, bool fatigue) {
            Config c;
            c.synth.repeat = repeat;
            c.synth.params.fatigue.enabled = fatigue;
            const auto s = synth::synthesize(c.synth.script(), c.synth.params, seed, c.posture.thresholds);
            std::vector<std::string> labels;
            for (auto l : s.labels) labels.emplace_back(posture::to_string(l));
            py::dict out;
            out["head"] = frames_to(s.head);
            out["labels"] = labels;
            out["emg"] = s.emg.values;
            out["activation"] = s.activation.values;
            out["emg_rate"] = s.emg.sample_rate;
            return out;
        },
        py::arg("seed") = 7, py::arg("repeat") = 6, py::arg("fatigue") = false);

    // posture
    m.def(
        "detect_episodes",
        [](const std::vector<Frame>& head) {
            std::vector<py::dict> out;
            for (const auto& e : detect_episodes(Config{}, frames_from(head))) {
                py::dict d;
                d["label"] = std::string(posture::to_string(e.label));
                d["start_ms"] = e.start_ms;
                d["end_ms"] = e.end_ms;
                d["duration_s"] = e.duration_s;
                d["mean_pitch_deg"] = e.mean_pitch_deg;
                out.push_back(d);
            }
            return out;
        },
        py::arg("head"));

    // models
    m.def(
        "score",
        [](const std::vector<double>& y, const std::vector<double>& yhat) {
            const auto s = models::score(y, yhat);
            return std::make_pair(s.r2, s.mse);
        },
        py::arg("targets"), py::arg("predictions"));

    py::class_<models::RegressionModel>(m, "Model")
        .def_static(
            "fit",
            [](const std::string& fam, const std::vector<models::Features>& x, const std::vector<double>& y,
               std::uint64_t seed, int trees) {
                auto spec = models::default_spec(family(fam));
                spec.seed = seed;
                spec.forest_trees = trees;
                return models::fit(spec, dataset_from(x, y));
            },
            py::arg("family"), py::arg("features"), py::arg("targets"), py::arg("seed") = 7, py::arg("trees") = 100)
        .def_static("from_json", [](const std::string& text) { return models::deserialize(text); })
        .def_static("load", [](const std::filesystem::path& p) { return models::load_model(p); })
        .def_property_readonly("family", [](const models::RegressionModel& m) { return std::string(models::to_string(m.family())); })
        .def("predict",
             [](const models::RegressionModel& m, const std::vector<models::Features>& x) {
                 std::vector<double> out;
                 out.reserve(x.size());
                 for (const auto& f : x) out.push_back(m.predict(f));
                 return out;
             })
        .def("feature_importance", &models::feature_importance)
        .def("to_json", &models::serialize)
        .def("save", [](const models::RegressionModel& m, const std::filesystem::path& p) { models::save_model(m, p); });

    // cli
    m.def(
        "run_cli",
        [](const std::vector<std::string>& args, const std::string& stdin_text) {
            std::istringstream in(stdin_text);
            std::ostringstream out, err;
            const int code = run_cli(args, in, out, err);
            return std::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), py::arg("stdin") = "");
    m.def("default_config", []() { return dump_config(Config{}); });
}
