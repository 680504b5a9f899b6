#include "neckcheck/cli.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>

#include "neckcheck/config.hpp"
#include "neckcheck/error.hpp"
#include "neckcheck/pipeline.hpp"

namespace neckcheck {

namespace {

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool out_required) {
    cmd->add_option("--config", c.config_path, "INI config file");
    cmd->add_option("--seed", c.seed, "overrides every seed in the config");
    auto* out = cmd->add_option("--out", c.out, "output path");
    if (out_required) out->required();
}

Config effective_config(const Common& c) {
    Config config = c.config_path.empty() ? Config{} : load_config(c.config_path);
    if (c.seed) config.override_seed(*c.seed);
    return config;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    return f;
}

void close_out(std::ofstream& f, const std::string& path) {
    f.close();
    if (!f) throw IoError("failed writing " + path);
}

std::string fmt_r2(const std::optional<double>& r2) { return r2 ? fmt::format("{}", *r2) : std::string("nan"); }

models::Dataset to_dataset(const Prepared& p) { return models::build_dataset(p.records); }

int cmd_synth(const Common& c, std::ostream& out) {
    const Config config = effective_config(c);
    const auto script = config.synth.script();
    const auto session = synth::synthesize(script, config.synth.params, config.synth.seed, config.posture.thresholds);
    const auto paths = synth::write_session(session, c.out, config.synth.write_activation);

    std::map<posture::Label, std::size_t> frames_per_label;
    for (auto l : session.labels) ++frames_per_label[l];
    const double period_s = 1.0 / config.synth.params.head_rate;
    fmt::print(out, "seed {}\n", config.synth.seed);
    fmt::print(out, "duration_s {:.3f}\n", script.total_s());
    fmt::print(out, "head_frames {}\n", session.head.size());
    fmt::print(out, "emg_samples {}\n", session.emg.values.size());
    for (const auto& [label, n] : frames_per_label) {
        fmt::print(out, "{}_s {:.3f}\n", posture::to_string(label), static_cast<double>(n) * period_s);
    }
    fmt::print(out, "wrote {}\n", paths.head.string());
    fmt::print(out, "wrote {}\n", paths.emg.string());
    fmt::print(out, "wrote {}\n", paths.labels.string());
    if (config.synth.write_activation) fmt::print(out, "wrote {}\n", paths.activation.string());
    return 0;
}

int cmd_train(const Common& c, const std::string& head, const std::string& emg, const std::string& family,
              std::ostream& out) {
    Config config = effective_config(c);
    if (!family.empty()) {
        const auto f = models::family_from_string(family);
        if (!f) throw ValidationError("unknown model family '" + family + "'");
        config.models.family = *f;
    }
    const auto prepared = prepare_files(config, head, emg);
    const auto [train, test] = models::split_dataset(to_dataset(prepared), config.models.split);
    const auto model = models::fit(config.models.spec_for(config.models.family), train);
    models::save_model(model, c.out);

    const auto tr = models::evaluate(model, train);
    const auto te = models::evaluate(model, test);
    fmt::print(out, "family {}\n", models::to_string(model.family()));
    fmt::print(out, "rows train {} test {} dropped {} settled {}\n", train.size(), test.size(), prepared.dropped,
               prepared.settled);
    fmt::print(out, "train r2 {} mse {}\n", fmt_r2(tr.r2), tr.mse);
    fmt::print(out, "test r2 {} mse {}\n", fmt_r2(te.r2), te.mse);
    for (const auto& w : model.warnings()) fmt::print(out, "warning {}\n", w);
    fmt::print(out, "wrote {}\n", c.out);
    return 0;
}

int cmd_report(const Common& c, const std::string& head, const std::string& emg, std::ostream& out) {
    const Config config = effective_config(c);
    const auto prepared = prepare_files(config, head, emg);
    std::vector<models::ModelSpec> specs;
    for (auto f : config.models.families) specs.push_back(config.models.spec_for(f));
    // Importances always come from a random forest, listed or not.
    const auto rows = models::compare_models(to_dataset(prepared), specs, config.models.split);
    std::optional<models::Features> imp;
    for (const auto& r : rows) {
        if (r.family == models::Family::random_forest) imp = models::feature_importance(r.model);
    }
    if (!imp) {
        const auto [train, test] = models::split_dataset(to_dataset(prepared), config.models.split);
        imp = models::feature_importance(models::fit(config.models.spec_for(models::Family::random_forest), train));
    }

    std::string csv = "family,r2,mse\n";
    for (const auto& r : rows) {
        csv += fmt::format("{},{},{}\n", models::to_string(r.family), fmt_r2(r.metrics.r2), r.metrics.mse);
    }
    csv += "importance_roll,importance_pitch,importance_yaw\n";
    csv += fmt::format("{},{},{}\n", (*imp)[0], (*imp)[1], (*imp)[2]);
    auto f = open_out(c.out);
    f << csv;
    close_out(f, c.out);
    out << csv;
    return 0;
}

int cmd_stream(const Common& c, const std::string& model_path, std::istream& in, std::ostream& out,
               std::ostream& err) {
    const Config config = effective_config(c);
    const auto model = models::load_model(model_path);
    posture::PostureTracker tracker(config.posture.thresholds);

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        if (line == ingest::kHeadHeader) continue;
        ingest::HeadFrame frame;
        try {
            frame = ingest::parse_head_frame(line, line_no);
        } catch (const ValidationError& e) {
            fmt::print(err, "warning: skipped {}\n", e.what());
            err.flush();
            continue;
        }
        const auto cal = ingest::apply_calibration(frame, config.stream.offsets);
        const double env = model.predict({cal.roll_deg, cal.pitch_deg, cal.yaw_deg});
        const auto label = tracker.update(cal);
        fmt::print(out, "{},{:.6f},{}\n", static_cast<long long>(frame.t_ms), env, posture::to_string(label));
        out.flush();
    }
    return 0;
}

int cmd_detect(const Common& c, const std::string& head, const std::string& model_path, std::ostream& out) {
    const Config config = effective_config(c);
    const auto frames = ingest::read_head_csv(head);
    if (frames.empty()) throw ValidationError(head + ": no head frames");
    const auto episodes = detect_episodes(config, frames);
    posture::write_episodes_csv(c.out, episodes);

    std::map<posture::Label, double> seconds;
    for (const auto& e : episodes) seconds[e.label] += e.duration_s;
    fmt::print(out, "episodes {}\n", episodes.size());
    for (const auto& [label, s] : seconds) fmt::print(out, "{}_s {:.3f}\n", posture::to_string(label), s);

    if (!model_path.empty()) {
        const auto model = models::load_model(model_path);
        const auto offsets = ingest::calibrate_offsets(frames, config.sync.calibration_s);
        std::vector<ingest::AlignedRecord> predicted;
        predicted.reserve(frames.size());
        for (const auto& f : frames) {
            const auto cal = ingest::apply_calibration(f, offsets);
            predicted.push_back({cal.t_ms, cal.roll_deg, cal.pitch_deg, cal.yaw_deg,
                                 model.predict({cal.roll_deg, cal.pitch_deg, cal.yaw_deg})});
        }
        fmt::print(out, "strain_index {:.6f}\n", posture::strain_index(predicted, config.posture.strain_threshold));
    }
    fmt::print(out, "wrote {}\n", c.out);
    return 0;
}

int cmd_config(const Common& c, std::ostream& out) {
    const std::string text = dump_config(effective_config(c));
    if (c.out.empty()) {
        out << text;
    } else {
        auto f = open_out(c.out);
        f << text;
        close_out(f, c.out);
    }
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
    CLI::App app{"Head-posture and neck-EMG toolkit", "neckcheck"};
    app.require_subcommand(1);

    Common common;
    std::string head, emg, model, family;

    auto* synth = app.add_subcommand("synth", "generate a synthetic session into --out DIR");
    add_common(synth, common, true);

    auto* train = app.add_subcommand("train", "fit one model family and save it to --out");
    add_common(train, common, true);
    train->add_option("head_csv", head)->required();
    train->add_option("emg_csv", emg)->required();
    train->add_option("--family", family, "overrides models.family");

    auto* report = app.add_subcommand("report", "compare model families, write a CSV to --out");
    add_common(report, common, true);
    report->add_option("head_csv", head)->required();
    report->add_option("emg_csv", emg)->required();

    auto* stream = app.add_subcommand("stream", "label and predict head frames from stdin");
    add_common(stream, common, false);
    stream->add_option("model", model)->required();

    auto* detect = app.add_subcommand("detect", "segment a head recording into episodes, write CSV to --out");
    add_common(detect, common, true);
    detect->add_option("head_csv", head)->required();
    detect->add_option("--model", model, "adds a strain index from predicted envelope");

    auto* config = app.add_subcommand("config", "print the effective config");
    add_common(config, common, false);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        if (synth->parsed()) return cmd_synth(common, out);
        if (train->parsed()) return cmd_train(common, head, emg, family, out);
        if (report->parsed()) return cmd_report(common, head, emg, out);
        if (stream->parsed()) return cmd_stream(common, model, in, out, err);
        if (detect->parsed()) return cmd_detect(common, head, model, out);
        return cmd_config(common, out);
    } catch (const Error& e) {
        fmt::print(err, "error: {}\n", e.what());
        return e.kind() == ErrorKind::io ? 2 : 1;
    } catch (const std::exception& e) {
        fmt::print(err, "error: {}\n", e.what());
        return 1;
    }
}

}  // namespace neckcheck
