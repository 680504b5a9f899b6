#include "neckcheck/config.hpp"

#include <fmt/format.h>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "neckcheck/error.hpp"

namespace neckcheck {

namespace {

namespace pt = boost::property_tree;

struct Key {
    std::function<void(Config&, const std::string&)> set;
    std::function<std::string(const Config&)> get;
};

using Table = std::map<std::string, std::map<std::string, Key>>;

double to_double(const std::string& text) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) {
        throw ValidationError("expected a number, got '" + text + "'");
    }
    return v;
}

long long to_integer(const std::string& text) {
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ValidationError("expected an integer, got '" + text + "'");
    }
    return v;
}

std::uint64_t to_unsigned(const std::string& text) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ValidationError("expected a nonnegative integer, got '" + text + "'");
    }
    return v;
}

bool to_bool(const std::string& text) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw ValidationError("expected true or false, got '" + text + "'");
}

std::vector<std::string> to_list(const std::string& text) {
    std::vector<std::string> items;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b == std::string::npos) throw ValidationError("empty list item in '" + text + "'");
        items.push_back(item.substr(b, e - b + 1));
    }
    return items;
}

template <std::size_t N>
std::array<double, N> to_array(const std::string& text) {
    const auto items = to_list(text);
    if (items.size() != N) throw ValidationError(fmt::format("expected {} comma-separated numbers", N));
    std::array<double, N> out{};
    for (std::size_t i = 0; i < N; ++i) out[i] = to_double(items[i]);
    return out;
}

std::string num(double v) { return fmt::format("{}", v); }

template <std::size_t N>
std::string join(const std::array<double, N>& a) {
    std::string out;
    for (std::size_t i = 0; i < N; ++i) out += (i ? "," : "") + num(a[i]);
    return out;
}

models::Family to_family(const std::string& text) {
    const auto f = models::family_from_string(text);
    if (!f) throw ValidationError("unknown model family '" + text + "'");
    return *f;
}

// Shorthands for numeric members reached through a projection.
template <typename Proj>
Key real(Proj proj) {
    return {[proj](Config& c, const std::string& v) { proj(c) = to_double(v); },
            [proj](const Config& c) { return num(proj(const_cast<Config&>(c))); }};
}

template <typename Proj>
Key integer(Proj proj) {
    return {[proj](Config& c, const std::string& v) {
                using T = std::remove_reference_t<decltype(proj(c))>;
                const long long x = to_integer(v);
                if (x < 0 && std::is_unsigned_v<T>) throw ValidationError("expected a nonnegative integer");
                proj(c) = static_cast<T>(x);
            },
            [proj](const Config& c) { return fmt::format("{}", proj(const_cast<Config&>(c))); }};
}

const Table& table() {
    static const Table t = [] {
        Table t;
        auto& dsp = t["dsp"];
        dsp["sample_rate_hz"] = real([](Config& c) -> double& { return c.dsp.sample_rate; });
        dsp["bandpass_low_hz"] = real([](Config& c) -> double& { return c.dsp.band_low_hz; });
        dsp["bandpass_high_hz"] = real([](Config& c) -> double& { return c.dsp.band_high_hz; });
        dsp["bandpass_order"] = integer([](Config& c) -> int& { return c.dsp.band_order; });
        dsp["envelope_method"] = {
            [](Config& c, const std::string& v) {
                if (v == "rectify_lowpass") {
                    c.dsp.envelope.method = dsp::EnvelopeMethod::rectify_lowpass;
                } else if (v == "rms_window") {
                    c.dsp.envelope.method = dsp::EnvelopeMethod::rms_window;
                } else {
                    throw ValidationError("envelope_method must be rectify_lowpass or rms_window");
                }
            },
            [](const Config& c) {
                return std::string(c.dsp.envelope.method == dsp::EnvelopeMethod::rms_window ? "rms_window"
                                                                                           : "rectify_lowpass");
            }};
        dsp["envelope_lowpass_hz"] = real([](Config& c) -> double& { return c.dsp.envelope.lowpass_hz; });
        dsp["rms_window_ms"] = real([](Config& c) -> double& { return c.dsp.envelope.window_ms; });
        dsp["welch_segment"] = integer([](Config& c) -> std::size_t& { return c.dsp.welch.segment_len; });
        dsp["welch_overlap"] = real([](Config& c) -> double& { return c.dsp.welch.overlap_fraction; });

        auto& sync = t["sync"];
        sync["tolerance_ms"] = real([](Config& c) -> double& { return c.sync.tolerance_ms; });
        sync["calibration_s"] = real([](Config& c) -> double& { return c.sync.calibration_s; });
        sync["settle_s"] = real([](Config& c) -> double& { return c.sync.settle_s; });

        auto& syn = t["synth"];
        syn["seed"] = {[](Config& c, const std::string& v) { c.synth.seed = to_unsigned(v); },
                       [](const Config& c) { return fmt::format("{}", c.synth.seed); }};
        syn["script"] = {[](Config& c, const std::string& v) {
                             c.synth.cycle = synth::parse_script(v, c.synth.cycle.transition_s);
                         },
                         [](const Config& c) { return synth::format_script(c.synth.cycle); }};
        syn["repeat"] = integer([](Config& c) -> int& { return c.synth.repeat; });
        syn["transition_s"] = real([](Config& c) -> double& { return c.synth.cycle.transition_s; });
        syn["head_rate_hz"] = real([](Config& c) -> double& { return c.synth.params.head_rate; });
        syn["bend_pitch_deg"] = {
            [](Config& c, const std::string& v) { c.synth.params.bend_pitch_deg = to_array<4>(v); },
            [](const Config& c) { return join(c.synth.params.bend_pitch_deg); }};
        syn["fhp_pitch_deg"] = real([](Config& c) -> double& { return c.synth.params.fhp_pitch_deg; });
        syn["hunch_pitch_deg"] = real([](Config& c) -> double& { return c.synth.params.hunch_pitch_deg; });
        syn["hunch_roll_deg"] = real([](Config& c) -> double& { return c.synth.params.hunch_roll_deg; });
        syn["jitter_deg"] = {[](Config& c, const std::string& v) { c.synth.params.jitter_deg = to_array<3>(v); },
                             [](const Config& c) { return join(c.synth.params.jitter_deg); }};
        syn["activation_a0"] = real([](Config& c) -> double& { return c.synth.params.activation.a0; });
        syn["activation_amax"] = real([](Config& c) -> double& { return c.synth.params.activation.amax; });
        syn["activation_p0_deg"] = real([](Config& c) -> double& { return c.synth.params.activation.p0_deg; });
        syn["activation_slope_deg"] = real([](Config& c) -> double& { return c.synth.params.activation.slope_deg; });
        syn["activation_w_roll"] = real([](Config& c) -> double& { return c.synth.params.activation.w_roll; });
        syn["activation_w_yaw"] = real([](Config& c) -> double& { return c.synth.params.activation.w_yaw; });
        syn["emg_sample_rate_hz"] = real([](Config& c) -> double& { return c.synth.params.emg.sample_rate; });
        syn["emg_band_low_hz"] = real([](Config& c) -> double& { return c.synth.params.emg.band_low_hz; });
        syn["emg_band_high_hz"] = real([](Config& c) -> double& { return c.synth.params.emg.band_high_hz; });
        syn["sensor_noise"] = real([](Config& c) -> double& { return c.synth.params.emg.sensor_noise; });
        syn["fatigue"] = {[](Config& c, const std::string& v) { c.synth.params.fatigue.enabled = to_bool(v); },
                          [](const Config& c) { return std::string(c.synth.params.fatigue.enabled ? "true" : "false"); }};
        syn["fatigue_factor"] = real([](Config& c) -> double& { return c.synth.params.fatigue.factor; });
        syn["write_activation"] = {[](Config& c, const std::string& v) { c.synth.write_activation = to_bool(v); },
                                   [](const Config& c) { return std::string(c.synth.write_activation ? "true" : "false"); }};

        auto& mod = t["models"];
        mod["family"] = {[](Config& c, const std::string& v) { c.models.family = to_family(v); },
                         [](const Config& c) { return std::string(models::to_string(c.models.family)); }};
        mod["families"] = {[](Config& c, const std::string& v) {
                               c.models.families.clear();
                               for (const auto& item : to_list(v)) c.models.families.push_back(to_family(item));
                           },
                           [](const Config& c) {
                               std::string out;
                               for (auto f : c.models.families) out += (out.empty() ? "" : ",") + std::string(models::to_string(f));
                               return out;
                           }};
        mod["split"] = {[](Config& c, const std::string& v) {
                            if (v == "block") {
                                c.models.split.strategy = models::SplitStrategy::block;
                            } else if (v == "random") {
                                c.models.split.strategy = models::SplitStrategy::random;
                            } else {
                                throw ValidationError("split must be block or random");
                            }
                        },
                        [](const Config& c) {
                            return std::string(c.models.split.strategy == models::SplitStrategy::random ? "random" : "block");
                        }};
        mod["test_fraction"] = real([](Config& c) -> double& { return c.models.split.test_fraction; });
        mod["seed"] = {[](Config& c, const std::string& v) {
                           c.models.hyper.seed = to_unsigned(v);
                           c.models.split.seed = c.models.hyper.seed;
                       },
                       [](const Config& c) { return fmt::format("{}", c.models.hyper.seed); }};
        mod["linear_ridge"] = real([](Config& c) -> double& { return c.models.hyper.ridge; });
        mod["svr_epsilon"] = real([](Config& c) -> double& { return c.models.hyper.svr_epsilon; });
        mod["svr_epochs"] = integer([](Config& c) -> int& { return c.models.hyper.svr_epochs; });
        mod["svr_learning_rate"] = real([](Config& c) -> double& { return c.models.hyper.svr_learning_rate; });
        mod["svr_l2"] = real([](Config& c) -> double& { return c.models.hyper.svr_l2; });
        mod["dt_max_depth"] = integer([](Config& c) -> int& { return c.models.hyper.tree.max_depth; });
        mod["dt_min_samples_leaf"] = integer([](Config& c) -> std::size_t& { return c.models.hyper.tree.min_samples_leaf; });
        mod["rf_trees"] = integer([](Config& c) -> int& { return c.models.hyper.forest_trees; });
        mod["rf_max_depth"] = integer([](Config& c) -> int& { return c.models.hyper.forest_tree.max_depth; });
        mod["rf_min_samples_leaf"] =
            integer([](Config& c) -> std::size_t& { return c.models.hyper.forest_tree.min_samples_leaf; });
        mod["gb_rounds"] = integer([](Config& c) -> int& { return c.models.hyper.boosting_rounds; });
        mod["gb_learning_rate"] = real([](Config& c) -> double& { return c.models.hyper.boosting_learning_rate; });
        mod["gb_max_depth"] = integer([](Config& c) -> int& { return c.models.hyper.boosting_tree.max_depth; });
        mod["gb_min_samples_leaf"] =
            integer([](Config& c) -> std::size_t& { return c.models.hyper.boosting_tree.min_samples_leaf; });

        auto& pos = t["posture"];
        pos["bend_boundaries_deg"] = {
            [](Config& c, const std::string& v) { c.posture.thresholds.bend_boundaries_deg = to_array<4>(v); },
            [](const Config& c) { return join(c.posture.thresholds.bend_boundaries_deg); }};
        pos["hysteresis_deg"] = real([](Config& c) -> double& { return c.posture.thresholds.hysteresis_deg; });
        pos["sustain_s"] = real([](Config& c) -> double& { return c.posture.thresholds.sustain_s; });
        pos["sustain_pitch_deg"] = real([](Config& c) -> double& { return c.posture.thresholds.sustain_pitch_deg; });
        pos["min_episode_s"] = real([](Config& c) -> double& { return c.posture.min_episode_s; });
        pos["strain_threshold"] = real([](Config& c) -> double& { return c.posture.strain_threshold; });

        auto& str = t["stream"];
        str["roll0_deg"] = real([](Config& c) -> double& { return c.stream.offsets.roll0_deg; });
        str["pitch0_deg"] = real([](Config& c) -> double& { return c.stream.offsets.pitch0_deg; });
        str["yaw0_deg"] = real([](Config& c) -> double& { return c.stream.offsets.yaw0_deg; });
        return t;
    }();
    return t;
}

void check(bool ok, std::string_view key, std::string_view message) {
    if (!ok) throw ValidationError(fmt::format("config {}: {}", key, message));
}

}  // namespace

synth::PostureScript Config::Synth::script() const {
    synth::PostureScript out;
    out.transition_s = cycle.transition_s;
    for (int r = 0; r < repeat; ++r) out.segments.insert(out.segments.end(), cycle.segments.begin(), cycle.segments.end());
    return out;
}

models::ModelSpec Config::Models::spec_for(models::Family f) const {
    models::ModelSpec spec = hyper;
    spec.family = f;
    return spec;
}

void Config::override_seed(std::uint64_t seed) {
    synth.seed = seed;
    models.hyper.seed = seed;
    models.split.seed = seed;
}

void Config::validate() const {
    check(dsp.sample_rate > 0.0, "dsp.sample_rate_hz", "must be positive");
    try {
        const double band[] = {dsp.band_low_hz, dsp.band_high_hz};
        dsp::design_butterworth(dsp::FilterKind::bandpass, band, dsp.band_order, dsp.sample_rate);
    } catch (const ValidationError& e) {
        throw ValidationError(std::string("config dsp.bandpass_*: ") + e.what());
    }
    check(dsp.envelope.lowpass_hz > 0.0 && dsp.envelope.lowpass_hz < dsp.sample_rate / 2.0,
          "dsp.envelope_lowpass_hz", "must lie in (0, Nyquist)");
    check(dsp.envelope.window_ms > 0.0, "dsp.rms_window_ms", "must be positive");
    check(dsp.welch.segment_len >= 8, "dsp.welch_segment", "must be at least 8");
    check(dsp.welch.overlap_fraction >= 0.0 && dsp.welch.overlap_fraction < 1.0, "dsp.welch_overlap",
          "must lie in [0, 1)");
    check(sync.tolerance_ms >= 0.0, "sync.tolerance_ms", "must be >= 0");
    check(sync.calibration_s >= 1.0, "sync.calibration_s", "must be at least 1 s");
    check(sync.settle_s >= 0.0, "sync.settle_s", "must be >= 0");
    check(synth.repeat >= 1, "synth.repeat", "must be >= 1");
    try {
        synth::validate(synth.script());
        synth::validate(synth.params);
    } catch (const ValidationError& e) {
        throw ValidationError(std::string("config synth: ") + e.what());
    }
    check(!models.families.empty(), "models.families", "needs at least one family");
    check(models.split.test_fraction > 0.0 && models.split.test_fraction < 1.0, "models.test_fraction",
          "must lie in (0, 1)");
    try {
        models::validate(models.hyper);
    } catch (const ValidationError& e) {
        throw ValidationError(std::string("config models: ") + e.what());
    }
    try {
        posture::validate(posture.thresholds);
    } catch (const ValidationError& e) {
        throw ValidationError(std::string("config posture: ") + e.what());
    }
    check(posture.min_episode_s >= 0.0, "posture.min_episode_s", "must be >= 0");
    check(std::isfinite(posture.strain_threshold), "posture.strain_threshold", "must be finite");
}

Config parse_config(std::string_view text) {
    // Boost's INI reader only knows ';' comments; accept '#' too.
    std::string cleaned;
    std::istringstream lines{std::string(text)};
    std::string line;
    while (std::getline(lines, line)) {
        const auto first = line.find_first_not_of(" \t");
        if (first != std::string::npos && line[first] == '#') line.clear();
        cleaned += line + '\n';
    }
    pt::ptree tree;
    try {
        std::istringstream in(cleaned);
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ValidationError(fmt::format("config line {}: {}", e.line(), e.message()));
    }

    Config config;
    const auto& keys = table();
    // Script and transition interact; apply transition first.
    for (const auto& [section, entries] : tree) {
        const auto sec = keys.find(section);
        if (sec == keys.end()) {
            if (entries.empty() && !entries.data().empty()) {
                throw ValidationError("config key '" + section + "' must live inside a [section]");
            }
            throw ValidationError("config: unknown section [" + section + "]");
        }
        for (const auto& [key, value] : entries) {
            if (!sec->second.contains(key)) throw ValidationError("config: unknown key " + section + "." + key);
        }
    }
    auto apply = [&](const std::string& section, const std::string& key, const std::string& value) {
        try {
            keys.at(section).at(key).set(config, value);
        } catch (const ValidationError& e) {
            throw ValidationError(fmt::format("config {}.{}: {}", section, key, e.what()));
        }
    };
    for (const auto& [section, entries] : tree) {
        if (const auto v = entries.get_optional<std::string>("transition_s"); v && section == "synth") {
            apply(section, "transition_s", *v);
        }
    }
    for (const auto& [section, entries] : tree) {
        for (const auto& [key, value] : entries) {
            if (section == "synth" && key == "transition_s") continue;
            apply(section, key, value.data());
        }
    }
    config.validate();
    return config;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

std::string dump_config(const Config& config) {
    std::string out;
    for (const auto& [section, entries] : table()) {
        out += "[" + section + "]\n";
        for (const auto& [key, k] : entries) out += key + " = " + k.get(config) + "\n";
        out += "\n";
    }
    return out;
}

}  // namespace neckcheck
