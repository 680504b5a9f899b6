#include "neckcheck/synth.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>

#include "neckcheck/error.hpp"
#include "neckcheck/rng.hpp"

namespace neckcheck::synth {

namespace {

enum : std::uint64_t { kKinematicsStream = 1, kMuscleNoiseStream = 2, kSensorNoiseStream = 3 };

std::string posture_token(const Segment& s) {
    switch (s.posture) {
        case Posture::neutral: return "neutral";
        case Posture::neck_bend: return "neck_bend_" + std::to_string(s.level);
        case Posture::hunch: return "hunch";
        case Posture::fhp: return "fhp";
    }
    return "neutral";
}

double parse_number(std::string_view text, std::string_view what) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) {
        throw ValidationError("script: bad " + std::string(what) + " '" + std::string(text) + "'");
    }
    return v;
}

std::string_view strip(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

// Variance gain of a cascade: energy of its impulse response.
double noise_power_gain(const dsp::BiquadCascade& filter) {
    dsp::StreamingFilter f(filter);
    double energy = 0.0;
    for (int i = 0; i < 8192; ++i) {
        const double y = f.process(i == 0 ? 1.0 : 0.0);
        energy += y * y;
    }
    return energy;
}

dsp::BiquadCascade muscle_band(const EmgParams& emg, double compression) {
    const double cutoffs[] = {emg.band_low_hz * compression, emg.band_high_hz * compression};
    return dsp::design_butterworth(dsp::FilterKind::bandpass, cutoffs, 4, emg.sample_rate);
}

}  // namespace

double PostureScript::total_s() const {
    double total = 0.0;
    for (const auto& s : segments) total += s.duration_s;
    return total;
}

PostureScript parse_script(std::string_view text, double transition_s) {
    PostureScript script;
    script.transition_s = transition_s;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = text.find(',', start);
        const std::string_view token =
            strip(text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        start = comma == std::string_view::npos ? text.size() + 1 : comma + 1;
        if (token.empty()) continue;

        std::vector<std::string_view> parts;
        std::size_t p = 0;
        while (true) {
            const std::size_t colon = token.find(':', p);
            parts.push_back(strip(token.substr(p, colon == std::string_view::npos ? std::string_view::npos : colon - p)));
            if (colon == std::string_view::npos) break;
            p = colon + 1;
        }
        if (parts.size() < 2) throw ValidationError("script: segment '" + std::string(token) + "' needs posture:seconds");

        Segment seg;
        const std::string_view name = parts[0];
        if (name == "neutral") {
            seg.posture = Posture::neutral;
        } else if (name == "hunch") {
            seg.posture = Posture::hunch;
        } else if (name == "fhp") {
            seg.posture = Posture::fhp;
        } else if (name.size() == 11 && name.substr(0, 10) == "neck_bend_" && name[10] >= '1' && name[10] <= '4') {
            seg.posture = Posture::neck_bend;
            seg.level = name[10] - '0';
        } else {
            throw ValidationError("script: unknown posture '" + std::string(name) + "'");
        }
        seg.duration_s = parse_number(parts[1], "duration");
        for (std::size_t i = 2; i < parts.size(); ++i) {
            const auto eq = parts[i].find('=');
            const std::string_view key = eq == std::string_view::npos ? parts[i] : parts[i].substr(0, eq);
            const std::string_view value = eq == std::string_view::npos ? std::string_view{} : parts[i].substr(eq + 1);
            if (key == "roll") {
                seg.roll_deg = parse_number(value, "roll");
            } else if (key == "yaw") {
                seg.yaw_deg = parse_number(value, "yaw");
            } else {
                throw ValidationError("script: unknown segment option '" + std::string(parts[i]) + "'");
            }
        }
        script.segments.push_back(seg);
    }
    validate(script);
    return script;
}

std::string format_script(const PostureScript& script) {
    std::string out;
    for (const auto& s : script.segments) {
        if (!out.empty()) out += ",";
        out += fmt::format("{}:{}", posture_token(s), s.duration_s);
        if (s.roll_deg != 0.0) out += fmt::format(":roll={}", s.roll_deg);
        if (s.yaw_deg != 0.0) out += fmt::format(":yaw={}", s.yaw_deg);
    }
    return out;
}

void validate(const PostureScript& script) {
    if (script.segments.empty()) throw ValidationError("posture script is empty");
    if (!(script.transition_s >= 0.0) || !std::isfinite(script.transition_s)) {
        throw ValidationError("transition_s must be >= 0");
    }
    for (const auto& s : script.segments) {
        if (!(s.duration_s > 0.0) || !std::isfinite(s.duration_s)) {
            throw ValidationError("segment durations must be positive");
        }
        if (s.posture == Posture::neck_bend && (s.level < 1 || s.level > 4)) {
            throw ValidationError("neck bend level must be in 1..4");
        }
        if (script.segments.size() > 1 && s.duration_s < script.transition_s) {
            throw ValidationError(fmt::format("segment {} of {} s is shorter than the {} s transition",
                                              posture_token(s), s.duration_s, script.transition_s));
        }
        if (std::abs(s.roll_deg) > 90.0 || std::abs(s.yaw_deg) > 90.0) {
            throw ValidationError("segment roll/yaw offsets must be within +-90 degrees");
        }
    }
}

PostureScript default_script(int repeats) {
    if (repeats < 1) throw ValidationError("script repeat count must be >= 1");
    // The ladder holds stay under the 10 s sustain rule so every bend level
    // shows up as its own label; the fhp and hunch holds are long enough to
    // count as sustained flexion. Two holds tilt the head and one neutral
    // pause turns it, so roll and yaw carry some signal.
    const std::vector<Segment> cycle = {
        {Posture::neutral, 0, 12.0},
        {Posture::neck_bend, 1, 8.0, 30.0, 0.0},
        {Posture::neutral, 0, 7.0},
        {Posture::neck_bend, 2, 8.0, -20.0, 0.0},
        {Posture::neutral, 0, 7.0, 0.0, 40.0},
        {Posture::neck_bend, 3, 8.0},
        {Posture::neutral, 0, 7.0},
        {Posture::neck_bend, 4, 8.0},
        {Posture::neutral, 0, 7.0},
        {Posture::fhp, 0, 25.0},
        {Posture::neutral, 0, 8.0},
        {Posture::hunch, 0, 15.0},
    };
    PostureScript script;
    for (int r = 0; r < repeats; ++r) script.segments.insert(script.segments.end(), cycle.begin(), cycle.end());
    return script;
}

void validate(const GeneratorParams& p) {
    if (!(p.head_rate > 0.0)) throw ValidationError("head_rate must be positive");
    for (std::size_t i = 1; i < p.bend_pitch_deg.size(); ++i) {
        if (!(p.bend_pitch_deg[i] > p.bend_pitch_deg[i - 1])) {
            throw ValidationError("bend_pitch_deg must increase with level");
        }
    }
    for (double a : {p.bend_pitch_deg[0], p.bend_pitch_deg[3], p.fhp_pitch_deg, p.hunch_pitch_deg}) {
        if (!(std::abs(a) <= 90.0)) throw ValidationError("posture pitch targets must be within +-90 degrees");
    }
    if (!(std::abs(p.hunch_roll_deg) <= 90.0)) throw ValidationError("hunch_roll_deg must be within +-90 degrees");
    for (double j : p.jitter_deg) {
        if (!(j >= 0.0) || !std::isfinite(j)) throw ValidationError("jitter must be >= 0");
    }
    const auto& a = p.activation;
    if (!(a.a0 > 0.0 && a.a0 < a.amax && a.amax <= 1.0)) {
        throw ValidationError("activation requires 0 < a0 < amax <= 1");
    }
    if (!(a.slope_deg > 0.0)) throw ValidationError("activation slope must be > 0");
    if (!std::isfinite(a.p0_deg) || !(a.w_roll >= 0.0) || !(a.w_yaw >= 0.0)) {
        throw ValidationError("activation midpoint must be finite and weights >= 0");
    }
    if (!(p.emg.sensor_noise >= 0.0)) throw ValidationError("sensor noise must be >= 0");
    if (!(p.emg.sample_rate > 0.0)) throw ValidationError("EMG sample rate must be positive");
    if (!(p.fatigue.factor > 0.0 && p.fatigue.factor <= 1.0)) {
        throw ValidationError("fatigue factor must lie in (0, 1]");
    }
    // The compressed band must still be a valid design at the EMG rate.
    muscle_band(p.emg, 1.0);
    if (p.fatigue.enabled) muscle_band(p.emg, p.fatigue.factor);
}

std::array<double, 3> segment_target(const Segment& s, const GeneratorParams& p) {
    std::array<double, 3> t{s.roll_deg, 0.0, s.yaw_deg};
    switch (s.posture) {
        case Posture::neutral: break;
        case Posture::neck_bend: t[1] = p.bend_pitch_deg[static_cast<std::size_t>(s.level - 1)]; break;
        case Posture::hunch:
            t[1] = p.hunch_pitch_deg;
            t[0] += p.hunch_roll_deg;
            break;
        case Posture::fhp: t[1] = p.fhp_pitch_deg; break;
    }
    return t;
}

std::vector<posture::Label> segment_labels(const PostureScript& script, const GeneratorParams& params,
                                           const posture::Thresholds& thresholds) {
    using posture::Label;
    const auto& segs = script.segments;
    std::vector<Label> labels(segs.size(), Label::neutral);
    for (std::size_t i = 0; i < segs.size(); ++i) {
        switch (segs[i].posture) {
            case Posture::neutral: labels[i] = Label::neutral; break;
            case Posture::neck_bend: labels[i] = posture::label_for_level(segs[i].level); break;
            case Posture::hunch:
            case Posture::fhp: labels[i] = Label::sustained_flexion; break;
        }
    }
    for (std::size_t i = 0; i < segs.size();) {
        if (segs[i].posture == Posture::neutral) {
            ++i;
            continue;
        }
        std::size_t j = i;
        double duration = 0.0;
        double weighted_pitch = 0.0;
        while (j < segs.size() && segs[j].posture != Posture::neutral) {
            duration += segs[j].duration_s;
            weighted_pitch += segs[j].duration_s * segment_target(segs[j], params)[1];
            ++j;
        }
        if (duration >= thresholds.sustain_s && weighted_pitch / duration >= thresholds.sustain_pitch_deg) {
            std::fill(labels.begin() + static_cast<std::ptrdiff_t>(i), labels.begin() + static_cast<std::ptrdiff_t>(j),
                      Label::sustained_flexion);
        }
        i = j;
    }
    return labels;
}

Kinematics generate_kinematics(const PostureScript& script, const GeneratorParams& params, std::uint64_t seed,
                               const posture::Thresholds& thresholds) {
    validate(script);
    validate(params);
    const auto& segs = script.segments;
    const auto seg_labels = segment_labels(script, params, thresholds);

    std::vector<double> bounds_ms{0.0};
    for (const auto& s : segs) bounds_ms.push_back(bounds_ms.back() + s.duration_s * 1000.0);
    const double period_ms = 1000.0 / params.head_rate;
    const auto count = static_cast<std::size_t>(std::floor(bounds_ms.back() / period_ms + 1e-9));
    const double half_ramp_ms = script.transition_s * 500.0;

    Xoshiro256 rng(derive_seed(seed, kKinematicsStream));
    Kinematics out;
    out.frames.reserve(count);
    out.labels.reserve(count);
    std::size_t seg = 0;
    for (std::size_t k = 0; k < count; ++k) {
        // Integer-ms grid for exact rates; otherwise the nearest millisecond.
        const double t = std::round(static_cast<double>(k) * period_ms);
        while (seg + 1 < segs.size() && t >= bounds_ms[seg + 1]) ++seg;
        std::array<double, 3> pose = segment_target(segs[seg], params);

        // Ramp from the previous segment (second half) or into the next (first half).
        auto blend = [&](std::size_t from, std::size_t to, double boundary) {
            const double u = (t - (boundary - half_ramp_ms)) / (2.0 * half_ramp_ms);
            const double w = 0.5 - 0.5 * std::cos(std::numbers::pi * u);
            const auto a = segment_target(segs[from], params);
            const auto b = segment_target(segs[to], params);
            for (int axis = 0; axis < 3; ++axis) pose[axis] = a[axis] + w * (b[axis] - a[axis]);
        };
        if (half_ramp_ms > 0.0) {
            if (seg > 0 && t - bounds_ms[seg] < half_ramp_ms) {
                blend(seg - 1, seg, bounds_ms[seg]);
            } else if (seg + 1 < segs.size() && bounds_ms[seg + 1] - t <= half_ramp_ms) {
                blend(seg, seg + 1, bounds_ms[seg + 1]);
            }
        }

        ingest::HeadFrame f{t, 0, 0, 0};
        double* axes[3] = {&f.roll_deg, &f.pitch_deg, &f.yaw_deg};
        for (int axis = 0; axis < 3; ++axis) {
            const double noisy = pose[axis] + params.jitter_deg[axis] * rng.normal();
            *axes[axis] = std::clamp(noisy, -180.0, 180.0);
        }
        out.frames.push_back(f);
        out.labels.push_back(seg_labels[seg]);
    }
    return out;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double activation_from_pose(const ingest::HeadFrame& f, const ActivationParams& a) {
    const double effective = f.pitch_deg + a.w_roll * std::abs(f.roll_deg) + a.w_yaw * std::abs(f.yaw_deg);
    return a.a0 + (a.amax - a.a0) * logistic((effective - a.p0_deg) / a.slope_deg);
}

dsp::Series activation_series(const std::vector<ingest::HeadFrame>& frames, double duration_s,
                              const GeneratorParams& params) {
    dsp::Series out{params.emg.sample_rate, 0.0, {}};
    if (frames.empty()) return out;
    const auto count = static_cast<std::size_t>(std::floor(duration_s * params.emg.sample_rate + 1e-9));
    out.t0_ms = frames.front().t_ms;
    out.values.reserve(count);
    std::size_t j = 0;
    for (std::size_t k = 0; k < count; ++k) {
        const double t = std::round(out.time_ms(k) * 1e6) / 1e6;
        while (j + 1 < frames.size() && frames[j + 1].t_ms <= t) ++j;
        ingest::HeadFrame pose = frames[j];
        if (j + 1 < frames.size() && t > frames[j].t_ms) {
            const auto& a = frames[j];
            const auto& b = frames[j + 1];
            const double w = (t - a.t_ms) / (b.t_ms - a.t_ms);
            pose.roll_deg = a.roll_deg + w * (b.roll_deg - a.roll_deg);
            pose.pitch_deg = a.pitch_deg + w * (b.pitch_deg - a.pitch_deg);
            pose.yaw_deg = a.yaw_deg + w * (b.yaw_deg - a.yaw_deg);
        }
        out.values.push_back(activation_from_pose(pose, params.activation));
    }
    return out;
}

dsp::Series generate_emg(const dsp::Series& activation, const GeneratorParams& params, std::uint64_t seed) {
    for (double a : activation.values) {
        if (!(a >= 0.0 && a <= 1.0)) throw ValidationError(fmt::format("activation {} outside [0, 1]", a));
    }
    if (std::abs(activation.sample_rate - params.emg.sample_rate) > 1e-9) {
        throw ValidationError("activation must be sampled at the EMG rate");
    }
    const auto& emg = params.emg;
    Xoshiro256 muscle_rng(derive_seed(seed, kMuscleNoiseStream));
    Xoshiro256 sensor_rng(derive_seed(seed, kSensorNoiseStream));

    dsp::StreamingFilter band(muscle_band(emg, 1.0));
    double gain = 1.0 / std::sqrt(noise_power_gain(band.design()));
    // Burn-in so the noise is stationary from the first sample.
    for (int i = 0; i < static_cast<int>(emg.sample_rate); ++i) band.process(muscle_rng.normal());

    const std::size_t n = activation.size();
    const auto block = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.25 * emg.sample_rate)));
    dsp::Series out{activation.sample_rate, activation.t0_ms, {}};
    out.values.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        if (params.fatigue.enabled && k % block == 0 && n > 1) {
            const double progress = static_cast<double>(k) / static_cast<double>(n - 1);
            const double compression = 1.0 - (1.0 - params.fatigue.factor) * progress;
            band.retune(muscle_band(emg, compression));
            gain = 1.0 / std::sqrt(noise_power_gain(band.design()));
        }
        const double muscle = gain * band.process(muscle_rng.normal());
        const double sensor = emg.sensor_noise * sensor_rng.normal();
        // + 0.0 turns a signed zero into +0.
        out.values.push_back(std::clamp(activation.values[k] * muscle + sensor, -1.0, 1.0) + 0.0);
    }
    return out;
}

SyntheticSession synthesize(const PostureScript& script, const GeneratorParams& params, std::uint64_t seed,
                            const posture::Thresholds& thresholds) {
    auto kin = generate_kinematics(script, params, seed, thresholds);
    SyntheticSession session;
    session.seed = seed;
    session.activation = activation_series(kin.frames, script.total_s(), params);
    session.emg = generate_emg(session.activation, params, seed);
    session.head = std::move(kin.frames);
    session.labels = std::move(kin.labels);
    return session;
}

SessionPaths session_paths(const std::filesystem::path& out_dir) {
    return {out_dir / "head.csv", out_dir / "emg.csv", out_dir / "labels.csv", out_dir / "activation.csv"};
}

SessionPaths write_session(const SyntheticSession& session, const std::filesystem::path& out_dir,
                           bool write_activation) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    const auto paths = session_paths(out_dir);

    ingest::write_head_csv(paths.head, session.head);

    std::vector<ingest::EmgSample> samples;
    samples.reserve(session.emg.size());
    for (std::size_t k = 0; k < session.emg.size(); ++k) {
        samples.push_back({session.emg.time_ms(k), session.emg.values[k]});
    }
    ingest::write_emg_csv(paths.emg, samples);

    std::vector<double> t;
    t.reserve(session.head.size());
    for (const auto& f : session.head) t.push_back(f.t_ms);
    posture::write_labels_csv(paths.labels, t, session.labels);

    if (write_activation) {
        std::ofstream out(paths.activation, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + paths.activation.string());
        out << "t_ms,activation\n";
        for (std::size_t k = 0; k < session.activation.size(); ++k) {
            out << fmt::format("{},{:.6f}\n", std::llround(session.activation.time_ms(k)), session.activation.values[k]);
        }
        out.flush();
        if (!out) throw IoError("write failure on " + paths.activation.string());
    }
    return paths;
}

SyntheticSession synth_session(const PostureScript& script, const GeneratorParams& params, std::uint64_t seed,
                               const std::filesystem::path& out_dir, const posture::Thresholds& thresholds) {
    auto session = synthesize(script, params, seed, thresholds);
    write_session(session, out_dir);
    return session;
}

}  // namespace neckcheck::synth
