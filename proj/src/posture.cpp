#include "neckcheck/posture.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>

#include "neckcheck/error.hpp"

namespace neckcheck::posture {

namespace {

constexpr std::array<std::string_view, 6> kLabelNames = {"neutral",     "neck_bend_1", "neck_bend_2",
                                                          "neck_bend_3", "neck_bend_4", "sustained_flexion"};

struct Span {
    Label label;
    std::size_t first;
    std::size_t count;
};

}  // namespace

std::string_view to_string(Label label) { return kLabelNames[static_cast<std::size_t>(label)]; }

std::optional<Label> label_from_string(std::string_view text) {
    for (std::size_t i = 0; i < kLabelNames.size(); ++i) {
        if (kLabelNames[i] == text) return static_cast<Label>(i);
    }
    return std::nullopt;
}

std::optional<int> bend_level(Label label) {
    if (label == Label::sustained_flexion) return std::nullopt;
    return static_cast<int>(label);
}

Label label_for_level(int level) {
    if (level < 0 || level > 4) throw ValidationError("bend level must be in 0..4");
    return static_cast<Label>(level);
}

void validate(const Thresholds& t) {
    for (std::size_t i = 0; i < t.bend_boundaries_deg.size(); ++i) {
        if (!std::isfinite(t.bend_boundaries_deg[i])) throw ValidationError("bend boundaries must be finite");
        if (i > 0 && !(t.bend_boundaries_deg[i] > t.bend_boundaries_deg[i - 1])) {
            throw ValidationError("bend boundaries must be strictly increasing");
        }
    }
    if (!(t.hysteresis_deg >= 0.0)) throw ValidationError("hysteresis_deg must be >= 0");
    if (!(t.sustain_s > 0.0)) throw ValidationError("sustain_s must be > 0");
    if (!std::isfinite(t.sustain_pitch_deg)) throw ValidationError("sustain_pitch_deg must be finite");
}

int bucket_level(double pitch_deg, const Thresholds& t) {
    int level = 0;
    for (double b : t.bend_boundaries_deg) {
        if (pitch_deg >= b) ++level;
    }
    return level;
}

Label classify_frame(double pitch_deg, const Thresholds& t, std::optional<Label> previous) {
    if (previous) {
        if (const auto level = bend_level(*previous)) {
            constexpr double inf = std::numeric_limits<double>::infinity();
            const double lo = *level == 0 ? -inf : t.bend_boundaries_deg[static_cast<std::size_t>(*level - 1)];
            const double hi = *level == 4 ? inf : t.bend_boundaries_deg[static_cast<std::size_t>(*level)];
            if (pitch_deg >= lo - t.hysteresis_deg && pitch_deg < hi + t.hysteresis_deg) return *previous;
        }
    }
    return label_for_level(bucket_level(pitch_deg, t));
}

std::vector<LabeledFrame> classify_stream(const std::vector<ingest::HeadFrame>& frames, const Thresholds& t) {
    std::vector<LabeledFrame> out;
    out.reserve(frames.size());
    std::optional<Label> previous;
    for (const auto& f : frames) {
        const Label label = classify_frame(f.pitch_deg, t, previous);
        out.push_back({f.t_ms, f.pitch_deg, label});
        previous = label;
    }
    return out;
}

std::vector<Episode> segment_episodes(const std::vector<LabeledFrame>& frames, const Thresholds& t,
                                      double min_duration_s) {
    validate(t);
    if (!(min_duration_s >= 0.0)) throw ValidationError("min_duration_s must be >= 0");
    const std::size_t n = frames.size();
    if (n == 0) return {};

    std::vector<double> stamps;
    stamps.reserve(n);
    for (const auto& f : frames) stamps.push_back(f.t_ms);
    const double rate = ingest::estimate_rate_hz(stamps);
    const double frame_span = rate > 0.0 ? 1000.0 / rate : 0.0;

    auto end_ms = [&](std::size_t end_index) {
        return end_index < n ? frames[end_index].t_ms : frames[n - 1].t_ms + frame_span;
    };
    auto duration_s = [&](const Span& s) { return (end_ms(s.first + s.count) - frames[s.first].t_ms) / 1000.0; };
    auto pitch_sum = [&](const Span& s) {
        double sum = 0.0;
        for (std::size_t i = s.first; i < s.first + s.count; ++i) sum += frames[i].pitch_deg;
        return sum;
    };

    std::vector<Span> runs;
    for (std::size_t i = 0; i < n; ++i) {
        if (runs.empty() || runs.back().label != frames[i].label) {
            runs.push_back({frames[i].label, i, 1});
        } else {
            ++runs.back().count;
        }
    }

    std::vector<Span> merged;
    std::optional<Span> carry;  // short leading runs waiting for a successor
    for (Span run : runs) {
        if (duration_s(run) < min_duration_s) {
            if (!merged.empty()) {
                merged.back().count += run.count;
            } else if (carry) {
                carry->count += run.count;
            } else {
                carry = run;
            }
            continue;
        }
        if (carry) {
            run.count += carry->count;
            run.first = carry->first;
            carry.reset();
        }
        if (!merged.empty() && merged.back().label == run.label) {
            merged.back().count += run.count;
        } else {
            merged.push_back(run);
        }
    }
    if (carry) merged.push_back(*carry);

    std::vector<Span> relabeled;
    for (std::size_t i = 0; i < merged.size();) {
        if (!is_flexion(merged[i].label)) {
            relabeled.push_back(merged[i++]);
            continue;
        }
        std::size_t j = i;
        Span stretch{Label::sustained_flexion, merged[i].first, 0};
        while (j < merged.size() && is_flexion(merged[j].label)) stretch.count += merged[j++].count;
        const double mean_pitch = pitch_sum(stretch) / static_cast<double>(stretch.count);
        if (duration_s(stretch) >= t.sustain_s && mean_pitch >= t.sustain_pitch_deg) {
            relabeled.push_back(stretch);
        } else {
            relabeled.insert(relabeled.end(), merged.begin() + static_cast<std::ptrdiff_t>(i),
                             merged.begin() + static_cast<std::ptrdiff_t>(j));
        }
        i = j;
    }

    std::vector<Episode> episodes;
    for (const Span& s : relabeled) {
        if (!episodes.empty() && episodes.back().label == s.label) {
            Episode& e = episodes.back();
            const double sum = e.mean_pitch_deg * static_cast<double>(e.frame_count) + pitch_sum(s);
            e.frame_count += s.count;
            e.end_ms = end_ms(e.first_frame + e.frame_count);
            e.duration_s = (e.end_ms - e.start_ms) / 1000.0;
            e.mean_pitch_deg = sum / static_cast<double>(e.frame_count);
            continue;
        }
        Episode e;
        e.label = s.label;
        e.first_frame = s.first;
        e.frame_count = s.count;
        e.start_ms = frames[s.first].t_ms;
        e.end_ms = end_ms(s.first + s.count);
        e.duration_s = (e.end_ms - e.start_ms) / 1000.0;
        e.mean_pitch_deg = pitch_sum(s) / static_cast<double>(s.count);
        episodes.push_back(e);
    }
    return episodes;
}

std::vector<Label> expand_episodes(const std::vector<Episode>& episodes) {
    std::vector<Label> labels;
    for (const auto& e : episodes) labels.insert(labels.end(), e.frame_count, e.label);
    return labels;
}

double strain_index(const std::vector<ingest::AlignedRecord>& records, double threshold) {
    double total = 0.0;
    for (std::size_t i = 1; i < records.size(); ++i) {
        const double a = std::max(records[i - 1].envelope - threshold, 0.0);
        const double b = std::max(records[i].envelope - threshold, 0.0);
        total += 0.5 * (a + b) * (records[i].t_ms - records[i - 1].t_ms) / 1000.0;
    }
    return total;
}

PostureTracker::PostureTracker(Thresholds thresholds) : thresholds_(thresholds) { validate(thresholds_); }

Label PostureTracker::update(const ingest::HeadFrame& calibrated) {
    const Label level = classify_frame(calibrated.pitch_deg, thresholds_, level_label_);
    level_label_ = level;
    if (!is_flexion(level)) {
        run_frames_ = 0;
        run_pitch_sum_ = 0.0;
        return level;
    }
    if (run_frames_ == 0) run_start_ms_ = calibrated.t_ms;
    ++run_frames_;
    run_pitch_sum_ += calibrated.pitch_deg;
    const double mean = run_pitch_sum_ / static_cast<double>(run_frames_);
    if ((calibrated.t_ms - run_start_ms_) / 1000.0 >= thresholds_.sustain_s && mean >= thresholds_.sustain_pitch_deg) {
        return Label::sustained_flexion;
    }
    return level;
}

void write_labels_csv(const std::filesystem::path& path, const std::vector<double>& t_ms,
                      const std::vector<Label>& labels) {
    if (t_ms.size() != labels.size()) throw ValidationError("labels and timestamps differ in length");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << kLabelsHeader << '\n';
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out << std::llround(t_ms[i]) << ',' << to_string(labels[i]) << '\n';
    }
    out.flush();
    if (!out) throw IoError("write failure on " + path.string());
}

std::vector<std::pair<double, Label>> read_labels_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::pair<double, Label>> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1) {
            if (line != kLabelsHeader) throw ValidationError(path.string() + ": header mismatch");
            continue;
        }
        if (line.empty()) continue;
        const auto comma = line.find(',');
        long long t = 0;
        const auto [ptr, ec] = std::from_chars(line.data(), line.data() + (comma == std::string::npos ? 0 : comma), t);
        const auto label = comma == std::string::npos ? std::nullopt : label_from_string(line.substr(comma + 1));
        if (comma == std::string::npos || ec != std::errc{} || ptr != line.data() + comma || !label) {
            throw ParseError(line_no, path.string() + ": malformed label row '" + line + "'");
        }
        rows.emplace_back(static_cast<double>(t), *label);
    }
    return rows;
}

void write_episodes_csv(const std::filesystem::path& path, const std::vector<Episode>& episodes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << kEpisodesHeader << '\n';
    for (const auto& e : episodes) {
        out << fmt::format("{},{},{},{:.3f},{:.6f}\n", to_string(e.label), std::llround(e.start_ms),
                           std::llround(e.end_ms), e.duration_s, e.mean_pitch_deg);
    }
    out.flush();
    if (!out) throw IoError("write failure on " + path.string());
}

}  // namespace neckcheck::posture
