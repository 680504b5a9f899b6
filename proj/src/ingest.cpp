#include "neckcheck/ingest.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>

#include "neckcheck/error.hpp"

namespace neckcheck::ingest {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n')) {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                                  : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

double parse_timestamp(std::string_view field, std::size_t line_no) {
    long long value = 0;
    const auto* end = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(field.data(), end, value);
    if (field.empty() || ec != std::errc{} || ptr != end) {
        throw ParseError(line_no, "timestamp '" + std::string(field) + "' is not an integer millisecond value");
    }
    return static_cast<double>(value);
}

double parse_real(std::string_view field, std::string_view name, std::size_t line_no) {
    double value = 0.0;
    const auto* end = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(field.data(), end, value);
    if (field.empty() || ec != std::errc{} || ptr != end) {
        throw ParseError(line_no, std::string(name) + " '" + std::string(field) + "' is not numeric");
    }
    if (!std::isfinite(value)) throw ParseError(line_no, "non-finite " + std::string(name));
    return value;
}

double parse_angle(std::string_view field, std::string_view name, std::size_t line_no) {
    const double value = parse_real(field, name, line_no);
    if (value < -180.0 || value > 180.0) {
        throw ParseError(line_no, std::string(name) + " " + std::string(field) + " outside [-180, 180]");
    }
    return value;
}

// Reads a CSV with an exact header; calls on_line(line, line_no) per data line.
template <typename OnLine>
void read_csv(const std::filesystem::path& path, std::string_view header, OnLine&& on_line) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    std::size_t line_no = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view content = trim(line);
        if (!saw_header) {
            if (content != header) {
                throw ValidationError(path.string() + ": header mismatch, expected '" + std::string(header) +
                                      "' got '" + std::string(content) + "'");
            }
            saw_header = true;
            continue;
        }
        if (content.empty()) continue;
        try {
            on_line(content, line_no);
        } catch (const ParseError& e) {
            throw ParseError(e.line(), path.string() + ": " + e.reason());
        }
    }
    if (in.bad()) throw IoError("read failure on " + path.string());
    if (!saw_header) throw ValidationError(path.string() + ": missing header '" + std::string(header) + "'");
}

template <typename Row>
void check_increasing(const std::vector<Row>& rows, const std::vector<std::size_t>& lines) {
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (!(rows[i].t_ms > rows[i - 1].t_ms)) {
            throw ParseError(lines[i], fmt::format("timestamp {} not after previous {}", rows[i].t_ms,
                                                   rows[i - 1].t_ms));
        }
    }
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

void finish_output(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw IoError("write failure on " + path.string());
}

}  // namespace

HeadFrame parse_head_frame(std::string_view line, std::size_t line_no) {
    const auto fields = split_fields(trim(line));
    if (fields.size() != 4) {
        throw ParseError(line_no, fmt::format("expected 4 fields, found {}", fields.size()));
    }
    HeadFrame f;
    f.t_ms = parse_timestamp(fields[0], line_no);
    f.roll_deg = parse_angle(fields[1], "roll", line_no);
    f.pitch_deg = parse_angle(fields[2], "pitch", line_no);
    f.yaw_deg = parse_angle(fields[3], "yaw", line_no);
    return f;
}

EmgSample parse_emg_sample(std::string_view line, std::size_t line_no) {
    const auto fields = split_fields(trim(line));
    if (fields.size() != 2) {
        throw ParseError(line_no, fmt::format("expected 2 fields, found {}", fields.size()));
    }
    EmgSample s;
    s.t_ms = parse_timestamp(fields[0], line_no);
    s.value = parse_real(fields[1], "value", line_no);
    if (s.value < -1.0 || s.value > 1.0) {
        throw ParseError(line_no, "value " + std::string(fields[1]) + " outside [-1, 1]");
    }
    return s;
}

std::string format_head_frame(const HeadFrame& f) {
    return fmt::format("{},{:.6f},{:.6f},{:.6f}", std::llround(f.t_ms), f.roll_deg, f.pitch_deg, f.yaw_deg);
}

std::string format_emg_sample(const EmgSample& s) { return fmt::format("{},{:.6f}", std::llround(s.t_ms), s.value); }

std::vector<HeadFrame> read_head_csv(const std::filesystem::path& path) {
    std::vector<HeadFrame> frames;
    std::vector<std::size_t> lines;
    read_csv(path, kHeadHeader, [&](std::string_view line, std::size_t line_no) {
        frames.push_back(parse_head_frame(line, line_no));
        lines.push_back(line_no);
    });
    try {
        check_increasing(frames, lines);
    } catch (const ParseError& e) {
        throw ParseError(e.line(), path.string() + ": " + e.reason());
    }
    return frames;
}

std::vector<EmgSample> read_emg_csv(const std::filesystem::path& path) {
    std::vector<EmgSample> samples;
    std::vector<std::size_t> lines;
    read_csv(path, kEmgHeader, [&](std::string_view line, std::size_t line_no) {
        samples.push_back(parse_emg_sample(line, line_no));
        lines.push_back(line_no);
    });
    try {
        check_increasing(samples, lines);
    } catch (const ParseError& e) {
        throw ParseError(e.line(), path.string() + ": " + e.reason());
    }
    return samples;
}

Session load_session(const std::filesystem::path& head_path, const std::filesystem::path& emg_path) {
    Session session;
    session.head = read_head_csv(head_path);
    session.emg = read_emg_csv(emg_path);
    std::vector<double> t;
    t.reserve(session.head.size());
    for (const auto& f : session.head) t.push_back(f.t_ms);
    session.head_rate_hz = estimate_rate_hz(t);
    t.clear();
    t.reserve(session.emg.size());
    for (const auto& s : session.emg) t.push_back(s.t_ms);
    session.emg_rate_hz = estimate_rate_hz(t);
    return session;
}

void write_head_csv(const std::filesystem::path& path, const std::vector<HeadFrame>& frames) {
    auto out = open_output(path);
    out << kHeadHeader << '\n';
    for (const auto& f : frames) out << format_head_frame(f) << '\n';
    finish_output(out, path);
}

void write_emg_csv(const std::filesystem::path& path, const std::vector<EmgSample>& samples) {
    auto out = open_output(path);
    out << kEmgHeader << '\n';
    for (const auto& s : samples) out << format_emg_sample(s) << '\n';
    finish_output(out, path);
}

void write_aligned_csv(const std::filesystem::path& path, const std::vector<AlignedRecord>& records) {
    auto out = open_output(path);
    out << kAlignedHeader << '\n';
    for (const auto& r : records) {
        out << fmt::format("{},{:.6f},{:.6f},{:.6f},{:.9f}\n", std::llround(r.t_ms), r.roll_deg, r.pitch_deg,
                           r.yaw_deg, r.envelope);
    }
    finish_output(out, path);
}

double estimate_rate_hz(const std::vector<double>& timestamps_ms) {
    if (timestamps_ms.size() < 2) return 0.0;
    std::vector<double> gaps;
    gaps.reserve(timestamps_ms.size() - 1);
    for (std::size_t i = 1; i < timestamps_ms.size(); ++i) gaps.push_back(timestamps_ms[i] - timestamps_ms[i - 1]);
    const auto mid = gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2);
    std::nth_element(gaps.begin(), mid, gaps.end());
    return *mid > 0.0 ? 1000.0 / *mid : 0.0;
}

dsp::Series emg_to_series(const std::vector<EmgSample>& samples, double sample_rate) {
    if (!(sample_rate > 0.0)) throw ValidationError("EMG sample rate must be positive");
    dsp::Series series{sample_rate, samples.empty() ? 0.0 : samples.front().t_ms, {}};
    series.values.reserve(samples.size());
    const double period = series.period_ms();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double slot = (samples[i].t_ms - series.t0_ms) / period;
        const auto index = static_cast<long long>(std::llround(slot));
        if (index != static_cast<long long>(i) || std::abs(slot - static_cast<double>(index)) > 0.5) {
            throw ValidationError(fmt::format(
                "EMG sample {} at t={} ms is off the {} Hz grid (expected slot {}, got {:.3f}); gaps are not supported",
                i, samples[i].t_ms, sample_rate, i, slot));
        }
        series.values.push_back(samples[i].value);
    }
    return series;
}

CalibrationOffsets calibrate_offsets(const std::vector<HeadFrame>& frames, double window_s) {
    if (!(window_s >= 1.0) || !std::isfinite(window_s)) {
        throw ValidationError("calibration window must be at least 1 s");
    }
    if (frames.empty()) throw ValidationError("calibration needs frames, got none");
    const double window_ms = window_s * 1000.0;
    const double first = frames.front().t_ms;
    std::vector<double> t;
    for (const auto& f : frames) t.push_back(f.t_ms);
    const double rate = estimate_rate_hz(t);
    const double frame_span = rate > 0.0 ? 1000.0 / rate : 0.0;
    const double covered = frames.back().t_ms - first + frame_span;
    // Small tolerance so a stream of exactly window_s seconds qualifies.
    if (covered + 1e-6 < window_ms) {
        throw ValidationError(fmt::format("calibration needs {} s of frames, stream covers {:.3f} s", window_s,
                                          covered / 1000.0));
    }
    double sin_sum[3] = {0, 0, 0};
    double cos_sum[3] = {0, 0, 0};
    constexpr double to_rad = std::numbers::pi / 180.0;
    for (const auto& f : frames) {
        if (f.t_ms >= first + window_ms) break;
        const double angles[3] = {f.roll_deg, f.pitch_deg, f.yaw_deg};
        for (int a = 0; a < 3; ++a) {
            sin_sum[a] += std::sin(angles[a] * to_rad);
            cos_sum[a] += std::cos(angles[a] * to_rad);
        }
    }
    double mean[3];
    for (int a = 0; a < 3; ++a) mean[a] = std::atan2(sin_sum[a], cos_sum[a]) / to_rad;
    return {mean[0], mean[1], mean[2]};
}

double wrap_degrees(double angle) {
    double r = std::fmod(angle + 180.0, 360.0);
    if (r < 0.0) r += 360.0;
    return r - 180.0;
}

HeadFrame apply_calibration(const HeadFrame& frame, const CalibrationOffsets& offsets) {
    return {frame.t_ms, wrap_degrees(frame.roll_deg - offsets.roll0_deg),
            wrap_degrees(frame.pitch_deg - offsets.pitch0_deg), wrap_degrees(frame.yaw_deg - offsets.yaw0_deg)};
}

Alignment align_streams(const std::vector<HeadFrame>& head, const dsp::Series& envelope, double tolerance_ms) {
    Alignment result;
    result.records.reserve(head.size());
    const std::size_t n = envelope.size();
    const double period = n > 0 ? envelope.period_ms() : 0.0;
    for (const auto& f : head) {
        if (n == 0) {
            ++result.dropped;
            continue;
        }
        const double slot = (f.t_ms - envelope.t0_ms) / period;
        const double nearest = std::round(slot);
        double value = 0.0;
        if (std::abs(slot - nearest) < 1e-9 && nearest >= 0.0 && nearest <= static_cast<double>(n - 1)) {
            value = envelope.values[static_cast<std::size_t>(nearest)];
        } else {
            if (slot < 0.0 || slot > static_cast<double>(n - 1)) {
                ++result.dropped;
                continue;
            }
            const auto lo = static_cast<std::size_t>(std::floor(slot));
            const std::size_t hi = lo + 1;
            if (f.t_ms - envelope.time_ms(lo) > tolerance_ms || envelope.time_ms(hi) - f.t_ms > tolerance_ms) {
                ++result.dropped;
                continue;
            }
            const double w = slot - static_cast<double>(lo);
            const double a = envelope.values[lo];
            const double b = envelope.values[hi];
            value = std::clamp((1.0 - w) * a + w * b, std::min(a, b), std::max(a, b));
        }
        result.records.push_back({f.t_ms, f.roll_deg, f.pitch_deg, f.yaw_deg, value});
    }
    return result;
}

}  // namespace neckcheck::ingest
