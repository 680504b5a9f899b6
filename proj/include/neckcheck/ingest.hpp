#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "neckcheck/dsp.hpp"

namespace neckcheck::ingest {

inline constexpr std::string_view kHeadHeader = "t_ms,roll_deg,pitch_deg,yaw_deg";
inline constexpr std::string_view kEmgHeader = "t_ms,value";
inline constexpr std::string_view kAlignedHeader = "t_ms,roll_deg,pitch_deg,yaw_deg,envelope";

struct HeadFrame {
    double t_ms = 0.0;
    double roll_deg = 0.0;
    double pitch_deg = 0.0;
    double yaw_deg = 0.0;

    bool operator==(const HeadFrame&) const = default;
};

struct EmgSample {
    double t_ms = 0.0;
    double value = 0.0;
};

struct CalibrationOffsets {
    double roll0_deg = 0.0;
    double pitch0_deg = 0.0;
    double yaw0_deg = 0.0;

    CalibrationOffsets negated() const { return {-roll0_deg, -pitch0_deg, -yaw0_deg}; }
};

struct AlignedRecord {
    double t_ms = 0.0;
    double roll_deg = 0.0;
    double pitch_deg = 0.0;
    double yaw_deg = 0.0;
    double envelope = 0.0;
};

/// Parses one head CSV data line. Throws ParseError carrying `line_no`.
HeadFrame parse_head_frame(std::string_view line, std::size_t line_no = 1);
EmgSample parse_emg_sample(std::string_view line, std::size_t line_no = 1);

/// Integer milliseconds and six fractional digits per angle.
std::string format_head_frame(const HeadFrame& frame);
std::string format_emg_sample(const EmgSample& sample);

struct Session {
    std::vector<HeadFrame> head;
    std::vector<EmgSample> emg;
    double head_rate_hz = 0.0;  // from the median inter-sample gap; 0 when < 2 samples
    double emg_rate_hz = 0.0;
};

std::vector<HeadFrame> read_head_csv(const std::filesystem::path& path);
std::vector<EmgSample> read_emg_csv(const std::filesystem::path& path);
Session load_session(const std::filesystem::path& head_path, const std::filesystem::path& emg_path);

void write_head_csv(const std::filesystem::path& path, const std::vector<HeadFrame>& frames);
void write_emg_csv(const std::filesystem::path& path, const std::vector<EmgSample>& samples);
void write_aligned_csv(const std::filesystem::path& path, const std::vector<AlignedRecord>& records);

/// 1000 / median gap between consecutive timestamps, or 0 for fewer than two.
double estimate_rate_hz(const std::vector<double>& timestamps_ms);

/// Places EMG samples on a uniform grid at `sample_rate` starting at the first
/// timestamp. Samples may jitter by up to half a period; a missing sample is
/// a validation error because the filters assume uniform sampling.
dsp::Series emg_to_series(const std::vector<EmgSample>& samples, double sample_rate);

/// Circular per-axis mean over frames in [t_first, t_first + window_s).
CalibrationOffsets calibrate_offsets(const std::vector<HeadFrame>& frames, double window_s);

/// Subtracts offsets and wraps each angle back into [-180, 180).
HeadFrame apply_calibration(const HeadFrame& frame, const CalibrationOffsets& offsets);

double wrap_degrees(double angle);

struct Alignment {
    std::vector<AlignedRecord> records;
    std::size_t dropped = 0;
};

/// One record per head frame bracketed by envelope samples no further than
/// `tolerance_ms` away; the envelope is linearly interpolated between them.
Alignment align_streams(const std::vector<HeadFrame>& head, const dsp::Series& envelope, double tolerance_ms);

}  // namespace neckcheck::ingest
