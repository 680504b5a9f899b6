#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "neckcheck/ingest.hpp"

namespace neckcheck::posture {

enum class Label { neutral, neck_bend_1, neck_bend_2, neck_bend_3, neck_bend_4, sustained_flexion };

inline constexpr std::string_view kLabelsHeader = "t_ms,posture_label";
inline constexpr std::string_view kEpisodesHeader = "label,start_ms,end_ms,duration_s,mean_pitch_deg";

std::string_view to_string(Label label);
std::optional<Label> label_from_string(std::string_view text);

/// Bend level 0 (neutral) .. 4; sustained_flexion has no level.
std::optional<int> bend_level(Label label);
Label label_for_level(int level);
inline bool is_flexion(Label label) { return label != Label::neutral; }

struct Thresholds {
    std::array<double, 4> bend_boundaries_deg{5.0, 17.5, 32.5, 47.5};
    double hysteresis_deg = 2.0;
    double sustain_s = 10.0;
    double sustain_pitch_deg = 15.0;
};

void validate(const Thresholds& thresholds);

/// Level whose pitch band contains `pitch_deg`, ignoring hysteresis.
int bucket_level(double pitch_deg, const Thresholds& thresholds);

/// Bend level with a dead-band: the previous level is kept while pitch stays
/// within hysteresis_deg of that level's band. A previous sustained_flexion
/// carries no band, so classification falls back to the plain bucket.
Label classify_frame(double pitch_deg, const Thresholds& thresholds, std::optional<Label> previous);

struct LabeledFrame {
    double t_ms = 0.0;
    double pitch_deg = 0.0;
    Label label = Label::neutral;
};

struct Episode {
    Label label = Label::neutral;
    double start_ms = 0.0;
    double end_ms = 0.0;
    double duration_s = 0.0;
    double mean_pitch_deg = 0.0;
    std::size_t first_frame = 0;
    std::size_t frame_count = 0;
};

/// Episodes covering [t_first, t_last + frame period) without gaps.
///
/// Runs of equal labels shorter than `min_duration_s` are absorbed into the
/// preceding episode (the following one when nothing precedes). A contiguous
/// stretch of flexion episodes lasting at least sustain_s whose mean pitch is
/// at least sustain_pitch_deg becomes one sustained_flexion episode.
std::vector<Episode> segment_episodes(const std::vector<LabeledFrame>& frames, const Thresholds& thresholds,
                                      double min_duration_s);

/// Per-frame classification with hysteresis chained through the stream.
std::vector<LabeledFrame> classify_stream(const std::vector<ingest::HeadFrame>& frames, const Thresholds& thresholds);

/// The episode label of every frame, in frame order.
std::vector<Label> expand_episodes(const std::vector<Episode>& episodes);

/// Trapezoidal integral of max(envelope - threshold, 0) in envelope-seconds.
double strain_index(const std::vector<ingest::AlignedRecord>& records, double threshold);

/// Online labeler for the streaming path: hysteresis per frame, plus
/// sustained_flexion once the current flexion stretch qualifies.
class PostureTracker {
public:
    explicit PostureTracker(Thresholds thresholds);
    Label update(const ingest::HeadFrame& calibrated);

private:
    Thresholds thresholds_;
    std::optional<Label> level_label_;
    double run_start_ms_ = 0.0;
    double run_pitch_sum_ = 0.0;
    std::size_t run_frames_ = 0;
};

void write_labels_csv(const std::filesystem::path& path, const std::vector<double>& t_ms,
                      const std::vector<Label>& labels);
/// (t_ms, label) pairs from a labels CSV.
std::vector<std::pair<double, Label>> read_labels_csv(const std::filesystem::path& path);
void write_episodes_csv(const std::filesystem::path& path, const std::vector<Episode>& episodes);

}  // namespace neckcheck::posture
