#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "neckcheck/dsp.hpp"
#include "neckcheck/ingest.hpp"
#include "neckcheck/posture.hpp"

namespace neckcheck::synth {

enum class Posture { neutral, neck_bend, hunch, fhp };

struct Segment {
    Posture posture = Posture::neutral;
    int level = 0;  // 1..4 for neck_bend, 0 otherwise
    double duration_s = 0.0;
    // Extra head offsets on top of the posture target (looking at a side
    // screen, tilting the head). Zero unless the script sets them.
    double roll_deg = 0.0;
    double yaw_deg = 0.0;
};

struct PostureScript {
    std::vector<Segment> segments;
    double transition_s = 1.0;

    double total_s() const;
};

/// Comma-separated `posture:seconds[:roll=deg][:yaw=deg]` tokens, where
/// posture is neutral, neck_bend_1..neck_bend_4, hunch or fhp.
PostureScript parse_script(std::string_view text, double transition_s = 1.0);
std::string format_script(const PostureScript& script);
void validate(const PostureScript& script);

/// A 120 s desk routine (neck-bend ladder with returns to neutral, a forward
/// head hold and a hunch) repeated `repeats` times.
PostureScript default_script(int repeats = 6);

struct ActivationParams {
    double a0 = 0.05;
    double amax = 1.0;
    double p0_deg = 20.0;
    double slope_deg = 5.0;
    double w_roll = 0.25;
    double w_yaw = 0.10;
};

struct EmgParams {
    double sample_rate = 500.0;
    double band_low_hz = 20.0;
    double band_high_hz = 200.0;
    double sensor_noise = 0.01;
};

struct FatigueParams {
    bool enabled = false;
    double factor = 0.8;  // spectral compression reached at the session end
};

struct GeneratorParams {
    double head_rate = 50.0;
    std::array<double, 4> bend_pitch_deg{10.0, 25.0, 40.0, 55.0};
    double fhp_pitch_deg = 18.0;
    double hunch_pitch_deg = 30.0;
    double hunch_roll_deg = 5.0;
    std::array<double, 3> jitter_deg{0.5, 0.5, 0.5};  // roll, pitch, yaw
    ActivationParams activation;
    EmgParams emg;
    FatigueParams fatigue;
};

void validate(const GeneratorParams& params);

struct Kinematics {
    std::vector<ingest::HeadFrame> frames;
    std::vector<posture::Label> labels;
};

/// Head frames on an exact 1000/head_rate ms grid from t = 0. Segment
/// boundaries sit at the midpoint of raised-cosine ramps, so labels switch
/// exactly at the scripted boundaries.
Kinematics generate_kinematics(const PostureScript& script, const GeneratorParams& params, std::uint64_t seed,
                               const posture::Thresholds& thresholds = {});

/// Ground-truth label per script segment, in the detector's vocabulary.
/// Neck bends map to their level, hunch and fhp to sustained_flexion, and a
/// contiguous flexion stretch that meets the sustain rule becomes
/// sustained_flexion as a whole.
std::vector<posture::Label> segment_labels(const PostureScript& script, const GeneratorParams& params,
                                           const posture::Thresholds& thresholds);

/// Target (roll, pitch, yaw) of a segment.
std::array<double, 3> segment_target(const Segment& segment, const GeneratorParams& params);

double logistic(double x);
double activation_from_pose(const ingest::HeadFrame& frame, const ActivationParams& params);

/// Activation at the EMG rate from linearly interpolated head frames.
dsp::Series activation_series(const std::vector<ingest::HeadFrame>& frames, double duration_s,
                              const GeneratorParams& params);

/// raw = activation * n + sensor noise, clipped to [-1, 1]; n is unit-RMS
/// Gaussian noise band-limited to the EMG band, compressed in frequency over
/// the session when fatigue is enabled.
dsp::Series generate_emg(const dsp::Series& activation, const GeneratorParams& params, std::uint64_t seed);

struct SyntheticSession {
    std::vector<ingest::HeadFrame> head;
    std::vector<posture::Label> labels;
    dsp::Series emg;
    dsp::Series activation;
    std::uint64_t seed = 0;
};

SyntheticSession synthesize(const PostureScript& script, const GeneratorParams& params, std::uint64_t seed,
                            const posture::Thresholds& thresholds = {});

struct SessionPaths {
    std::filesystem::path head, emg, labels, activation;
};

SessionPaths session_paths(const std::filesystem::path& out_dir);

/// Writes head.csv, emg.csv, labels.csv and optionally activation.csv.
SessionPaths write_session(const SyntheticSession& session, const std::filesystem::path& out_dir,
                           bool write_activation = true);

SyntheticSession synth_session(const PostureScript& script, const GeneratorParams& params, std::uint64_t seed,
                               const std::filesystem::path& out_dir, const posture::Thresholds& thresholds = {});

}  // namespace neckcheck::synth
