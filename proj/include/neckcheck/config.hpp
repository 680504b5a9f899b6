#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "neckcheck/dsp.hpp"
#include "neckcheck/ingest.hpp"
#include "neckcheck/models.hpp"
#include "neckcheck/posture.hpp"
#include "neckcheck/synth.hpp"

namespace neckcheck {

/// Effective settings for every command. Files use INI syntax: `[section]`
/// headers, `key = value` lines, `;` or `#` comments. Every key is optional;
/// unknown sections or keys are rejected.
struct Config {
    struct Dsp {
        double sample_rate = 500.0;
        double band_low_hz = 20.0;
        double band_high_hz = 200.0;
        int band_order = 4;
        dsp::EnvelopeParams envelope;
        dsp::WelchParams welch;
    } dsp;

    struct Sync {
        double tolerance_ms = 50.0;
        double calibration_s = 5.0;
        double settle_s = 1.0;  // aligned records before this much time are discarded
    } sync;

    struct Synth {
        std::uint64_t seed = 7;
        synth::PostureScript cycle = synth::default_script(1);
        int repeat = 6;
        synth::GeneratorParams params;
        bool write_activation = true;

        synth::PostureScript script() const;
    } synth;

    struct Models {
        models::Family family = models::Family::random_forest;
        std::vector<models::Family> families{models::kAllFamilies.begin(), models::kAllFamilies.end()};
        models::SplitConfig split;
        models::ModelSpec hyper;  // family field ignored; seed shared by every family

        models::ModelSpec spec_for(models::Family f) const;
    } models;

    struct Posture {
        posture::Thresholds thresholds;
        double min_episode_s = 0.5;
        double strain_threshold = 0.25;
    } posture;

    struct Stream {
        ingest::CalibrationOffsets offsets;
    } stream;

    /// Sets both the synthesis and the model seed.
    void override_seed(std::uint64_t seed);
    void validate() const;
};

Config parse_config(std::string_view text);
Config load_config(const std::filesystem::path& path);
/// Every key with its effective value; parse_config(dump_config(c)) == c.
std::string dump_config(const Config& config);

}  // namespace neckcheck
