#pragma once

#include <filesystem>
#include <vector>

#include "neckcheck/config.hpp"

namespace neckcheck {

struct Prepared {
    ingest::CalibrationOffsets offsets;
    std::vector<ingest::HeadFrame> calibrated;  // every head frame, offsets applied
    dsp::Series envelope;
    std::vector<ingest::AlignedRecord> records;  // after settling
    std::size_t dropped = 0;                     // frames outside envelope coverage or tolerance
    std::size_t settled = 0;                     // aligned records discarded as filter warm-up
};

/// filter -> envelope -> calibrate -> align -> drop warm-up.
Prepared prepare(const Config& config, const std::vector<ingest::HeadFrame>& head, const dsp::Series& emg);
Prepared prepare_files(const Config& config, const std::filesystem::path& head_csv,
                       const std::filesystem::path& emg_csv);

/// Calibrates, classifies and segments a head recording.
std::vector<posture::Episode> detect_episodes(const Config& config, const std::vector<ingest::HeadFrame>& head);

}  // namespace neckcheck
