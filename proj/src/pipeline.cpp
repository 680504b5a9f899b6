#include "neckcheck/pipeline.hpp"

#include <fmt/format.h>

#include <cmath>

#include "neckcheck/error.hpp"

namespace neckcheck {

Prepared prepare(const Config& config, const std::vector<ingest::HeadFrame>& head, const dsp::Series& emg) {
    if (std::abs(emg.sample_rate - config.dsp.sample_rate) > 1e-9 * config.dsp.sample_rate) {
        throw ValidationError(fmt::format("EMG sample rate {} Hz does not match dsp.sample_rate_hz {}", emg.sample_rate,
                                          config.dsp.sample_rate));
    }
    const double band[] = {config.dsp.band_low_hz, config.dsp.band_high_hz};
    const auto filter =
        dsp::design_butterworth(dsp::FilterKind::bandpass, band, config.dsp.band_order, config.dsp.sample_rate);

    Prepared out;
    out.envelope = dsp::extract_envelope(dsp::filter_forward(filter, emg), config.dsp.envelope);
    out.offsets = ingest::calibrate_offsets(head, config.sync.calibration_s);
    out.calibrated.reserve(head.size());
    for (const auto& f : head) out.calibrated.push_back(ingest::apply_calibration(f, out.offsets));

    auto aligned = ingest::align_streams(out.calibrated, out.envelope, config.sync.tolerance_ms);
    out.dropped = aligned.dropped;
    const double settle_until = out.envelope.t0_ms + config.sync.settle_s * 1000.0;
    for (auto& r : aligned.records) {
        if (r.t_ms < settle_until) {
            ++out.settled;
        } else {
            out.records.push_back(r);
        }
    }
    if (out.records.empty()) {
        throw ValidationError(fmt::format(
            "no aligned records: {} of {} head frames dropped outside EMG coverage or tolerance, {} discarded while "
            "settling",
            out.dropped, head.size(), out.settled));
    }
    return out;
}

Prepared prepare_files(const Config& config, const std::filesystem::path& head_csv,
                       const std::filesystem::path& emg_csv) {
    const auto session = ingest::load_session(head_csv, emg_csv);
    return prepare(config, session.head, ingest::emg_to_series(session.emg, config.dsp.sample_rate));
}

std::vector<posture::Episode> detect_episodes(const Config& config, const std::vector<ingest::HeadFrame>& head) {
    const auto offsets = ingest::calibrate_offsets(head, config.sync.calibration_s);
    std::vector<ingest::HeadFrame> calibrated;
    calibrated.reserve(head.size());
    for (const auto& f : head) calibrated.push_back(ingest::apply_calibration(f, offsets));
    const auto frames = posture::classify_stream(calibrated, config.posture.thresholds);
    return posture::segment_episodes(frames, config.posture.thresholds, config.posture.min_episode_s);
}

}  // namespace neckcheck
