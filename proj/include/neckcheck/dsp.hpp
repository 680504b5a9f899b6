#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace neckcheck::dsp {

/// Uniformly sampled signal. Sample k sits at t0_ms + k * 1000 / sample_rate.
struct Series {
    double sample_rate = 0.0;  // Hz
    double t0_ms = 0.0;
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    double period_ms() const { return 1000.0 / sample_rate; }
    double time_ms(std::size_t k) const { return t0_ms + static_cast<double>(k) * period_ms(); }
};

enum class FilterKind { lowpass, bandpass };

/// y[n] = b0 x[n] + b1 x[n-1] + b2 x[n-2] - a1 y[n-1] - a2 y[n-2]
struct Biquad {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0;
    double a1 = 0.0, a2 = 0.0;
};

struct BiquadCascade {
    std::vector<Biquad> sections;
    FilterKind kind = FilterKind::lowpass;
    double low_hz = 0.0;   // lowpass: unused
    double high_hz = 0.0;  // lowpass: the cutoff
    int order = 0;
    double sample_rate = 0.0;
};

/// Butterworth design by bilinear transform with prewarped edges.
///
/// `order` is the order of the analog low-pass prototype, so a band-pass of
/// order N has N second-order sections (2N poles). Only even orders are
/// accepted so both kinds factor into whole biquads. For band-pass the first
/// cutoff is the lower edge; for low-pass pass a single cutoff.
BiquadCascade design_butterworth(FilterKind kind, std::span<const double> cutoffs_hz, int order,
                                 double sample_rate);

/// Complex magnitude of the realized cascade at `freq_hz`.
double magnitude_response(const BiquadCascade& filter, double freq_hz);

/// Closed-form Butterworth magnitude of the design, evaluated on the prewarped
/// analog frequency axis. This is what the digital cascade should realize.
double analytic_butterworth_magnitude(const BiquadCascade& filter, double freq_hz);

/// Pole radii of every section (two per section).
std::vector<double> pole_magnitudes(const BiquadCascade& filter);

/// Incremental filter state for one stream. Transposed direct form II per section.
class StreamingFilter {
public:
    explicit StreamingFilter(BiquadCascade filter);

    double process(double x);
    void reset();
    const BiquadCascade& design() const { return filter_; }
    /// Swap coefficients keeping the delay-line state (slowly varying designs).
    void retune(BiquadCascade filter);

private:
    BiquadCascade filter_;
    std::vector<double> z1_, z2_;
};

/// Causal filtering from zero initial state.
Series filter_forward(const BiquadCascade& filter, const Series& input);

enum class EnvelopeMethod { rectify_lowpass, rms_window };

struct EnvelopeParams {
    EnvelopeMethod method = EnvelopeMethod::rectify_lowpass;
    double lowpass_hz = 2.0;
    double window_ms = 250.0;
};

Series extract_envelope(const Series& raw, const EnvelopeParams& params = {});

struct Spectrum {
    std::vector<double> freqs;  // Hz, strictly increasing
    std::vector<double> power;  // one-sided density, units^2 / Hz

    double bin_width() const { return freqs.size() > 1 ? freqs[1] - freqs[0] : 0.0; }
    /// Sum of power times bin width.
    double total_power() const;
};

struct WelchParams {
    std::size_t segment_len = 256;
    double overlap_fraction = 0.5;
};

/// Averaged Hann-windowed periodogram, one-sided, density scaled so the
/// integrated power equals the mean square of the input.
Spectrum welch_psd(const Series& input, const WelchParams& params = {});

double median_frequency(const Spectrum& spec);
double mean_frequency(const Spectrum& spec);

}  // namespace neckcheck::dsp
