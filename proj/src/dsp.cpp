#include "neckcheck/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

#include "neckcheck/error.hpp"

namespace neckcheck::dsp {

namespace {

using cplx = std::complex<double>;

void require(bool ok, const std::string& message) {
    if (!ok) throw ValidationError(message);
}

// Analog frequency (rad/s) that the bilinear transform maps onto freq_hz.
double prewarp(double freq_hz, double fs) { return 2.0 * fs * std::tan(std::numbers::pi * freq_hz / fs); }

cplx bilinear(cplx s, double fs) { return (2.0 * fs + s) / (2.0 * fs - s); }

cplx section_response(const Biquad& s, double omega) {
    const cplx z1 = std::polar(1.0, -omega);
    const cplx z2 = z1 * z1;
    return (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
}

// Left-half-plane prototype poles with positive imaginary part; the
// conjugates complete the set.
std::vector<cplx> prototype_upper_poles(int order) {
    std::vector<cplx> poles;
    for (int k = 1; k <= order / 2; ++k) {
        const double angle = std::numbers::pi * (2.0 * k + order - 1) / (2.0 * order);
        poles.push_back(std::polar(1.0, angle));
    }
    return poles;
}

Biquad section_from_pole(cplx z_pole) {
    Biquad s;
    s.a1 = -2.0 * z_pole.real();
    s.a2 = std::norm(z_pole);
    return s;
}

}  // namespace

BiquadCascade design_butterworth(FilterKind kind, std::span<const double> cutoffs_hz, int order,
                                 double sample_rate) {
    require(std::isfinite(sample_rate) && sample_rate > 0.0, "sample rate must be positive");
    require(order == 2 || order == 4 || order == 6 || order == 8,
            "filter order must be one of 2, 4, 6, 8 (got " + std::to_string(order) + ")");
    const double nyquist = sample_rate / 2.0;
    const std::size_t expected = kind == FilterKind::bandpass ? 2 : 1;
    require(cutoffs_hz.size() == expected, kind == FilterKind::bandpass ? "band-pass needs two cutoffs"
                                                                        : "low-pass needs one cutoff");
    for (double f : cutoffs_hz) {
        require(std::isfinite(f) && f > 0.0 && f < nyquist,
                "cutoff " + std::to_string(f) + " Hz outside (0, " + std::to_string(nyquist) + ") Hz");
    }

    BiquadCascade cascade;
    cascade.kind = kind;
    cascade.order = order;
    cascade.sample_rate = sample_rate;

    if (kind == FilterKind::lowpass) {
        cascade.high_hz = cutoffs_hz[0];
        const double wc = prewarp(cutoffs_hz[0], sample_rate);
        for (cplx p : prototype_upper_poles(order)) {
            Biquad s = section_from_pole(bilinear(wc * p, sample_rate));
            // Double zero at z = -1, unit gain at DC.
            const double g = (1.0 + s.a1 + s.a2) / 4.0;
            s.b0 = g;
            s.b1 = 2.0 * g;
            s.b2 = g;
            cascade.sections.push_back(s);
        }
        return cascade;
    }

    require(cutoffs_hz[0] < cutoffs_hz[1], "band-pass low cutoff must be below high cutoff");
    cascade.low_hz = cutoffs_hz[0];
    cascade.high_hz = cutoffs_hz[1];
    const double w1 = prewarp(cutoffs_hz[0], sample_rate);
    const double w2 = prewarp(cutoffs_hz[1], sample_rate);
    const double bw = w2 - w1;
    const double w0sq = w1 * w2;
    const double center = 2.0 * std::atan(std::sqrt(w0sq) / (2.0 * sample_rate));
    for (cplx p : prototype_upper_poles(order)) {
        // s^2 - p*B*s + w0^2 = 0 gives the two band-pass poles for prototype pole p.
        const cplx disc = std::sqrt(p * p * bw * bw - 4.0 * w0sq);
        for (cplx s_pole : {(p * bw + disc) / 2.0, (p * bw - disc) / 2.0}) {
            Biquad s = section_from_pole(bilinear(s_pole, sample_rate));
            // Zeros at z = +1 and z = -1; b1 stays exactly 0 so the DC gain is exactly 0.
            s.b0 = 1.0;
            s.b1 = 0.0;
            s.b2 = -1.0;
            const double g = 1.0 / std::abs(section_response(s, center));
            s.b0 = g;
            s.b2 = -g;
            cascade.sections.push_back(s);
        }
    }
    return cascade;
}

double magnitude_response(const BiquadCascade& filter, double freq_hz) {
    const double omega = 2.0 * std::numbers::pi * freq_hz / filter.sample_rate;
    cplx h = 1.0;
    for (const auto& s : filter.sections) h *= section_response(s, omega);
    return std::abs(h);
}

double analytic_butterworth_magnitude(const BiquadCascade& filter, double freq_hz) {
    const double fs = filter.sample_rate;
    if (freq_hz >= fs / 2.0) return 0.0;
    const double w = prewarp(freq_hz, fs);
    double x = 0.0;
    if (filter.kind == FilterKind::lowpass) {
        x = w / prewarp(filter.high_hz, fs);
    } else {
        if (w == 0.0) return 0.0;
        const double w1 = prewarp(filter.low_hz, fs);
        const double w2 = prewarp(filter.high_hz, fs);
        x = (w * w - w1 * w2) / (w * (w2 - w1));
    }
    return 1.0 / std::sqrt(1.0 + std::pow(x * x, filter.order));
}

std::vector<double> pole_magnitudes(const BiquadCascade& filter) {
    std::vector<double> radii;
    for (const auto& s : filter.sections) {
        // Roots of z^2 + a1 z + a2.
        const cplx disc = std::sqrt(cplx(s.a1 * s.a1 - 4.0 * s.a2, 0.0));
        radii.push_back(std::abs((-s.a1 + disc) / 2.0));
        radii.push_back(std::abs((-s.a1 - disc) / 2.0));
    }
    return radii;
}

StreamingFilter::StreamingFilter(BiquadCascade filter)
    : filter_(std::move(filter)), z1_(filter_.sections.size(), 0.0), z2_(filter_.sections.size(), 0.0) {}

double StreamingFilter::process(double x) {
    double v = x;
    for (std::size_t i = 0; i < filter_.sections.size(); ++i) {
        const Biquad& s = filter_.sections[i];
        const double y = s.b0 * v + z1_[i];
        z1_[i] = s.b1 * v - s.a1 * y + z2_[i];
        z2_[i] = s.b2 * v - s.a2 * y;
        v = y;
    }
    return v;
}

void StreamingFilter::reset() {
    std::fill(z1_.begin(), z1_.end(), 0.0);
    std::fill(z2_.begin(), z2_.end(), 0.0);
}

void StreamingFilter::retune(BiquadCascade filter) {
    if (filter.sections.size() != filter_.sections.size()) {
        throw ValidationError("retune requires the same number of sections");
    }
    filter_ = std::move(filter);
}

Series filter_forward(const BiquadCascade& filter, const Series& input) {
    if (std::abs(input.sample_rate - filter.sample_rate) > 1e-9 * filter.sample_rate) {
        throw ValidationError("series sampled at " + std::to_string(input.sample_rate) +
                              " Hz but filter designed for " + std::to_string(filter.sample_rate) + " Hz");
    }
    StreamingFilter state(filter);
    Series out{input.sample_rate, input.t0_ms, {}};
    out.values.reserve(input.size());
    for (double x : input.values) out.values.push_back(state.process(x));
    return out;
}

Series extract_envelope(const Series& raw, const EnvelopeParams& params) {
    require(raw.sample_rate > 0.0, "envelope input has no sample rate");
    Series out{raw.sample_rate, raw.t0_ms, {}};
    const std::size_t n = raw.size();

    if (params.method == EnvelopeMethod::rectify_lowpass) {
        require(std::isfinite(params.lowpass_hz) && params.lowpass_hz > 0.0 &&
                    params.lowpass_hz < raw.sample_rate / 2.0,
                "envelope low-pass cutoff must lie in (0, Nyquist)");
        const double cutoff[] = {params.lowpass_hz};
        StreamingFilter lp(design_butterworth(FilterKind::lowpass, cutoff, 2, raw.sample_rate));
        out.values.reserve(n);
        for (double x : raw.values) {
            // The low-pass can undershoot zero after a sharp drop; the envelope cannot.
            out.values.push_back(std::max(0.0, lp.process(std::abs(x))));
        }
        return out;
    }

    require(std::isfinite(params.window_ms) && params.window_ms > 0.0, "RMS window must be positive");
    const auto window =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(params.window_ms * raw.sample_rate / 1000.0)));
    const std::size_t before = window / 2;
    const std::size_t after = window - 1 - before;
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + raw.values[i] * raw.values[i];
    out.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= before ? i - before : 0;
        const std::size_t hi = std::min(n, i + after + 1);
        const double mean_sq = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
        out.values[i] = std::sqrt(std::max(0.0, mean_sq));
    }
    return out;
}

double Spectrum::total_power() const {
    double sum = 0.0;
    for (double p : power) sum += p;
    return sum * bin_width();
}

namespace {

// The FFTW planner is not reentrant. Plans are built and destroyed under this
// lock; execution only touches the plan's own buffers.
std::mutex fftw_planner_mutex;

struct FftwPlan {
    fftw_plan plan = nullptr;
    double* in = nullptr;
    fftw_complex* out = nullptr;

    explicit FftwPlan(std::size_t n) {
        std::lock_guard lock(fftw_planner_mutex);
        in = fftw_alloc_real(n);
        out = fftw_alloc_complex(n / 2 + 1);
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
    }
    ~FftwPlan() {
        std::lock_guard lock(fftw_planner_mutex);
        fftw_destroy_plan(plan);
        fftw_free(in);
        fftw_free(out);
    }
    FftwPlan(const FftwPlan&) = delete;
    FftwPlan& operator=(const FftwPlan&) = delete;
};

}  // namespace

Spectrum welch_psd(const Series& input, const WelchParams& params) {
    const std::size_t len = params.segment_len;
    require(len >= 8, "Welch segment length must be at least 8 samples");
    require(input.size() >= len, "input has " + std::to_string(input.size()) +
                                     " samples, fewer than the segment length " + std::to_string(len));
    require(params.overlap_fraction >= 0.0 && params.overlap_fraction < 1.0, "overlap fraction must lie in [0, 1)");
    require(input.sample_rate > 0.0, "spectrum input has no sample rate");

    const auto overlap = static_cast<std::size_t>(std::lround(params.overlap_fraction * static_cast<double>(len)));
    const std::size_t step = std::max<std::size_t>(1, len - std::min(overlap, len - 1));

    std::vector<double> window(len);
    double window_energy = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
        window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(len));
        window_energy += window[i] * window[i];
    }

    const std::size_t bins = len / 2 + 1;
    std::vector<double> accum(bins, 0.0);
    std::size_t segments = 0;
    FftwPlan fft(len);
    for (std::size_t start = 0; start + len <= input.size(); start += step) {
        for (std::size_t i = 0; i < len; ++i) fft.in[i] = input.values[start + i] * window[i];
        fftw_execute(fft.plan);
        for (std::size_t k = 0; k < bins; ++k) {
            accum[k] += fft.out[k][0] * fft.out[k][0] + fft.out[k][1] * fft.out[k][1];
        }
        ++segments;
    }

    Spectrum spec;
    spec.freqs.resize(bins);
    spec.power.resize(bins);
    const double scale = 1.0 / (input.sample_rate * window_energy * static_cast<double>(segments));
    for (std::size_t k = 0; k < bins; ++k) {
        spec.freqs[k] = static_cast<double>(k) * input.sample_rate / static_cast<double>(len);
        const bool edge = k == 0 || (len % 2 == 0 && k == bins - 1);
        spec.power[k] = accum[k] * scale * (edge ? 1.0 : 2.0);
    }
    return spec;
}

namespace {

double checked_total(const Spectrum& spec) {
    require(!spec.freqs.empty() && spec.freqs.size() == spec.power.size(), "malformed spectrum");
    double total = 0.0;
    for (double p : spec.power) {
        require(std::isfinite(p) && p >= 0.0, "spectrum power must be finite and nonnegative");
        total += p;
    }
    require(total > 0.0, "spectrum has zero total power");
    return total;
}

}  // namespace

double median_frequency(const Spectrum& spec) {
    const double total = checked_total(spec);
    const double half = total / 2.0;
    const double width = spec.bin_width();
    double cumulative = 0.0;
    for (std::size_t i = 0; i < spec.power.size(); ++i) {
        if (spec.power[i] > 0.0 && cumulative + spec.power[i] >= half) {
            // Bin i spreads its power uniformly over [f_i - w/2, f_i + w/2].
            const double fraction = (half - cumulative) / spec.power[i];
            const double f = spec.freqs[i] - width / 2.0 + fraction * width;
            return std::clamp(f, spec.freqs.front(), spec.freqs.back());
        }
        cumulative += spec.power[i];
    }
    return spec.freqs.back();
}

double mean_frequency(const Spectrum& spec) {
    const double total = checked_total(spec);
    double weighted = 0.0;
    for (std::size_t i = 0; i < spec.power.size(); ++i) weighted += spec.freqs[i] * spec.power[i];
    return weighted / total;
}

}  // namespace neckcheck::dsp
