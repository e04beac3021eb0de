// Copyright 2026 The ssep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ssep/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ssep/fft.hpp"
#include "ssep/util.hpp"

namespace ssep {

namespace {

std::vector<double> periodic_hann(int n) {
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i) {
        w[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / n));
    }
    return w;
}

// Reflect an out-of-range index back into [0, len) by bouncing off both
// ends; total for any pad size, degenerates to 0 for len == 1.
long bounce(long idx, long len) {
    if (len == 1) return 0;
    while (idx < 0 || idx >= len) {
        if (idx < 0) idx = -idx;
        if (idx >= len) idx = 2 * (len - 1) - idx;
    }
    return idx;
}

// squared synthesis window accumulated over all frames, in padded coordinates
std::vector<double> window_sum(const std::vector<double>& w, long frames, int hop, long padded_len) {
    std::vector<double> wsum(padded_len, 0.0);
    const int n = static_cast<int>(w.size());
    for (long f = 0; f < frames; ++f) {
        const long start = f * hop;
        for (int i = 0; i < n; ++i) wsum[start + i] += w[i] * w[i];
    }
    return wsum;
}

constexpr double kWsumFloor = 1e-8;
constexpr double kWienerGainFloor = 1e-3;

}  // namespace

void ComplexSpectrogram::validate() const {
    if (window_size <= 0 || hop_size <= 0) {
        throw std::invalid_argument("ComplexSpectrogram: window and hop must be positive");
    }
    if (hop_size > window_size) {
        throw std::invalid_argument("ComplexSpectrogram: hop must not exceed window");
    }
    if (bins() != window_size / 2 + 1) {
        throw std::invalid_argument("ComplexSpectrogram: bins must equal window/2 + 1");
    }
}

void Mask::validate() const {
    for (long f = 0; f < data.rows(); ++f) {
        for (long b = 0; b < data.cols(); ++b) {
            const double v = data(f, b);
            if (!std::isfinite(v) || v < 0.0) {
                throw std::invalid_argument("Mask: entries must be finite and non-negative");
            }
        }
    }
}

long stft_frame_count(long n_samples, int window_size, int hop_size) {
    const long pad = window_size / 2;
    return (n_samples + 2 * pad - window_size) / hop_size + 1;
}

ComplexSpectrogram stft(const AudioClip& clip, int window_size, int hop_size) {
    if (clip.samples.empty()) throw std::invalid_argument("stft: empty clip");
    if (window_size <= 0 || hop_size <= 0) {
        throw std::invalid_argument("stft: window and hop must be positive");
    }
    if (hop_size > window_size) throw std::invalid_argument("stft: hop must not exceed window");

    const long len = static_cast<long>(clip.samples.size());
    const long pad = window_size / 2;
    const long frames = stft_frame_count(len, window_size, hop_size);
    const int bins = window_size / 2 + 1;
    const auto w = periodic_hann(window_size);

    std::vector<double> padded(len + 2 * pad);
    for (long i = 0; i < len + 2 * pad; ++i) {
        padded[i] = clip.samples[bounce(i - pad, len)];
    }

    ComplexSpectrogram spec;
    spec.window_size = window_size;
    spec.hop_size = hop_size;
    spec.sample_rate = clip.sample_rate;
    spec.source_samples = len;
    spec.data.resize(frames, bins);

    FftPlan plan(static_cast<std::size_t>(window_size));
    std::vector<std::complex<double>> buf(window_size);
    for (long f = 0; f < frames; ++f) {
        const long start = f * hop_size;
        for (int i = 0; i < window_size; ++i) {
            buf[i] = {padded[start + i] * w[i], 0.0};
        }
        plan.forward(buf.data());
        for (int b = 0; b < bins; ++b) spec.data(f, b) = buf[b];
    }
    return spec;
}

AudioClip istft(const ComplexSpectrogram& spec) {
    spec.validate();
    const int n = spec.window_size;
    const int hop = spec.hop_size;
    const long frames = spec.frames();
    const int bins = static_cast<int>(spec.bins());
    const long pad = n / 2;
    const long padded_len = (frames - 1) * hop + n;
    const long out_len =
        spec.source_samples >= 0 ? spec.source_samples : std::max<long>(padded_len - 2 * pad, 0);
    const auto w = periodic_hann(n);
    const auto wsum = window_sum(w, frames, hop, padded_len);

    std::vector<double> acc(padded_len, 0.0);
    FftPlan plan(static_cast<std::size_t>(n));
    std::vector<std::complex<double>> buf(n);
    for (long f = 0; f < frames; ++f) {
        for (int b = 0; b < bins; ++b) buf[b] = spec.data(f, b);
        for (int b = 1; b < n - bins + 1; ++b) buf[n - b] = std::conj(spec.data(f, b));
        plan.inverse(buf.data());
        const long start = f * hop;
        for (int i = 0; i < n; ++i) acc[start + i] += buf[i].real() * w[i];
    }

    AudioClip out;
    out.sample_rate = spec.sample_rate;
    out.samples.resize(out_len);
    for (long i = 0; i < out_len; ++i) {
        const long j = pad + i;
        const double ws = j < padded_len ? wsum[j] : 0.0;
        out.samples[i] = ws > kWsumFloor ? acc[j] / ws : 0.0;
    }
    return out;
}

Eigen::MatrixXcd istft_adjoint(const ComplexSpectrogram& geometry,
                               const Eigen::VectorXd& grad_output) {
    geometry.validate();
    const int n = geometry.window_size;
    const int hop = geometry.hop_size;
    const long frames = geometry.frames();
    const int bins = static_cast<int>(geometry.bins());
    const long pad = n / 2;
    const long padded_len = (frames - 1) * hop + n;
    const long out_len = geometry.source_samples >= 0 ? geometry.source_samples
                                                      : std::max<long>(padded_len - 2 * pad, 0);
    if (grad_output.size() != out_len) {
        throw std::invalid_argument("istft_adjoint: gradient length does not match output length");
    }
    const auto w = periodic_hann(n);
    const auto wsum = window_sum(w, frames, hop, padded_len);

    std::vector<double> g_acc(padded_len, 0.0);
    for (long i = 0; i < out_len; ++i) {
        const long j = pad + i;
        if (j < padded_len && wsum[j] > kWsumFloor) g_acc[j] = grad_output[i] / wsum[j];
    }

    Eigen::MatrixXcd grad(frames, bins);
    FftPlan plan(static_cast<std::size_t>(n));
    std::vector<std::complex<double>> buf(n);
    const double scale_edge = 1.0 / n;
    const double scale_mid = 2.0 / n;
    for (long f = 0; f < frames; ++f) {
        const long start = f * hop;
        for (int i = 0; i < n; ++i) buf[i] = {g_acc[start + i] * w[i], 0.0};
        plan.forward(buf.data());
        // ifft + conjugate-symmetric mirror adjoint: interior bins pick up
        // both halves of the spectrum, DC/Nyquist only one.
        grad(f, 0) = buf[0] * scale_edge;
        for (int b = 1; b < bins - 1; ++b) grad(f, b) = buf[b] * scale_mid;
        grad(f, bins - 1) =
            n % 2 == 0 ? buf[bins - 1] * scale_edge : buf[bins - 1] * scale_mid;
    }
    return grad;
}

MagSpectrogram magnitude(const ComplexSpectrogram& spec) {
    MagSpectrogram mag;
    mag.window_size = spec.window_size;
    mag.hop_size = spec.hop_size;
    mag.sample_rate = spec.sample_rate;
    mag.data = spec.data.cwiseAbs();
    return mag;
}

ComplexSpectrogram apply_mask(const ComplexSpectrogram& mix_spec, const Mask& mask) {
    if (mix_spec.data.rows() != mask.data.rows() || mix_spec.data.cols() != mask.data.cols()) {
        throw std::invalid_argument("apply_mask: mask geometry does not match spectrogram");
    }
    ComplexSpectrogram out = mix_spec;
    out.data = mix_spec.data.cwiseProduct(mask.data.cast<std::complex<double>>());
    return out;
}

namespace {

double bessel_i0(double x) {
    // power series; converges quickly for the beta values used here
    double sum = 1.0, term = 1.0;
    const double half_x = x / 2.0;
    for (int k = 1; k < 64; ++k) {
        term *= (half_x / k) * (half_x / k);
        sum += term;
        if (term < sum * 1e-18) break;
    }
    return sum;
}

double sinc(double t) {
    if (std::abs(t) < 1e-12) return 1.0;
    const double p = M_PI * t;
    return std::sin(p) / p;
}

}  // namespace

AudioClip resample(const AudioClip& clip, int target_rate) {
    if (clip.sample_rate <= 0 || target_rate <= 0) {
        throw std::invalid_argument("resample: rates must be positive");
    }
    if (target_rate == clip.sample_rate) return clip;

    const long len = static_cast<long>(clip.samples.size());
    const long out_len = std::llround(static_cast<double>(len) * target_rate / clip.sample_rate);
    const double ratio = static_cast<double>(target_rate) / clip.sample_rate;
    // anti-aliasing cutoff with a little rolloff margin, in cycles per
    // input sample
    const double cutoff = 0.5 * std::min(1.0, ratio) * 0.95;
    const double half_width = 32.0;
    const double beta = 8.6;
    const double i0_beta = bessel_i0(beta);

    AudioClip out;
    out.sample_rate = target_rate;
    out.samples.resize(out_len);
    for (long m = 0; m < out_len; ++m) {
        // exact rational center keeps the kernel phase deterministic
        const long num = m * clip.sample_rate;
        const long i0 = num / target_rate;
        const double frac = static_cast<double>(num % target_rate) / target_rate;
        const double center = static_cast<double>(i0) + frac;

        double acc = 0.0, ksum = 0.0;
        const long k_lo = i0 - static_cast<long>(half_width) + 1;
        const long k_hi = i0 + static_cast<long>(half_width);
        for (long k = k_lo; k <= k_hi; ++k) {
            const double u = static_cast<double>(k) - center;
            const double arg = u / half_width;
            if (arg <= -1.0 || arg >= 1.0) continue;
            const double kaiser = bessel_i0(beta * std::sqrt(1.0 - arg * arg)) / i0_beta;
            const double h = 2.0 * cutoff * sinc(2.0 * cutoff * u) * kaiser;
            ksum += h;
            if (k >= 0 && k < len) acc += clip.samples[k] * h;
        }
        out.samples[m] = ksum != 0.0 ? acc / ksum : 0.0;
    }
    return out;
}

AudioClip wiener_denoise(const AudioClip& clip, double silence_threshold,
                         const AudioClip* noise, double oversubtraction) {
    clip.validate();
    if (silence_threshold <= 0.0) {
        throw std::invalid_argument("wiener_denoise: threshold must be positive");
    }
    if (clip.samples.empty()) return clip;

    const int window = 4096;
    const int hop = 1024;
    ComplexSpectrogram spec = stft(clip, window, hop);
    const long frames = spec.frames();
    const int bins = static_cast<int>(spec.bins());

    Eigen::VectorXd noise_psd = Eigen::VectorXd::Zero(bins);
    long n_noise_frames = 0;

    if (noise != nullptr) {
        if (noise->samples.empty()) throw std::invalid_argument("wiener_denoise: empty noise clip");
        ComplexSpectrogram nspec = stft(*noise, window, hop);
        for (long f = 0; f < nspec.frames(); ++f) {
            for (int b = 0; b < bins; ++b) noise_psd[b] += std::norm(nspec.data(f, b));
            ++n_noise_frames;
        }
    } else {
        // classify non-overlapping 1 s windows of the input as silent when
        // every sample stays below the threshold; an STFT frame joins the
        // noise estimate only when its full support lies in silent windows,
        // so signal adjacent to a silent region cannot leak into the estimate
        const long n = static_cast<long>(clip.samples.size());
        const long win_samples = clip.sample_rate;
        const long n_windows = (n + win_samples - 1) / win_samples;
        std::vector<char> silent(n_windows, 0);
        for (long wi = 0; wi < n_windows; ++wi) {
            const long lo = wi * win_samples;
            const long hi = std::min<long>(lo + win_samples, n);
            double peak = 0.0;
            for (long i = lo; i < hi; ++i) peak = std::max(peak, std::abs(clip.samples[i]));
            silent[wi] = peak < silence_threshold ? 1 : 0;
        }
        for (long f = 0; f < frames; ++f) {
            const long lo = std::max<long>(f * hop - window / 2, 0);
            const long hi = std::min<long>(f * hop + window / 2, n);
            bool all_silent = true;
            for (long wi = lo / win_samples; wi <= (hi - 1) / win_samples; ++wi)
                all_silent = all_silent && silent[std::min(wi, n_windows - 1)];
            if (!all_silent) continue;
            for (int b = 0; b < bins; ++b) noise_psd[b] += std::norm(spec.data(f, b));
            ++n_noise_frames;
        }
        if (n_noise_frames == 0) {
            throw DataError(
                "wiener_denoise: no silent region found below the threshold; "
                "supply an explicit noise segment");
        }
    }
    noise_psd /= static_cast<double>(std::max<long>(n_noise_frames, 1));

    for (long f = 0; f < frames; ++f) {
        for (int b = 0; b < bins; ++b) {
            const double power = std::norm(spec.data(f, b));
            double gain = 0.0;
            if (power > 0.0) {
                gain = std::max(1.0 - oversubtraction * noise_psd[b] / power, kWienerGainFloor);
            }
            spec.data(f, b) *= gain;
        }
    }
    return istft(spec);
}

}  // namespace ssep
