// Copyright 2026 The ssep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "oracles.hpp"
#include "ssep/dsp.hpp"
#include "ssep/rng.hpp"
#include "ssep/util.hpp"

using namespace ssep;

namespace {

AudioClip random_clip(long n, int sample_rate, Rng& rng, double scale = 0.5) {
    AudioClip clip;
    clip.sample_rate = sample_rate;
    clip.samples.resize(n);
    for (long i = 0; i < n; ++i) clip.samples[i] = scale * rng.normal();
    return clip;
}

double peak(const AudioClip& clip) {
    double p = 0.0;
    for (double s : clip.samples) p = std::max(p, std::abs(s));
    return p;
}

}  // namespace

TEST_CASE("frame count follows floor(len/hop) + 1") {
    CHECK(stft_frame_count(6 * 44100, 4096, 1024) == 259);
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
        const long n = rng.uniform_int(4096, 200000);
        CHECK(stft_frame_count(n, 4096, 1024) == n / 1024 + 1);
        CHECK(stft_frame_count(n, 1024, 256) == n / 256 + 1);
    }
}

TEST_CASE("round trip reconstructs the signal below 1e-6 of peak") {
    Rng rng(11);
    for (int i = 0; i < 20; ++i) {
        const long n = rng.uniform_int(22050, 3 * 44100);
        AudioClip clip = random_clip(n, 44100, rng);
        AudioClip back = istft(stft(clip, 1024, 256));
        REQUIRE(back.size() == clip.size());
        double err = 0.0;
        for (long t = 0; t < n; ++t)
            err = std::max(err, std::abs(back.samples[t] - clip.samples[t]));
        CHECK(err < 1e-6 * peak(clip));
    }
    AudioClip clip = random_clip(2 * 44100 + 123, 44100, rng);
    AudioClip back = istft(stft(clip, 4096, 1024));
    double err = 0.0;
    for (std::size_t t = 0; t < clip.size(); ++t)
        err = std::max(err, std::abs(back.samples[t] - clip.samples[t]));
    CHECK(err < 1e-6 * peak(clip));
}

TEST_CASE("forward frames match the brute-force DFT of the windowed slice") {
    const int window = 64, hop = 16;
    Rng rng(5);
    AudioClip clip = random_clip(512, 8000, rng);
    ComplexSpectrogram spec = stft(clip, window, hop);

    // re-derive the windowed slice: periodic Hann on the reflect-padded signal
    std::vector<double> padded;
    for (long i = window / 2; i >= 1; --i) padded.push_back(clip.samples[i]);
    padded.insert(padded.end(), clip.samples.begin(), clip.samples.end());
    for (long i = (long)clip.size() - 2; i >= (long)clip.size() - window / 2 - 1; --i)
        padded.push_back(clip.samples[i]);

    for (long f = 0; f < 3; ++f) {
        std::vector<double> slice(window);
        for (int t = 0; t < window; ++t)
            slice[t] = padded[f * hop + t] *
                       (0.5 - 0.5 * std::cos(2.0 * M_PI * t / window));
        auto ref = oracles::dft(slice);
        for (long b = 0; b < spec.bins(); ++b)
            CHECK(std::abs(spec.data(f, b) - ref[b]) < 1e-10);
    }
}

TEST_CASE("stft is linear") {
    Rng rng(7);
    AudioClip x = random_clip(8000, 8000, rng);
    AudioClip y = random_clip(8000, 8000, rng);
    AudioClip mix = x;
    for (long i = 0; i < 8000; ++i)
        mix.samples[i] = 2.0 * x.samples[i] - 0.5 * y.samples[i];
    ComplexSpectrogram sx = stft(x, 256, 64), sy = stft(y, 256, 64),
                       sm = stft(mix, 256, 64);
    const double scale = sm.data.cwiseAbs().maxCoeff();
    CHECK(((sm.data - 2.0 * sx.data + 0.5 * sy.data).cwiseAbs().maxCoeff()) <
          1e-9 * scale);
}

TEST_CASE("Parseval holds per frame for the one-sided layout") {
    const int window = 128, hop = 32;
    Rng rng(9);
    AudioClip clip = random_clip(2048, 8000, rng);
    ComplexSpectrogram spec = stft(clip, window, hop);

    std::vector<double> padded;
    for (long i = window / 2; i >= 1; --i) padded.push_back(clip.samples[i]);
    padded.insert(padded.end(), clip.samples.begin(), clip.samples.end());
    for (long i = (long)clip.size() - 2; i >= (long)clip.size() - window / 2 - 1; --i)
        padded.push_back(clip.samples[i]);

    for (long f = 0; f < spec.frames(); f += 7) {
        double time_energy = 0.0;
        for (int t = 0; t < window; ++t) {
            const double w = 0.5 - 0.5 * std::cos(2.0 * M_PI * t / window);
            const double v = padded[f * hop + t] * w;
            time_energy += v * v;
        }
        double freq_energy = std::norm(spec.data(f, 0)) +
                             std::norm(spec.data(f, spec.bins() - 1));
        for (long b = 1; b < spec.bins() - 1; ++b)
            freq_energy += 2.0 * std::norm(spec.data(f, b));
        CHECK(freq_energy == doctest::Approx(window * time_energy).epsilon(1e-6));
    }
}

TEST_CASE("all-ones mask reproduces the input through istft") {
    Rng rng(13);
    AudioClip clip = random_clip(22050, 44100, rng);
    ComplexSpectrogram spec = stft(clip, 1024, 256);
    Mask ones;
    ones.data = Eigen::MatrixXd::Ones(spec.frames(), spec.bins());
    AudioClip back = istft(apply_mask(spec, ones));
    double err = 0.0;
    for (std::size_t t = 0; t < clip.size(); ++t)
        err = std::max(err, std::abs(back.samples[t] - clip.samples[t]));
    CHECK(err < 1e-6 * peak(clip));
}

TEST_CASE("constant 0.5 mask halves the reconstruction") {
    Rng rng(17);
    AudioClip clip = random_clip(22050, 44100, rng);
    ComplexSpectrogram spec = stft(clip, 1024, 256);
    Mask half;
    half.data = Eigen::MatrixXd::Constant(spec.frames(), spec.bins(), 0.5);
    AudioClip back = istft(apply_mask(spec, half));
    double err = 0.0;
    for (std::size_t t = 0; t < clip.size(); ++t)
        err = std::max(err, std::abs(back.samples[t] - 0.5 * clip.samples[t]));
    CHECK(err < 1e-6 * peak(clip));
}

TEST_CASE("istft adjoint satisfies the dot-product identity") {
    Rng rng(19);
    AudioClip clip = random_clip(4000, 8000, rng);
    ComplexSpectrogram spec = stft(clip, 256, 64);
    AudioClip out = istft(spec);

    Eigen::VectorXd g(out.size());
    for (long i = 0; i < g.size(); ++i) g(i) = rng.normal();
    Eigen::MatrixXcd adj = istft_adjoint(spec, g);

    double lhs = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) lhs += out.samples[i] * g(i);
    double rhs = 0.0;
    for (long f = 0; f < spec.frames(); ++f)
        for (long b = 0; b < spec.bins(); ++b)
            rhs += spec.data(f, b).real() * adj(f, b).real() +
                   spec.data(f, b).imag() * adj(f, b).imag();
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("istft adjoint matches finite differences") {
    Rng rng(23);
    AudioClip clip = random_clip(1200, 8000, rng);
    ComplexSpectrogram spec = stft(clip, 128, 32);
    Eigen::VectorXd g(clip.size());
    for (long i = 0; i < g.size(); ++i) g(i) = rng.normal();
    auto readout = [&](const ComplexSpectrogram& s) {
        AudioClip y = istft(s);
        double v = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) v += y.samples[i] * g(i);
        return v;
    };
    Eigen::MatrixXcd adj = istft_adjoint(spec, g);
    const double eps = 1e-6;
    double max_err = 0.0;
    for (long f = 0; f < spec.frames(); f += 5)
        for (long b = 0; b < spec.bins(); b += 7) {
            ComplexSpectrogram s = spec;
            s.data(f, b) += eps;
            const double up_re = readout(s);
            s.data(f, b) -= 2.0 * eps;
            const double dn_re = readout(s);
            s.data(f, b) = spec.data(f, b) + std::complex<double>(0.0, eps);
            const double up_im = readout(s);
            s.data(f, b) = spec.data(f, b) - std::complex<double>(0.0, eps);
            const double dn_im = readout(s);
            max_err = std::max(
                max_err, std::abs(adj(f, b).real() - (up_re - dn_re) / (2 * eps)));
            max_err = std::max(
                max_err, std::abs(adj(f, b).imag() - (up_im - dn_im) / (2 * eps)));
        }
    CHECK(max_err < 1e-6);
}

TEST_CASE("resample lands on the exact rational length and keeps tones") {
    Rng rng(29);
    AudioClip clip;
    clip.sample_rate = 48000;
    clip.samples.resize(48000);
    for (long i = 0; i < 48000; ++i)
        clip.samples[i] = 0.5 * std::sin(2.0 * M_PI * 440.0 * i / 48000.0);
    AudioClip down = resample(clip, 44100);
    CHECK(down.sample_rate == 44100);
    CHECK((long)down.size() == 44100);
    double err = 0.0;
    for (long i = 100; i < 44000; ++i)
        err = std::max(err, std::abs(down.samples[i] -
                                     0.5 * std::sin(2.0 * M_PI * 440.0 * i /
                                                    44100.0)));
    CHECK(err < 1e-3);

    AudioClip same = resample(clip, 48000);
    CHECK(same.size() == clip.size());

    AudioClip dc;
    dc.sample_rate = 48000;
    dc.samples.assign(4800, 0.25);
    AudioClip dc2 = resample(dc, 44100);
    for (std::size_t i = 100; i + 100 < dc2.size(); ++i)
        CHECK(std::abs(dc2.samples[i] - 0.25) < 1e-4);
}

TEST_CASE("wiener denoising lifts SNR and flattens pure noise") {
    Rng rng(31);
    const int sr = 44100;
    const long n = 4 * sr;
    AudioClip noisy;
    noisy.sample_rate = sr;
    noisy.samples.resize(n);
    AudioClip tone = noisy;
    // leading 1 s of sub-threshold noise, then a loud tone over the same noise
    for (long i = 0; i < n; ++i) {
        const double t = (double)i / sr;
        tone.samples[i] = t >= 1.0 ? 0.2 * std::sin(2.0 * M_PI * 880.0 * t) : 0.0;
        noisy.samples[i] = tone.samples[i] + rng.uniform(-0.005, 0.005);
    }
    AudioClip cleaned = wiener_denoise(noisy, 0.01);
    double err_before = 0.0, err_after = 0.0;
    for (long i = 0; i < n; ++i) {
        err_before += std::pow(noisy.samples[i] - tone.samples[i], 2);
        err_after += std::pow(cleaned.samples[i] - tone.samples[i], 2);
    }
    CHECK(10.0 * std::log10(err_before / err_after) > 5.0);

    AudioClip pure;
    pure.sample_rate = sr;
    pure.samples.resize(2 * sr);
    for (auto& s : pure.samples) s = rng.uniform(-0.005, 0.005);
    AudioClip flat = wiener_denoise(pure, 0.01);
    double rms_in = 0.0, rms_out = 0.0;
    for (long i = 0; i < (long)pure.size(); ++i) {
        rms_in += pure.samples[i] * pure.samples[i];
        rms_out += flat.samples[i] * flat.samples[i];
    }
    CHECK(std::sqrt(rms_out / rms_in) < 0.10);
}

TEST_CASE("wiener denoising requires a noise estimate") {
    Rng rng(37);
    AudioClip loud = random_clip(2 * 44100, 44100, rng, 0.5);
    CHECK_THROWS_AS(wiener_denoise(loud, 0.01), DataError);

    AudioClip noise = random_clip(44100, 44100, rng, 0.004);
    AudioClip cleaned = wiener_denoise(loud, 0.01, &noise);
    CHECK(cleaned.size() == loud.size());
}

TEST_CASE("istft honours the recorded source length") {
    Rng rng(41);
    AudioClip clip = random_clip(10000, 8000, rng);
    ComplexSpectrogram spec = stft(clip, 256, 64);
    CHECK(spec.source_samples == 10000);
    AudioClip out = istft(spec);
    CHECK(out.size() == clip.size());
    spec.source_samples = 5000;
    CHECK(istft(spec).size() == 5000);
}
