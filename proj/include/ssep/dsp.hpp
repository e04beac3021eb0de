// Copyright 2026 The ssep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef SSEP_DSP_HPP
#define SSEP_DSP_HPP

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "ssep/audio.hpp"

namespace ssep {

// STFT conventions used throughout:
//   - periodic Hann analysis and synthesis window
//   - input is center-padded with window/2 reflected samples on each side,
//     so frame k is centered at sample k*hop
//   - frame count = floor((len + 2*(window/2) - window)/hop) + 1, which is
//     floor(len/hop) + 1 for even windows
//   - forward frames are unnormalized DFTs of the windowed slice; istft
//     divides the overlap-add by the accumulated squared window
struct ComplexSpectrogram {
    Eigen::MatrixXcd data;  // frames x bins
    int window_size = 0;
    int hop_size = 0;
    int sample_rate = 0;
    long source_samples = -1;  // original clip length, -1 when unknown

    long frames() const { return data.rows(); }
    long bins() const { return data.cols(); }
    void validate() const;
};

struct MagSpectrogram {
    Eigen::MatrixXd data;  // frames x bins, entries >= 0
    int window_size = 0;
    int hop_size = 0;
    int sample_rate = 0;

    long frames() const { return data.rows(); }
    long bins() const { return data.cols(); }
};

// Non-negative per-instrument spectral filter; geometry must match the
// spectrogram it multiplies.
struct Mask {
    Eigen::MatrixXd data;  // frames x bins

    long frames() const { return data.rows(); }
    long bins() const { return data.cols(); }
    void validate() const;
};

long stft_frame_count(long n_samples, int window_size, int hop_size);

ComplexSpectrogram stft(const AudioClip& clip, int window_size, int hop_size);
AudioClip istft(const ComplexSpectrogram& spec);
MagSpectrogram magnitude(const ComplexSpectrogram& spec);
ComplexSpectrogram apply_mask(const ComplexSpectrogram& mix_spec, const Mask& mask);

// Adjoint of istft as a real-linear map: given d(loss)/d(output sample),
// returns the matching d(loss)/d(spectrogram entry) with the real part
// carrying the Re-gradient and the imaginary part the Im-gradient.
// `geometry` supplies window/hop/frames/source length; its data values are
// not read. Backbone of the time-domain loss gradient.
Eigen::MatrixXcd istft_adjoint(const ComplexSpectrogram& geometry,
                               const Eigen::VectorXd& grad_output);

// Windowed-sinc resampler (Kaiser beta 8.6, 64-tap kernel, per-sample
// normalized DC gain). Output length = round(len * target/source).
AudioClip resample(const AudioClip& clip, int target_rate);

// Noise reduction in the STFT domain. The noise power spectrum comes from
// the STFT frames fully contained in 1-second windows classified silent
// (all samples below the threshold), or from `noise` when given. Per-bin gain:
//   G = max(1 - alpha * N[b] / |X[f,b]|^2, floor)
// with floor 1e-3. Throws DataError when no silent window exists and no
// explicit noise clip was supplied.
AudioClip wiener_denoise(const AudioClip& clip, double silence_threshold = 0.01,
                         const AudioClip* noise = nullptr,
                         double oversubtraction = 5.0);

}  // namespace ssep

#endif
