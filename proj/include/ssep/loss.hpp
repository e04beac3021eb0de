// Copyright 2026 The ssep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef SSEP_LOSS_HPP
#define SSEP_LOSS_HPP

#include <vector>

#include "ssep/dsp.hpp"
#include "ssep/nn.hpp"

namespace ssep {

struct CombinationTerm {
    std::vector<long> subset;  // ascending instrument indices
    double freq = 0.0;
    double time = 0.0;
};

struct LossBreakdown {
    double total = 0.0;   // mean over terms of freq + lambda * time
    double lambda = 10.0;
    std::vector<CombinationTerm> terms;
};

// Mean over all entries of the squared magnitude difference.
double spectral_mse(const MagSpectrogram& est, const MagSpectrogram& ref);

// Weighted signal-to-distortion loss in [-1, 1]. With the residuals
// z = mix - ref and zhat = mix - est, and rho = |ref|^2/(|ref|^2 + |z|^2):
//   loss = -rho * cos(ref, est) - (1 - rho) * cos(z, zhat)
// A zero-norm vector contributes cosine 0, so silent stems stay finite.
// est == ref gives exactly -1. Optionally writes d(loss)/d(est).
double weighted_sdr(const AudioClip& est, const AudioClip& ref, const AudioClip& mix,
                    Eigen::VectorXd* grad_est = nullptr);

// All non-empty proper subsets of {0..n-1}, ordered by size then
// lexicographically. Needs n >= 2; count is 2^n - 2.
std::vector<std::vector<long>> combinations(long n_instruments);

// Multi-domain training loss. For every subset S of instruments:
//   mask_S = sum of the subset's masks
//   freq_S = spectral_mse(|mask_S-filtered mixture|, |stft(sum of refs)|)
//   time_S = weighted_sdr(istft(mask_S-filtered mixture), sum of refs, mix)
// total = mean over subsets of freq_S + lambda * time_S. When grad_masks
// is given it receives d(total)/d(mask entry) per instrument, computed
// through the istft adjoint.
LossBreakdown combination_loss(const std::vector<Mask>& masks,
                               const ComplexSpectrogram& mix_spec,
                               const AudioClip& mix,
                               const std::vector<AudioClip>& refs,
                               double lambda = 10.0,
                               std::vector<Tensor2>* grad_masks = nullptr);

}  // namespace ssep

#endif
