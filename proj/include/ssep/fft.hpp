// Copyright 2026 The ssep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef SSEP_FFT_HPP
#define SSEP_FFT_HPP

#include <complex>
#include <cstdint>
#include <memory>
#include <vector>

namespace ssep {

// Complex FFT with precomputed twiddle/bit-reversal tables. Power-of-two
// sizes run the iterative radix-2 kernel; other sizes go through Bluestein's
// algorithm on top of it. A plan is cheap to build relative to a frame loop
// and is not thread-safe (scratch buffers); create one per thread.
class FftPlan {
public:
    explicit FftPlan(std::size_t n);

    std::size_t size() const { return n_; }

    // in-place unnormalized forward DFT, data.size() == n
    void forward(std::complex<double>* data) const;
    // in-place inverse DFT including the 1/n factor
    void inverse(std::complex<double>* data) const;

private:
    void radix2(std::complex<double>* data) const;

    std::size_t n_ = 0;
    bool pow2_ = false;
    std::vector<std::uint32_t> bitrev_;
    std::vector<std::complex<double>> twiddle_;  // e^{-2pi i k/n}, k < n/2

    // Bluestein state for non power-of-two sizes
    std::unique_ptr<FftPlan> conv_plan_;
    std::vector<std::complex<double>> chirp_;      // e^{-pi i k^2/n}
    std::vector<std::complex<double>> chirp_fft_;  // FFT of the chirp filter
    mutable std::vector<std::complex<double>> scratch_;
};

}  // namespace ssep

#endif
