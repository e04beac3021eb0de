// Copyright 2026 The ssep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ssep/fft.hpp"

#include <cmath>
#include <stdexcept>

namespace ssep {

namespace {

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace

FftPlan::FftPlan(std::size_t n) : n_(n) {
    if (n == 0) throw std::invalid_argument("FftPlan: size must be positive");
    pow2_ = is_pow2(n);
    if (pow2_) {
        bitrev_.resize(n);
        std::uint32_t j = 0;
        for (std::size_t i = 0; i < n; ++i) {
            bitrev_[i] = j;
            std::size_t bit = n >> 1;
            while (bit && (j & bit)) {
                j ^= static_cast<std::uint32_t>(bit);
                bit >>= 1;
            }
            j |= static_cast<std::uint32_t>(bit);
        }
        twiddle_.resize(n / 2);
        for (std::size_t k = 0; k < n / 2; ++k) {
            double ang = -2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n);
            twiddle_[k] = {std::cos(ang), std::sin(ang)};
        }
    } else {
        // Bluestein: x_k e^{-pi i k^2/n} convolved with e^{+pi i k^2/n}
        const std::size_t m = next_pow2(2 * n - 1);
        conv_plan_ = std::make_unique<FftPlan>(m);
        chirp_.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            // k^2 mod 2n keeps the phase argument small
            std::size_t k2 = (k * k) % (2 * n);
            double ang = -M_PI * static_cast<double>(k2) / static_cast<double>(n);
            chirp_[k] = {std::cos(ang), std::sin(ang)};
        }
        chirp_fft_.assign(m, {0.0, 0.0});
        chirp_fft_[0] = std::conj(chirp_[0]);
        for (std::size_t k = 1; k < n; ++k) {
            chirp_fft_[k] = std::conj(chirp_[k]);
            chirp_fft_[m - k] = std::conj(chirp_[k]);
        }
        conv_plan_->forward(chirp_fft_.data());
        scratch_.resize(m);
    }
}

void FftPlan::radix2(std::complex<double>* a) const {
    const std::size_t n = n_;
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t j = bitrev_[i];
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len >> 1;
        const std::size_t step = n / len;
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t k = 0; k < half; ++k) {
                const std::complex<double> w = twiddle_[k * step];
                const std::complex<double> t = w * a[i + k + half];
                a[i + k + half] = a[i + k] - t;
                a[i + k] += t;
            }
        }
    }
}

void FftPlan::forward(std::complex<double>* data) const {
    if (pow2_) {
        radix2(data);
        return;
    }
    const std::size_t n = n_;
    const std::size_t m = conv_plan_->size();
    auto& buf = scratch_;
    for (std::size_t k = 0; k < n; ++k) buf[k] = data[k] * chirp_[k];
    for (std::size_t k = n; k < m; ++k) buf[k] = {0.0, 0.0};
    conv_plan_->forward(buf.data());
    for (std::size_t k = 0; k < m; ++k) buf[k] *= chirp_fft_[k];
    conv_plan_->inverse(buf.data());
    for (std::size_t k = 0; k < n; ++k) data[k] = buf[k] * chirp_[k];
}

void FftPlan::inverse(std::complex<double>* data) const {
    const std::size_t n = n_;
    for (std::size_t i = 0; i < n; ++i) data[i] = std::conj(data[i]);
    forward(data);
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) data[i] = std::conj(data[i]) * inv;
}

}  // namespace ssep
