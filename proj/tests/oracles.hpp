// Copyright 2026 The ssep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Brute-force reference computations, written independently of the
// library code they check and kept deliberately naive.

#ifndef SSEP_TESTS_ORACLES_HPP
#define SSEP_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

namespace oracles {

// O(N^2) DFT straight from the definition.
inline std::vector<std::complex<double>> dft(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (std::size_t t = 0; t < n; ++t) {
            const double angle = -2.0 * M_PI * (double)k * (double)t / (double)n;
            acc += x[t] * std::complex<double>(std::cos(angle), std::sin(angle));
        }
        out[k] = acc;
    }
    return out;
}

// A note sounds in a frame iff the half-open time intervals overlap.
inline bool note_covers_frame(double onset, double offset, long frame,
                              double frame_sec) {
    const double start = (double)frame * frame_sec;
    const double end = start + frame_sec;
    return std::max(start, onset) < std::min(end, offset);
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Frame-wise SDR pipeline recomputed sample by sample: silence zeroing
// on the reference, exclusion of exactly-zero reference frames, the
// 1e-12 error floor, then median/median/mean aggregation.
struct SimpleEval {
    double frame_sec = 1.0;
    double threshold = 0.01;

    std::vector<double> frames(std::vector<double> ref,
                               const std::vector<double>& est,
                               int sample_rate) const {
        const long win = std::lround(frame_sec * sample_rate);
        const long n = (long)ref.size();
        for (long start = 0; start < n; start += win) {
            const long end = std::min(start + win, n);
            double peak = 0.0;
            for (long i = start; i < end; ++i)
                peak = std::max(peak, std::abs(ref[i]));
            if (peak < threshold)
                for (long i = start; i < end; ++i) ref[i] = 0.0;
        }
        std::vector<double> out;
        for (long start = 0; start < n; start += win) {
            const long end = std::min(start + win, n);
            bool zero = true;
            double re = 0.0, ee = 0.0;
            for (long i = start; i < end; ++i) {
                if (ref[i] != 0.0) zero = false;
                re += ref[i] * ref[i];
                const double d = ref[i] - est[i];
                ee += d * d;
            }
            if (zero) continue;
            out.push_back(10.0 * std::log10(re / std::max(ee, 1e-12 * re)));
        }
        return out;
    }
};

}  // namespace oracles

#endif
