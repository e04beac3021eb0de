// Copyright 2026 The ssep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef SSEP_AUDIO_HPP
#define SSEP_AUDIO_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssep {

// Mono time-domain signal. Samples nominally in [-1, 1], always finite.
struct AudioClip {
    std::vector<double> samples;
    int sample_rate = 0;

    AudioClip() = default;
    AudioClip(std::vector<double> s, int rate) : samples(std::move(s)), sample_rate(rate) {}

    std::size_t size() const { return samples.size(); }
    double duration_sec() const {
        return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
    }

    void validate() const {
        if (sample_rate <= 0) throw std::invalid_argument("AudioClip: sample_rate must be positive");
        for (double v : samples) {
            if (!std::isfinite(v)) throw std::invalid_argument("AudioClip: samples must be finite");
        }
    }

    double peak() const {
        double p = 0.0;
        for (double v : samples) p = std::max(p, std::abs(v));
        return p;
    }

    double rms() const {
        if (samples.empty()) return 0.0;
        double acc = 0.0;
        for (double v : samples) acc += v * v;
        return std::sqrt(acc / static_cast<double>(samples.size()));
    }
};

}  // namespace ssep

#endif
