// Copyright 2026 The ssep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef SSEP_WAV_HPP
#define SSEP_WAV_HPP

#include <string>

#include "ssep/audio.hpp"

namespace ssep {

enum class WavFormat { pcm16, float32 };

// Reads a PCM 16-bit or IEEE float 32-bit WAV file. Multichannel input is
// downmixed to mono by averaging the channels. Sample rate comes from the
// header.
AudioClip read_wav(const std::string& path);

// Writes a mono WAV file; float32 by default so toy stems stay exactly
// additive after a round trip through disk.
void write_wav(const std::string& path, const AudioClip& clip,
               WavFormat format = WavFormat::float32);

}  // namespace ssep

#endif
