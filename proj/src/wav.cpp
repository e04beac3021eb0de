// Copyright 2026 The ssep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ssep/wav.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "ssep/util.hpp"

namespace ssep {

namespace {

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;

uint32_t read_u32(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t read_u16(const unsigned char* p) {
    return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u16(std::string& out, uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

AudioClip read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open WAV file: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
        throw DataError("not a RIFF/WAVE file: " + path);
    }

    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t rate = 0;
    const unsigned char* data = nullptr;
    std::size_t data_len = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
        uint32_t len = read_u32(bytes.data() + pos + 4);
        pos += 8;
        if (pos + len > bytes.size()) len = static_cast<uint32_t>(bytes.size() - pos);
        if (std::memcmp(id, "fmt ", 4) == 0 && len >= 16) {
            format = read_u16(bytes.data() + pos);
            channels = read_u16(bytes.data() + pos + 2);
            rate = read_u32(bytes.data() + pos + 4);
            bits = read_u16(bytes.data() + pos + 14);
        } else if (std::memcmp(id, "data", 4) == 0) {
            data = bytes.data() + pos;
            data_len = len;
        }
        pos += len + (len & 1);  // chunks are word-aligned
    }

    if (data == nullptr || rate == 0 || channels == 0) {
        throw DataError("missing fmt/data chunk in WAV file: " + path);
    }
    if (!((format == kFormatPcm && bits == 16) || (format == kFormatFloat && bits == 32))) {
        throw DataError("unsupported WAV encoding (want PCM16 or float32): " + path);
    }

    const std::size_t bytes_per_sample = bits / 8;
    const std::size_t frame_bytes = bytes_per_sample * channels;
    const std::size_t n_frames = data_len / frame_bytes;

    AudioClip clip;
    clip.sample_rate = static_cast<int>(rate);
    clip.samples.resize(n_frames);
    for (std::size_t i = 0; i < n_frames; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
            const unsigned char* p = data + i * frame_bytes + c * bytes_per_sample;
            if (format == kFormatPcm) {
                int16_t v = static_cast<int16_t>(p[0] | (p[1] << 8));
                acc += static_cast<double>(v) / 32768.0;
            } else {
                float f;
                std::memcpy(&f, p, 4);
                acc += static_cast<double>(f);
            }
        }
        clip.samples[i] = acc / channels;
    }
    return clip;
}

void write_wav(const std::string& path, const AudioClip& clip, WavFormat format) {
    clip.validate();
    const uint32_t n = static_cast<uint32_t>(clip.samples.size());
    const uint16_t bits = format == WavFormat::pcm16 ? 16 : 32;
    const uint16_t fmt_code = format == WavFormat::pcm16 ? kFormatPcm : kFormatFloat;
    const uint32_t byte_rate = static_cast<uint32_t>(clip.sample_rate) * bits / 8;
    const uint32_t data_len = n * bits / 8;

    std::string out;
    out.reserve(44 + data_len);
    out.append("RIFF");
    put_u32(out, 36 + data_len);
    out.append("WAVE");
    out.append("fmt ");
    put_u32(out, 16);
    put_u16(out, fmt_code);
    put_u16(out, 1);  // mono
    put_u32(out, static_cast<uint32_t>(clip.sample_rate));
    put_u32(out, byte_rate);
    put_u16(out, static_cast<uint16_t>(bits / 8));
    put_u16(out, bits);
    out.append("data");
    put_u32(out, data_len);

    if (format == WavFormat::pcm16) {
        for (double v : clip.samples) {
            double clamped = std::clamp(v, -1.0, 1.0);
            auto q = static_cast<int16_t>(std::lround(clamped * 32767.0));
            put_u16(out, static_cast<uint16_t>(q));
        }
    } else {
        for (double v : clip.samples) {
            float f = static_cast<float>(v);
            char buf[4];
            std::memcpy(buf, &f, 4);
            out.append(buf, 4);
        }
    }

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open WAV file for writing: " + path);
    os.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!os) throw DataError("failed writing WAV file: " + path);
}

}  // namespace ssep
