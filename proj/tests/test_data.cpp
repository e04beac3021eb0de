// Copyright 2026 The ssep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "ssep/data.hpp"
#include "ssep/dsp.hpp"
#include "ssep/util.hpp"
#include "ssep/wav.hpp"

using namespace ssep;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& leaf) {
    fs::path dir = fs::temp_directory_path() / leaf;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const Manifest& toy_manifest() {
    static Manifest manifest = [] {
        fs::path dir = fresh_dir("ssep_test_data_main");
        ToySpec spec = ToySpec::default_profile(2, 12.0, 7);
        synthesize_toy(spec, dir.string());
        return load_manifest((dir / "manifest.json").string());
    }();
    return manifest;
}

}  // namespace

TEST_CASE("toy synthesis is bit-identical for identical spec and seed") {
    fs::path a = fresh_dir("ssep_test_data_a");
    fs::path b = fresh_dir("ssep_test_data_b");
    ToySpec spec = ToySpec::default_profile(1, 12.0, 5);
    synthesize_toy(spec, a.string());
    synthesize_toy(spec, b.string());
    for (const char* rel :
         {"song_000/mixture.wav", "song_000/notes.csv", "song_000/stems/low.wav",
          "song_000/stems/mid.wav", "song_000/stems/high.wav"}) {
        CHECK(slurp(a / rel) == slurp(b / rel));
    }
    // a different seed actually changes the audio
    ToySpec other = ToySpec::default_profile(1, 12.0, 6);
    fs::path c = fresh_dir("ssep_test_data_c");
    synthesize_toy(other, c.string());
    CHECK(slurp(a / "song_000/mixture.wav") != slurp(c / "song_000/mixture.wav"));
}

TEST_CASE("stems on disk sum exactly to the mixture") {
    const Manifest& manifest = toy_manifest();
    REQUIRE(manifest.songs.size() == 2);
    for (const SongEntry& entry : manifest.songs) {
        LoadedSong song = LoadedSong::load(manifest, entry);
        REQUIRE(song.stems.size() == 3);
        std::vector<double> sum(song.mixture.size(), 0.0);
        for (const auto& [name, stem] : song.stems) {
            REQUIRE(stem.size() == song.mixture.size());
            for (std::size_t i = 0; i < stem.size(); ++i) sum[i] += stem.samples[i];
        }
        double residual = 0.0, peak = 0.0;
        for (std::size_t i = 0; i < sum.size(); ++i) {
            residual = std::max(residual, std::abs(sum[i] - song.mixture.samples[i]));
            peak = std::max(peak, std::abs(song.mixture.samples[i]));
        }
        CHECK(peak <= 0.9 + 1e-6);
        CHECK(peak > 0.5);  // joint scaling targets 0.9
        CHECK(residual < 1e-6);
    }
}

TEST_CASE("note fundamentals dominate the stem spectrum during sustain") {
    const Manifest& manifest = toy_manifest();
    LoadedSong song = LoadedSong::load(manifest, manifest.songs[0]);
    const int sr = song.mixture.sample_rate;
    const long dft_len = 8192;
    long checked = 0;
    for (const ScoreTrack& track : song.tracks) {
        const AudioClip& stem = song.stems.at(track.instrument);
        for (std::size_t k = 0; k < track.notes.size() && checked < 6; ++k) {
            const NoteEvent& note = track.notes[k];
            // only isolated notes: no neighbour of this stem may sound
            // (including release tails) inside the analysis window
            const double lo = note.onset + 0.12, hi = lo + (double)dft_len / sr;
            if (hi > note.offset) continue;
            bool isolated = true;
            for (std::size_t j = 0; j < track.notes.size(); ++j)
                if (j != k && track.notes[j].onset < hi + 0.1 &&
                    track.notes[j].offset + 0.3 > lo)
                    isolated = false;
            if (!isolated) continue;

            std::vector<double> win(dft_len);
            const long start = (long)std::lround(lo * sr);
            if (start + dft_len > (long)stem.size()) continue;
            for (long i = 0; i < dft_len; ++i) win[i] = stem.samples[start + i];
            auto spectrum = oracles::dft(win);
            long peak_bin = 0;
            double peak_mag = 0.0;
            for (long bin = 1; bin < dft_len / 2; ++bin)
                if (std::abs(spectrum[bin]) > peak_mag) {
                    peak_mag = std::abs(spectrum[bin]);
                    peak_bin = bin;
                }
            const double fundamental = 440.0 * std::pow(2.0, (note.pitch - 69) / 12.0);
            const double peak_hz = (double)peak_bin * sr / dft_len;
            CHECK(std::abs(peak_hz - fundamental) <= (double)sr / dft_len);
            ++checked;
        }
    }
    CHECK(checked >= 3);
}

TEST_CASE("note csv parses cleanly with pitches inside each voice range") {
    const Manifest& manifest = toy_manifest();
    LoadedSong song = LoadedSong::load(manifest, manifest.songs[0]);
    REQUIRE(song.tracks.size() == 3);
    const std::map<std::string, std::pair<int, int>> ranges = {
        {"low", {36, 55}}, {"mid", {55, 74}}, {"high", {74, 93}}};
    for (const ScoreTrack& track : song.tracks) {
        CHECK(track.notes.size() >= 3);
        auto [lo, hi] = ranges.at(track.instrument);
        for (const NoteEvent& note : track.notes) {
            CHECK(note.pitch >= lo);
            CHECK(note.pitch <= hi);
            CHECK(note.offset > note.onset);
        }
    }
}

TEST_CASE("toy spec validation enforces the documented minimums") {
    ToySpec spec = ToySpec::default_profile(2, 12.0, 0);
    spec.validate();
    ToySpec::overlap_profile(1, 12.0, 0).validate();
    ToySpec short_spec = spec;
    short_spec.duration_sec = 8.0;
    CHECK_THROWS_AS(short_spec.validate(), DataError);
    ToySpec solo = spec;
    solo.instruments.resize(1);
    CHECK_THROWS_AS(solo.validate(), DataError);
    ToyInstrument bad = spec.instruments[0];
    bad.harmonic_amplitudes = {0.0, 1.0};  // first partial must dominate
    CHECK_THROWS_AS(bad.validate(), DataError);
}

TEST_CASE("manifest round-trips through json") {
    const Manifest& manifest = toy_manifest();
    fs::path dir = fresh_dir("ssep_test_data_manifest");
    fs::path path = dir / "manifest.json";
    write_manifest(manifest, path.string());
    Manifest back = load_manifest(path.string());
    CHECK(back.sample_rate == manifest.sample_rate);
    CHECK(back.instruments == manifest.instruments);
    REQUIRE(back.songs.size() == manifest.songs.size());
    for (std::size_t i = 0; i < back.songs.size(); ++i) {
        CHECK(back.songs[i].id == manifest.songs[i].id);
        CHECK(back.songs[i].mixture_path == manifest.songs[i].mixture_path);
        CHECK(back.songs[i].stem_paths == manifest.songs[i].stem_paths);
        CHECK(back.songs[i].duration_sec == manifest.songs[i].duration_sec);
    }
    CHECK(back.base_dir == dir.string());
    CHECK_THROWS_AS(load_manifest((dir / "missing.json").string()), DataError);
}

TEST_CASE("segments have consistent geometry and reproducible draws") {
    const Manifest& manifest = toy_manifest();
    LoadedSong song = LoadedSong::load(manifest, manifest.songs[0]);
    const std::vector<std::string> instruments = manifest.instruments;

    Rng rng_a(123), rng_b(123);
    Segment a = sample_segment(song, instruments, 6.0, 4096, 1024, rng_a);
    Segment b = sample_segment(song, instruments, 6.0, 4096, 1024, rng_b);
    CHECK(a.start_sample == b.start_sample);
    CHECK(a.mix.samples == b.mix.samples);

    const long seg_samples = (long)std::lround(6.0 * 44100);
    CHECK((long)a.mix.size() == seg_samples);
    CHECK(a.start_sample >= 0);
    CHECK(a.start_sample + seg_samples <= (long)song.mixture.size());
    const long frames = stft_frame_count(seg_samples, 4096, 1024);
    CHECK(frames == 259);
    REQUIRE(a.rolls.size() == instruments.size());
    REQUIRE(a.stems.size() == instruments.size());
    for (const PianoRoll& roll : a.rolls) {
        CHECK(roll.frames() == frames);
        CHECK(roll.hop_size == 1024);
    }
    for (std::size_t i = 0; i < instruments.size(); ++i) {
        const AudioClip& stem = a.stems[i];
        REQUIRE(stem.size() == (std::size_t)seg_samples);
        const AudioClip& full = song.stems.at(instruments[i]);
        for (long t = 0; t < seg_samples; t += 997)
            CHECK(stem.samples[t] == full.samples[a.start_sample + t]);
    }
}

TEST_CASE("segment rolls mark note activity in segment-local time") {
    const Manifest& manifest = toy_manifest();
    LoadedSong song = LoadedSong::load(manifest, manifest.songs[1]);
    Rng rng(77);
    Segment seg = sample_segment(song, manifest.instruments, 6.0, 4096, 1024, rng);
    const double frame_sec = 1024.0 / 44100.0;
    const double start_sec = (double)seg.start_sample / 44100.0;
    for (std::size_t i = 0; i < manifest.instruments.size(); ++i) {
        const ScoreTrack* track = song.track_for(manifest.instruments[i]);
        REQUIRE(track != nullptr);
        const PianoRoll& roll = seg.rolls[i];
        for (long f = 0; f < roll.frames(); f += 7)
            for (int p = 0; p < kMidiPitches; ++p) {
                bool active = false;
                for (const NoteEvent& note : track->notes)
                    active = active ||
                             (note.pitch == p &&
                              oracles::note_covers_frame(note.onset - start_sec,
                                                         note.offset - start_sec,
                                                         f, frame_sec));
                REQUIRE(roll.data(f, p) == (active ? 1.0 : 0.0));
            }
    }
}

TEST_CASE("segments zero-fill missing stems and rolls") {
    const Manifest& manifest = toy_manifest();
    LoadedSong song = LoadedSong::load(manifest, manifest.songs[0]);
    Rng rng(9);
    Segment seg = sample_segment(song, {"low", "tuba"}, 6.0, 4096, 1024, rng);
    REQUIRE(seg.stems.size() == 2);
    CHECK(seg.stems[0].samples != std::vector<double>(seg.stems[0].size(), 0.0));
    CHECK(seg.stems[1].samples == std::vector<double>(seg.stems[1].size(), 0.0));
    CHECK(seg.rolls[1].data.cwiseAbs().maxCoeff() == 0.0);

    CHECK_THROWS_AS(sample_segment(song, {"low"}, 99.0, 4096, 1024, rng), DataError);
}

TEST_CASE("instrument families follow the orchestral table") {
    CHECK(family_of("violin") == "strings");
    CHECK(family_of("viola") == "strings");
    CHECK(family_of("harp") == "percussion");
    CHECK(family_of("tuba") == "brass");
    CHECK(family_of("oboe") == "woodwinds");
    CHECK_THROWS_AS(family_of("saxophone"), DataError);
    CHECK_THROWS_AS(family_of("low"), DataError);  // toy voices have no family

    auto strings = family_members("strings");
    std::sort(strings.begin(), strings.end());
    CHECK(strings == std::vector<std::string>{"bass", "cello", "viola", "violin"});
    CHECK(family_members("woodwinds").size() == 4);
    CHECK(family_members("brass").size() == 4);
    CHECK(family_members("percussion").size() == 3);
    CHECK_THROWS_AS(family_members("keyboards"), DataError);
}

TEST_CASE("stem samples are float32-representable") {
    const Manifest& manifest = toy_manifest();
    LoadedSong song = LoadedSong::load(manifest, manifest.songs[0]);
    for (const auto& [name, stem] : song.stems)
        for (std::size_t i = 0; i < stem.size(); i += 501)
            CHECK((double)(float)stem.samples[i] == stem.samples[i]);
}
