// Copyright 2026 The ssep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef SSEP_DATA_HPP
#define SSEP_DATA_HPP

#include <map>
#include <string>
#include <vector>

#include "ssep/audio.hpp"
#include "ssep/rng.hpp"
#include "ssep/score.hpp"

namespace ssep {

// Additive-synthesis voice: notes arrive as a Poisson-ish stream (mean
// note_rate per second, exponential gaps between onsets), each rendered
// as a harmonic stack with an ADSR envelope. The release tail sounds past
// the note's logical offset, as on a real instrument.
struct ToyInstrument {
    std::string name;
    int pitch_low = 48;
    int pitch_high = 72;
    std::vector<double> harmonic_amplitudes;  // first partial must dominate
    double attack_sec = 0.02;
    double decay_sec = 0.08;
    double sustain_level = 0.7;
    double release_sec = 0.08;
    double note_rate = 1.0;
    double min_note_sec = 0.2;
    double max_note_sec = 1.0;

    void validate() const;
};

struct ToySpec {
    long n_songs = 4;
    double duration_sec = 30.0;
    int sample_rate = 44100;
    std::vector<ToyInstrument> instruments;
    uint64_t seed = 0;

    void validate() const;  // needs duration >= 12 s and >= 2 instruments

    // Three voices (low/mid/high) with pitch ranges 36-55, 55-74, 74-93
    // and distinct harmonic profiles, chosen so separation is learnable
    // quickly.
    static ToySpec default_profile(long n_songs, double duration_sec, uint64_t seed);
    // Same voices with heavily overlapping ranges, as a stress case.
    static ToySpec overlap_profile(long n_songs, double duration_sec, uint64_t seed);
};

// Paths are relative to the directory holding the manifest.
struct SongEntry {
    std::string id;
    std::string mixture_path;
    std::map<std::string, std::string> stem_paths;
    std::string notes_path;
    double duration_sec = 0.0;
    std::vector<std::string> instruments;
};

struct Manifest {
    int sample_rate = 44100;
    std::vector<std::string> instruments;
    std::vector<SongEntry> songs;
    std::string base_dir;  // location the manifest was loaded from
};

// Renders every song (stems, exactly-additive mixture, canonical note
// CSV) under out_dir as <song>/mixture.wav, <song>/stems/<name>.wav,
// <song>/notes.csv, writes out_dir/manifest.json, and returns the
// entries. Stems are scaled jointly so the mixture peaks at 0.9 and are
// quantized to float32 before the mixture is summed, keeping the on-disk
// stems exactly additive. Bit-identical for identical spec and seed.
std::vector<SongEntry> synthesize_toy(const ToySpec& spec, const std::string& out_dir);

Manifest load_manifest(const std::string& path);
void write_manifest(const Manifest& manifest, const std::string& path);

struct LoadedSong {
    AudioClip mixture;
    std::map<std::string, AudioClip> stems;
    std::vector<ScoreTrack> tracks;

    static LoadedSong load(const Manifest& manifest, const SongEntry& entry,
                           bool need_notes = true);
    const ScoreTrack* track_for(const std::string& instrument) const;
};

struct Segment {
    AudioClip mix;
    std::vector<AudioClip> stems;      // one per requested instrument
    std::vector<PianoRoll> rolls;      // aligned to the segment's STFT grid
    long start_sample = 0;
};

// Uniformly random sample-granular start. Stems or notes missing for a
// requested instrument yield zero audio or an empty roll. Rolls cover
// exactly the STFT frame count of the segment; note times are shifted to
// segment-local time, clipping notes that straddle the boundary.
Segment sample_segment(const LoadedSong& song,
                       const std::vector<std::string>& instruments,
                       double segment_sec, int window_size, int hop_size, Rng& rng);

// Orchestral family of a known instrument name: strings, woodwinds,
// brass, or percussion. Unknown names raise DataError.
std::string family_of(const std::string& instrument);

// The instrument names belonging to one family.
std::vector<std::string> family_members(const std::string& family);

}  // namespace ssep

#endif
