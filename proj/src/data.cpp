// Copyright 2026 The ssep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ssep/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ssep/dsp.hpp"
#include "ssep/util.hpp"
#include "ssep/wav.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ssep {

void ToyInstrument::validate() const {
    if (name.empty()) throw DataError("toy instrument: empty name");
    if (pitch_low < 0 || pitch_high > 127 || pitch_low > pitch_high) {
        throw DataError("toy instrument '" + name + "': bad pitch range");
    }
    if (harmonic_amplitudes.empty() || harmonic_amplitudes[0] <= 0.0) {
        throw DataError("toy instrument '" + name + "': first partial must be positive");
    }
    for (double a : harmonic_amplitudes) {
        if (a < 0.0) throw DataError("toy instrument '" + name + "': negative partial gain");
    }
    if (note_rate <= 0.0 || min_note_sec <= 0.0 || max_note_sec < min_note_sec) {
        throw DataError("toy instrument '" + name + "': bad note timing");
    }
}

void ToySpec::validate() const {
    if (n_songs <= 0) throw DataError("toy spec: need at least one song");
    if (duration_sec < 12.0) {
        throw DataError("toy spec: songs must be at least 12 s (two training segments)");
    }
    if (sample_rate <= 0) throw DataError("toy spec: bad sample rate");
    if (instruments.size() < 2) throw DataError("toy spec: need at least 2 instruments");
    for (const auto& inst : instruments) inst.validate();
}

ToySpec ToySpec::default_profile(long n_songs, double duration_sec, uint64_t seed) {
    ToySpec spec;
    spec.n_songs = n_songs;
    spec.duration_sec = duration_sec;
    spec.seed = seed;
    ToyInstrument low;
    low.name = "low";
    low.pitch_low = 36;
    low.pitch_high = 55;
    low.harmonic_amplitudes = {1.0, 0.62, 0.41, 0.26, 0.16, 0.09};
    low.attack_sec = 0.03;
    low.decay_sec = 0.10;
    low.sustain_level = 0.75;
    low.release_sec = 0.08;
    low.note_rate = 0.9;
    low.min_note_sec = 0.30;
    low.max_note_sec = 1.20;
    ToyInstrument mid;
    mid.name = "mid";
    mid.pitch_low = 55;
    mid.pitch_high = 74;
    mid.harmonic_amplitudes = {1.0, 0.30, 0.52, 0.12, 0.07};
    mid.attack_sec = 0.02;
    mid.decay_sec = 0.07;
    mid.sustain_level = 0.70;
    mid.release_sec = 0.07;
    mid.note_rate = 1.2;
    mid.min_note_sec = 0.25;
    mid.max_note_sec = 1.00;
    ToyInstrument high;
    high.name = "high";
    high.pitch_low = 74;
    high.pitch_high = 93;
    high.harmonic_amplitudes = {1.0, 0.18, 0.05};
    high.attack_sec = 0.01;
    high.decay_sec = 0.05;
    high.sustain_level = 0.65;
    high.release_sec = 0.06;
    high.note_rate = 1.5;
    high.min_note_sec = 0.20;
    high.max_note_sec = 0.80;
    spec.instruments = {low, mid, high};
    return spec;
}

ToySpec ToySpec::overlap_profile(long n_songs, double duration_sec, uint64_t seed) {
    ToySpec spec = default_profile(n_songs, duration_sec, seed);
    spec.instruments[0].pitch_low = 48;
    spec.instruments[0].pitch_high = 72;
    spec.instruments[1].pitch_low = 55;
    spec.instruments[1].pitch_high = 79;
    spec.instruments[2].pitch_low = 60;
    spec.instruments[2].pitch_high = 84;
    return spec;
}

namespace {

double adsr(double t, double duration, const ToyInstrument& inst) {
    if (t < 0.0) return 0.0;
    double level;
    const double tp = std::min(t, duration);
    if (tp < inst.attack_sec) {
        level = tp / inst.attack_sec;
    } else if (tp < inst.attack_sec + inst.decay_sec) {
        level = 1.0 + (inst.sustain_level - 1.0) * (tp - inst.attack_sec) / inst.decay_sec;
    } else {
        level = inst.sustain_level;
    }
    if (t >= duration) {
        if (inst.release_sec <= 0.0) return 0.0;
        const double r = 1.0 - (t - duration) / inst.release_sec;
        if (r <= 0.0) return 0.0;
        level *= r;
    }
    return level;
}

struct RenderedTrack {
    std::vector<double> samples;
    std::vector<NoteEvent> notes;
};

RenderedTrack render_track(const ToyInstrument& inst, double duration, int sr, Rng& rng) {
    RenderedTrack out;
    const long n = static_cast<long>(std::llround(duration * sr));
    out.samples.assign(n, 0.0);

    double t = rng.exponential(inst.note_rate);
    while (t < duration - 0.1) {
        double dur = rng.uniform(inst.min_note_sec, inst.max_note_sec);
        dur = std::min(dur, duration - t - 0.01);
        const int pitch = rng.uniform_int(inst.pitch_low, inst.pitch_high);
        const double f0 = 440.0 * std::pow(2.0, (pitch - 69) / 12.0);
        const double gain = rng.uniform(0.7, 1.0);
        std::vector<double> phases(inst.harmonic_amplitudes.size());
        for (auto& p : phases) p = rng.uniform(0.0, 2.0 * M_PI);

        const long start = static_cast<long>(std::llround(t * sr));
        const long stop =
            std::min<long>(n, static_cast<long>(std::llround((t + dur + inst.release_sec) * sr)));
        for (long s = start; s < stop; ++s) {
            const double tn = static_cast<double>(s) / sr;
            const double env = adsr(tn - t, dur, inst);
            if (env <= 0.0) continue;
            double v = 0.0;
            for (std::size_t k = 0; k < inst.harmonic_amplitudes.size(); ++k) {
                const double fk = f0 * static_cast<double>(k + 1);
                if (2.0 * fk >= sr) break;
                v += inst.harmonic_amplitudes[k] *
                     std::sin(2.0 * M_PI * fk * tn + phases[k]);
            }
            out.samples[s] += gain * env * v;
        }
        NoteEvent note;
        note.onset = t;
        note.offset = t + dur;
        note.pitch = pitch;
        note.instrument = inst.name;
        out.notes.push_back(note);
        t += rng.exponential(inst.note_rate);
    }
    return out;
}

double as_float32(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

std::vector<SongEntry> synthesize_toy(const ToySpec& spec, const std::string& out_dir) {
    spec.validate();
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir)) {
        throw DataError("synthesize_toy: cannot create directory " + out_dir);
    }

    std::vector<SongEntry> entries;
    for (long song = 0; song < spec.n_songs; ++song) {
        char id[32];
        std::snprintf(id, sizeof id, "song_%03ld", song);
        const fs::path song_dir = fs::path(out_dir) / id;
        fs::create_directories(song_dir / "stems", ec);
        if (ec) throw DataError("synthesize_toy: cannot create " + (song_dir / "stems").string());

        const uint64_t song_seed = Rng::derive(spec.seed, static_cast<uint64_t>(song));
        std::vector<RenderedTrack> tracks;
        for (std::size_t j = 0; j < spec.instruments.size(); ++j) {
            Rng rng(Rng::derive(song_seed, j + 1));
            tracks.push_back(render_track(spec.instruments[j], spec.duration_sec,
                                          spec.sample_rate, rng));
        }

        const long n = static_cast<long>(tracks[0].samples.size());
        double peak = 0.0;
        for (long i = 0; i < n; ++i) {
            double sum = 0.0;
            for (const auto& tr : tracks) sum += tr.samples[i];
            peak = std::max(peak, std::abs(sum));
        }
        const double scale = peak > 1e-9 ? 0.9 / peak : 1.0;

        // quantize stems to float32 first so the stored mixture is the sum
        // of the stored stems up to one final float32 rounding
        for (auto& tr : tracks) {
            for (auto& s : tr.samples) s = as_float32(s * scale);
        }
        AudioClip mixture;
        mixture.sample_rate = spec.sample_rate;
        mixture.samples.assign(n, 0.0);
        for (long i = 0; i < n; ++i) {
            double sum = 0.0;
            for (const auto& tr : tracks) sum += tr.samples[i];
            mixture.samples[i] = sum;
        }

        SongEntry entry;
        entry.id = id;
        entry.duration_sec = spec.duration_sec;
        entry.mixture_path = (fs::path(id) / "mixture.wav").string();
        entry.notes_path = (fs::path(id) / "notes.csv").string();
        write_wav((song_dir / "mixture.wav").string(), mixture);

        std::vector<ScoreTrack> score;
        for (std::size_t j = 0; j < spec.instruments.size(); ++j) {
            const std::string& name = spec.instruments[j].name;
            AudioClip stem;
            stem.sample_rate = spec.sample_rate;
            stem.samples = tracks[j].samples;
            const std::string rel = (fs::path(id) / "stems" / (name + ".wav")).string();
            write_wav((fs::path(out_dir) / rel).string(), stem);
            entry.stem_paths[name] = rel;
            entry.instruments.push_back(name);
            ScoreTrack st;
            st.instrument = name;
            st.notes = tracks[j].notes;
            score.push_back(std::move(st));
        }
        std::ofstream csv(song_dir / "notes.csv", std::ios::binary);
        if (!csv) throw DataError("synthesize_toy: cannot write notes.csv");
        csv << serialize_notes_csv(score);
        csv.close();

        entries.push_back(std::move(entry));
    }

    Manifest manifest;
    manifest.sample_rate = spec.sample_rate;
    for (const auto& inst : spec.instruments) manifest.instruments.push_back(inst.name);
    manifest.songs = entries;
    write_manifest(manifest, (fs::path(out_dir) / "manifest.json").string());
    return entries;
}

void write_manifest(const Manifest& manifest, const std::string& path) {
    json songs = json::array();
    for (const auto& e : manifest.songs) {
        json stems = json::object();
        for (const auto& [name, rel] : e.stem_paths) stems[name] = rel;
        songs.push_back({{"id", e.id},
                         {"mixture", e.mixture_path},
                         {"stems", stems},
                         {"notes", e.notes_path},
                         {"duration_sec", e.duration_sec},
                         {"instruments", e.instruments}});
    }
    const json root = {{"sample_rate", manifest.sample_rate},
                       {"instruments", manifest.instruments},
                       {"songs", songs}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write manifest " + path);
    out << root.dump(2) << "\n";
}

Manifest load_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open manifest " + path);
    json root;
    try {
        in >> root;
    } catch (const json::exception& e) {
        throw DataError("manifest " + path + ": " + e.what());
    }
    Manifest m;
    try {
        m.sample_rate = root.at("sample_rate").get<int>();
        m.instruments = root.at("instruments").get<std::vector<std::string>>();
        for (const auto& s : root.at("songs")) {
            SongEntry e;
            e.id = s.at("id").get<std::string>();
            e.mixture_path = s.at("mixture").get<std::string>();
            e.notes_path = s.value("notes", "");
            e.duration_sec = s.at("duration_sec").get<double>();
            e.instruments = s.at("instruments").get<std::vector<std::string>>();
            for (const auto& [name, rel] : s.at("stems").items()) {
                e.stem_paths[name] = rel.get<std::string>();
            }
            m.songs.push_back(std::move(e));
        }
    } catch (const json::exception& e) {
        throw DataError("manifest " + path + ": " + e.what());
    }
    m.base_dir = fs::path(path).parent_path().string();
    return m;
}

LoadedSong LoadedSong::load(const Manifest& manifest, const SongEntry& entry,
                            bool need_notes) {
    const fs::path base = manifest.base_dir;
    LoadedSong song;
    song.mixture = read_wav((base / entry.mixture_path).string());
    if (song.mixture.sample_rate != manifest.sample_rate) {
        throw DataError("song " + entry.id + ": mixture sample rate differs from manifest");
    }
    for (const auto& [name, rel] : entry.stem_paths) {
        AudioClip stem = read_wav((base / rel).string());
        if (stem.sample_rate != manifest.sample_rate ||
            stem.samples.size() != song.mixture.samples.size()) {
            throw DataError("song " + entry.id + ": stem '" + name + "' geometry mismatch");
        }
        song.stems[name] = std::move(stem);
    }
    if (need_notes && !entry.notes_path.empty()) {
        std::ifstream in(base / entry.notes_path, std::ios::binary);
        if (!in) throw DataError("song " + entry.id + ": cannot open notes csv");
        std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
        song.tracks = parse_notes_csv(text);
    }
    return song;
}

const ScoreTrack* LoadedSong::track_for(const std::string& instrument) const {
    for (const auto& t : tracks) {
        if (t.instrument == instrument) return &t;
    }
    return nullptr;
}

Segment sample_segment(const LoadedSong& song,
                       const std::vector<std::string>& instruments,
                       double segment_sec, int window_size, int hop_size, Rng& rng) {
    const int sr = song.mixture.sample_rate;
    const long seg_samples = static_cast<long>(std::llround(segment_sec * sr));
    const long total = static_cast<long>(song.mixture.samples.size());
    if (seg_samples > total) {
        throw DataError("sample_segment: song shorter than the segment length");
    }
    const long start = rng.uniform_int(0, total - seg_samples);
    const double t0 = static_cast<double>(start) / sr;
    const long frames = stft_frame_count(seg_samples, window_size, hop_size);

    Segment seg;
    seg.start_sample = start;
    seg.mix.sample_rate = sr;
    seg.mix.samples.assign(song.mixture.samples.begin() + start,
                           song.mixture.samples.begin() + start + seg_samples);
    for (const auto& name : instruments) {
        AudioClip stem;
        stem.sample_rate = sr;
        auto it = song.stems.find(name);
        if (it != song.stems.end()) {
            stem.samples.assign(it->second.samples.begin() + start,
                                it->second.samples.begin() + start + seg_samples);
        } else {
            stem.samples.assign(seg_samples, 0.0);
        }
        seg.stems.push_back(std::move(stem));

        ScoreTrack local;
        local.instrument = name;
        if (const ScoreTrack* track = song.track_for(name)) {
            for (const auto& note : track->notes) {
                NoteEvent shifted = note;
                shifted.onset = std::max(0.0, note.onset - t0);
                shifted.offset = note.offset - t0;
                if (shifted.offset <= 0.0 || shifted.onset >= segment_sec) continue;
                local.notes.push_back(shifted);
            }
        }
        seg.rolls.push_back(rasterize(local, frames, sr, hop_size));
    }
    return seg;
}

namespace {

const std::map<std::string, std::string>& family_table() {
    static const std::map<std::string, std::string> table = {
        {"violin", "strings"},   {"viola", "strings"},
        {"cello", "strings"},    {"bass", "strings"},
        {"flute", "woodwinds"},  {"clarinet", "woodwinds"},
        {"oboe", "woodwinds"},   {"bassoon", "woodwinds"},
        {"horn", "brass"},       {"trombone", "brass"},
        {"tuba", "brass"},       {"trumpet", "brass"},
        {"timpani", "percussion"}, {"harp", "percussion"},
        {"untuned_percussion", "percussion"},
    };
    return table;
}

}  // namespace

std::string family_of(const std::string& instrument) {
    auto it = family_table().find(instrument);
    if (it == family_table().end()) {
        throw DataError("unknown instrument '" + instrument + "' (no family assignment)");
    }
    return it->second;
}

std::vector<std::string> family_members(const std::string& family) {
    std::vector<std::string> out;
    for (const auto& [name, fam] : family_table()) {
        if (fam == family) out.push_back(name);
    }
    if (out.empty()) throw DataError("unknown family '" + family + "'");
    return out;
}

}  // namespace ssep
