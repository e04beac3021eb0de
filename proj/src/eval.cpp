// Copyright 2026 The ssep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ssep/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "ssep/util.hpp"
#include "ssep/wav.hpp"

namespace ssep {

namespace fs = std::filesystem;
using nlohmann::json;

double median(std::vector<double> values) {
    if (values.empty()) throw DataError("median of an empty list");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

AudioClip zero_silent_windows(const AudioClip& clip, double threshold,
                              double window_sec) {
    if (clip.sample_rate <= 0) throw DataError("clip has no sample rate");
    const long win = std::max<long>(1, std::lround(window_sec * clip.sample_rate));
    AudioClip out = clip;
    const long n = (long)out.size();
    for (long start = 0; start < n; start += win) {
        const long end = std::min(start + win, n);
        double peak = 0.0;
        for (long i = start; i < end; ++i)
            peak = std::max(peak, std::abs(out.samples[i]));
        if (peak < threshold)
            std::fill(out.samples.begin() + start, out.samples.begin() + end, 0.0);
    }
    return out;
}

std::vector<FrameSdr> frame_sdr(const AudioClip& ref, const AudioClip& est,
                                double frame_sec) {
    if (ref.size() != est.size())
        throw DataError("reference and estimate lengths differ");
    if (ref.sample_rate != est.sample_rate)
        throw DataError("reference and estimate sample rates differ");
    if (ref.sample_rate <= 0) throw DataError("clip has no sample rate");
    const long win = std::max<long>(1, std::lround(frame_sec * ref.sample_rate));
    const long n = (long)ref.size();
    std::vector<FrameSdr> frames;
    long index = 0;
    for (long start = 0; start < n; start += win, ++index) {
        const long end = std::min(start + win, n);
        FrameSdr f;
        f.index = index;
        bool all_zero = true;
        double ref_energy = 0.0;
        double err_energy = 0.0;
        for (long i = start; i < end; ++i) {
            if (ref.samples[i] != 0.0) all_zero = false;
            ref_energy += ref.samples[i] * ref.samples[i];
            const double d = ref.samples[i] - est.samples[i];
            err_energy += d * d;
        }
        if (all_zero) {
            f.excluded = true;
        } else {
            const double floor = 1e-12 * ref_energy;
            f.sdr_db = 10.0 * std::log10(ref_energy / std::max(err_energy, floor));
        }
        frames.push_back(f);
    }
    return frames;
}

SdrReport aggregate(const std::vector<SongFrameSet>& songs,
                    const EvalProtocol& protocol) {
    SdrReport report;
    report.protocol = protocol;
    std::vector<std::string> instrument_order;
    std::map<std::string, std::vector<double>> song_medians;
    for (const SongFrameSet& song : songs) {
        SongReport sr;
        sr.id = song.id;
        for (const auto& [name, frames] : song.instruments) {
            InstrumentFrames inst;
            inst.name = name;
            for (const FrameSdr& f : frames)
                if (!f.excluded) inst.frames.push_back(f.sdr_db);
            if (inst.frames.empty()) continue;
            inst.median = median(inst.frames);
            if (song_medians.find(name) == song_medians.end())
                instrument_order.push_back(name);
            song_medians[name].push_back(inst.median);
            sr.instruments.push_back(std::move(inst));
        }
        report.songs.push_back(std::move(sr));
    }
    if (instrument_order.empty())
        throw DataError("evaluation produced no valid frames");
    double sum = 0.0;
    for (const std::string& name : instrument_order) {
        const double value = median(song_medians.at(name));
        report.instrument_medians.emplace_back(name, value);
        sum += value;
    }
    report.overall_mean = sum / (double)report.instrument_medians.size();
    return report;
}

SdrReport evaluate(const std::string& est_dir, const std::string& ref_dir,
                   const EvalProtocol& protocol) {
    if (!fs::is_directory(est_dir))
        throw DataError("estimate directory not found: " + est_dir);
    if (!fs::is_directory(ref_dir))
        throw DataError("reference directory not found: " + ref_dir);

    std::vector<std::string> song_ids;
    for (const fs::directory_entry& entry : fs::directory_iterator(est_dir))
        if (entry.is_directory()) song_ids.push_back(entry.path().filename().string());
    std::sort(song_ids.begin(), song_ids.end());
    if (song_ids.empty())
        throw DataError("estimate directory has no song subdirectories: " + est_dir);

    std::vector<SongFrameSet> songs;
    for (const std::string& id : song_ids) {
        std::vector<std::string> names;
        for (const fs::directory_entry& entry :
             fs::directory_iterator(fs::path(est_dir) / id))
            if (entry.is_regular_file() && entry.path().extension() == ".wav")
                names.push_back(entry.path().stem().string());
        std::sort(names.begin(), names.end());
        if (names.empty())
            throw DataError("song '" + id + "' has no estimate wav files");

        SongFrameSet set;
        set.id = id;
        for (const std::string& name : names) {
            const fs::path est_path = fs::path(est_dir) / id / (name + ".wav");
            fs::path ref_path = fs::path(ref_dir) / id / (name + ".wav");
            if (!fs::exists(ref_path))
                ref_path = fs::path(ref_dir) / id / "stems" / (name + ".wav");
            if (!fs::exists(ref_path))
                throw DataError("layout mismatch: no reference for song '" + id +
                                "' instrument '" + name + "' under " + ref_dir);
            const AudioClip est = read_wav(est_path.string());
            AudioClip ref = read_wav(ref_path.string());
            if (ref.sample_rate != est.sample_rate)
                throw DataError("sample-rate mismatch for song '" + id +
                                "' instrument '" + name + "'");
            if (ref.size() != est.size())
                throw DataError("length mismatch for song '" + id +
                                "' instrument '" + name + "'");
            ref = zero_silent_windows(ref, protocol.silence_threshold,
                                      protocol.frame_sec);
            set.instruments.emplace_back(name,
                                         frame_sdr(ref, est, protocol.frame_sec));
        }
        songs.push_back(std::move(set));
    }
    return aggregate(songs, protocol);
}

json sdr_report_to_json(const SdrReport& report) {
    json j;
    j["protocol"] = {{"frame_sec", report.protocol.frame_sec},
                     {"silence_threshold", report.protocol.silence_threshold},
                     {"sdr_cap_db", kSdrCapDb}};
    j["songs"] = json::array();
    for (const SongReport& song : report.songs) {
        json s;
        s["id"] = song.id;
        s["instruments"] = json::array();
        for (const InstrumentFrames& inst : song.instruments)
            s["instruments"].push_back({{"name", inst.name},
                                        {"frames", inst.frames},
                                        {"median", inst.median}});
        j["songs"].push_back(std::move(s));
    }
    j["instruments"] = json::array();
    for (const auto& [name, value] : report.instrument_medians)
        j["instruments"].push_back({{"name", name}, {"median", value}});
    j["overall_mean"] = report.overall_mean;
    return j;
}

void write_sdr_report(const SdrReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write report: " + path);
    out << sdr_report_to_json(report).dump(2) << "\n";
    if (!out) throw DataError("failed while writing report: " + path);
}

bool sdr_report_self_consistent(const SdrReport& report, double tol) {
    std::map<std::string, std::vector<double>> song_medians;
    std::vector<std::string> order;
    for (const SongReport& song : report.songs) {
        for (const InstrumentFrames& inst : song.instruments) {
            if (inst.frames.empty()) return false;
            if (std::abs(median(inst.frames) - inst.median) > tol) return false;
            if (song_medians.find(inst.name) == song_medians.end())
                order.push_back(inst.name);
            song_medians[inst.name].push_back(inst.median);
        }
    }
    if (order.size() != report.instrument_medians.size()) return false;
    double sum = 0.0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto& [name, value] = report.instrument_medians[i];
        if (name != order[i]) return false;
        if (std::abs(median(song_medians.at(name)) - value) > tol) return false;
        sum += value;
    }
    if (std::abs(sum / (double)order.size() - report.overall_mean) > tol)
        return false;
    return true;
}

}  // namespace ssep
