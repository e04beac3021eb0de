// Copyright 2026 The ssep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef SSEP_EVAL_HPP
#define SSEP_EVAL_HPP

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ssep/audio.hpp"

// Separation quality protocol: references get their silent one-second
// windows zeroed, SDR is computed per non-overlapping one-second frame
// with exactly-zero reference frames excluded, then aggregated as median
// over frames -> song value, median over songs -> instrument value, mean
// over instruments -> overall.

namespace ssep {

struct EvalProtocol {
    double frame_sec = 1.0;
    double silence_threshold = 0.01;
};

// Per-frame outcome; sdr_db is meaningful only when !excluded.
struct FrameSdr {
    long index = 0;
    bool excluded = false;
    double sdr_db = 0.0;
};

// Included frame values and their median for one (song, instrument).
struct InstrumentFrames {
    std::string name;
    std::vector<double> frames;
    double median = 0.0;
};

struct SongReport {
    std::string id;
    std::vector<InstrumentFrames> instruments;
};

struct SdrReport {
    EvalProtocol protocol;
    std::vector<SongReport> songs;
    std::vector<std::pair<std::string, double>> instrument_medians;
    double overall_mean = 0.0;
};

// Hard limit for distortion-free frames: the error energy is floored at
// 1e-12 of the reference energy, i.e. the SDR saturates at +120 dB.
constexpr double kSdrCapDb = 120.0;

// Zeroes every non-overlapping window whose peak absolute sample is
// below the threshold; the final partial window follows the same rule.
// Idempotent.
AudioClip zero_silent_windows(const AudioClip& clip, double threshold = 0.01,
                              double window_sec = 1.0);

// Per-frame SDR = 10*log10(|ref|^2 / |ref - est|^2) over non-overlapping
// frames, error floored at 1e-12 * |ref|^2. Frames whose reference is
// all exact zeros are excluded. Lengths must match.
std::vector<FrameSdr> frame_sdr(const AudioClip& ref, const AudioClip& est,
                                double frame_sec = 1.0);

// Raw frame lists for one song, one entry per instrument.
struct SongFrameSet {
    std::string id;
    std::vector<std::pair<std::string, std::vector<FrameSdr>>> instruments;
};

// Median/median/mean rollup. Instruments with no included frames in a
// song are dropped from that song; throws if nothing remains anywhere.
SdrReport aggregate(const std::vector<SongFrameSet>& songs,
                    const EvalProtocol& protocol);

// Walks <est_dir>/<song>/<instrument>.wav, pairs each file with the
// reference at <ref_dir>/<song>/<instrument>.wav (falling back to the
// dataset layout <ref_dir>/<song>/stems/<instrument>.wav), zeroes silent
// reference windows, and aggregates. No implicit resampling: sample
// rates and lengths must match.
SdrReport evaluate(const std::string& est_dir, const std::string& ref_dir,
                   const EvalProtocol& protocol = {});

nlohmann::json sdr_report_to_json(const SdrReport& report);
void write_sdr_report(const SdrReport& report, const std::string& path);

// True when every median and the overall mean are recomputable from the
// stored frame lists.
bool sdr_report_self_consistent(const SdrReport& report, double tol = 1e-9);

double median(std::vector<double> values);

}  // namespace ssep

#endif
