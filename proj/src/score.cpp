// Copyright 2026 The ssep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ssep/score.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "ssep/util.hpp"

namespace ssep {

namespace {

const char* kCsvHeader = "onset_sec,offset_sec,midi_pitch,instrument";

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, sep)) out.push_back(field);
    if (!line.empty() && line.back() == sep) out.push_back("");
    return out;
}

std::string strip(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void row_error(long line, const std::string& what) {
    throw DataError("notes csv line " + std::to_string(line) + ": " + what);
}

double parse_double(const std::string& s, long line, const char* field) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) row_error(line, std::string("trailing junk in ") + field);
        return v;
    } catch (const DataError&) {
        throw;
    } catch (const std::exception&) {
        row_error(line, std::string("cannot parse ") + field + " '" + s + "'");
    }
}

int parse_pitch(const std::string& s, long line) {
    if (s.empty()) {
        row_error(line, "empty midi_pitch: unpitched notes have no piano-roll representation");
    }
    try {
        std::size_t pos = 0;
        int v = std::stoi(s, &pos);
        if (pos != s.size()) row_error(line, "midi_pitch is not an integer");
        return v;
    } catch (const DataError&) {
        throw;
    } catch (const std::exception&) {
        row_error(line, "cannot parse midi_pitch '" + s + "'");
    }
}

}  // namespace

void NoteEvent::validate() const {
    if (!(onset >= 0.0 && onset < offset)) {
        throw DataError("note: need 0 <= onset < offset");
    }
    if (pitch < 0 || pitch >= kMidiPitches) {
        throw DataError("note: pitch " + std::to_string(pitch) + " outside 0..127");
    }
}

void ScoreTrack::validate() const {
    for (std::size_t i = 0; i < notes.size(); ++i) {
        notes[i].validate();
        if (notes[i].instrument != instrument) {
            throw DataError("track '" + instrument + "': note has foreign instrument");
        }
        if (i > 0 && notes[i].onset < notes[i - 1].onset) {
            throw DataError("track '" + instrument + "': notes not sorted by onset");
        }
    }
}

void PianoRoll::validate() const {
    if (data.cols() != kMidiPitches) throw DataError("piano roll: width must be 128");
    if (hop_size <= 0 || sample_rate <= 0) {
        throw DataError("piano roll: hop and sample rate must be positive");
    }
    for (long f = 0; f < data.rows(); ++f) {
        for (long p = 0; p < data.cols(); ++p) {
            const double v = data(f, p);
            if (v != 0.0 && v != 1.0) throw DataError("piano roll: entries must be 0 or 1");
        }
    }
}

std::vector<ScoreTrack> parse_notes_csv(const std::string& text) {
    std::istringstream ss(text);
    std::string line;
    long line_no = 0;

    if (!std::getline(ss, line)) throw DataError("notes csv: empty input");
    ++line_no;
    if (strip(line) != kCsvHeader) {
        throw DataError(std::string("notes csv: expected header '") + kCsvHeader + "'");
    }

    std::vector<std::string> order;
    std::map<std::string, std::vector<NoteEvent>> by_instrument;
    while (std::getline(ss, line)) {
        ++line_no;
        if (strip(line).empty()) continue;
        auto fields = split(strip(line), ',');
        if (fields.size() != 4) row_error(line_no, "expected 4 fields");

        NoteEvent note;
        note.onset = parse_double(strip(fields[0]), line_no, "onset_sec");
        note.offset = parse_double(strip(fields[1]), line_no, "offset_sec");
        note.pitch = parse_pitch(strip(fields[2]), line_no);
        note.instrument = strip(fields[3]);
        if (note.instrument.empty()) row_error(line_no, "empty instrument");
        try {
            note.validate();
        } catch (const DataError& e) {
            row_error(line_no, e.what());
        }

        if (by_instrument.find(note.instrument) == by_instrument.end()) {
            order.push_back(note.instrument);
        }
        by_instrument[note.instrument].push_back(note);
    }

    std::vector<ScoreTrack> tracks;
    for (const auto& name : order) {
        ScoreTrack track;
        track.instrument = name;
        track.notes = by_instrument[name];
        std::stable_sort(track.notes.begin(), track.notes.end(),
                         [](const NoteEvent& a, const NoteEvent& b) { return a.onset < b.onset; });
        track.notes.erase(std::unique(track.notes.begin(), track.notes.end()),
                          track.notes.end());
        tracks.push_back(std::move(track));
    }
    return tracks;
}

std::string serialize_notes_csv(const std::vector<ScoreTrack>& tracks) {
    std::ostringstream out;
    out.precision(17);
    out << kCsvHeader << "\n";
    for (const auto& track : tracks) {
        for (const auto& note : track.notes) {
            out << note.onset << "," << note.offset << "," << note.pitch << ","
                << note.instrument << "\n";
        }
    }
    return out.str();
}

NoteEvent urmp_row_to_note(double onset_sec, double freq_hz, double duration_sec,
                           const std::string& instrument) {
    if (freq_hz <= 0.0) throw DataError("urmp row: frequency must be positive");
    if (duration_sec <= 0.0) throw DataError("urmp row: duration must be positive");
    NoteEvent note;
    note.onset = onset_sec;
    note.offset = onset_sec + duration_sec;
    note.pitch = static_cast<int>(std::lround(69.0 + 12.0 * std::log2(freq_hz / 440.0)));
    note.instrument = instrument;
    note.validate();
    return note;
}

ScoreTrack parse_urmp_rows(const std::string& text, const std::string& instrument) {
    ScoreTrack track;
    track.instrument = instrument;
    std::istringstream ss(text);
    std::string line;
    long line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        std::string s = strip(line);
        if (s.empty()) continue;
        std::replace(s.begin(), s.end(), ',', ' ');
        std::istringstream row(s);
        double onset, freq, duration;
        if (!(row >> onset >> freq >> duration)) {
            throw DataError("urmp rows line " + std::to_string(line_no) +
                            ": expected onset, frequency, duration");
        }
        try {
            track.notes.push_back(urmp_row_to_note(onset, freq, duration, instrument));
        } catch (const DataError& e) {
            throw DataError("urmp rows line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    std::stable_sort(track.notes.begin(), track.notes.end(),
                     [](const NoteEvent& a, const NoteEvent& b) { return a.onset < b.onset; });
    return track;
}

PianoRoll rasterize(const ScoreTrack& track, long n_frames, int sample_rate, int hop_size) {
    if (n_frames <= 0) throw DataError("rasterize: n_frames must be positive");
    if (sample_rate <= 0 || hop_size <= 0) {
        throw DataError("rasterize: sample rate and hop must be positive");
    }
    track.validate();

    PianoRoll roll;
    roll.hop_size = hop_size;
    roll.sample_rate = sample_rate;
    roll.data = Eigen::MatrixXd::Zero(n_frames, kMidiPitches);

    const double frame_sec = static_cast<double>(hop_size) / sample_rate;
    for (const auto& note : track.notes) {
        // first frame whose span end exceeds onset, last frame whose span
        // start precedes offset
        long f_lo = static_cast<long>(std::floor(note.onset / frame_sec));
        if (f_lo * frame_sec + frame_sec <= note.onset) ++f_lo;
        f_lo = std::max<long>(f_lo, 0);
        for (long f = f_lo; f < n_frames && f * frame_sec < note.offset; ++f) {
            if ((f + 1) * frame_sec > note.onset) roll.data(f, note.pitch) = 1.0;
        }
    }
    return roll;
}

PianoRoll slice_roll(const PianoRoll& roll, long start_frame, long n_frames) {
    if (start_frame < 0) throw DataError("slice_roll: negative start frame");
    if (n_frames < 0) throw DataError("slice_roll: negative length");
    PianoRoll out;
    out.hop_size = roll.hop_size;
    out.sample_rate = roll.sample_rate;
    out.data = Eigen::MatrixXd::Zero(n_frames, kMidiPitches);
    const long avail = std::max<long>(0, std::min(n_frames, roll.frames() - start_frame));
    if (avail > 0) out.data.topRows(avail) = roll.data.middleRows(start_frame, avail);
    return out;
}

std::string roll_to_csv(const PianoRoll& roll) {
    std::ostringstream out;
    for (long f = 0; f < roll.frames(); ++f) {
        for (long p = 0; p < kMidiPitches; ++p) {
            if (p) out << ",";
            out << (roll.data(f, p) != 0.0 ? 1 : 0);
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace ssep
