// Copyright 2026 The ssep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef SSEP_SCORE_HPP
#define SSEP_SCORE_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ssep {

struct NoteEvent {
    double onset = 0.0;   // seconds
    double offset = 0.0;  // seconds, exclusive
    int pitch = 0;        // MIDI note number, 0..127
    std::string instrument;

    void validate() const;
    bool operator==(const NoteEvent&) const = default;
};

// Per-instrument note list sorted by onset.
struct ScoreTrack {
    std::string instrument;
    std::vector<NoteEvent> notes;

    void validate() const;
};

// Binary frame-by-pitch activity matrix aligned to an STFT frame grid:
// row f covers the span [f*hop/sr, (f+1)*hop/sr).
struct PianoRoll {
    Eigen::MatrixXd data;  // frames x 128, entries 0 or 1
    int hop_size = 0;
    int sample_rate = 0;

    long frames() const { return data.rows(); }
    void validate() const;
};

inline constexpr int kMidiPitches = 128;

// Canonical CSV: header "onset_sec,offset_sec,midi_pitch,instrument",
// then one note per row. Rows are grouped by instrument (first-appearance
// order), each group sorted by onset; identical rows are deduplicated.
// Malformed rows raise DataError naming the 1-based line.
std::vector<ScoreTrack> parse_notes_csv(const std::string& text);

std::string serialize_notes_csv(const std::vector<ScoreTrack>& tracks);

// Converts an (onset, frequency, duration) annotation row to a note:
// pitch = round(69 + 12*log2(freq/440)), offset = onset + duration.
NoteEvent urmp_row_to_note(double onset_sec, double freq_hz, double duration_sec,
                           const std::string& instrument);

// Reads (onset, frequency, duration) rows, one per line, comma or
// whitespace separated, into a single track for the given instrument.
ScoreTrack parse_urmp_rows(const std::string& text, const std::string& instrument);

// Frame f is active at pitch p iff some note with pitch p overlaps the
// frame span by any positive amount. Notes past the last frame are clipped.
PianoRoll rasterize(const ScoreTrack& track, long n_frames, int sample_rate, int hop_size);

// Contiguous frame window [start_frame, start_frame + n_frames); frames
// past the end of the roll come back zero.
PianoRoll slice_roll(const PianoRoll& roll, long start_frame, long n_frames);

// One frame per row, 128 comma-separated 0/1 columns.
std::string roll_to_csv(const PianoRoll& roll);

}  // namespace ssep

#endif
