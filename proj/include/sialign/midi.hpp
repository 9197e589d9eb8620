#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sialign/audio.hpp"
#include "sialign/timemap.hpp"

namespace sialign {

struct NoteEvent {
    double onset_s = 0.0;
    double duration_s = 0.0;
    int pitch = 60;        // MIDI note number 0-127
    int velocity = 64;     // 1-127
    double detune_cents = 0.0;
};

struct TempoChange {
    long tick = 0;
    int us_per_quarter = 500000;
};

// Note events with tempo-map timing. Events are sorted by onset; the tempo
// map is sorted by tick with an entry at tick 0.
struct ScoreTrack {
    std::vector<NoteEvent> events;
    int ticks_per_quarter = 480;
    std::vector<TempoChange> tempo_map{TempoChange{}};

    // end of the last note (0 for an empty track)
    double end_time_s() const;
    std::vector<double> onset_times() const; // sorted, deduplicated
};

// Parses an SMF format 0 or 1 file. Note-on with velocity 0 is a note-off;
// unresolved note-ons are clipped at the track end and reported through
// `warnings` when given.
ScoreTrack parse_midi(const std::string& path,
                      std::vector<std::string>* warnings = nullptr);

// Writes an SMF format 0 file (notes on channel 0 plus tempo meta events).
// detune_cents is a synthesis-side attribute and is not representable in SMF.
void write_midi(const ScoreTrack& track, const std::string& path);

struct SynthConfig {
    int harmonics = 8;       // partials per note, truncated at Nyquist
    double decay = 1.0;      // harmonic h amplitude falls as h^-decay
    double attack_s = 0.010;
    double release_s = 0.050;
    double pad_s = 0.0;      // trailing silence
    double peak = 0.9;       // peak-normalization target
};

// Deterministic additive rendering: each note contributes `harmonics`
// partials of f0 = 440 * 2^((pitch - 69 + detune_cents/100) / 12) shaped by
// a linear attack/release envelope; the mix is peak-normalized.
AudioBuffer synthesize(const ScoreTrack& track, int sample_rate,
                       const SynthConfig& config = {});

// Remaps every event time through `curve` (strictly increasing,
// curve(0) = 0). The ground-truth map samples the curve at 0, every event
// onset and the track end.
std::pair<ScoreTrack, GroundTruthMap> warp_tempo(const ScoreTrack& track,
                                                 const TimeMap& curve);

} // namespace sialign
