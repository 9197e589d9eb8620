#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sialign/audio.hpp"
#include "sialign/midi.hpp"
#include "sialign/timemap.hpp"

namespace sialign {

struct CorpusConfig {
    int notes_min = 12;
    int notes_max = 24;
    int pitch_min = 36; // C2
    int pitch_max = 84; // C6
    double duration_min_s = 0.1;
    double duration_max_s = 1.0;
    double chord_prob = 0.15;
    int chord_min = 2;
    int chord_max = 4;
    // probability that a note repeats the previous pitch class one octave
    // away (boundary cases that octave-folded features cannot separate)
    double octave_pair_prob = 0.0;
    int warp_segments_min = 2;
    int warp_segments_max = 5;
    double slope_min = 0.7;
    double slope_max = 1.4;
    // global performance detune range in cents; [0, 0] disables
    double detune_min_cents = 0.0;
    double detune_max_cents = 0.0;
    int sample_rate = 22050;
    SynthConfig synth;
};

struct PieceProvenance {
    std::uint64_t seed = 0;
    double detune_cents = 0.0;
    std::string source_id; // non-empty for augmented copies
};

struct CorpusPiece {
    std::string id;
    ScoreTrack score_track;       // the machine score (no warp, no detune)
    AudioBuffer performance_audio;
    AudioBuffer score_audio;
    GroundTruthMap ground_truth;  // score seconds -> performance seconds
    PieceProvenance provenance;

    std::vector<double> event_times() const { return score_track.onset_times(); }
};

// Deterministic synthetic corpus: random note sequences, straight score
// rendering, and a tempo-warped (optionally detuned) performance rendering
// with the warp recorded as ground truth.
std::vector<CorpusPiece> generate_corpus(int n_pieces, std::uint64_t seed,
                                         const CorpusConfig& config = {});

// Appends round(fraction * n) re-synthesized copies with a per-piece uniform
// performance detune in [-max_cents, +max_cents]; ground truth is untouched.
std::vector<CorpusPiece> augment_corpus(const std::vector<CorpusPiece>& pieces,
                                        double fraction, double max_cents,
                                        std::uint64_t seed,
                                        const SynthConfig& synth = {});

// Re-renders one performance with an extra global detune (test-time tuning
// shifts); the returned piece keeps its ground truth.
CorpusPiece detune_performance(const CorpusPiece& piece, double cents,
                               const CorpusConfig& config = {});

// Layout per piece: <root>/<id>/{score.mid, score.wav, perf.wav, gt.csv,
// meta.json}.
void save_piece(const CorpusPiece& piece, const std::string& root);
CorpusPiece load_piece(const std::string& dir);
void save_corpus(const std::vector<CorpusPiece>& pieces, const std::string& root,
                 const std::vector<std::string>& train_ids = {},
                 const std::vector<std::string>& test_ids = {});
std::vector<CorpusPiece> load_corpus(const std::string& root);

// Optional train/test split manifest written by save_corpus (split.json).
struct CorpusSplit {
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;
};
bool load_split(const std::string& root, CorpusSplit& split);

} // namespace sialign
