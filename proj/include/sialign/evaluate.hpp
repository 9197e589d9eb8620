#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "sialign/corpus.hpp"
#include "sialign/dtw.hpp"
#include "sialign/siamese.hpp"
#include "sialign/similarity.hpp"
#include "sialign/timemap.hpp"

namespace sialign {

// accuracy thresholds in seconds: 25 / 50 / 100 / 200 ms
inline constexpr std::array<double, 4> kAccuracyThresholds{0.025, 0.050, 0.100,
                                                           0.200};

struct AlignmentReport {
    std::string piece_id;
    std::string system_id;
    std::vector<double> errors_s;           // signed, one per event
    std::array<double, 4> accuracy_pct{};   // |e| < threshold, in percent
    double mean_abs_error_s = 0.0;
};

// Error per reference event: estimated(t) - truth(t); accuracy(theta) is the
// percentage of events with |e| strictly below theta.
AlignmentReport score_alignment(const TimeMap& estimated,
                                const GroundTruthMap& truth,
                                const std::vector<double>& event_times);

// Chroma on both sides, per-frame Euclidean cost, plain DTW. The returned
// map sends score seconds to performance seconds.
TimeMap chroma_dtw_baseline(const AudioBuffer& perf, const AudioBuffer& score,
                            const CqtParams& cqt_params = {});

// Siamese pipeline for one piece: features (log-compressed for the model),
// similarity with the score on the rows, DTW, time map.
TimeMap siamese_align_piece(const CorpusPiece& piece, SiameseModel& model,
                            SimilarityMode mode, double tau = -1.0,
                            std::optional<int> band = std::nullopt);

struct AlignmentSystem {
    std::string name;
    std::function<TimeMap(const CorpusPiece&)> align;
};

struct BenchmarkRow {
    std::string system_id;
    std::array<double, 4> mean_accuracy_pct{}; // piece-weighted means
    double mean_abs_error_s = 0.0;
    int pieces = 0;
    int failures = 0;
};

struct BenchmarkResult {
    std::vector<BenchmarkRow> rows;
    std::vector<AlignmentReport> reports; // per piece and system
    bool any_failure = false;
};

// Aggregates per-system reports over the pieces; the mean accuracy is the
// arithmetic mean of per-piece accuracies (piece-weighted).
BenchmarkResult run_benchmark(const std::vector<CorpusPiece>& pieces,
                              const std::vector<AlignmentSystem>& systems);

std::string render_benchmark_table(const BenchmarkResult& result);
void write_benchmark_csv(const BenchmarkResult& result, const std::string& path);

} // namespace sialign
