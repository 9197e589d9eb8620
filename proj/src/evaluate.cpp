#include "sialign/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sialign/error.hpp"
#include "sialign/features.hpp"

namespace sialign {

AlignmentReport score_alignment(const TimeMap& estimated,
                                const GroundTruthMap& truth,
                                const std::vector<double>& event_times) {
    if (event_times.empty())
        raise(ErrorKind::invalid_argument, "no events to score");
    if (!estimated.non_decreasing())
        raise(ErrorKind::invalid_argument, "estimated map is not monotone");

    AlignmentReport report;
    report.errors_s.reserve(event_times.size());
    double abs_sum = 0.0;
    std::array<int, 4> hits{};
    for (double t : event_times) {
        const double e = estimated.at(t) - truth.at(t);
        report.errors_s.push_back(e);
        abs_sum += std::abs(e);
        for (std::size_t k = 0; k < kAccuracyThresholds.size(); ++k)
            if (std::abs(e) < kAccuracyThresholds[k]) ++hits[k];
    }
    const double n = static_cast<double>(event_times.size());
    for (std::size_t k = 0; k < hits.size(); ++k)
        report.accuracy_pct[k] = 100.0 * hits[k] / n;
    report.mean_abs_error_s = abs_sum / n;
    return report;
}

TimeMap chroma_dtw_baseline(const AudioBuffer& perf, const AudioBuffer& score,
                            const CqtParams& cqt_params) {
    const FeatureMatrix perf_chroma = chroma(cqt_magnitude(perf, cqt_params));
    const FeatureMatrix score_chroma = chroma(cqt_magnitude(score, cqt_params));

    // score on the rows so the path maps score time to performance time
    const int rows = score_chroma.frames, cols = perf_chroma.frames;
    std::vector<double> cost(static_cast<std::size_t>(rows) * cols);
    for (int i = 0; i < rows; ++i) {
        const float* a = score_chroma.row(i);
        for (int j = 0; j < cols; ++j) {
            const float* b = perf_chroma.row(j);
            double acc = 0.0;
            for (int c = 0; c < 12; ++c) {
                const double d = static_cast<double>(a[c]) - b[c];
                acc += d * d;
            }
            cost[static_cast<std::size_t>(i) * cols + j] = std::sqrt(acc);
        }
    }

    const WarpingPath path = align_matrix(rows, cols, cost);
    return path_to_time_map(path, score_chroma.frame_hop_s, perf_chroma.frame_hop_s);
}

TimeMap siamese_align_piece(const CorpusPiece& piece, SiameseModel& model,
                            SimilarityMode mode, double tau,
                            std::optional<int> band) {
    FeatureParams params;
    const FeatureMatrix score_feat = prepare_features_for_model(
        extract(piece.score_audio, model.config.feature, params));
    const FeatureMatrix perf_feat = prepare_features_for_model(
        extract(piece.performance_audio, model.config.feature, params));

    const SimilarityMatrix sim =
        build_similarity(score_feat, perf_feat, model, mode, tau);
    const WarpingPath path = align(sim, band);
    return path_to_time_map(path, sim.row_hop_s, sim.col_hop_s);
}

BenchmarkResult run_benchmark(const std::vector<CorpusPiece>& pieces,
                              const std::vector<AlignmentSystem>& systems) {
    if (pieces.empty()) raise(ErrorKind::invalid_argument, "benchmark needs pieces");
    if (systems.empty()) raise(ErrorKind::invalid_argument, "benchmark needs systems");

    BenchmarkResult result;
    for (const AlignmentSystem& system : systems) {
        BenchmarkRow row;
        row.system_id = system.name;
        std::array<double, 4> acc_sum{};
        double err_sum = 0.0;
        for (const CorpusPiece& piece : pieces) {
            try {
                const TimeMap estimated = system.align(piece);
                AlignmentReport report = score_alignment(
                    estimated, piece.ground_truth, piece.event_times());
                report.piece_id = piece.id;
                report.system_id = system.name;
                for (std::size_t k = 0; k < acc_sum.size(); ++k)
                    acc_sum[k] += report.accuracy_pct[k];
                err_sum += report.mean_abs_error_s;
                ++row.pieces;
                result.reports.push_back(std::move(report));
            } catch (const Error&) {
                ++row.failures;
                result.any_failure = true;
                AlignmentReport failed;
                failed.piece_id = piece.id;
                failed.system_id = system.name;
                failed.mean_abs_error_s = std::nan("");
                result.reports.push_back(std::move(failed));
            }
        }
        if (row.pieces > 0) {
            for (std::size_t k = 0; k < acc_sum.size(); ++k)
                row.mean_accuracy_pct[k] = acc_sum[k] / row.pieces;
            row.mean_abs_error_s = err_sum / row.pieces;
        }
        result.rows.push_back(std::move(row));
    }
    return result;
}

std::string render_benchmark_table(const BenchmarkResult& result) {
    std::ostringstream out;
    out << "system                          <25ms   <50ms  <100ms  <200ms  mean|e|  pieces\n";
    for (const BenchmarkRow& row : result.rows) {
        char line[160];
        std::snprintf(line, sizeof(line), "%-28s %7.1f %7.1f %7.1f %7.1f %7.3fs %5d",
                      row.system_id.c_str(), row.mean_accuracy_pct[0],
                      row.mean_accuracy_pct[1], row.mean_accuracy_pct[2],
                      row.mean_accuracy_pct[3], row.mean_abs_error_s, row.pieces);
        out << line;
        if (row.failures) out << " (" << row.failures << " failed)";
        out << "\n";
    }
    return out.str();
}

void write_benchmark_csv(const BenchmarkResult& result, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) raise(ErrorKind::io, "cannot open for writing: " + path);
    out << "system,acc_25ms,acc_50ms,acc_100ms,acc_200ms,mean_abs_error_s,pieces,failures\n";
    out.precision(10);
    for (const BenchmarkRow& row : result.rows)
        out << row.system_id << "," << row.mean_accuracy_pct[0] << ","
            << row.mean_accuracy_pct[1] << "," << row.mean_accuracy_pct[2] << ","
            << row.mean_accuracy_pct[3] << "," << row.mean_abs_error_s << ","
            << row.pieces << "," << row.failures << "\n";
    if (!out) raise(ErrorKind::io, "short write: " + path);
}

} // namespace sialign
