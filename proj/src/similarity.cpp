#include "sialign/similarity.hpp"

#include <cmath>
#include <fstream>

#include "sialign/error.hpp"

namespace sialign {

const char* to_string(SimilarityMode mode) {
    return mode == SimilarityMode::binary ? "binary" : "distance";
}

SimilarityMode similarity_mode_from_string(const std::string& name) {
    if (name == "binary") return SimilarityMode::binary;
    if (name == "distance") return SimilarityMode::distance;
    raise(ErrorKind::invalid_argument, "unknown similarity mode: " + name);
}

SimilarityMatrix build_similarity(const FeatureMatrix& row_features,
                                  const FeatureMatrix& col_features,
                                  SiameseModel& model, SimilarityMode mode,
                                  double tau) {
    const SiameseConfig& cfg = model.config;
    if (row_features.kind != cfg.feature || col_features.kind != cfg.feature)
        raise(ErrorKind::invalid_argument,
              std::string("feature kind does not match the model (expects ") +
                  to_string(cfg.feature) + ")");
    if (tau < 0.0) tau = cfg.binarize_tau;

    const PatchExtractor row_patches(row_features, cfg.patch_frames, cfg.patch_bins);
    const PatchExtractor col_patches(col_features, cfg.patch_frames, cfg.patch_bins);
    const auto row_embed = embed_frames(model, row_patches);
    const auto col_embed = embed_frames(model, col_patches);

    SimilarityMatrix out;
    out.rows = row_features.frames;
    out.cols = col_features.frames;
    out.values.resize(static_cast<std::size_t>(out.rows) * out.cols);
    out.mode = mode;
    out.row_hop_s = row_features.frame_hop_s;
    out.col_hop_s = col_features.frame_hop_s;

    const int embed_dim = cfg.embed_dim;
    for (int i = 0; i < out.rows; ++i) {
        const float* ea = row_embed[i].data();
        float* dst = &out.values[static_cast<std::size_t>(i) * out.cols];
        for (int j = 0; j < out.cols; ++j) {
            const float* eb = col_embed[j].data();
            double acc = 0.0;
            for (int k = 0; k < embed_dim; ++k) {
                const double d = static_cast<double>(ea[k]) - eb[k];
                acc += d * d;
            }
            const double dist = std::sqrt(acc);
            dst[j] = mode == SimilarityMode::distance
                         ? static_cast<float>(dist)
                         : (dist > tau ? 1.0f : 0.0f);
        }
    }
    return out;
}

SimilarityMatrix build(const FeatureMatrix& perf, const FeatureMatrix& score,
                       SiameseModel& model, SimilarityMode mode, double tau) {
    return build_similarity(perf, score, model, mode, tau);
}

void write_similarity_csv(const SimilarityMatrix& m, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) raise(ErrorKind::io, "cannot open for writing: " + path);
    out << "mode," << to_string(m.mode) << "\n";
    out.precision(12);
    out << "row_hop_s," << m.row_hop_s << "\n";
    out << "col_hop_s," << m.col_hop_s << "\n";
    out.precision(9);
    for (int i = 0; i < m.rows; ++i) {
        for (int j = 0; j < m.cols; ++j) out << (j ? "," : "") << m.at(i, j);
        out << "\n";
    }
    if (!out) raise(ErrorKind::io, "short write: " + path);
}

} // namespace sialign
