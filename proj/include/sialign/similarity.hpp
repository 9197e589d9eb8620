#pragma once

#include <string>

#include "sialign/features.hpp"
#include "sialign/siamese.hpp"

namespace sialign {

enum class SimilarityMode { binary, distance };

const char* to_string(SimilarityMode mode);
SimilarityMode similarity_mode_from_string(const std::string& name);

// Frame dissimilarity matrix: rows x cols of embedding distances
// (distance mode) or thresholded labels (binary mode, 1 = dissimilar).
struct SimilarityMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<float> values;
    SimilarityMode mode = SimilarityMode::distance;
    double row_hop_s = 0.0;
    double col_hop_s = 0.0;

    float at(int i, int j) const {
        return values[static_cast<std::size_t>(i) * cols + j];
    }
    float& at(int i, int j) {
        return values[static_cast<std::size_t>(i) * cols + j];
    }
};

// S[i, j] from row-side frame i and column-side frame j. Embeddings are
// computed once per frame (rows + cols tower passes), then combined
// pairwise, which is exact for the Euclidean twin distance.
SimilarityMatrix build_similarity(const FeatureMatrix& row_features,
                                  const FeatureMatrix& col_features,
                                  SiameseModel& model, SimilarityMode mode,
                                  double tau);

// Spec orientation: performance on rows, score on columns. tau < 0 uses the
// model's configured threshold.
SimilarityMatrix build(const FeatureMatrix& perf, const FeatureMatrix& score,
                       SiameseModel& model,
                       SimilarityMode mode = SimilarityMode::distance,
                       double tau = -1.0);

void write_similarity_csv(const SimilarityMatrix& m, const std::string& path);

} // namespace sialign
