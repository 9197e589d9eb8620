#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sialign/features.hpp"
#include "sialign/nn.hpp"
#include "sialign/timemap.hpp"

namespace sialign {

// Twin-tower configuration. The default is a 4x downscale of the full-scale
// architecture (same depth and kernel sizes); full_scale() reproduces the
// published layer table.
struct SiameseConfig {
    int patch_frames = 32; // context window (time)
    int patch_bins = 32;   // frequency rows after reduction
    int channels = 1;
    std::vector<int> conv_channels{16, 32, 64, 128};
    std::vector<int> conv_kernels{5, 5, 3, 3};
    int embed_dim = 128;
    double margin = 1.0;
    double binarize_tau = 0.5; // decision threshold in (0, margin)
    FeatureKind feature = FeatureKind::cqt;

    static SiameseConfig full_scale();

    // conv -> relu -> batchnorm (pool between blocks), flatten, dense
    nn::Architecture tower_architecture() const;
    void validate() const;
    std::string tag_json() const;
    static SiameseConfig from_tag_json(const std::string& tag);
};

struct SiameseModel {
    SiameseConfig config;
    nn::Model<float> tower;
};

SiameseModel make_siamese_model(const SiameseConfig& config, std::uint64_t seed);
void save_siamese(SiameseModel& model, const std::string& path);
SiameseModel load_siamese(const std::string& path);

// Extracts patch_frames x patch_bins x channels patches centered on a frame.
// Time edges are zero-padded; each channel's bins are averaged down (or
// zero-padded up) to patch_bins rows.
class PatchExtractor {
public:
    PatchExtractor(const std::vector<const FeatureMatrix*>& channels,
                   int patch_frames, int patch_bins);
    PatchExtractor(const FeatureMatrix& single, int patch_frames, int patch_bins);

    int frames() const { return frames_; }
    double hop_s() const { return hop_s_; }
    int channels() const { return static_cast<int>(sources_.size()); }

    nn::Tensor patch(int center_frame) const;
    // writes one patch into an existing batch tensor at batch index
    void patch_into(int center_frame, nn::Tensor& batch, int batch_index) const;

private:
    std::vector<const FeatureMatrix*> sources_;
    std::vector<std::vector<int>> row_edges_; // per channel, patch_bins + 1 edges
    int frames_ = 0;
    int patch_frames_ = 0;
    int patch_bins_ = 0;
    double hop_s_ = 0.0;
};

// log-compresses stft/cqt magnitudes; chroma and salience pass through.
FeatureMatrix prepare_features_for_model(FeatureMatrix m);

// Embedding of one patch (eval mode). The twin towers are literally the
// same function, so weight sharing is structural.
std::vector<float> embed(SiameseModel& model, const nn::Tensor& patch);

// All frame embeddings of a sequence, batched; row i is frame i.
std::vector<std::vector<float>> embed_frames(SiameseModel& model,
                                             const PatchExtractor& patches,
                                             int batch = 64);

// Euclidean distance between twin embeddings.
double pair_distance(const std::vector<float>& a, const std::vector<float>& b);

// L = (1-Y) * D^2/2 + Y * max(0, m-D)^2 / 2; Y = 0 for a match.
double contrastive_loss(double distance, int label, double margin);
double contrastive_loss_grad(double distance, int label, double margin);

// A labelled pair of feature patches; label 0 = match, 1 = non-match.
struct FramePairExample {
    nn::Tensor patch_perf;
    nn::Tensor patch_score;
    int label = 0;
    int piece_id = 0;
};

struct PairConfig {
    int anchors_per_piece = 24; // sampled score frames
    double exclusion_patch_widths = 2.0;
};

// Balanced pair set from one piece: each sampled score frame yields the
// ground-truth-matched performance frame (label 0) and one random
// performance frame farther than exclusion_patch_widths * patch width from
// the match (label 1).
std::vector<FramePairExample> make_pairs(const FeatureMatrix& perf,
                                         const FeatureMatrix& score,
                                         const GroundTruthMap& ground_truth,
                                         const SiameseConfig& config,
                                         const PairConfig& pair_config,
                                         std::uint64_t seed, int piece_id = 0);

struct TrainConfig {
    int epochs = 20;
    int batch = 32;
    double lr = 1e-3;
    double momentum = 0.9;
    double val_fraction = 0.2; // split by piece
    std::uint64_t seed = 0;
};

struct TrainResult {
    SiameseModel model; // best-validation checkpoint
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    int best_epoch = 0;
};

TrainResult train_siamese(const std::vector<FramePairExample>& pairs,
                          const SiameseConfig& config,
                          const TrainConfig& train_config);

// Pair-set file: magic, version, patch dims, then label/piece/patch blocks.
void save_pairs(const std::vector<FramePairExample>& pairs, const std::string& path);
std::vector<FramePairExample> load_pairs(const std::string& path);

} // namespace sialign
