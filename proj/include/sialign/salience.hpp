#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sialign/features.hpp"
#include "sialign/midi.hpp"
#include "sialign/nn.hpp"

namespace sialign {

// Non-learned pitch salience: per bin, sum the CQT magnitude at the bin's
// harmonics weighted by 1/h, then rescale each frame to [0, 1]. Output kind
// is `salience`.
FeatureMatrix harmonic_salience(const FeatureMatrix& cqt, int n_harmonics = 5);

// Mean element-wise cross entropy -y*log(yh) - (1-y)*log(1-yh) with yh
// clamped to [eps, 1-eps], eps = 1e-7. Inputs must share shape and lie in
// [0, 1].
double salience_cross_entropy(const FeatureMatrix& target,
                              const FeatureMatrix& predicted);

// d(mean loss)/d(predicted) per element, for training and gradient checks.
std::vector<double> salience_cross_entropy_grad(const std::vector<double>& target,
                                                const std::vector<double>& predicted);

// Gaussian-blurred (sigma = 1 bin) f0 trajectory of the track on the CQT
// grid: the training target for the salience net.
FeatureMatrix salience_target_from_track(const ScoreTrack& track, int frames,
                                         double hop_s, const CqtParams& cqt_params);

struct SalienceNetConfig {
    std::vector<int> conv_channels{8, 8};  // hidden conv layers
    std::vector<int> conv_kernels{5, 5};
    int output_kernel = 3;
    bool zero_init_output = true; // start at sigmoid(0) = 0.5 everywhere

    nn::Architecture architecture() const;
};

struct SalienceTrainConfig {
    int epochs = 30;
    double lr = 0.05;
    double momentum = 0.9;
    std::uint64_t seed = 0;
};

struct SalienceModel {
    SalienceNetConfig config;
    int bins = 0;
    nn::Model<float> net;
};

SalienceModel make_salience_model(const SalienceNetConfig& config, int bins,
                                  std::uint64_t seed);

// (CQT clip, target salience) supervision pairs.
struct SalienceClip {
    FeatureMatrix cqt;    // log-compressed before the net sees it
    FeatureMatrix target; // kind = salience
};

struct SalienceTrainResult {
    SalienceModel model;
    std::vector<double> epoch_loss;
};

// Minimizes the cross-entropy loss over full clips with SGD + momentum,
// one clip per step, deterministically for a given seed.
SalienceTrainResult train_salience(const std::vector<SalienceClip>& clips,
                                   const SalienceNetConfig& net_config,
                                   const SalienceTrainConfig& train_config);

// Runs the net over a (raw, uncompressed) CQT matrix; output values in [0,1].
FeatureMatrix apply_salience_model(SalienceModel& model, const FeatureMatrix& cqt);

void save_salience_model(SalienceModel& model, const std::string& path);
SalienceModel load_salience_model(const std::string& path);

} // namespace sialign
