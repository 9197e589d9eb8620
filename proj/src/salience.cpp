#include "sialign/salience.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "sialign/error.hpp"

namespace sialign {

namespace {
constexpr double kEps = 1e-7;
}

FeatureMatrix harmonic_salience(const FeatureMatrix& cqt, int n_harmonics) {
    if (cqt.kind != FeatureKind::cqt)
        raise(ErrorKind::invalid_argument, "harmonic salience expects a cqt matrix");
    if (n_harmonics < 1)
        raise(ErrorKind::invalid_argument, "n_harmonics must be >= 1");

    const int bpo = cqt.bins > 1
                        ? static_cast<int>(std::lround(
                              1.0 / std::log2(cqt.bin_labels[1] / cqt.bin_labels[0])))
                        : 24;

    std::vector<int> offsets(n_harmonics);
    for (int h = 1; h <= n_harmonics; ++h)
        offsets[h - 1] = static_cast<int>(std::lround(bpo * std::log2(static_cast<double>(h))));

    FeatureMatrix out;
    out.frames = cqt.frames;
    out.bins = cqt.bins;
    out.values.assign(cqt.values.size(), 0.0f);
    out.frame_hop_s = cqt.frame_hop_s;
    out.kind = FeatureKind::salience;
    out.bin_labels = cqt.bin_labels;
    out.sample_rate = cqt.sample_rate;
    out.hop_samples = cqt.hop_samples;
    out.window_samples = cqt.window_samples;

    for (int t = 0; t < cqt.frames; ++t) {
        const float* src = cqt.row(t);
        float* dst = out.row(t);
        for (int k = 0; k < cqt.bins; ++k) {
            double acc = 0.0;
            for (int h = 1; h <= n_harmonics; ++h) {
                const int kb = k + offsets[h - 1];
                if (kb >= cqt.bins) break;
                acc += src[kb] / h;
            }
            dst[k] = static_cast<float>(acc);
        }
        float peak = 0.0f;
        for (int k = 0; k < cqt.bins; ++k) peak = std::max(peak, dst[k]);
        if (peak > 0.0f)
            for (int k = 0; k < cqt.bins; ++k) dst[k] /= peak;
    }
    return out;
}

double salience_cross_entropy(const FeatureMatrix& target,
                              const FeatureMatrix& predicted) {
    if (target.frames != predicted.frames || target.bins != predicted.bins)
        raise(ErrorKind::shape, "salience cross entropy shape mismatch");
    if (target.values.empty())
        raise(ErrorKind::invalid_argument, "salience cross entropy on empty matrices");

    double acc = 0.0;
    for (std::size_t i = 0; i < target.values.size(); ++i) {
        const double y = target.values[i];
        const double yh =
            std::min(1.0 - kEps, std::max(kEps, static_cast<double>(predicted.values[i])));
        acc += -y * std::log(yh) - (1.0 - y) * std::log(1.0 - yh);
    }
    return acc / static_cast<double>(target.values.size());
}

std::vector<double> salience_cross_entropy_grad(const std::vector<double>& target,
                                                const std::vector<double>& predicted) {
    if (target.size() != predicted.size())
        raise(ErrorKind::shape, "salience cross entropy shape mismatch");
    std::vector<double> grad(target.size());
    const double inv_n = 1.0 / static_cast<double>(target.size());
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double y = target[i];
        const double yh = predicted[i];
        if (yh <= kEps || yh >= 1.0 - kEps) {
            grad[i] = 0.0; // clamped region is flat
        } else {
            grad[i] = (-y / yh + (1.0 - y) / (1.0 - yh)) * inv_n;
        }
    }
    return grad;
}

FeatureMatrix salience_target_from_track(const ScoreTrack& track, int frames,
                                         double hop_s, const CqtParams& cqt_params) {
    const int bins = cqt_params.bins_per_octave * cqt_params.n_octaves;
    FeatureMatrix out;
    out.frames = frames;
    out.bins = bins;
    out.values.assign(static_cast<std::size_t>(frames) * bins, 0.0f);
    out.frame_hop_s = hop_s;
    out.kind = FeatureKind::salience;
    out.sample_rate = 0;
    out.bin_labels.resize(bins);
    for (int k = 0; k < bins; ++k)
        out.bin_labels[k] =
            cqt_params.f_min * std::pow(2.0, static_cast<double>(k) / cqt_params.bins_per_octave);

    constexpr double sigma = 1.0; // bins
    for (const NoteEvent& e : track.events) {
        const double f0 =
            440.0 * std::pow(2.0, (e.pitch - 69 + e.detune_cents / 100.0) / 12.0);
        const double bin_f =
            cqt_params.bins_per_octave * std::log2(f0 / cqt_params.f_min);
        if (bin_f < -3.0 || bin_f > bins + 2.0) continue;
        const int t0 = std::max(0, static_cast<int>(std::ceil(e.onset_s / hop_s)));
        const int t1 = std::min(frames - 1, static_cast<int>(std::floor(
                                                (e.onset_s + e.duration_s) / hop_s)));
        for (int t = t0; t <= t1; ++t) {
            float* row = out.row(t);
            const int klo = std::max(0, static_cast<int>(std::floor(bin_f - 3.0)));
            const int khi = std::min(bins - 1, static_cast<int>(std::ceil(bin_f + 3.0)));
            for (int k = klo; k <= khi; ++k) {
                const double d = (k - bin_f) / sigma;
                row[k] = std::max(row[k], static_cast<float>(std::exp(-0.5 * d * d)));
            }
        }
    }
    return out;
}

nn::Architecture SalienceNetConfig::architecture() const {
    if (conv_channels.size() != conv_kernels.size())
        raise(ErrorKind::invalid_argument, "salience conv spec size mismatch");
    nn::Architecture arch;
    for (std::size_t i = 0; i < conv_channels.size(); ++i) {
        arch.layers.push_back(
            nn::LayerSpec::conv(conv_channels[i], conv_kernels[i], conv_kernels[i]));
        arch.layers.push_back(nn::LayerSpec::relu());
    }
    arch.layers.push_back(nn::LayerSpec::conv(1, output_kernel, output_kernel));
    arch.layers.push_back(nn::LayerSpec::sigmoid());

    nlohmann::json tag;
    tag["model"] = "salience";
    tag["zero_init_output"] = zero_init_output;
    arch.tag = tag.dump();
    return arch;
}

SalienceModel make_salience_model(const SalienceNetConfig& config, int bins,
                                  std::uint64_t seed) {
    SalienceModel model{config, bins,
                        nn::Model<float>(config.architecture(), {1, bins, 1}, seed)};
    if (config.zero_init_output) {
        // last conv = params[-2] (weights), params[-1] (bias)
        auto params = model.net.parameters();
        params[params.size() - 2]->fill(0.0f);
        params[params.size() - 1]->fill(0.0f);
    }
    return model;
}

namespace {

// Clip as a (1, frames, bins, 1) tensor; the net convolves over time x bins.
nn::Tensor clip_to_tensor(const FeatureMatrix& m) {
    nn::Tensor t(1, m.frames, m.bins, 1);
    std::copy(m.values.begin(), m.values.end(), t.data.begin());
    return t;
}

} // namespace

SalienceTrainResult train_salience(const std::vector<SalienceClip>& clips,
                                   const SalienceNetConfig& net_config,
                                   const SalienceTrainConfig& train_config) {
    if (clips.empty())
        raise(ErrorKind::invalid_argument, "salience training corpus is empty");
    const int bins = clips.front().cqt.bins;
    for (const SalienceClip& c : clips) {
        if (c.cqt.bins != bins || c.target.bins != bins ||
            c.cqt.frames != c.target.frames)
            raise(ErrorKind::shape, "salience clip shape mismatch");
    }

    SalienceModel model =
        make_salience_model(net_config, bins, Rng::derive(train_config.seed, 1));
    nn::SgdMomentum<float> opt(train_config.lr, train_config.momentum);
    Rng shuffle_rng(Rng::derive(train_config.seed, 2));

    // per-example input shape is one frame row; train on whole clips
    std::vector<std::size_t> order(clips.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<double> epoch_loss;
    for (int epoch = 0; epoch < train_config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t value_count = 0;
        for (std::size_t idx : order) {
            const SalienceClip& clip = clips[idx];
            nn::Tensor x = clip_to_tensor(clip.cqt);
            nn::Tensor y = model.net.forward(x, true);

            const std::size_t n = y.size();
            nn::Tensor dy = nn::Tensor::from_shape(y.shape);
            double loss = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double t = clip.target.values[i];
                const double yh = std::min(1.0 - kEps,
                                           std::max(kEps, static_cast<double>(y.data[i])));
                loss += -t * std::log(yh) - (1.0 - t) * std::log(1.0 - yh);
                dy.data[i] = static_cast<float>(
                    (-t / yh + (1.0 - t) / (1.0 - yh)) / static_cast<double>(n));
            }
            loss_sum += loss;
            value_count += n;
            if (!std::isfinite(loss))
                raise(ErrorKind::divergence,
                      "salience training diverged at epoch " + std::to_string(epoch));

            model.net.zero_grads();
            model.net.backward(dy);
            opt.step(model.net);
        }
        epoch_loss.push_back(loss_sum / static_cast<double>(value_count));
    }
    return {std::move(model), std::move(epoch_loss)};
}

FeatureMatrix apply_salience_model(SalienceModel& model, const FeatureMatrix& cqt) {
    if (cqt.kind != FeatureKind::cqt)
        raise(ErrorKind::invalid_argument, "salience model expects a cqt matrix");
    if (cqt.bins != model.bins)
        raise(ErrorKind::shape, "salience model bin count mismatch");

    const FeatureMatrix compressed = log_compress(cqt);
    nn::Tensor x = clip_to_tensor(compressed);
    nn::Tensor y = model.net.forward(x, false);

    FeatureMatrix out;
    out.frames = cqt.frames;
    out.bins = cqt.bins;
    out.values.assign(y.data.begin(), y.data.end());
    out.frame_hop_s = cqt.frame_hop_s;
    out.kind = FeatureKind::salience;
    out.bin_labels = cqt.bin_labels;
    out.sample_rate = cqt.sample_rate;
    out.hop_samples = cqt.hop_samples;
    out.window_samples = cqt.window_samples;
    return out;
}

void save_salience_model(SalienceModel& model, const std::string& path) {
    nn::save_checkpoint(model.net, path);
}

SalienceModel load_salience_model(const std::string& path) {
    nn::Model<float> net = nn::load_checkpoint(path);
    nlohmann::json tag;
    try {
        tag = nlohmann::json::parse(net.architecture().tag);
    } catch (const nlohmann::json::exception&) {
        raise(ErrorKind::format, "checkpoint is not a salience model: " + path);
    }
    if (tag.value("model", "") != "salience")
        raise(ErrorKind::fingerprint, "checkpoint is not a salience model: " + path);

    SalienceNetConfig config;
    config.zero_init_output = tag.value("zero_init_output", true);
    // conv spec comes back through the architecture itself
    const int bins = net.input_shape()[1];
    return SalienceModel{config, bins, std::move(net)};
}

// feature dispatch lives here so it can reach harmonic_salience
FeatureMatrix extract(const AudioBuffer& audio, FeatureKind kind,
                      const FeatureParams& params) {
    switch (kind) {
    case FeatureKind::stft:
        return stft_magnitude(audio, params.stft);
    case FeatureKind::cqt:
        return cqt_magnitude(audio, params.cqt);
    case FeatureKind::chroma:
        return chroma(cqt_magnitude(audio, params.cqt));
    case FeatureKind::salience:
        return harmonic_salience(cqt_magnitude(audio, params.cqt),
                                 params.salience_harmonics);
    }
    raise(ErrorKind::invalid_argument, "unknown feature kind");
}

} // namespace sialign
