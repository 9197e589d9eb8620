#include "sialign/siamese.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "sialign/error.hpp"
#include "sialign/rng.hpp"

namespace sialign {

SiameseConfig SiameseConfig::full_scale() {
    SiameseConfig c;
    c.patch_frames = 128;
    c.patch_bins = 128;
    c.channels = 3;
    c.conv_channels = {64, 128, 256, 512};
    c.conv_kernels = {5, 5, 3, 3};
    return c;
}

void SiameseConfig::validate() const {
    if (margin <= 0.0) raise(ErrorKind::invalid_argument, "margin must be positive");
    if (binarize_tau <= 0.0 || binarize_tau >= margin)
        raise(ErrorKind::invalid_argument, "binarize threshold must lie in (0, margin)");
    if (patch_frames < 1 || patch_bins < 1 || channels < 1 || embed_dim < 1)
        raise(ErrorKind::invalid_argument, "invalid siamese patch/embedding dims");
    if (conv_channels.empty() || conv_channels.size() != conv_kernels.size())
        raise(ErrorKind::invalid_argument, "conv stack spec mismatch");
}

nn::Architecture SiameseConfig::tower_architecture() const {
    validate();
    nn::Architecture arch;
    const std::size_t blocks = conv_channels.size();
    for (std::size_t i = 0; i < blocks; ++i) {
        arch.layers.push_back(
            nn::LayerSpec::conv(conv_channels[i], conv_kernels[i], conv_kernels[i]));
        arch.layers.push_back(nn::LayerSpec::relu());
        arch.layers.push_back(nn::LayerSpec::batchnorm());
        if (i + 1 < blocks) arch.layers.push_back(nn::LayerSpec::maxpool(2, 2));
    }
    arch.layers.push_back(nn::LayerSpec::flatten());
    arch.layers.push_back(nn::LayerSpec::dense(embed_dim));
    arch.tag = tag_json();
    return arch;
}

std::string SiameseConfig::tag_json() const {
    nlohmann::json j;
    j["model"] = "siamese";
    j["feature"] = to_string(feature);
    j["patch"] = {patch_frames, patch_bins, channels};
    j["conv_channels"] = conv_channels;
    j["conv_kernels"] = conv_kernels;
    j["embed_dim"] = embed_dim;
    j["margin"] = margin;
    j["tau"] = binarize_tau;
    return j.dump();
}

SiameseConfig SiameseConfig::from_tag_json(const std::string& tag) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(tag);
    } catch (const nlohmann::json::exception&) {
        raise(ErrorKind::format, "checkpoint tag is not a siamese config");
    }
    if (j.value("model", "") != "siamese")
        raise(ErrorKind::fingerprint, "checkpoint is not a siamese model");
    SiameseConfig c;
    c.feature = feature_kind_from_string(j.at("feature").get<std::string>());
    c.patch_frames = j.at("patch").at(0);
    c.patch_bins = j.at("patch").at(1);
    c.channels = j.at("patch").at(2);
    c.conv_channels = j.at("conv_channels").get<std::vector<int>>();
    c.conv_kernels = j.at("conv_kernels").get<std::vector<int>>();
    c.embed_dim = j.at("embed_dim");
    c.margin = j.at("margin");
    c.binarize_tau = j.at("tau");
    return c;
}

SiameseModel make_siamese_model(const SiameseConfig& config, std::uint64_t seed) {
    return SiameseModel{config,
                        nn::Model<float>(config.tower_architecture(),
                                         {config.patch_frames, config.patch_bins,
                                          config.channels},
                                         seed)};
}

void save_siamese(SiameseModel& model, const std::string& path) {
    nn::save_checkpoint(model.tower, path);
}

SiameseModel load_siamese(const std::string& path) {
    nn::Model<float> tower = nn::load_checkpoint(path);
    SiameseConfig config = SiameseConfig::from_tag_json(tower.architecture().tag);
    return SiameseModel{config, std::move(tower)};
}

PatchExtractor::PatchExtractor(const std::vector<const FeatureMatrix*>& channels,
                               int patch_frames, int patch_bins)
    : sources_(channels), patch_frames_(patch_frames), patch_bins_(patch_bins) {
    if (sources_.empty())
        raise(ErrorKind::invalid_argument, "patch extractor needs at least one channel");
    frames_ = sources_.front()->frames;
    hop_s_ = sources_.front()->frame_hop_s;
    for (const FeatureMatrix* m : sources_) {
        if (m->frames != frames_)
            raise(ErrorKind::shape, "channel frame counts differ");
        std::vector<int> edges(patch_bins_ + 1);
        if (m->bins >= patch_bins_) {
            for (int r = 0; r <= patch_bins_; ++r)
                edges[r] = static_cast<int>(
                    std::lround(static_cast<double>(r) * m->bins / patch_bins_));
        } else {
            for (int r = 0; r <= patch_bins_; ++r) edges[r] = std::min(r, m->bins);
        }
        row_edges_.push_back(std::move(edges));
    }
    if (frames_ < 1)
        raise(ErrorKind::invalid_argument, "feature sequence shorter than one patch");
}

PatchExtractor::PatchExtractor(const FeatureMatrix& single, int patch_frames,
                               int patch_bins)
    : PatchExtractor(std::vector<const FeatureMatrix*>{&single}, patch_frames,
                     patch_bins) {}

void PatchExtractor::patch_into(int center_frame, nn::Tensor& batch,
                                int batch_index) const {
    const int half = patch_frames_ / 2;
    for (std::size_t c = 0; c < sources_.size(); ++c) {
        const FeatureMatrix& m = *sources_[c];
        const std::vector<int>& edges = row_edges_[c];
        for (int dt = 0; dt < patch_frames_; ++dt) {
            const int t = center_frame - half + dt;
            if (t < 0 || t >= frames_) continue; // zero padding at the edges
            const float* src = m.row(t);
            for (int r = 0; r < patch_bins_; ++r) {
                const int lo = edges[r], hi = edges[r + 1];
                if (hi <= lo) continue;
                float acc = 0.0f;
                for (int k = lo; k < hi; ++k) acc += src[k];
                batch.at(batch_index, dt, r, static_cast<int>(c)) =
                    acc / static_cast<float>(hi - lo);
            }
        }
    }
}

nn::Tensor PatchExtractor::patch(int center_frame) const {
    nn::Tensor out(1, patch_frames_, patch_bins_, static_cast<int>(sources_.size()));
    patch_into(center_frame, out, 0);
    return out;
}

FeatureMatrix prepare_features_for_model(FeatureMatrix m) {
    if (m.kind == FeatureKind::stft || m.kind == FeatureKind::cqt)
        return log_compress(std::move(m));
    return m;
}

std::vector<float> embed(SiameseModel& model, const nn::Tensor& patch) {
    nn::Tensor y = model.tower.forward(patch, false);
    if (y.shape[0] != 1)
        raise(ErrorKind::shape, "embed expects a single patch");
    return std::vector<float>(y.data.begin(), y.data.end());
}

std::vector<std::vector<float>> embed_frames(SiameseModel& model,
                                             const PatchExtractor& patches,
                                             int batch) {
    const int frames = patches.frames();
    const SiameseConfig& cfg = model.config;
    std::vector<std::vector<float>> out(frames);
    for (int start = 0; start < frames; start += batch) {
        const int count = std::min(batch, frames - start);
        nn::Tensor x(count, cfg.patch_frames, cfg.patch_bins, cfg.channels);
        for (int i = 0; i < count; ++i) patches.patch_into(start + i, x, i);
        nn::Tensor y = model.tower.forward(x, false);
        for (int i = 0; i < count; ++i) {
            const float* row = &y.data[y.index(i, 0, 0, 0)];
            out[start + i].assign(row, row + cfg.embed_dim);
        }
    }
    return out;
}

double pair_distance(const std::vector<float>& a, const std::vector<float>& b) {
    if (a.size() != b.size())
        raise(ErrorKind::shape, "embedding length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

double contrastive_loss(double distance, int label, double margin) {
    if (distance < 0.0)
        raise(ErrorKind::invalid_argument, "distance must be non-negative");
    if (margin <= 0.0) raise(ErrorKind::invalid_argument, "margin must be positive");
    if (label == 0) return 0.5 * distance * distance;
    const double gap = std::max(0.0, margin - distance);
    return 0.5 * gap * gap;
}

double contrastive_loss_grad(double distance, int label, double margin) {
    if (label == 0) return distance;
    return distance >= margin ? 0.0 : -(margin - distance);
}

std::vector<FramePairExample> make_pairs(const FeatureMatrix& perf,
                                         const FeatureMatrix& score,
                                         const GroundTruthMap& ground_truth,
                                         const SiameseConfig& config,
                                         const PairConfig& pair_config,
                                         std::uint64_t seed, int piece_id) {
    if (perf.kind != score.kind)
        raise(ErrorKind::invalid_argument, "pair features must share their kind");
    if (config.channels != 1)
        raise(ErrorKind::invalid_argument,
              "make_pairs builds single-channel patches; stack channels upstream");
    require_strictly_increasing(ground_truth, "ground truth");

    if (perf.frames < config.patch_frames || score.frames < config.patch_frames)
        raise(ErrorKind::invalid_argument, "feature sequences shorter than one patch");
    const PatchExtractor perf_patches(perf, config.patch_frames, config.patch_bins);
    const PatchExtractor score_patches(score, config.patch_frames, config.patch_bins);

    const double patch_width_s = config.patch_frames * perf.frame_hop_s;
    const double exclusion_s = pair_config.exclusion_patch_widths * patch_width_s;

    Rng rng(seed);
    std::vector<int> anchor_pool(score.frames);
    for (int i = 0; i < score.frames; ++i) anchor_pool[i] = i;
    rng.shuffle(anchor_pool);
    const int n_anchors =
        std::min<int>(pair_config.anchors_per_piece, score.frames);

    std::vector<FramePairExample> out;
    out.reserve(static_cast<std::size_t>(n_anchors) * 2);
    for (int a = 0; a < n_anchors; ++a) {
        const int s = anchor_pool[a];
        const double match_t = ground_truth.at(s * score.frame_hop_s);
        const int p = static_cast<int>(std::lround(match_t / perf.frame_hop_s));
        if (p < 0 || p >= perf.frames) continue;

        // contiguous exclusion zone around the true match
        int lo = static_cast<int>(std::floor((match_t - exclusion_s) / perf.frame_hop_s));
        int hi = static_cast<int>(std::ceil((match_t + exclusion_s) / perf.frame_hop_s));
        lo = std::max(lo, 0);
        hi = std::min(hi, perf.frames - 1);
        const int excluded = hi - lo + 1;
        const int valid = perf.frames - excluded;
        if (valid <= 0) continue; // no admissible negative; drop the anchor

        int q = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(valid)));
        if (q >= lo) q += excluded;

        FramePairExample pos;
        pos.patch_perf = perf_patches.patch(p);
        pos.patch_score = score_patches.patch(s);
        pos.label = 0;
        pos.piece_id = piece_id;
        out.push_back(std::move(pos));

        FramePairExample neg;
        neg.patch_perf = perf_patches.patch(q);
        neg.patch_score = score_patches.patch(s);
        neg.label = 1;
        neg.piece_id = piece_id;
        out.push_back(std::move(neg));
    }
    return out;
}

TrainResult train_siamese(const std::vector<FramePairExample>& pairs,
                          const SiameseConfig& config,
                          const TrainConfig& train_config) {
    if (pairs.empty()) raise(ErrorKind::invalid_argument, "no training pairs");
    config.validate();

    // split 80/20 by piece to keep frames of one piece on one side
    std::vector<int> piece_ids;
    for (const FramePairExample& p : pairs) piece_ids.push_back(p.piece_id);
    std::sort(piece_ids.begin(), piece_ids.end());
    piece_ids.erase(std::unique(piece_ids.begin(), piece_ids.end()), piece_ids.end());

    Rng split_rng(Rng::derive(train_config.seed, 11));
    split_rng.shuffle(piece_ids);
    std::size_t n_val_pieces = 0;
    if (piece_ids.size() >= 2)
        n_val_pieces = std::max<std::size_t>(
            1, static_cast<std::size_t>(
                   std::lround(train_config.val_fraction * piece_ids.size())));
    std::vector<int> val_pieces(piece_ids.begin(),
                                piece_ids.begin() + n_val_pieces);
    std::sort(val_pieces.begin(), val_pieces.end());
    auto is_val = [&](int id) {
        return std::binary_search(val_pieces.begin(), val_pieces.end(), id);
    };

    std::vector<std::size_t> train_idx, val_idx;
    for (std::size_t i = 0; i < pairs.size(); ++i)
        (is_val(pairs[i].piece_id) ? val_idx : train_idx).push_back(i);
    if (train_idx.empty())
        raise(ErrorKind::invalid_argument, "piece split left no training pairs");

    SiameseModel model =
        make_siamese_model(config, Rng::derive(train_config.seed, 21));
    nn::SgdMomentum<float> opt(train_config.lr, train_config.momentum);
    Rng shuffle_rng(Rng::derive(train_config.seed, 31));

    const int tp = config.patch_frames, tb = config.patch_bins, tc = config.channels;
    const int embed_dim = config.embed_dim;
    const double margin = config.margin;

    auto run_batch = [&](const std::vector<std::size_t>& idx, std::size_t begin,
                         std::size_t end, bool train, double& loss_sum) {
        const int count = static_cast<int>(end - begin);
        nn::Tensor x(2 * count, tp, tb, tc);
        for (int i = 0; i < count; ++i) {
            const FramePairExample& ex = pairs[idx[begin + i]];
            std::memcpy(&x.data[x.index(i, 0, 0, 0)], ex.patch_perf.data.data(),
                        ex.patch_perf.size() * sizeof(float));
            std::memcpy(&x.data[x.index(count + i, 0, 0, 0)],
                        ex.patch_score.data.data(),
                        ex.patch_score.size() * sizeof(float));
        }
        nn::Tensor y = model.tower.forward(x, train);

        nn::Tensor dy = nn::Tensor::from_shape(y.shape);
        double batch_loss = 0.0;
        for (int i = 0; i < count; ++i) {
            const float* ea = &y.data[y.index(i, 0, 0, 0)];
            const float* eb = &y.data[y.index(count + i, 0, 0, 0)];
            double dist_sq = 0.0;
            for (int k = 0; k < embed_dim; ++k) {
                const double d = static_cast<double>(ea[k]) - eb[k];
                dist_sq += d * d;
            }
            const double dist = std::sqrt(dist_sq);
            const int label = pairs[idx[begin + i]].label;
            batch_loss += contrastive_loss(dist, label, margin);

            if (train) {
                // dL/de factored so the D -> 0 limit stays finite
                double scale = 0.0;
                if (label == 0) {
                    scale = 1.0;
                } else if (dist > 0.0 && dist < margin) {
                    scale = -(margin - dist) / dist;
                }
                scale /= static_cast<double>(count);
                float* da = &dy.data[dy.index(i, 0, 0, 0)];
                float* db = &dy.data[dy.index(count + i, 0, 0, 0)];
                for (int k = 0; k < embed_dim; ++k) {
                    const double diff = static_cast<double>(ea[k]) - eb[k];
                    da[k] = static_cast<float>(scale * diff);
                    db[k] = static_cast<float>(-scale * diff);
                }
            }
        }
        loss_sum += batch_loss;
        if (train) {
            model.tower.zero_grads();
            model.tower.backward(dy);
            opt.step(model.tower);
        }
    };

    TrainResult result{make_siamese_model(config, Rng::derive(train_config.seed, 21)),
                       {}, {}, 0};
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<nn::Tensor> best_snapshot = model.tower.snapshot();

    std::vector<std::size_t> order = train_idx;
    const std::size_t batch =
        std::max<std::size_t>(1, static_cast<std::size_t>(train_config.batch));
    for (int epoch = 0; epoch < train_config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double train_loss = 0.0;
        for (std::size_t b = 0; b < order.size(); b += batch)
            run_batch(order, b, std::min(order.size(), b + batch), true, train_loss);
        train_loss /= static_cast<double>(order.size());
        if (!std::isfinite(train_loss))
            raise(ErrorKind::divergence,
                  "training loss diverged at epoch " + std::to_string(epoch));
        result.train_loss.push_back(train_loss);

        double val_loss = 0.0;
        if (!val_idx.empty()) {
            for (std::size_t b = 0; b < val_idx.size(); b += batch)
                run_batch(val_idx, b, std::min(val_idx.size(), b + batch), false,
                          val_loss);
            val_loss /= static_cast<double>(val_idx.size());
        } else {
            val_loss = train_loss;
        }
        result.val_loss.push_back(val_loss);

        if (val_loss < best_val) {
            best_val = val_loss;
            best_snapshot = model.tower.snapshot();
            result.best_epoch = epoch;
        }
    }

    result.model.tower.restore(best_snapshot);
    return result;
}

namespace {

constexpr char kPairsMagic[8] = {'S', 'I', 'A', 'L', 'P', 'R', 'S', '1'};

void write_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                          static_cast<unsigned char>((v >> 8) & 0xFF),
                          static_cast<unsigned char>((v >> 16) & 0xFF),
                          static_cast<unsigned char>((v >> 24) & 0xFF)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::ifstream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        raise(ErrorKind::corrupt, "truncated pair set: " + path);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
}

} // namespace

void save_pairs(const std::vector<FramePairExample>& pairs, const std::string& path) {
    if (pairs.empty()) raise(ErrorKind::invalid_argument, "no pairs to save");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) raise(ErrorKind::io, "cannot open for writing: " + path);

    const auto& shape = pairs.front().patch_perf.shape;
    out.write(kPairsMagic, 8);
    write_u32(out, 1);
    write_u32(out, static_cast<std::uint32_t>(pairs.size()));
    write_u32(out, static_cast<std::uint32_t>(shape[1]));
    write_u32(out, static_cast<std::uint32_t>(shape[2]));
    write_u32(out, static_cast<std::uint32_t>(shape[3]));
    for (const FramePairExample& ex : pairs) {
        write_u32(out, static_cast<std::uint32_t>(ex.label));
        write_u32(out, static_cast<std::uint32_t>(ex.piece_id));
        out.write(reinterpret_cast<const char*>(ex.patch_perf.data.data()),
                  static_cast<std::streamsize>(ex.patch_perf.size() * sizeof(float)));
        out.write(reinterpret_cast<const char*>(ex.patch_score.data.data()),
                  static_cast<std::streamsize>(ex.patch_score.size() * sizeof(float)));
    }
    if (!out) raise(ErrorKind::io, "short write: " + path);
}

std::vector<FramePairExample> load_pairs(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::io, "cannot open pair set: " + path);
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kPairsMagic, 8) != 0)
        raise(ErrorKind::format, "not a pair-set file: " + path);
    const std::uint32_t version = read_u32(in, path);
    if (version != 1)
        raise(ErrorKind::version, "pair-set version " + std::to_string(version));
    const std::uint32_t count = read_u32(in, path);
    const int t = static_cast<int>(read_u32(in, path));
    const int b = static_cast<int>(read_u32(in, path));
    const int c = static_cast<int>(read_u32(in, path));

    std::vector<FramePairExample> pairs;
    pairs.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        FramePairExample ex;
        ex.label = static_cast<int>(read_u32(in, path));
        ex.piece_id = static_cast<int>(read_u32(in, path));
        ex.patch_perf = nn::Tensor(1, t, b, c);
        ex.patch_score = nn::Tensor(1, t, b, c);
        if (!in.read(reinterpret_cast<char*>(ex.patch_perf.data.data()),
                     static_cast<std::streamsize>(ex.patch_perf.size() * sizeof(float))) ||
            !in.read(reinterpret_cast<char*>(ex.patch_score.data.data()),
                     static_cast<std::streamsize>(ex.patch_score.size() * sizeof(float))))
            raise(ErrorKind::corrupt, "truncated pair set: " + path);
        pairs.push_back(std::move(ex));
    }
    return pairs;
}

} // namespace sialign
