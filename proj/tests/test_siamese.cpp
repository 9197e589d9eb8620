#include <doctest.h>

#include <cmath>
#include <map>

#include "helpers.hpp"
#include "sialign/corpus.hpp"
#include "sialign/error.hpp"
#include "sialign/rng.hpp"
#include "sialign/siamese.hpp"

using namespace sialign;
using namespace test_helpers;

namespace {

// small tower for fast tests
SiameseConfig tiny_config() {
    SiameseConfig cfg;
    cfg.patch_frames = 16;
    cfg.patch_bins = 16;
    cfg.conv_channels = {4, 8, 8, 8};
    cfg.conv_kernels = {5, 5, 3, 3};
    cfg.embed_dim = 16;
    return cfg;
}

nn::Tensor random_patch(const SiameseConfig& cfg, std::uint64_t seed) {
    nn::Tensor t(1, cfg.patch_frames, cfg.patch_bins, cfg.channels);
    Rng rng(seed);
    for (float& v : t.data) v = static_cast<float>(rng.uniform());
    return t;
}

// two synthetic "pitch classes": band of energy in the low or high rows
nn::Tensor banded_patch(const SiameseConfig& cfg, bool low_band, std::uint64_t seed) {
    nn::Tensor t(1, cfg.patch_frames, cfg.patch_bins, 1);
    Rng rng(seed);
    const int half = cfg.patch_bins / 2;
    for (int dt = 0; dt < cfg.patch_frames; ++dt)
        for (int r = 0; r < cfg.patch_bins; ++r) {
            const bool in_band = low_band ? r < half : r >= half;
            t.at(0, dt, r, 0) = static_cast<float>(
                (in_band ? 1.0 : 0.0) + 0.05 * rng.uniform());
        }
    return t;
}

} // namespace

TEST_CASE("identical patches embed identically and distance is symmetric") {
    const SiameseConfig cfg = tiny_config();
    SiameseModel model = make_siamese_model(cfg, 3);
    const nn::Tensor p = random_patch(cfg, 5);
    const nn::Tensor q = random_patch(cfg, 6);

    const auto ep1 = embed(model, p);
    const auto ep2 = embed(model, p);
    CHECK(ep1 == ep2);
    CHECK(static_cast<int>(ep1.size()) == cfg.embed_dim);

    const auto eq = embed(model, q);
    CHECK(pair_distance(ep1, eq) == pair_distance(eq, ep1));
}

TEST_CASE("zero patch embeds to a finite vector") {
    const SiameseConfig cfg = tiny_config();
    SiameseModel model = make_siamese_model(cfg, 4);
    nn::Tensor zero(1, cfg.patch_frames, cfg.patch_bins, 1);
    const auto e = embed(model, zero);
    for (float v : e) CHECK(std::isfinite(v));
}

TEST_CASE("pair distance basics") {
    CHECK(pair_distance({1.0f, 2.0f, 3.0f}, {1.0f, 2.0f, 3.0f}) == 0.0);
    CHECK(pair_distance({1.0f, 0.0f}, {0.0f, 1.0f}) ==
          doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    CHECK_THROWS_AS(pair_distance({1.0f}, {1.0f, 2.0f}), Error);

    Rng rng(9);
    std::vector<float> a(64), b(64);
    for (int i = 0; i < 64; ++i) {
        a[i] = static_cast<float>(rng.uniform(-2.0, 2.0));
        b[i] = static_cast<float>(rng.uniform(-2.0, 2.0));
    }
    double acc = 0.0;
    for (int i = 0; i < 64; ++i)
        acc += (static_cast<double>(a[i]) - b[i]) * (static_cast<double>(a[i]) - b[i]);
    CHECK(pair_distance(a, b) == doctest::Approx(std::sqrt(acc)).epsilon(1e-12));
}

TEST_CASE("contrastive loss tagged values") {
    CHECK(contrastive_loss(0.5, 0, 1.0) == doctest::Approx(0.125).epsilon(1e-12));
    CHECK(contrastive_loss(1.5, 1, 1.0) == 0.0); // beyond the margin
    CHECK(contrastive_loss(0.0, 1, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("contrastive loss sign and zero region") {
    Rng rng(31);
    for (int trial = 0; trial < 1000; ++trial) {
        const double m = rng.uniform(0.1, 3.0);
        const double d = rng.uniform(0.0, 4.0);
        const int y = rng.uniform() < 0.5 ? 0 : 1;
        const double loss = contrastive_loss(d, y, m);
        CHECK(loss >= 0.0);
        const bool zero = (y == 0 && d == 0.0) || (y == 1 && d >= m);
        if (zero) CHECK(loss == 0.0);
        if (loss == 0.0) CHECK(((y == 0 && d == 0.0) || (y == 1 && d >= m)));
    }
    CHECK_THROWS_AS(contrastive_loss(-0.1, 0, 1.0), Error);
    CHECK_THROWS_AS(contrastive_loss(0.1, 0, 0.0), Error);
}

TEST_CASE("contrastive loss gradient matches finite differences off the hinge") {
    Rng rng(41);
    for (int trial = 0; trial < 200; ++trial) {
        const double m = rng.uniform(0.5, 2.0);
        double d = rng.uniform(0.01, 2.5 * m);
        if (std::abs(d - m) < 1e-3) continue; // hinge point excluded
        const int y = rng.uniform() < 0.5 ? 0 : 1;
        const double h = 1e-6;
        const double numeric =
            (contrastive_loss(d + h, y, m) - contrastive_loss(d - h, y, m)) / (2 * h);
        CHECK(contrastive_loss_grad(d, y, m) ==
              doctest::Approx(numeric).epsilon(1e-5));
    }
}

namespace {

struct PairFixture {
    FeatureMatrix perf, score;
    GroundTruthMap gt;

    PairFixture(int perf_frames, int score_frames, double stretch) {
        auto fill = [](FeatureMatrix& m, int frames, std::uint64_t seed) {
            m.frames = frames;
            m.bins = 24;
            m.kind = FeatureKind::cqt;
            m.frame_hop_s = 0.023;
            m.values.resize(static_cast<std::size_t>(frames) * 24);
            Rng rng(seed);
            for (float& v : m.values) v = static_cast<float>(rng.uniform());
            m.bin_labels.assign(24, 0.0);
        };
        fill(perf, perf_frames, 1);
        fill(score, score_frames, 2);
        gt.knots = {{0.0, 0.0}, {score_frames * 0.023, score_frames * 0.023 * stretch}};
    }
};

} // namespace

TEST_CASE("make_pairs is balanced, reproducible and honors the exclusion zone") {
    PairFixture fx(400, 200, 2.0);
    SiameseConfig cfg = tiny_config();
    PairConfig pc;
    pc.anchors_per_piece = 40;

    const auto pairs = make_pairs(fx.perf, fx.score, fx.gt, cfg, pc, 1234, 7);
    REQUIRE(!pairs.empty());

    std::map<int, int> histogram;
    for (const auto& p : pairs) ++histogram[p.label];
    CHECK(histogram[0] == histogram[1]); // exactly balanced

    const auto again = make_pairs(fx.perf, fx.score, fx.gt, cfg, pc, 1234, 7);
    REQUIRE(again.size() == pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        CHECK(pairs[i].label == again[i].label);
        CHECK(pairs[i].patch_perf.data == again[i].patch_perf.data);
        CHECK(pairs[i].patch_score.data == again[i].patch_score.data);
    }

    const auto different = make_pairs(fx.perf, fx.score, fx.gt, cfg, pc, 999, 7);
    bool same = different.size() == pairs.size();
    if (same)
        for (std::size_t i = 0; i < pairs.size() && same; ++i)
            same = pairs[i].patch_perf.data == different[i].patch_perf.data;
    CHECK_FALSE(same);
}

TEST_CASE("identity ground truth matches equal frame indices") {
    PairFixture fx(300, 300, 1.0);
    SiameseConfig cfg = tiny_config();
    PairConfig pc;
    pc.anchors_per_piece = 30;
    const auto pairs = make_pairs(fx.perf, fx.score, fx.gt, cfg, pc, 5, 0);

    // label-0 patches must equal the score-side frame patch at the same index
    PatchExtractor perf_patches(fx.perf, cfg.patch_frames, cfg.patch_bins);
    PatchExtractor score_patches(fx.score, cfg.patch_frames, cfg.patch_bins);
    int checked = 0;
    for (const auto& p : pairs) {
        if (p.label != 0) continue;
        // find the score frame this anchor used by matching patch bytes
        for (int s = 0; s < fx.score.frames; ++s) {
            if (score_patches.patch(s).data == p.patch_score.data) {
                CHECK(perf_patches.patch(s).data == p.patch_perf.data);
                ++checked;
                break;
            }
        }
    }
    CHECK(checked > 0);
}

TEST_CASE("sequences shorter than one patch are rejected") {
    PairFixture fx(10, 10, 1.0);
    SiameseConfig cfg = tiny_config(); // patch_frames = 16 > 10
    PairConfig pc;
    CHECK_THROWS_AS(make_pairs(fx.perf, fx.score, fx.gt, cfg, pc, 1, 0), Error);
}

TEST_CASE("training separates a linearly separable toy set") {
    SiameseConfig cfg = tiny_config();
    std::vector<FramePairExample> pairs;
    Rng rng(55);
    for (int i = 0; i < 24; ++i) {
        const bool cls = i % 2 == 0;
        FramePairExample pos;
        pos.patch_perf = banded_patch(cfg, cls, rng.next_u64());
        pos.patch_score = banded_patch(cfg, cls, rng.next_u64());
        pos.label = 0;
        pos.piece_id = i % 4;
        pairs.push_back(std::move(pos));

        FramePairExample neg;
        neg.patch_perf = banded_patch(cfg, cls, rng.next_u64());
        neg.patch_score = banded_patch(cfg, !cls, rng.next_u64());
        neg.label = 1;
        neg.piece_id = i % 4;
        pairs.push_back(std::move(neg));
    }

    TrainConfig tc;
    tc.epochs = 50;
    tc.batch = 16;
    tc.lr = 2e-3;
    tc.seed = 11;
    const TrainResult result = train_siamese(pairs, cfg, tc);

    double best = result.train_loss.back();
    for (double l : result.train_loss) best = std::min(best, l);
    CHECK(best < 0.05 * 0.5 * cfg.margin * cfg.margin);

    // after training matched pairs sit closer than unmatched ones
    double matched = 0.0, unmatched = 0.0;
    int n_matched = 0, n_unmatched = 0;
    SiameseModel model = result.model;
    for (const auto& p : pairs) {
        const double d =
            pair_distance(embed(model, p.patch_perf), embed(model, p.patch_score));
        if (p.label == 0) {
            matched += d;
            ++n_matched;
        } else {
            unmatched += d;
            ++n_unmatched;
        }
    }
    CHECK(matched / n_matched < unmatched / n_unmatched);
}

TEST_CASE("training rejects an empty pair list") {
    CHECK_THROWS_AS(train_siamese({}, tiny_config(), TrainConfig{}), Error);
}

TEST_CASE("siamese checkpoints carry their configuration") {
    TempDir tmp;
    SiameseConfig cfg = tiny_config();
    cfg.feature = FeatureKind::chroma;
    cfg.margin = 1.5;
    cfg.binarize_tau = 0.6;
    SiameseModel model = make_siamese_model(cfg, 2);
    save_siamese(model, tmp.file("s.ckpt"));

    SiameseModel back = load_siamese(tmp.file("s.ckpt"));
    CHECK(back.config.feature == FeatureKind::chroma);
    CHECK(back.config.margin == 1.5);
    CHECK(back.config.binarize_tau == 0.6);
    CHECK(back.config.patch_frames == cfg.patch_frames);

    const nn::Tensor p = random_patch(cfg, 77);
    CHECK(embed(model, p) == embed(back, p));
}

TEST_CASE("pair sets round trip through their file format") {
    TempDir tmp;
    SiameseConfig cfg = tiny_config();
    std::vector<FramePairExample> pairs;
    Rng rng(66);
    for (int i = 0; i < 6; ++i) {
        FramePairExample ex;
        ex.patch_perf = random_patch(cfg, rng.next_u64());
        ex.patch_score = random_patch(cfg, rng.next_u64());
        ex.label = i % 2;
        ex.piece_id = i / 2;
        pairs.push_back(std::move(ex));
    }
    save_pairs(pairs, tmp.file("p.bin"));
    const auto back = load_pairs(tmp.file("p.bin"));
    REQUIRE(back.size() == pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        CHECK(back[i].label == pairs[i].label);
        CHECK(back[i].piece_id == pairs[i].piece_id);
        CHECK(back[i].patch_perf.data == pairs[i].patch_perf.data);
        CHECK(back[i].patch_score.data == pairs[i].patch_score.data);
    }
}
