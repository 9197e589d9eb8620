#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "sialign/error.hpp"
#include "sialign/rng.hpp"
#include "sialign/similarity.hpp"

using namespace sialign;
using namespace test_helpers;

namespace {

SiameseConfig tiny_config() {
    SiameseConfig cfg;
    cfg.patch_frames = 16;
    cfg.patch_bins = 16;
    cfg.conv_channels = {4, 8, 8, 8};
    cfg.conv_kernels = {5, 5, 3, 3};
    cfg.embed_dim = 16;
    return cfg;
}

FeatureMatrix random_features(int frames, std::uint64_t seed) {
    FeatureMatrix m;
    m.frames = frames;
    m.bins = 20;
    m.kind = FeatureKind::cqt;
    m.frame_hop_s = 0.023;
    m.values.resize(static_cast<std::size_t>(frames) * 20);
    Rng rng(seed);
    for (float& v : m.values) v = static_cast<float>(rng.uniform());
    m.bin_labels.assign(20, 0.0);
    return m;
}

} // namespace

TEST_CASE("self-similarity has an exactly-zero diagonal in distance mode") {
    SiameseModel model = make_siamese_model(tiny_config(), 1);
    const FeatureMatrix f = random_features(24, 3);
    const SimilarityMatrix s = build(f, f, model, SimilarityMode::distance);
    REQUIRE(s.rows == 24);
    REQUIRE(s.cols == 24);
    for (int i = 0; i < s.rows; ++i) CHECK(s.at(i, i) == 0.0f);
}

TEST_CASE("binary mode emits only zeros and ones") {
    SiameseModel model = make_siamese_model(tiny_config(), 2);
    const FeatureMatrix a = random_features(18, 5);
    const FeatureMatrix b = random_features(22, 6);
    const SimilarityMatrix s = build(a, b, model, SimilarityMode::binary);
    for (float v : s.values) CHECK((v == 0.0f || v == 1.0f));
}

TEST_CASE("matrix entries match the per-pair embed + distance oracle") {
    SiameseModel model = make_siamese_model(tiny_config(), 7);
    const FeatureMatrix a = random_features(3 + 16, 8); // a few more than one patch
    const FeatureMatrix b = random_features(3 + 16, 9);
    const SimilarityMatrix s = build(a, b, model, SimilarityMode::distance);

    const SiameseConfig& cfg = model.config;
    PatchExtractor pa(a, cfg.patch_frames, cfg.patch_bins);
    PatchExtractor pb(b, cfg.patch_frames, cfg.patch_bins);
    for (int i = 0; i < std::min(3, s.rows); ++i)
        for (int j = 0; j < std::min(3, s.cols); ++j) {
            const double oracle =
                pair_distance(embed(model, pa.patch(i)), embed(model, pb.patch(j)));
            CHECK(s.at(i, j) == doctest::Approx(oracle).epsilon(1e-6));
        }
}

TEST_CASE("swapping inputs transposes the matrix") {
    SiameseModel model = make_siamese_model(tiny_config(), 11);
    const FeatureMatrix a = random_features(20, 13);
    const FeatureMatrix b = random_features(17, 14);
    const SimilarityMatrix ab = build(a, b, model, SimilarityMode::distance);
    const SimilarityMatrix ba = build(b, a, model, SimilarityMode::distance);
    REQUIRE(ab.rows == ba.cols);
    REQUIRE(ab.cols == ba.rows);
    for (int i = 0; i < ab.rows; ++i)
        for (int j = 0; j < ab.cols; ++j) CHECK(ab.at(i, j) == ba.at(j, i));
}

TEST_CASE("binary mode is elementwise thresholding of distance mode") {
    SiameseModel model = make_siamese_model(tiny_config(), 17);
    const FeatureMatrix a = random_features(19, 19);
    const FeatureMatrix b = random_features(21, 20);
    const double tau = 0.4;
    const SimilarityMatrix dist = build(a, b, model, SimilarityMode::distance);
    const SimilarityMatrix bin = build(a, b, model, SimilarityMode::binary, tau);
    for (std::size_t i = 0; i < dist.values.size(); ++i)
        CHECK(bin.values[i] == (dist.values[i] > tau ? 1.0f : 0.0f));
}

TEST_CASE("feature kind mismatch is rejected") {
    SiameseModel model = make_siamese_model(tiny_config(), 23); // expects cqt
    FeatureMatrix wrong = random_features(20, 21);
    wrong.kind = FeatureKind::stft;
    const FeatureMatrix right = random_features(20, 22);
    CHECK_THROWS_AS(build(wrong, right, model, SimilarityMode::distance), Error);
}
