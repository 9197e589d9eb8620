// Acceptance suite: one line per criterion, nonzero exit on any failure.
//   acceptance --suite properties   fast property/oracle criteria
//   acceptance --suite endtoend     the trained-pipeline criteria
//   acceptance --suite all          everything (default)

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "../dtw_oracle.hpp"
#include "../gradcheck.hpp"
#include "sialign/corpus.hpp"
#include "sialign/dtw.hpp"
#include "sialign/evaluate.hpp"
#include "sialign/features.hpp"
#include "sialign/rng.hpp"
#include "sialign/salience.hpp"
#include "sialign/siamese.hpp"
#include "sialign/similarity.hpp"

using namespace sialign;
using test_helpers::brute_force_dtw;
using test_helpers::gradient_check;
using test_helpers::GradCheckResult;

namespace fs = std::filesystem;

namespace {

int failures = 0;

double now_s() {
    using clock = std::chrono::steady_clock;
    static const clock::time_point start = clock::now();
    return std::chrono::duration<double>(clock::now() - start).count();
}

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion,
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    return buf;
}

// ---------------------------------------------------------------- criterion 1

void criterion_dtw_oracle() {
    const double t0 = now_s();
    Rng shape_rng(2024);
    int checked = 0;
    bool ok = true;
    std::string why;
    for (int trial = 0; trial < 200 && ok; ++trial) {
        const int rows = static_cast<int>(shape_rng.uniform_int(1, 6));
        const int cols = static_cast<int>(shape_rng.uniform_int(1, 6));
        std::vector<double> cost(static_cast<std::size_t>(rows) * cols);
        Rng value_rng(Rng::derive(91, trial));
        for (double& v : cost) v = value_rng.uniform();

        const WarpingPath path = align_matrix(rows, cols, cost);
        const auto oracle = brute_force_dtw(rows, cols, cost);
        double along = 0.0;
        for (const auto& [i, j] : path.steps)
            along += cost[static_cast<std::size_t>(i) * cols + j];

        if (path.total_cost != oracle.best_cost) {
            ok = false;
            why = fmt("trial %d: dp cost %.17g != oracle %.17g", trial,
                      path.total_cost, oracle.best_cost);
        } else if (std::abs(along - path.total_cost) > 1e-9) {
            ok = false;
            why = fmt("trial %d: path does not realize its cost", trial);
        }
        ++checked;
    }
    const double dt = now_s() - t0;
    if (ok && dt >= 10.0) {
        ok = false;
        why = fmt("runtime %.1f s exceeds 10 s", dt);
    }
    report(1, ok,
           ok ? fmt("dtw equals exhaustive enumeration on %d matrices (%.2f s)",
                    checked, dt)
              : why);
}

// ---------------------------------------------------------------- criterion 2

void criterion_gradients() {
    using namespace sialign::nn;
    const double t0 = now_s();
    bool ok = true;
    std::string why;
    double worst = 0.0;

    struct Case {
        const char* name;
        Architecture arch;
        std::array<int, 3> input;
        bool separated;
    };
    std::vector<Case> cases;
    auto add = [&cases](const char* name, std::vector<LayerSpec> layers,
                        std::array<int, 3> input, bool separated) {
        Architecture a;
        a.layers = std::move(layers);
        cases.push_back({name, a, input, separated});
    };
    add("conv", {LayerSpec::conv(3, 3, 3)}, {5, 4, 2}, false);
    add("maxpool", {LayerSpec::maxpool(2, 2)}, {4, 4, 2}, true);
    add("relu", {LayerSpec::relu()}, {4, 4, 2}, true);
    add("batchnorm", {LayerSpec::batchnorm()}, {3, 3, 2}, false);
    add("flatten", {LayerSpec::flatten()}, {3, 3, 2}, false);
    add("dense", {LayerSpec::flatten(), LayerSpec::dense(4)}, {2, 2, 2}, false);
    add("sigmoid", {LayerSpec::sigmoid()}, {3, 3, 1}, false);

    for (const Case& c : cases) {
        for (std::uint64_t seed = 1; seed <= 10 && ok; ++seed) {
            Model<double> model(c.arch, c.input, seed);
            Tensor64 x(2, c.input[0], c.input[1], c.input[2]);
            Rng rng(seed * 131);
            for (std::size_t i = 0; i < x.data.size(); ++i) {
                if (c.separated) {
                    double v = 0.01 * static_cast<double>(rng.uniform_int(-49, 49)) +
                               1e-4 * static_cast<double>(i);
                    if (std::abs(v) < 1e-3) v += 2e-3;
                    x.data[i] = v;
                } else {
                    x.data[i] = rng.uniform(-1.0, 1.0);
                }
            }
            const GradCheckResult r = gradient_check(model, x, seed * 7);
            worst = std::max(worst, r.max_rel_error);
            if (r.max_rel_error >= 1e-4) {
                ok = false;
                why = fmt("%s seed %llu: max rel error %.3g at %s", c.name,
                          static_cast<unsigned long long>(seed), r.max_rel_error,
                          r.worst.c_str());
            }
        }
    }

    // contrastive loss (hinge point excluded)
    Rng rng(555);
    for (int seed = 0; seed < 10 && ok; ++seed) {
        for (int trial = 0; trial < 50; ++trial) {
            const double m = rng.uniform(0.5, 2.0);
            double d = rng.uniform(0.01, 2.5 * m);
            if (std::abs(d - m) < 1e-3) continue;
            const int y = rng.uniform() < 0.5 ? 0 : 1;
            const double h = 1e-5;
            const double numeric =
                (contrastive_loss(d + h, y, m) - contrastive_loss(d - h, y, m)) /
                (2 * h);
            const double analytic = contrastive_loss_grad(d, y, m);
            const double err = test_helpers::rel_error(analytic, numeric);
            worst = std::max(worst, err);
            if (err >= 1e-4) {
                ok = false;
                why = fmt("contrastive grad: rel error %.3g at D=%.3f m=%.3f", err,
                          d, m);
                break;
            }
        }
    }

    // salience cross entropy
    for (int seed = 0; seed < 10 && ok; ++seed) {
        Rng r2(Rng::derive(777, seed));
        const int n = 24;
        std::vector<double> y(n), yh(n);
        for (int i = 0; i < n; ++i) {
            y[i] = r2.uniform(0.05, 0.95);
            yh[i] = r2.uniform(0.05, 0.95);
        }
        const std::vector<double> grad = salience_cross_entropy_grad(y, yh);
        auto loss = [&](const std::vector<double>& pred) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i)
                acc += -y[i] * std::log(pred[i]) -
                       (1.0 - y[i]) * std::log(1.0 - pred[i]);
            return acc / n;
        };
        const double h = 1e-5;
        for (int i = 0; i < n && ok; ++i) {
            std::vector<double> up = yh, down = yh;
            up[i] += h;
            down[i] -= h;
            const double numeric = (loss(up) - loss(down)) / (2 * h);
            const double err = test_helpers::rel_error(grad[i], numeric);
            worst = std::max(worst, err);
            if (err >= 1e-4) {
                ok = false;
                why = fmt("cross-entropy grad: rel error %.3g", err);
            }
        }
    }

    const double dt = now_s() - t0;
    if (ok && dt >= 60.0) {
        ok = false;
        why = fmt("runtime %.1f s exceeds 60 s", dt);
    }
    report(2, ok,
           ok ? fmt("all layers and both losses match finite differences "
                    "(max rel error %.2e, %.1f s)",
                    worst, dt)
              : why);
}

// ---------------------------------------------------------------- criterion 3

void criterion_contrastive_values() {
    bool ok = true;
    std::string why;
    if (std::abs(contrastive_loss(0.5, 0, 1.0) - 0.125) > 1e-12) {
        ok = false;
        why = "L(0.5, Y=0, m=1) != 0.125";
    }
    if (ok && contrastive_loss(1.5, 1, 1.0) != 0.0) {
        ok = false;
        why = "L(1.5, Y=1, m=1) != 0";
    }
    if (ok && std::abs(contrastive_loss(0.0, 1, 1.0) - 0.5) > 1e-12) {
        ok = false;
        why = "L(0, Y=1, m=1) != 0.5";
    }
    Rng rng(31415);
    for (int trial = 0; trial < 1000 && ok; ++trial) {
        const double m = rng.uniform(0.05, 3.0);
        const double d = rng.uniform(0.0, 4.0);
        const double beyond = m + rng.uniform(0.0, 2.0);
        if (contrastive_loss(beyond, 1, m) != 0.0) {
            ok = false;
            why = fmt("nonzero loss in the zero region: D=%.3f m=%.3f", beyond, m);
        }
        if (ok && contrastive_loss(d, 1, m) < 0.0) {
            ok = false;
            why = "negative loss";
        }
    }
    report(3, ok,
           ok ? "analytic values exact to 1e-12; zero region holds on 1000 draws"
              : why);
}

// ---------------------------------------------------------------- criterion 4

void criterion_shapes() {
    bool ok = true;
    std::string why;
    try {
        const SiameseConfig full = SiameseConfig::full_scale();
        const nn::Architecture arch = full.tower_architecture();
        nn::Architecture up_to_flatten;
        for (const nn::LayerSpec& l : arch.layers) {
            if (l.kind == nn::LayerKind::flatten) break;
            up_to_flatten.layers.push_back(l);
        }
        const auto s = up_to_flatten.output_shape({128, 128, 3});
        const long flat = static_cast<long>(s[0]) * s[1] * s[2];
        if (flat != 131072) {
            ok = false;
            why = fmt("flatten length %ld != 131072", flat);
        }
        arch.output_shape({128, 128, 3}); // full stack must compose

        const SiameseConfig desk;
        desk.tower_architecture().output_shape(
            {desk.patch_frames, desk.patch_bins, desk.channels});
    } catch (const Error& e) {
        ok = false;
        why = e.what();
    }
    report(4, ok,
           ok ? "full-scale stack flattens to 16*16*512 = 131072; desk scale composes"
              : why);
}

// ---------------------------------------------------------------- criterion 5

void criterion_cqt_anchors() {
    bool ok = true;
    std::string why;
    try {
        ScoreTrack probe;
        probe.events = {{0.0, 1.2, 60, 100, 0.0}};
        const AudioBuffer audio = synthesize(probe, 22050);
        const FeatureMatrix cqt = cqt_magnitude(audio);
        if (cqt.bin_labels[0] != 65.4) {
            ok = false;
            why = "bin 0 label is not exactly 65.4";
        }
        if (ok && std::abs(cqt.bin_labels[24] - 130.8) / 130.8 > 1e-9) {
            ok = false;
            why = fmt("bin 24 label %.12f off 130.8", cqt.bin_labels[24]);
        }

        const int midi_pitches[10] = {36, 41, 45, 50, 55, 60, 64, 69, 74, 79};
        for (int p : midi_pitches) {
            if (!ok) break;
            const double f = 440.0 * std::pow(2.0, (p - 69) / 12.0);
            AudioBuffer sine;
            sine.sample_rate = 22050;
            sine.samples.resize(22050 * 3 / 2);
            for (std::size_t i = 0; i < sine.samples.size(); ++i)
                sine.samples[i] = 0.5f * static_cast<float>(
                                             std::sin(2.0 * M_PI * f * i / 22050.0));
            const FeatureMatrix m = cqt_magnitude(sine);
            const int frame = m.frames / 2;
            int argmax = 0;
            for (int k = 1; k < m.bins; ++k)
                if (m.at(frame, k) > m.at(frame, argmax)) argmax = k;
            const int expected =
                static_cast<int>(std::lround(24.0 * std::log2(f / 65.4)));
            if (argmax != expected) {
                ok = false;
                why = fmt("pitch %d: argmax bin %d != %d", p, argmax, expected);
            }
        }
    } catch (const Error& e) {
        ok = false;
        why = e.what();
    }
    report(5, ok,
           ok ? "bin 0 = 65.4 Hz, bin 24 = 130.8 Hz, tone argmax matches closed "
                "form for 10 pitches"
              : why);
}

// --------------------------------------------------------------- criterion 10

void criterion_metric_suite() {
    bool ok = true;
    std::string why;
    try {
        const GroundTruthMap truth({{0.0, 0.0}, {10.0, 10.0}});
        TimeMap est;
        est.knots.push_back({0.0, 0.0});
        const std::vector<double> events{1.0, 3.0, 5.0, 7.0};
        const double errors[4] = {0.010, 0.030, 0.060, 0.300};
        for (int i = 0; i < 4; ++i)
            est.knots.push_back({events[i], events[i] + errors[i]});
        est.knots.push_back({10.0, 10.31});
        const AlignmentReport r = score_alignment(est, truth, events);
        const double expect[4] = {25.0, 50.0, 75.0, 75.0};
        for (int k = 0; k < 4; ++k)
            if (r.accuracy_pct[k] != expect[k]) {
                ok = false;
                why = fmt("threshold %d: %.1f%% != %.1f%%", k, r.accuracy_pct[k],
                          expect[k]);
            }

        Rng rng(271828);
        for (int trial = 0; trial < 1000 && ok; ++trial) {
            TimeMap noisy;
            noisy.knots.push_back({0.0, 0.0});
            std::vector<double> ev;
            double t = 0.5;
            const int n = static_cast<int>(rng.uniform_int(1, 10));
            for (int i = 0; i < n; ++i) {
                ev.push_back(t);
                noisy.knots.push_back({t, t + rng.uniform(-0.3, 0.3)});
                t += 0.5;
            }
            noisy.knots.push_back({10.0, 10.0 + rng.uniform(0.0, 0.3)});
            if (!noisy.non_decreasing()) continue;
            const AlignmentReport nr = score_alignment(noisy, truth, ev);
            for (int k = 1; k < 4; ++k)
                if (nr.accuracy_pct[k - 1] > nr.accuracy_pct[k]) {
                    ok = false;
                    why = fmt("trial %d: accuracy not monotone in threshold", trial);
                }
        }
    } catch (const Error& e) {
        ok = false;
        why = e.what();
    }
    report(10, ok,
           ok ? "threshold counting exact (25/50/75/75); monotone over 1000 vectors"
              : why);
}

// ------------------------------------------------------ criteria 6-9 pipeline

struct PipelineConfig {
    std::uint64_t corpus_seed = 20240601;
    std::uint64_t train_seed = 7;
    int n_train = 30;
    int n_test = 6;
    int anchors_per_piece = 24;
    int epochs = 12;
    int batch = 32;
    double lr = 1e-3;
    double test_detune_cents = 25.0;

    CorpusConfig corpus() const {
        CorpusConfig cfg;
        cfg.notes_min = 12;
        cfg.notes_max = 20;
        cfg.chord_prob = 0.15;
        cfg.octave_pair_prob = 0.35;
        return cfg;
    }
};

struct PipelineResult {
    // accuracies at the four thresholds, plus per-run artifacts used by the
    // determinism criterion
    std::array<double, 4> siamese_distance{};
    std::array<double, 4> siamese_binary{};
    std::array<double, 4> chroma{};
    double plain_detuned_100 = 0.0;
    double aug_detuned_100 = 0.0;
    double aug_intune_100 = 0.0;
    std::string plain_ckpt_bytes;
    std::string aug_ckpt_bytes;
    std::vector<float> similarity_sample;
    std::vector<std::pair<int, int>> path_sample;
    std::string report_csv;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
}

std::vector<FramePairExample> pipeline_pairs(const std::vector<CorpusPiece>& pieces,
                                             const SiameseConfig& config,
                                             int anchors, std::uint64_t seed) {
    PairConfig pc;
    pc.anchors_per_piece = anchors;
    FeatureParams params;
    std::vector<FramePairExample> all;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
        const FeatureMatrix perf = prepare_features_for_model(
            extract(pieces[i].performance_audio, config.feature, params));
        const FeatureMatrix score = prepare_features_for_model(
            extract(pieces[i].score_audio, config.feature, params));
        auto piece_pairs = make_pairs(perf, score, pieces[i].ground_truth, config,
                                      pc, Rng::derive(seed, i), static_cast<int>(i));
        for (auto& p : piece_pairs) all.push_back(std::move(p));
    }
    return all;
}

std::array<double, 4> mean_accuracy(const std::vector<CorpusPiece>& pieces,
                                    SiameseModel& model, SimilarityMode mode) {
    std::array<double, 4> acc{};
    for (const CorpusPiece& piece : pieces) {
        const TimeMap map = siamese_align_piece(piece, model, mode);
        const AlignmentReport r =
            score_alignment(map, piece.ground_truth, piece.event_times());
        for (int k = 0; k < 4; ++k) acc[k] += r.accuracy_pct[k];
    }
    for (double& a : acc) a /= static_cast<double>(pieces.size());
    return acc;
}

PipelineResult run_pipeline(const PipelineConfig& pc, const std::string& workdir) {
    PipelineResult result;
    fs::create_directories(workdir);

    // corpus: train pieces, augmented copies of the train set, test pieces
    const CorpusConfig corpus_cfg = pc.corpus();
    std::vector<CorpusPiece> all =
        generate_corpus(pc.n_train + pc.n_test, pc.corpus_seed, corpus_cfg);
    std::vector<CorpusPiece> train(all.begin(), all.begin() + pc.n_train);
    std::vector<CorpusPiece> test(all.begin() + pc.n_train, all.end());
    std::vector<CorpusPiece> train_aug =
        augment_corpus(train, 0.2, 30.0, Rng::derive(pc.corpus_seed, 999),
                       corpus_cfg.synth);

    // exercise the on-disk layout: write everything, reload, re-split by id
    std::vector<std::string> train_ids, test_ids;
    for (const auto& p : train_aug) train_ids.push_back(p.id);
    for (const auto& p : test) test_ids.push_back(p.id);
    std::vector<CorpusPiece> everything = train_aug;
    everything.insert(everything.end(), test.begin(), test.end());
    const std::string corpus_dir = workdir + "/corpus";
    fs::remove_all(corpus_dir);
    save_corpus(everything, corpus_dir, train_ids, test_ids);

    const std::vector<CorpusPiece> reloaded = load_corpus(corpus_dir);
    std::vector<CorpusPiece> train_plain_loaded, train_aug_loaded, test_loaded;
    for (const CorpusPiece& p : reloaded) {
        if (std::find(test_ids.begin(), test_ids.end(), p.id) != test_ids.end())
            test_loaded.push_back(p);
        else if (p.id.find("-aug") != std::string::npos)
            train_aug_loaded.push_back(p);
        else
            train_plain_loaded.push_back(p);
    }

    SiameseConfig config; // desk-scale defaults, cqt features
    TrainConfig tc;
    tc.epochs = pc.epochs;
    tc.batch = pc.batch;
    tc.lr = pc.lr;
    tc.seed = pc.train_seed;

    // plain model: non-augmented training pieces only
    const auto plain_pairs = pipeline_pairs(train_plain_loaded, config,
                                            pc.anchors_per_piece,
                                            Rng::derive(pc.train_seed, 1));
    TrainResult plain = train_siamese(plain_pairs, config, tc);
    const std::string plain_ckpt = workdir + "/plain.ckpt";
    save_siamese(plain.model, plain_ckpt);
    result.plain_ckpt_bytes = slurp(plain_ckpt);

    // augmented model: plain + augmented copies
    std::vector<CorpusPiece> aug_set = train_plain_loaded;
    aug_set.insert(aug_set.end(), train_aug_loaded.begin(), train_aug_loaded.end());
    const auto aug_pairs = pipeline_pairs(aug_set, config, pc.anchors_per_piece,
                                          Rng::derive(pc.train_seed, 2));
    TrainResult augmented = train_siamese(aug_pairs, config, tc);
    const std::string aug_ckpt = workdir + "/aug.ckpt";
    save_siamese(augmented.model, aug_ckpt);
    result.aug_ckpt_bytes = slurp(aug_ckpt);

    // in-tune evaluation of the three systems on the test pieces
    SiameseModel plain_model = load_siamese(plain_ckpt);
    SiameseModel aug_model = load_siamese(aug_ckpt);
    result.siamese_distance =
        mean_accuracy(test_loaded, plain_model, SimilarityMode::distance);
    result.siamese_binary =
        mean_accuracy(test_loaded, plain_model, SimilarityMode::binary);
    {
        std::array<double, 4> acc{};
        for (const CorpusPiece& piece : test_loaded) {
            const TimeMap map =
                chroma_dtw_baseline(piece.performance_audio, piece.score_audio);
            const AlignmentReport r =
                score_alignment(map, piece.ground_truth, piece.event_times());
            for (int k = 0; k < 4; ++k) acc[k] += r.accuracy_pct[k];
        }
        for (double& a : acc) a /= static_cast<double>(test_loaded.size());
        result.chroma = acc;
    }

    // detuned test set (tuning robustness)
    std::vector<CorpusPiece> test_detuned;
    for (const CorpusPiece& p : test_loaded)
        test_detuned.push_back(
            detune_performance(p, pc.test_detune_cents, corpus_cfg));
    result.plain_detuned_100 =
        mean_accuracy(test_detuned, plain_model, SimilarityMode::distance)[2];
    result.aug_detuned_100 =
        mean_accuracy(test_detuned, aug_model, SimilarityMode::distance)[2];
    result.aug_intune_100 =
        mean_accuracy(test_loaded, aug_model, SimilarityMode::distance)[2];

    // determinism artifacts: a similarity matrix, a path, and the report csv
    {
        FeatureParams params;
        const CorpusPiece& piece = test_loaded.front();
        const FeatureMatrix score_feat = prepare_features_for_model(
            extract(piece.score_audio, config.feature, params));
        const FeatureMatrix perf_feat = prepare_features_for_model(
            extract(piece.performance_audio, config.feature, params));
        const SimilarityMatrix sim = build_similarity(
            score_feat, perf_feat, plain_model, SimilarityMode::distance, -1.0);
        result.similarity_sample = sim.values;
        result.path_sample = align(sim).steps;
    }
    {
        std::vector<AlignmentSystem> systems;
        auto model_ptr = std::make_shared<SiameseModel>(load_siamese(plain_ckpt));
        systems.push_back({"siamese-cqt-distance",
                           [model_ptr](const CorpusPiece& piece) {
                               return siamese_align_piece(piece, *model_ptr,
                                                          SimilarityMode::distance);
                           }});
        systems.push_back({"dtw-chroma", [](const CorpusPiece& piece) {
                               return chroma_dtw_baseline(piece.performance_audio,
                                                          piece.score_audio);
                           }});
        const BenchmarkResult bench = run_benchmark(test_loaded, systems);
        const std::string report_path = workdir + "/report.csv";
        write_benchmark_csv(bench, report_path);
        result.report_csv = slurp(report_path);
    }
    return result;
}

void criteria_endtoend() {
    const PipelineConfig pc;
    const std::string workdir =
        (fs::temp_directory_path() / "sialign-acceptance").string();

    const double t0 = now_s();
    PipelineResult first;
    bool pipeline_ok = true;
    std::string pipeline_err;
    try {
        first = run_pipeline(pc, workdir + "/run1");
    } catch (const std::exception& e) {
        pipeline_ok = false;
        pipeline_err = e.what();
    }
    const double pipeline_seconds = now_s() - t0;

    if (!pipeline_ok) {
        report(6, false, fmt("pipeline failed: %s", pipeline_err.c_str()));
        report(7, false, "pipeline failed");
        report(8, false, "pipeline failed");
        report(9, false, "pipeline failed");
        return;
    }

    // criterion 6: learned similarity beats handcrafted chroma
    {
        const double siamese_100 = first.siamese_distance[2];
        const double chroma_100 = first.chroma[2];
        const bool ok = siamese_100 >= 90.0 && siamese_100 > chroma_100 &&
                        pipeline_seconds < 900.0;
        report(6, ok,
               fmt("siamese distance %.1f%% @100ms (>= 90 needed), chroma %.1f%%, "
                   "pipeline %.0f s",
                   siamese_100, chroma_100, pipeline_seconds));
    }

    // criterion 7: distance-mode >= binary-mode at 50 ms
    {
        const bool ok = first.siamese_distance[1] >= first.siamese_binary[1];
        report(7, ok,
               fmt("distance %.1f%% vs binary %.1f%% @50ms", first.siamese_distance[1],
                   first.siamese_binary[1]));
    }

    // criterion 8: augmentation holds up under a +25 cent detune
    {
        const double drop = first.aug_intune_100 - first.aug_detuned_100;
        const double plain_drop = first.siamese_distance[2] - first.plain_detuned_100;
        const bool ok = drop <= 10.0;
        report(8, ok,
               fmt("augmented model drop %.1f pp @100ms (max 10); unaugmented drop "
                   "%.1f pp (reported)",
                   drop, plain_drop));
    }

    // criterion 9: the whole pipeline is bit-deterministic
    {
        bool ok = true;
        std::string why;
        try {
            const PipelineResult second = run_pipeline(pc, workdir + "/run2");
            if (second.plain_ckpt_bytes != first.plain_ckpt_bytes ||
                second.aug_ckpt_bytes != first.aug_ckpt_bytes) {
                ok = false;
                why = "checkpoint bytes differ";
            } else if (second.similarity_sample != first.similarity_sample) {
                ok = false;
                why = "similarity matrices differ";
            } else if (second.path_sample != first.path_sample) {
                ok = false;
                why = "warping paths differ";
            } else if (second.report_csv != first.report_csv) {
                ok = false;
                why = "benchmark reports differ";
            }
        } catch (const std::exception& e) {
            ok = false;
            why = e.what();
        }
        report(9, ok,
               ok ? "rerun reproduced checkpoints, matrices, paths and reports "
                    "bit-identically"
                  : why);
    }

    std::error_code ec;
    fs::remove_all(workdir, ec);
}

} // namespace

int main(int argc, char** argv) {
    std::string suite = "all";
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--suite") == 0 && i + 1 < argc)
            suite = argv[i + 1];
    }

    if (suite == "properties" || suite == "all") {
        criterion_dtw_oracle();
        criterion_gradients();
        criterion_contrastive_values();
        criterion_shapes();
        criterion_cqt_anchors();
        criterion_metric_suite();
    }
    if (suite == "endtoend" || suite == "all") {
        criteria_endtoend();
    }

    if (failures) {
        std::printf("%d criterion(s) failed\n", failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}
