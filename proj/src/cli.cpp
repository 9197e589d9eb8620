#include "sialign/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "sialign/corpus.hpp"
#include "sialign/dtw.hpp"
#include "sialign/error.hpp"
#include "sialign/evaluate.hpp"
#include "sialign/features.hpp"
#include "sialign/png.hpp"
#include "sialign/salience.hpp"
#include "sialign/siamese.hpp"
#include "sialign/similarity.hpp"

namespace fs = std::filesystem;

namespace sialign {
namespace {

void write_run_json(const fs::path& out_target, const std::string& subcommand,
                    const nlohmann::json& config) {
    nlohmann::json j;
    j["subcommand"] = subcommand;
    j["config"] = config;

    fs::path run_path;
    std::error_code ec;
    if (fs::is_directory(out_target) || out_target.extension().empty()) {
        fs::create_directories(out_target, ec);
        run_path = out_target / "run.json";
    } else {
        if (out_target.has_parent_path())
            fs::create_directories(out_target.parent_path(), ec);
        run_path = out_target;
        run_path += ".run.json";
    }
    std::ofstream out(run_path, std::ios::trunc);
    if (!out) raise(ErrorKind::io, "cannot write " + run_path.string());
    out << j.dump(2) << "\n";
}

struct SynthArgs {
    std::string out;
    int pieces = 8;
    int test_pieces = 0;
    std::uint64_t seed = 0;
    double augment_fraction = 0.0;
    double augment_cents = 30.0;
    CorpusConfig corpus;
};

int cmd_synth(const SynthArgs& a) {
    nlohmann::json cfg{{"out", a.out},
                       {"pieces", a.pieces},
                       {"test_pieces", a.test_pieces},
                       {"seed", a.seed},
                       {"augment_fraction", a.augment_fraction},
                       {"augment_cents", a.augment_cents},
                       {"notes", {a.corpus.notes_min, a.corpus.notes_max}},
                       {"chord_prob", a.corpus.chord_prob},
                       {"octave_pair_prob", a.corpus.octave_pair_prob},
                       {"slopes", {a.corpus.slope_min, a.corpus.slope_max}},
                       {"detune_cents", {a.corpus.detune_min_cents, a.corpus.detune_max_cents}},
                       {"sample_rate", a.corpus.sample_rate}};
    write_run_json(a.out, "synth", cfg);

    std::vector<CorpusPiece> pieces = generate_corpus(a.pieces, a.seed, a.corpus);
    if (a.test_pieces < 0 || a.test_pieces >= a.pieces)
        raise(ErrorKind::invalid_argument, "--test-pieces must be in [0, pieces)");

    std::vector<std::string> train_ids, test_ids;
    for (int i = 0; i < a.pieces; ++i)
        (i < a.pieces - a.test_pieces ? train_ids : test_ids)
            .push_back(pieces[i].id);

    if (a.augment_fraction > 0.0) {
        // augment only the training portion; test pieces stay untouched
        std::vector<CorpusPiece> train(pieces.begin(),
                                       pieces.begin() + train_ids.size());
        std::vector<CorpusPiece> augmented =
            augment_corpus(train, a.augment_fraction, a.augment_cents,
                           Rng::derive(a.seed, 777), a.corpus.synth);
        for (std::size_t i = train.size(); i < augmented.size(); ++i) {
            train_ids.push_back(augmented[i].id);
            pieces.push_back(augmented[i]);
        }
    }

    const bool write_split = a.test_pieces > 0 || a.augment_fraction > 0.0;
    save_corpus(pieces, a.out, write_split ? train_ids : std::vector<std::string>{},
                write_split ? test_ids : std::vector<std::string>{});
    std::cout << "wrote " << pieces.size() << " pieces to " << a.out << "\n";
    return 0;
}

struct FeaturesArgs {
    std::string input;
    std::string kind = "cqt";
    std::string out;
    std::string png;
    std::string salience_checkpoint;
};

int cmd_features(const FeaturesArgs& a) {
    write_run_json(a.out, "features",
                   {{"input", a.input},
                    {"kind", a.kind},
                    {"out", a.out},
                    {"png", a.png},
                    {"salience_checkpoint", a.salience_checkpoint}});

    const AudioBuffer audio = load_wav(a.input);
    FeatureMatrix m;
    if (a.kind == "salience" && !a.salience_checkpoint.empty()) {
        SalienceModel model = load_salience_model(a.salience_checkpoint);
        m = apply_salience_model(model, cqt_magnitude(audio));
    } else {
        m = extract(audio, feature_kind_from_string(a.kind));
    }
    write_feature_csv(m, a.out);
    if (!a.png.empty())
        write_png_gray(a.png, m.bins, m.frames,
                       matrix_to_pixels(m.values.data(), m.frames, m.bins));
    std::cout << "wrote " << m.frames << "x" << m.bins << " " << a.kind
              << " matrix to " << a.out << "\n";
    return 0;
}

// pieces used for training: the split manifest when present, else everything
std::vector<CorpusPiece> training_pieces(const std::string& corpus_dir) {
    std::vector<CorpusPiece> pieces = load_corpus(corpus_dir);
    CorpusSplit split;
    if (load_split(corpus_dir, split)) {
        std::vector<CorpusPiece> subset;
        for (CorpusPiece& p : pieces)
            if (std::find(split.train_ids.begin(), split.train_ids.end(), p.id) !=
                split.train_ids.end())
                subset.push_back(std::move(p));
        if (subset.empty())
            raise(ErrorKind::invalid_argument, "split.json lists no known pieces");
        return subset;
    }
    return pieces;
}

std::vector<FramePairExample> pairs_from_corpus(
    const std::vector<CorpusPiece>& pieces, const SiameseConfig& config,
    const PairConfig& pair_config, std::uint64_t seed) {
    FeatureParams params;
    std::vector<FramePairExample> all;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
        const CorpusPiece& piece = pieces[i];
        const FeatureMatrix perf = prepare_features_for_model(
            extract(piece.performance_audio, config.feature, params));
        const FeatureMatrix score = prepare_features_for_model(
            extract(piece.score_audio, config.feature, params));
        std::vector<FramePairExample> piece_pairs =
            make_pairs(perf, score, piece.ground_truth, config, pair_config,
                       Rng::derive(seed, i), static_cast<int>(i));
        for (FramePairExample& p : piece_pairs) all.push_back(std::move(p));
    }
    if (all.empty())
        raise(ErrorKind::invalid_argument, "corpus produced no training pairs");
    return all;
}

struct MakePairsArgs {
    std::string corpus;
    std::string out;
    std::string feature = "cqt";
    int pairs_per_piece = 24;
    int patch_frames = 32;
    int patch_bins = 32;
    std::uint64_t seed = 0;
};

int cmd_make_pairs(const MakePairsArgs& a) {
    write_run_json(a.out, "make-pairs",
                   {{"corpus", a.corpus},
                    {"out", a.out},
                    {"feature", a.feature},
                    {"pairs_per_piece", a.pairs_per_piece},
                    {"patch", {a.patch_frames, a.patch_bins}},
                    {"seed", a.seed}});

    SiameseConfig config;
    config.feature = feature_kind_from_string(a.feature);
    config.patch_frames = a.patch_frames;
    config.patch_bins = a.patch_bins;
    PairConfig pair_config;
    pair_config.anchors_per_piece = a.pairs_per_piece;

    const std::vector<FramePairExample> pairs =
        pairs_from_corpus(training_pieces(a.corpus), config, pair_config, a.seed);
    save_pairs(pairs, a.out);
    std::cout << "wrote " << pairs.size() << " pairs to " << a.out << "\n";
    return 0;
}

struct TrainArgs {
    std::string pairs;
    std::string corpus;
    std::string out;
    std::string loss_csv;
    std::string feature = "cqt";
    int pairs_per_piece = 24;
    int patch_frames = 32;
    int patch_bins = 32;
    int embed_dim = 128;
    double margin = 1.0;
    double tau = -1.0;
    int epochs = 20;
    int batch = 32;
    double lr = 1e-3;
    double val_fraction = 0.2;
    std::uint64_t seed = 0;
};

int cmd_train(const TrainArgs& a) {
    write_run_json(a.out, "train",
                   {{"pairs", a.pairs},
                    {"corpus", a.corpus},
                    {"out", a.out},
                    {"feature", a.feature},
                    {"pairs_per_piece", a.pairs_per_piece},
                    {"patch", {a.patch_frames, a.patch_bins}},
                    {"embed_dim", a.embed_dim},
                    {"margin", a.margin},
                    {"tau", a.tau},
                    {"epochs", a.epochs},
                    {"batch", a.batch},
                    {"lr", a.lr},
                    {"val_fraction", a.val_fraction},
                    {"seed", a.seed}});

    SiameseConfig config;
    config.feature = feature_kind_from_string(a.feature);
    config.patch_frames = a.patch_frames;
    config.patch_bins = a.patch_bins;
    config.embed_dim = a.embed_dim;
    config.margin = a.margin;
    config.binarize_tau = a.tau > 0.0 ? a.tau : a.margin / 2.0;

    std::vector<FramePairExample> pairs;
    if (!a.pairs.empty()) {
        pairs = load_pairs(a.pairs);
    } else {
        PairConfig pair_config;
        pair_config.anchors_per_piece = a.pairs_per_piece;
        pairs = pairs_from_corpus(training_pieces(a.corpus), config, pair_config,
                                  Rng::derive(a.seed, 1));
    }

    TrainConfig tc;
    tc.epochs = a.epochs;
    tc.batch = a.batch;
    tc.lr = a.lr;
    tc.val_fraction = a.val_fraction;
    tc.seed = a.seed;

    TrainResult result = train_siamese(pairs, config, tc);
    save_siamese(result.model, a.out);

    if (!a.loss_csv.empty()) {
        std::ofstream out(a.loss_csv, std::ios::trunc);
        if (!out) raise(ErrorKind::io, "cannot write " + a.loss_csv);
        out << "epoch,train_loss,val_loss\n";
        out.precision(10);
        for (std::size_t e = 0; e < result.train_loss.size(); ++e)
            out << e << "," << result.train_loss[e] << "," << result.val_loss[e]
                << "\n";
    }
    std::cout << "trained " << result.train_loss.size() << " epochs, best epoch "
              << result.best_epoch << " (val loss "
              << result.val_loss[result.best_epoch] << "), checkpoint " << a.out
              << "\n";
    return 0;
}

struct AlignArgs {
    std::string perf;
    std::string score;
    std::string checkpoint;
    std::string out = ".";
    std::string mode = "distance";
    bool baseline_chroma = false;
    double tau = -1.0;
    int band = 0;
    bool dump_similarity = false;
    bool dump_png = false;
};

AudioBuffer load_score_side(const std::string& path, int sample_rate_hint) {
    const fs::path p(path);
    if (p.extension() == ".mid" || p.extension() == ".midi") {
        const ScoreTrack track = parse_midi(path);
        return synthesize(track, sample_rate_hint);
    }
    return load_wav(path);
}

int cmd_align(const AlignArgs& a) {
    write_run_json(a.out, "align",
                   {{"perf", a.perf},
                    {"score", a.score},
                    {"checkpoint", a.checkpoint},
                    {"out", a.out},
                    {"mode", a.mode},
                    {"baseline_chroma", a.baseline_chroma},
                    {"tau", a.tau},
                    {"band", a.band}});

    const AudioBuffer perf = load_wav(a.perf);
    const AudioBuffer score = load_score_side(a.score, perf.sample_rate);
    const std::optional<int> band =
        a.band > 0 ? std::optional<int>(a.band) : std::nullopt;

    WarpingPath path;
    TimeMap map;
    double hop_row = 0.0, hop_col = 0.0;
    if (a.baseline_chroma) {
        const FeatureMatrix score_chroma = chroma(cqt_magnitude(score));
        const FeatureMatrix perf_chroma = chroma(cqt_magnitude(perf));
        const int rows = score_chroma.frames, cols = perf_chroma.frames;
        std::vector<double> cost(static_cast<std::size_t>(rows) * cols);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) {
                double acc = 0.0;
                for (int c = 0; c < 12; ++c) {
                    const double d = static_cast<double>(score_chroma.at(i, c)) -
                                     perf_chroma.at(j, c);
                    acc += d * d;
                }
                cost[static_cast<std::size_t>(i) * cols + j] = std::sqrt(acc);
            }
        path = align_matrix(rows, cols, cost, band);
        hop_row = score_chroma.frame_hop_s;
        hop_col = perf_chroma.frame_hop_s;
    } else {
        SiameseModel model = load_siamese(a.checkpoint);
        FeatureParams params;
        const FeatureMatrix score_feat = prepare_features_for_model(
            extract(score, model.config.feature, params));
        const FeatureMatrix perf_feat = prepare_features_for_model(
            extract(perf, model.config.feature, params));
        const SimilarityMatrix sim =
            build_similarity(score_feat, perf_feat, model,
                             similarity_mode_from_string(a.mode), a.tau);
        if (a.dump_similarity)
            write_similarity_csv(sim, (fs::path(a.out) / "similarity.csv").string());
        if (a.dump_png)
            write_png_gray((fs::path(a.out) / "similarity.png").string(), sim.cols,
                           sim.rows,
                           matrix_to_pixels(sim.values.data(), sim.rows, sim.cols));
        path = align(sim, band);
        hop_row = sim.row_hop_s;
        hop_col = sim.col_hop_s;
    }
    map = path_to_time_map(path, hop_row, hop_col);

    std::ofstream pf((fs::path(a.out) / "path.csv").string(), std::ios::trunc);
    if (!pf) raise(ErrorKind::io, "cannot write path.csv");
    pf << "ref_time_s,perf_time_s\n";
    pf.precision(9);
    for (const auto& [i, j] : path.steps)
        pf << i * hop_row << "," << j * hop_col << "\n";

    std::ofstream mf((fs::path(a.out) / "map.csv").string(), std::ios::trunc);
    if (!mf) raise(ErrorKind::io, "cannot write map.csv");
    mf << "ref_time_s,perf_time_s\n";
    mf.precision(9);
    for (const TimeKnot& k : map.knots) mf << k.x << "," << k.y << "\n";

    std::cout << "total cost " << path.total_cost << " over " << path.steps.size()
              << " steps\n";
    return 0;
}

struct EvaluateArgs {
    std::string corpus;
    std::string out = ".";
    std::vector<std::string> systems;
    int band = 0;
};

AlignmentSystem parse_system(const std::string& spec, std::optional<int> band) {
    if (spec == "chroma")
        return {"dtw-chroma", [](const CorpusPiece& piece) {
                    return chroma_dtw_baseline(piece.performance_audio,
                                               piece.score_audio);
                }};
    // siamese:<checkpoint>:<mode>
    if (spec.rfind("siamese:", 0) == 0) {
        const std::string rest = spec.substr(8);
        const auto colon = rest.rfind(':');
        if (colon == std::string::npos)
            raise(ErrorKind::invalid_argument,
                  "system spec must be siamese:<checkpoint>:<mode>");
        const std::string ckpt = rest.substr(0, colon);
        const SimilarityMode mode =
            similarity_mode_from_string(rest.substr(colon + 1));
        auto model = std::make_shared<SiameseModel>(load_siamese(ckpt));
        const std::string name =
            std::string("siamese-") + to_string(model->config.feature) + "-" +
            to_string(mode);
        return {name, [model, mode, band](const CorpusPiece& piece) {
                    return siamese_align_piece(piece, *model, mode, -1.0, band);
                }};
    }
    raise(ErrorKind::invalid_argument, "unknown system spec: " + spec);
}

int cmd_evaluate(const EvaluateArgs& a) {
    write_run_json(a.out, "evaluate",
                   {{"corpus", a.corpus},
                    {"out", a.out},
                    {"systems", a.systems},
                    {"band", a.band}});

    std::vector<CorpusPiece> pieces = load_corpus(a.corpus);
    CorpusSplit split;
    if (load_split(a.corpus, split) && !split.test_ids.empty()) {
        std::vector<CorpusPiece> subset;
        for (CorpusPiece& p : pieces)
            if (std::find(split.test_ids.begin(), split.test_ids.end(), p.id) !=
                split.test_ids.end())
                subset.push_back(std::move(p));
        pieces = std::move(subset);
    }
    if (pieces.empty()) raise(ErrorKind::invalid_argument, "no pieces to evaluate");

    const std::optional<int> band =
        a.band > 0 ? std::optional<int>(a.band) : std::nullopt;
    std::vector<AlignmentSystem> systems;
    for (const std::string& spec : a.systems)
        systems.push_back(parse_system(spec, band));

    const BenchmarkResult result = run_benchmark(pieces, systems);
    std::cout << render_benchmark_table(result);
    write_benchmark_csv(result, (fs::path(a.out) / "report.csv").string());
    return result.any_failure ? 1 : 0;
}

} // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"audio-to-score alignment with learned frame similarity"};
    app.require_subcommand(1);

    SynthArgs synth;
    CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic corpus");
    synth_cmd->add_option("--out", synth.out, "corpus output directory")->required();
    synth_cmd->add_option("--pieces", synth.pieces, "number of pieces");
    synth_cmd->add_option("--test-pieces", synth.test_pieces,
                          "trailing pieces reserved for evaluation");
    synth_cmd->add_option("--seed", synth.seed, "corpus seed");
    synth_cmd->add_option("--augment-fraction", synth.augment_fraction,
                          "extra detuned training copies (fraction of train pieces)");
    synth_cmd->add_option("--augment-cents", synth.augment_cents,
                          "max augmentation detune magnitude");
    synth_cmd->add_option("--notes-min", synth.corpus.notes_min, "min notes per piece");
    synth_cmd->add_option("--notes-max", synth.corpus.notes_max, "max notes per piece");
    synth_cmd->add_option("--chord-prob", synth.corpus.chord_prob, "chord probability");
    synth_cmd->add_option("--octave-pair-prob", synth.corpus.octave_pair_prob,
                          "probability of octave-related consecutive notes");
    synth_cmd->add_option("--slope-min", synth.corpus.slope_min, "min tempo-warp slope");
    synth_cmd->add_option("--slope-max", synth.corpus.slope_max, "max tempo-warp slope");
    synth_cmd->add_option("--detune-min", synth.corpus.detune_min_cents,
                          "min performance detune (cents)");
    synth_cmd->add_option("--detune-max", synth.corpus.detune_max_cents,
                          "max performance detune (cents)");
    synth_cmd->add_option("--sample-rate", synth.corpus.sample_rate, "render rate");

    FeaturesArgs features;
    CLI::App* features_cmd =
        app.add_subcommand("features", "extract a feature matrix from audio");
    features_cmd->add_option("--input", features.input, "input wav")->required();
    features_cmd->add_option("--kind", features.kind, "stft|cqt|chroma|salience");
    features_cmd->add_option("--out", features.out, "output csv")->required();
    features_cmd->add_option("--png", features.png, "optional heat-map png");
    features_cmd->add_option("--salience-checkpoint", features.salience_checkpoint,
                             "learned salience model (kind=salience)");

    MakePairsArgs make_pairs_args;
    CLI::App* pairs_cmd =
        app.add_subcommand("make-pairs", "build a balanced frame-pair set");
    pairs_cmd->add_option("--corpus", make_pairs_args.corpus, "corpus directory")
        ->required();
    pairs_cmd->add_option("--out", make_pairs_args.out, "output pair file")->required();
    pairs_cmd->add_option("--feature", make_pairs_args.feature, "feature kind");
    pairs_cmd->add_option("--pairs-per-piece", make_pairs_args.pairs_per_piece,
                          "sampled score frames per piece");
    pairs_cmd->add_option("--patch-frames", make_pairs_args.patch_frames,
                          "patch width (frames)");
    pairs_cmd->add_option("--patch-bins", make_pairs_args.patch_bins,
                          "patch height (bins)");
    pairs_cmd->add_option("--seed", make_pairs_args.seed, "sampling seed");

    TrainArgs train;
    CLI::App* train_cmd = app.add_subcommand("train", "train the siamese model");
    train_cmd->add_option("--pairs", train.pairs, "pair file from make-pairs");
    train_cmd->add_option("--corpus", train.corpus,
                          "corpus directory (builds pairs on the fly)");
    train_cmd->add_option("--out", train.out, "checkpoint path")->required();
    train_cmd->add_option("--loss-csv", train.loss_csv, "loss-curve csv");
    train_cmd->add_option("--feature", train.feature, "feature kind");
    train_cmd->add_option("--pairs-per-piece", train.pairs_per_piece,
                          "sampled score frames per piece (with --corpus)");
    train_cmd->add_option("--patch-frames", train.patch_frames, "patch width");
    train_cmd->add_option("--patch-bins", train.patch_bins, "patch height");
    train_cmd->add_option("--embed-dim", train.embed_dim, "embedding length");
    train_cmd->add_option("--margin", train.margin, "contrastive margin");
    train_cmd->add_option("--tau", train.tau, "binarize threshold (default margin/2)");
    train_cmd->add_option("--epochs", train.epochs, "training epochs");
    train_cmd->add_option("--batch", train.batch, "minibatch size");
    train_cmd->add_option("--lr", train.lr, "learning rate");
    train_cmd->add_option("--val-fraction", train.val_fraction,
                          "validation piece fraction");
    train_cmd->add_option("--seed", train.seed, "training seed");

    AlignArgs align_args;
    CLI::App* align_cmd = app.add_subcommand("align", "align a performance to a score");
    align_cmd->add_option("--perf", align_args.perf, "performance wav")->required();
    align_cmd->add_option("--score", align_args.score, "score wav or midi")->required();
    align_cmd->add_option("--checkpoint", align_args.checkpoint, "siamese checkpoint");
    align_cmd->add_option("--out", align_args.out, "output directory");
    align_cmd->add_option("--mode", align_args.mode, "binary|distance");
    align_cmd->add_flag("--baseline-chroma", align_args.baseline_chroma,
                        "use the chroma-DTW baseline instead of a model");
    align_cmd->add_option("--tau", align_args.tau, "binarize threshold override");
    align_cmd->add_option("--band", align_args.band, "Sakoe-Chiba band radius");
    align_cmd->add_flag("--dump-similarity", align_args.dump_similarity,
                        "write similarity.csv");
    align_cmd->add_flag("--dump-png", align_args.dump_png, "write similarity.png");

    EvaluateArgs evaluate;
    CLI::App* eval_cmd =
        app.add_subcommand("evaluate", "run the benchmark table over a corpus");
    eval_cmd->add_option("--corpus", evaluate.corpus, "corpus directory")->required();
    eval_cmd->add_option("--out", evaluate.out, "output directory");
    eval_cmd
        ->add_option("--system", evaluate.systems,
                     "chroma or siamese:<checkpoint>:<mode> (repeatable)")
        ->required();
    eval_cmd->add_option("--band", evaluate.band, "Sakoe-Chiba band radius");

    try {
        app.parse(argc, const_cast<char**>(argv));
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (synth_cmd->parsed()) return cmd_synth(synth);
        if (features_cmd->parsed()) return cmd_features(features);
        if (pairs_cmd->parsed()) return cmd_make_pairs(make_pairs_args);
        if (train_cmd->parsed()) {
            if (train.pairs.empty() && train.corpus.empty())
                raise(ErrorKind::invalid_argument,
                      "train needs --pairs or --corpus");
            return cmd_train(train);
        }
        if (align_cmd->parsed()) {
            if (!align_args.baseline_chroma && align_args.checkpoint.empty())
                raise(ErrorKind::invalid_argument,
                      "align needs --checkpoint unless --baseline-chroma is set");
            return cmd_align(align_args);
        }
        if (eval_cmd->parsed()) return cmd_evaluate(evaluate);
    } catch (const Error& e) {
        std::cerr << "error: " << to_string(e.kind()) << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

} // namespace sialign
