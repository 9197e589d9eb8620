#include "sialign/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "sialign/error.hpp"
#include "sialign/rng.hpp"

namespace fs = std::filesystem;

namespace sialign {

namespace {

ScoreTrack random_track(Rng& rng, const CorpusConfig& cfg) {
    ScoreTrack track;
    track.ticks_per_quarter = 480;
    track.tempo_map = {TempoChange{0, 500000}};

    const int n_notes =
        static_cast<int>(rng.uniform_int(cfg.notes_min, cfg.notes_max));
    double cursor = 0.0;
    int prev_pitch = -1;
    for (int i = 0; i < n_notes; ++i) {
        const double dur = rng.uniform(cfg.duration_min_s, cfg.duration_max_s);
        int pitch;
        if (prev_pitch >= 0 && rng.uniform() < cfg.octave_pair_prob) {
            pitch = prev_pitch + (rng.uniform() < 0.5 ? 12 : -12);
            if (pitch < cfg.pitch_min || pitch > cfg.pitch_max)
                pitch = prev_pitch; // fall back to a plain repeat
        } else {
            pitch = static_cast<int>(rng.uniform_int(cfg.pitch_min, cfg.pitch_max));
        }
        const int velocity = static_cast<int>(rng.uniform_int(64, 120));

        NoteEvent e;
        e.onset_s = cursor;
        e.duration_s = dur;
        e.pitch = pitch;
        e.velocity = velocity;
        track.events.push_back(e);

        if (rng.uniform() < cfg.chord_prob) {
            const int extra =
                static_cast<int>(rng.uniform_int(cfg.chord_min - 1, cfg.chord_max - 1));
            std::set<int> used{pitch};
            for (int k = 0; k < extra; ++k) {
                const int p =
                    static_cast<int>(rng.uniform_int(cfg.pitch_min, cfg.pitch_max));
                if (!used.insert(p).second) continue;
                NoteEvent chord_note = e;
                chord_note.pitch = p;
                track.events.push_back(chord_note);
            }
        }

        prev_pitch = pitch;
        cursor += dur;
    }
    return track;
}

TimeMap random_warp_curve(Rng& rng, const CorpusConfig& cfg, double score_dur) {
    const int segments =
        static_cast<int>(rng.uniform_int(cfg.warp_segments_min, cfg.warp_segments_max));
    std::vector<double> xs{0.0};
    for (int i = 0; i < segments - 1; ++i)
        xs.push_back(rng.uniform(0.0, score_dur));
    xs.push_back(std::max(score_dur, 1e-3));
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end(),
                         [](double a, double b) { return b - a < 1e-3; }),
             xs.end());
    if (xs.back() < score_dur) xs.back() = std::max(score_dur, 1e-3);

    TimeMap curve;
    double y = 0.0;
    curve.knots.push_back({0.0, 0.0});
    for (std::size_t i = 1; i < xs.size(); ++i) {
        const double slope = rng.uniform(cfg.slope_min, cfg.slope_max);
        y += slope * (xs[i] - xs[i - 1]);
        curve.knots.push_back({xs[i], y});
    }
    return curve;
}

std::string piece_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "piece-%03d", index);
    return buf;
}

ScoreTrack detuned(const ScoreTrack& track, double cents) {
    ScoreTrack out = track;
    for (NoteEvent& e : out.events) e.detune_cents += cents;
    return out;
}

// the warped performance track, reconstructed from the stored ground truth
ScoreTrack performance_track(const CorpusPiece& piece) {
    return warp_tempo(piece.score_track, piece.ground_truth).first;
}

} // namespace

std::vector<CorpusPiece> generate_corpus(int n_pieces, std::uint64_t seed,
                                         const CorpusConfig& cfg) {
    if (n_pieces < 1) raise(ErrorKind::invalid_argument, "need at least one piece");

    std::vector<CorpusPiece> pieces;
    pieces.reserve(n_pieces);
    for (int p = 0; p < n_pieces; ++p) {
        Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(p)));

        CorpusPiece piece;
        piece.id = piece_name(p);
        piece.provenance.seed = Rng::derive(seed, static_cast<std::uint64_t>(p));
        piece.score_track = random_track(rng, cfg);
        piece.score_audio = synthesize(piece.score_track, cfg.sample_rate, cfg.synth);

        const TimeMap curve =
            random_warp_curve(rng, cfg, piece.score_track.end_time_s());
        auto [perf_track, gt] = warp_tempo(piece.score_track, curve);
        piece.ground_truth = std::move(gt);

        double detune = 0.0;
        if (cfg.detune_max_cents > cfg.detune_min_cents)
            detune = rng.uniform(cfg.detune_min_cents, cfg.detune_max_cents);
        else if (cfg.detune_min_cents != 0.0)
            detune = cfg.detune_min_cents;
        piece.provenance.detune_cents = detune;
        if (detune != 0.0) perf_track = detuned(perf_track, detune);

        piece.performance_audio = synthesize(perf_track, cfg.sample_rate, cfg.synth);
        pieces.push_back(std::move(piece));
    }
    return pieces;
}

std::vector<CorpusPiece> augment_corpus(const std::vector<CorpusPiece>& pieces,
                                        double fraction, double max_cents,
                                        std::uint64_t seed, const SynthConfig& synth) {
    if (fraction < 0.0 || fraction > 1.0)
        raise(ErrorKind::invalid_argument, "augment fraction must be in [0, 1]");

    std::vector<CorpusPiece> out = pieces;
    const int extra =
        static_cast<int>(std::lround(fraction * static_cast<double>(pieces.size())));
    if (extra == 0) return out;

    Rng rng(seed);
    std::vector<std::size_t> order(pieces.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);

    for (int k = 0; k < extra; ++k) {
        const CorpusPiece& src = pieces[order[k % order.size()]];
        const double cents = rng.uniform(-max_cents, max_cents);

        CorpusPiece copy = src;
        copy.id = src.id + "-aug" + std::to_string(k);
        copy.provenance.detune_cents = src.provenance.detune_cents + cents;
        copy.provenance.source_id = src.id;

        const ScoreTrack perf =
            detuned(performance_track(src), copy.provenance.detune_cents);
        copy.performance_audio =
            synthesize(perf, src.performance_audio.sample_rate, synth);
        out.push_back(std::move(copy));
    }
    return out;
}

CorpusPiece detune_performance(const CorpusPiece& piece, double cents,
                               const CorpusConfig& config) {
    CorpusPiece out = piece;
    out.provenance.detune_cents = piece.provenance.detune_cents + cents;
    const ScoreTrack perf =
        detuned(performance_track(piece), out.provenance.detune_cents);
    out.performance_audio =
        synthesize(perf, piece.performance_audio.sample_rate, config.synth);
    return out;
}

void save_piece(const CorpusPiece& piece, const std::string& root) {
    const fs::path dir = fs::path(root) / piece.id;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) raise(ErrorKind::io, "cannot create " + dir.string());

    write_midi(piece.score_track, (dir / "score.mid").string());
    save_wav(piece.score_audio, (dir / "score.wav").string());
    save_wav(piece.performance_audio, (dir / "perf.wav").string());

    std::ofstream gt((dir / "gt.csv").string(), std::ios::trunc);
    if (!gt) raise(ErrorKind::io, "cannot write gt.csv for " + piece.id);
    gt << "score_time_s,perf_time_s\n";
    gt.precision(12);
    for (const TimeKnot& k : piece.ground_truth.knots)
        gt << k.x << "," << k.y << "\n";

    nlohmann::json meta;
    meta["id"] = piece.id;
    meta["seed"] = piece.provenance.seed;
    meta["detune_cents"] = piece.provenance.detune_cents;
    meta["source_id"] = piece.provenance.source_id;
    meta["sample_rate"] = piece.performance_audio.sample_rate;
    std::ofstream mj((dir / "meta.json").string(), std::ios::trunc);
    if (!mj) raise(ErrorKind::io, "cannot write meta.json for " + piece.id);
    mj << meta.dump(2) << "\n";
}

CorpusPiece load_piece(const std::string& dir) {
    const fs::path d(dir);
    if (!fs::exists(d / "perf.wav") || !fs::exists(d / "gt.csv"))
        raise(ErrorKind::io, "not a corpus piece directory: " + dir);

    CorpusPiece piece;
    piece.id = d.filename().string();
    piece.score_track = parse_midi((d / "score.mid").string());
    piece.performance_audio = load_wav((d / "perf.wav").string());
    if (fs::exists(d / "score.wav")) {
        piece.score_audio = load_wav((d / "score.wav").string());
    } else {
        piece.score_audio =
            synthesize(piece.score_track, piece.performance_audio.sample_rate);
    }

    std::ifstream gt((d / "gt.csv").string());
    if (!gt) raise(ErrorKind::io, "cannot read gt.csv in " + dir);
    std::string line;
    bool first = true;
    while (std::getline(gt, line)) {
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line.rfind("score_time_s", 0) == 0) continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            raise(ErrorKind::format, "bad gt.csv row in " + dir);
        piece.ground_truth.knots.push_back(
            {std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
    }
    require_strictly_increasing(piece.ground_truth, "ground truth in " + dir);

    if (fs::exists(d / "meta.json")) {
        std::ifstream mj((d / "meta.json").string());
        nlohmann::json meta;
        try {
            mj >> meta;
            piece.provenance.seed = meta.value("seed", 0ull);
            piece.provenance.detune_cents = meta.value("detune_cents", 0.0);
            piece.provenance.source_id = meta.value("source_id", "");
        } catch (const nlohmann::json::exception&) {
            raise(ErrorKind::format, "bad meta.json in " + dir);
        }
    }
    return piece;
}

void save_corpus(const std::vector<CorpusPiece>& pieces, const std::string& root,
                 const std::vector<std::string>& train_ids,
                 const std::vector<std::string>& test_ids) {
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) raise(ErrorKind::io, "cannot create " + root);
    for (const CorpusPiece& p : pieces) save_piece(p, root);
    if (!train_ids.empty() || !test_ids.empty()) {
        nlohmann::json j;
        j["train"] = train_ids;
        j["test"] = test_ids;
        std::ofstream out((fs::path(root) / "split.json").string(), std::ios::trunc);
        if (!out) raise(ErrorKind::io, "cannot write split.json");
        out << j.dump(2) << "\n";
    }
}

std::vector<CorpusPiece> load_corpus(const std::string& root) {
    if (!fs::is_directory(root))
        raise(ErrorKind::io, "corpus root is not a directory: " + root);
    std::vector<std::string> dirs;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory()) dirs.push_back(entry.path().string());
    std::sort(dirs.begin(), dirs.end());

    std::vector<CorpusPiece> pieces;
    for (const std::string& d : dirs) pieces.push_back(load_piece(d));
    if (pieces.empty()) raise(ErrorKind::io, "corpus has no pieces: " + root);
    return pieces;
}

bool load_split(const std::string& root, CorpusSplit& split) {
    const fs::path p = fs::path(root) / "split.json";
    if (!fs::exists(p)) return false;
    std::ifstream in(p.string());
    nlohmann::json j;
    try {
        in >> j;
        split.train_ids = j.at("train").get<std::vector<std::string>>();
        split.test_ids = j.at("test").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception&) {
        raise(ErrorKind::format, "bad split.json in " + root);
    }
    return true;
}

} // namespace sialign
