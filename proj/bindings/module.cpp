#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sialign/audio.hpp"
#include "sialign/corpus.hpp"
#include "sialign/dtw.hpp"
#include "sialign/error.hpp"
#include "sialign/evaluate.hpp"
#include "sialign/features.hpp"
#include "sialign/midi.hpp"
#include "sialign/salience.hpp"
#include "sialign/siamese.hpp"
#include "sialign/similarity.hpp"

namespace py = pybind11;
using namespace sialign;

namespace {

py::array_t<float> matrix_to_numpy(const FeatureMatrix& m) {
    py::array_t<float> out({m.frames, m.bins});
    std::memcpy(out.mutable_data(), m.values.data(), m.values.size() * sizeof(float));
    return out;
}

py::array_t<double> knots_to_numpy(const TimeMap& map) {
    py::array_t<double> out({static_cast<py::ssize_t>(map.knots.size()),
                             static_cast<py::ssize_t>(2)});
    auto r = out.mutable_unchecked<2>();
    for (py::ssize_t i = 0; i < r.shape(0); ++i) {
        r(i, 0) = map.knots[i].x;
        r(i, 1) = map.knots[i].y;
    }
    return out;
}

TimeMap numpy_to_timemap(py::array_t<double, py::array::c_style | py::array::forcecast> knots) {
    if (knots.ndim() != 2 || knots.shape(1) != 2)
        throw py::value_error("knots must be an (n, 2) array");
    TimeMap map;
    auto r = knots.unchecked<2>();
    for (py::ssize_t i = 0; i < r.shape(0); ++i)
        map.knots.push_back({r(i, 0), r(i, 1)});
    return map;
}

AudioBuffer numpy_to_audio(py::array_t<float, py::array::c_style | py::array::forcecast> samples,
                           int sample_rate) {
    if (samples.ndim() != 1) throw py::value_error("samples must be 1-d");
    AudioBuffer buf;
    buf.sample_rate = sample_rate;
    buf.samples.assign(samples.data(), samples.data() + samples.size());
    return buf;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "audio-to-score alignment: learned frame similarity + DTW";

    py::register_exception<Error>(m, "SialignError");

    py::class_<AudioBuffer>(m, "AudioBuffer")
        .def(py::init([](py::array_t<float> samples, int sample_rate) {
                 return numpy_to_audio(samples, sample_rate);
             }),
             py::arg("samples"), py::arg("sample_rate"))
        .def_property_readonly("samples",
                               [](const AudioBuffer& b) {
                                   return py::array_t<float>(
                                       static_cast<py::ssize_t>(b.samples.size()),
                                       b.samples.data());
                               })
        .def_readonly("sample_rate", &AudioBuffer::sample_rate)
        .def("duration_s", &AudioBuffer::duration_s);

    m.def("load_wav", &load_wav, py::arg("path"));
    m.def(
        "save_wav",
        [](const AudioBuffer& b, const std::string& path, const std::string& format) {
            save_wav(b, path,
                     format == "float32" ? WavSampleFormat::float32
                                         : WavSampleFormat::pcm16);
        },
        py::arg("buffer"), py::arg("path"), py::arg("format") = "pcm16");

    py::class_<NoteEvent>(m, "NoteEvent")
        .def(py::init([](double onset, double duration, int pitch, int velocity,
                         double detune_cents) {
                 return NoteEvent{onset, duration, pitch, velocity, detune_cents};
             }),
             py::arg("onset_s"), py::arg("duration_s"), py::arg("pitch"),
             py::arg("velocity") = 80, py::arg("detune_cents") = 0.0)
        .def_readwrite("onset_s", &NoteEvent::onset_s)
        .def_readwrite("duration_s", &NoteEvent::duration_s)
        .def_readwrite("pitch", &NoteEvent::pitch)
        .def_readwrite("velocity", &NoteEvent::velocity)
        .def_readwrite("detune_cents", &NoteEvent::detune_cents);

    py::class_<ScoreTrack>(m, "ScoreTrack")
        .def(py::init([](std::vector<NoteEvent> events) {
                 ScoreTrack t;
                 t.events = std::move(events);
                 return t;
             }),
             py::arg("events") = std::vector<NoteEvent>{})
        .def_readwrite("events", &ScoreTrack::events)
        .def_readonly("ticks_per_quarter", &ScoreTrack::ticks_per_quarter)
        .def("end_time_s", &ScoreTrack::end_time_s)
        .def("onset_times", &ScoreTrack::onset_times);

    m.def(
        "parse_midi",
        [](const std::string& path) {
            std::vector<std::string> warnings;
            ScoreTrack track = parse_midi(path, &warnings);
            return py::make_tuple(track, warnings);
        },
        py::arg("path"));
    m.def("write_midi", &write_midi, py::arg("track"), py::arg("path"));
    m.def(
        "synthesize",
        [](const ScoreTrack& track, int sample_rate, int harmonics, double decay,
           double pad_s) {
            SynthConfig cfg;
            cfg.harmonics = harmonics;
            cfg.decay = decay;
            cfg.pad_s = pad_s;
            return synthesize(track, sample_rate, cfg);
        },
        py::arg("track"), py::arg("sample_rate") = 22050, py::arg("harmonics") = 8,
        py::arg("decay") = 1.0, py::arg("pad_s") = 0.0);
    m.def(
        "warp_tempo",
        [](const ScoreTrack& track, py::array_t<double> curve_knots) {
            auto [warped, gt] = warp_tempo(track, numpy_to_timemap(curve_knots));
            return py::make_tuple(warped, knots_to_numpy(gt));
        },
        py::arg("track"), py::arg("curve_knots"));

    py::class_<FeatureMatrix>(m, "FeatureMatrix")
        .def_property_readonly("values", &matrix_to_numpy)
        .def_readonly("frames", &FeatureMatrix::frames)
        .def_readonly("bins", &FeatureMatrix::bins)
        .def_readonly("frame_hop_s", &FeatureMatrix::frame_hop_s)
        .def_property_readonly(
            "kind", [](const FeatureMatrix& m_) { return to_string(m_.kind); })
        .def_readonly("bin_labels", &FeatureMatrix::bin_labels);

    m.def(
        "stft_magnitude",
        [](const AudioBuffer& audio, double hop_s, double window_s) {
            return stft_magnitude(audio, {hop_s, window_s});
        },
        py::arg("audio"), py::arg("hop_s") = 0.023, py::arg("window_s") = 0.046);
    m.def(
        "cqt_magnitude",
        [](const AudioBuffer& audio, int bins_per_octave, double f_min, int n_octaves,
           double hop_s) {
            return cqt_magnitude(audio, {bins_per_octave, f_min, n_octaves, hop_s});
        },
        py::arg("audio"), py::arg("bins_per_octave") = 24, py::arg("f_min") = 65.4,
        py::arg("n_octaves") = 6, py::arg("hop_s") = 0.023);
    m.def("chroma", &chroma, py::arg("cqt"));
    m.def("harmonic_salience", &harmonic_salience, py::arg("cqt"),
          py::arg("n_harmonics") = 5);
    m.def(
        "extract",
        [](const AudioBuffer& audio, const std::string& kind) {
            return extract(audio, feature_kind_from_string(kind));
        },
        py::arg("audio"), py::arg("kind"));
    m.def("log_compress", &log_compress, py::arg("matrix"), py::arg("gamma") = 10.0);
    m.def("salience_cross_entropy", &salience_cross_entropy, py::arg("target"),
          py::arg("predicted"));

    m.def("contrastive_loss", &contrastive_loss, py::arg("distance"), py::arg("label"),
          py::arg("margin") = 1.0);
    m.def(
        "pair_distance",
        [](py::array_t<float, py::array::c_style | py::array::forcecast> a,
           py::array_t<float, py::array::c_style | py::array::forcecast> b) {
            return pair_distance(
                std::vector<float>(a.data(), a.data() + a.size()),
                std::vector<float>(b.data(), b.data() + b.size()));
        },
        py::arg("a"), py::arg("b"));

    m.def(
        "dtw_align",
        [](py::array_t<float, py::array::c_style | py::array::forcecast> cost,
           std::optional<int> band) {
            if (cost.ndim() != 2) throw py::value_error("cost must be 2-d");
            const int rows = static_cast<int>(cost.shape(0));
            const int cols = static_cast<int>(cost.shape(1));
            const WarpingPath path = align_matrix(rows, cols, cost.data(), band);
            py::array_t<int> steps({static_cast<py::ssize_t>(path.steps.size()),
                                    static_cast<py::ssize_t>(2)});
            auto r = steps.mutable_unchecked<2>();
            for (py::ssize_t i = 0; i < r.shape(0); ++i) {
                r(i, 0) = path.steps[i].first;
                r(i, 1) = path.steps[i].second;
            }
            return py::make_tuple(steps, path.total_cost);
        },
        py::arg("cost"), py::arg("band") = std::nullopt);
    m.def(
        "path_to_time_map",
        [](py::array_t<int, py::array::c_style | py::array::forcecast> steps,
           double hop_row, double hop_col) {
            if (steps.ndim() != 2 || steps.shape(1) != 2)
                throw py::value_error("steps must be an (n, 2) array");
            WarpingPath path;
            auto r = steps.unchecked<2>();
            for (py::ssize_t i = 0; i < r.shape(0); ++i)
                path.steps.emplace_back(r(i, 0), r(i, 1));
            return knots_to_numpy(path_to_time_map(path, hop_row, hop_col));
        },
        py::arg("steps"), py::arg("hop_row"), py::arg("hop_col"));

    m.def(
        "generate_corpus",
        [](const std::string& out_dir, int pieces, std::uint64_t seed, int test_pieces,
           double octave_pair_prob, double chord_prob) {
            CorpusConfig cfg;
            cfg.octave_pair_prob = octave_pair_prob;
            cfg.chord_prob = chord_prob;
            std::vector<CorpusPiece> all = generate_corpus(pieces, seed, cfg);
            std::vector<std::string> train_ids, test_ids, ids;
            for (int i = 0; i < pieces; ++i) {
                ids.push_back(all[i].id);
                (i < pieces - test_pieces ? train_ids : test_ids).push_back(all[i].id);
            }
            save_corpus(all, out_dir, test_pieces > 0 ? train_ids : std::vector<std::string>{},
                        test_pieces > 0 ? test_ids : std::vector<std::string>{});
            return ids;
        },
        py::arg("out_dir"), py::arg("pieces"), py::arg("seed") = 0,
        py::arg("test_pieces") = 0, py::arg("octave_pair_prob") = 0.0,
        py::arg("chord_prob") = 0.15);

    m.def(
        "chroma_dtw_baseline",
        [](const AudioBuffer& perf, const AudioBuffer& score) {
            return knots_to_numpy(chroma_dtw_baseline(perf, score));
        },
        py::arg("perf"), py::arg("score"));

    m.def(
        "align_files",
        [](const std::string& perf_wav, const std::string& score_path,
           const std::string& checkpoint, const std::string& mode,
           std::optional<int> band) {
            const AudioBuffer perf = load_wav(perf_wav);
            AudioBuffer score;
            if (score_path.size() > 4 &&
                score_path.substr(score_path.size() - 4) == ".mid")
                score = synthesize(parse_midi(score_path), perf.sample_rate);
            else
                score = load_wav(score_path);
            SiameseModel model = load_siamese(checkpoint);
            FeatureParams params;
            const FeatureMatrix score_feat = prepare_features_for_model(
                extract(score, model.config.feature, params));
            const FeatureMatrix perf_feat = prepare_features_for_model(
                extract(perf, model.config.feature, params));
            const SimilarityMatrix sim = build_similarity(
                score_feat, perf_feat, model, similarity_mode_from_string(mode), -1.0);
            const WarpingPath path = align(sim, band);
            return py::make_tuple(
                knots_to_numpy(path_to_time_map(path, sim.row_hop_s, sim.col_hop_s)),
                path.total_cost);
        },
        py::arg("perf_wav"), py::arg("score_path"), py::arg("checkpoint"),
        py::arg("mode") = "distance", py::arg("band") = std::nullopt);

    m.def(
        "evaluate_time_map",
        [](py::array_t<double> estimated, py::array_t<double> truth,
           const std::vector<double>& event_times) {
            const AlignmentReport report = score_alignment(
                numpy_to_timemap(estimated), numpy_to_timemap(truth), event_times);
            py::dict out;
            out["errors_s"] = report.errors_s;
            out["accuracy_pct"] =
                std::vector<double>(report.accuracy_pct.begin(),
                                    report.accuracy_pct.end());
            out["mean_abs_error_s"] = report.mean_abs_error_s;
            return out;
        },
        py::arg("estimated"), py::arg("truth"), py::arg("event_times"));
}
