#pragma once

#include <string>
#include <vector>

#include "sialign/audio.hpp"

namespace sialign {

enum class FeatureKind { stft, cqt, chroma, salience };

const char* to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(const std::string& name);

// Time x bin matrix of non-negative feature values, row-major by frame.
// frame_hop_s is the realized hop (hop_samples / sample_rate), so frame i
// sits at time i * frame_hop_s on the feature's own time axis.
struct FeatureMatrix {
    int frames = 0;
    int bins = 0;
    std::vector<float> values; // frames * bins
    double frame_hop_s = 0.0;
    FeatureKind kind = FeatureKind::stft;
    std::vector<double> bin_labels; // center Hz, or pitch-class index for chroma
    int sample_rate = 0;
    int hop_samples = 0;
    int window_samples = 0; // analysis window (stft) or longest kernel (cqt)

    float& at(int frame, int bin) {
        return values[static_cast<std::size_t>(frame) * bins + bin];
    }
    float at(int frame, int bin) const {
        return values[static_cast<std::size_t>(frame) * bins + bin];
    }
    const float* row(int frame) const {
        return values.data() + static_cast<std::size_t>(frame) * bins;
    }
    float* row(int frame) {
        return values.data() + static_cast<std::size_t>(frame) * bins;
    }
};

struct StftParams {
    double hop_s = 0.023;
    double window_s = 0.046;
};

// Hamming-windowed FFT magnitude. Frames cover [i*hop, i*hop + window);
// bins = window/2 + 1 with spacing sr / next_pow2(window).
FeatureMatrix stft_magnitude(const AudioBuffer& audio, const StftParams& params = {});

struct CqtParams {
    int bins_per_octave = 24;
    double f_min = 65.4; // MIDI note C2
    int n_octaves = 6;
    double hop_s = 0.023;
};

// Constant-Q magnitudes via per-bin windowed complex projection with
// Q = 1 / (2^(1/bpo) - 1). Kernels are centered at i*hop (edges read the
// signal as zero-padded), so frame times line up across representations.
FeatureMatrix cqt_magnitude(const AudioBuffer& audio, const CqtParams& params = {});

// Folds CQT bins into 12 pitch classes and max-normalizes each frame
// (all-zero frames stay zero).
FeatureMatrix chroma(const FeatureMatrix& cqt);

// log(1 + gamma * x) per value; applied to stft/cqt magnitudes before they
// reach a network.
FeatureMatrix log_compress(FeatureMatrix m, double gamma = 10.0);

struct FeatureParams {
    StftParams stft;
    CqtParams cqt;
    int salience_harmonics = 5;
};

// Dispatch over the feature kinds; salience uses harmonic summation.
FeatureMatrix extract(const AudioBuffer& audio, FeatureKind kind,
                      const FeatureParams& params = {});

// CSV round trip (header lines `kind,...` / `hop_s,...` / `bins,...`
// followed by one row per frame).
void write_feature_csv(const FeatureMatrix& m, const std::string& path);
FeatureMatrix read_feature_csv(const std::string& path);

namespace detail {
// Radix-2 in-place FFT on interleaved complex doubles; n must be a power
// of two.
void fft(std::vector<double>& re, std::vector<double>& im);
} // namespace detail

} // namespace sialign
