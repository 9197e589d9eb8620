#include "sialign/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sialign/error.hpp"

namespace sialign {

const char* to_string(FeatureKind kind) {
    switch (kind) {
    case FeatureKind::stft: return "stft";
    case FeatureKind::cqt: return "cqt";
    case FeatureKind::chroma: return "chroma";
    case FeatureKind::salience: return "salience";
    }
    return "unknown";
}

FeatureKind feature_kind_from_string(const std::string& name) {
    if (name == "stft") return FeatureKind::stft;
    if (name == "cqt") return FeatureKind::cqt;
    if (name == "chroma") return FeatureKind::chroma;
    if (name == "salience") return FeatureKind::salience;
    raise(ErrorKind::invalid_argument, "unknown feature kind: " + name);
}

namespace detail {

void fft(std::vector<double>& re, std::vector<double>& im) {
    const std::size_t n = re.size();
    if (n == 0 || (n & (n - 1)) != 0)
        raise(ErrorKind::invalid_argument, "fft size must be a power of two");

    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) {
            std::swap(re[i], re[j]);
            std::swap(im[i], im[j]);
        }
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * M_PI / static_cast<double>(len);
        const double wr = std::cos(ang), wi = std::sin(ang);
        for (std::size_t i = 0; i < n; i += len) {
            double cr = 1.0, ci = 0.0;
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::size_t a = i + k, b = i + k + len / 2;
                const double tr = re[b] * cr - im[b] * ci;
                const double ti = re[b] * ci + im[b] * cr;
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
                const double ncr = cr * wr - ci * wi;
                ci = cr * wi + ci * wr;
                cr = ncr;
            }
        }
    }
}

} // namespace detail

namespace {

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

std::vector<double> hamming(int n) {
    std::vector<double> w(n);
    if (n == 1) {
        w[0] = 1.0;
        return w;
    }
    for (int i = 0; i < n; ++i)
        w[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (n - 1));
    return w;
}

} // namespace

FeatureMatrix stft_magnitude(const AudioBuffer& audio, const StftParams& params) {
    if (audio.sample_rate <= 0)
        raise(ErrorKind::invalid_argument, "audio has no sample rate");
    if (audio.samples.empty())
        raise(ErrorKind::invalid_argument, "audio is empty");
    if (params.window_s < params.hop_s)
        raise(ErrorKind::invalid_argument, "window must be at least one hop long");

    const int sr = audio.sample_rate;
    const int window = static_cast<int>(std::lround(params.window_s * sr));
    const int hop = static_cast<int>(std::lround(params.hop_s * sr));
    if (window < 1 || hop < 1)
        raise(ErrorKind::invalid_argument, "window and hop must span at least one sample");
    const std::size_t n = audio.samples.size();
    if (n < static_cast<std::size_t>(window))
        raise(ErrorKind::invalid_argument, "audio shorter than one analysis window");

    const std::size_t nfft = next_pow2(static_cast<std::size_t>(window));
    const int frames = static_cast<int>((n - window) / hop) + 1;
    const int bins = window / 2 + 1;
    const std::vector<double> win = hamming(window);

    FeatureMatrix out;
    out.frames = frames;
    out.bins = bins;
    out.values.assign(static_cast<std::size_t>(frames) * bins, 0.0f);
    out.frame_hop_s = static_cast<double>(hop) / sr;
    out.kind = FeatureKind::stft;
    out.sample_rate = sr;
    out.hop_samples = hop;
    out.window_samples = window;
    out.bin_labels.resize(bins);
    for (int k = 0; k < bins; ++k)
        out.bin_labels[k] = static_cast<double>(k) * sr / static_cast<double>(nfft);

    std::vector<double> re(nfft), im(nfft);
    for (int t = 0; t < frames; ++t) {
        std::fill(re.begin(), re.end(), 0.0);
        std::fill(im.begin(), im.end(), 0.0);
        const std::size_t start = static_cast<std::size_t>(t) * hop;
        for (int i = 0; i < window; ++i)
            re[i] = static_cast<double>(audio.samples[start + i]) * win[i];
        detail::fft(re, im);
        float* row = out.row(t);
        for (int k = 0; k < bins; ++k)
            row[k] = static_cast<float>(std::hypot(re[k], im[k]));
    }
    return out;
}

FeatureMatrix cqt_magnitude(const AudioBuffer& audio, const CqtParams& params) {
    if (audio.sample_rate <= 0)
        raise(ErrorKind::invalid_argument, "audio has no sample rate");
    if (params.bins_per_octave < 1 || params.n_octaves < 1 || params.f_min <= 0.0)
        raise(ErrorKind::invalid_argument, "invalid cqt parameters");

    const int sr = audio.sample_rate;
    const int bpo = params.bins_per_octave;
    const int bins = bpo * params.n_octaves;
    const double q = 1.0 / (std::pow(2.0, 1.0 / bpo) - 1.0);
    const int hop = static_cast<int>(std::lround(params.hop_s * sr));
    if (hop < 1) raise(ErrorKind::invalid_argument, "hop must span at least one sample");

    // per-bin windowed complex kernels, phase-referenced to the kernel center
    struct Kernel {
        int length;
        std::vector<float> re, im;
        float norm;
    };
    std::vector<Kernel> kernels(bins);
    std::vector<double> freqs(bins);
    int longest = 0;
    for (int k = 0; k < bins; ++k) {
        const double fk = params.f_min * std::pow(2.0, static_cast<double>(k) / bpo);
        freqs[k] = fk;
        if (fk >= 0.5 * sr)
            raise(ErrorKind::invalid_argument, "cqt bin above Nyquist; lower n_octaves");
        const int len = std::max(1, static_cast<int>(std::lround(q * sr / fk)));
        longest = std::max(longest, len);
        Kernel& kern = kernels[k];
        kern.length = len;
        kern.re.resize(len);
        kern.im.resize(len);
        const std::vector<double> win = hamming(len);
        double win_sum = 0.0;
        const double omega = 2.0 * M_PI * fk / sr;
        const double center = 0.5 * (len - 1);
        for (int i = 0; i < len; ++i) {
            const double phase = omega * (i - center);
            kern.re[i] = static_cast<float>(win[i] * std::cos(phase));
            kern.im[i] = static_cast<float>(-win[i] * std::sin(phase));
            win_sum += win[i];
        }
        kern.norm = static_cast<float>(2.0 / win_sum);
    }

    const std::size_t n = audio.samples.size();
    if (n < static_cast<std::size_t>(longest))
        raise(ErrorKind::invalid_argument,
              "audio shorter than the lowest-frequency cqt kernel (" +
                  std::to_string(longest) + " samples)");

    const int frames = static_cast<int>((n - 1) / hop) + 1;

    FeatureMatrix out;
    out.frames = frames;
    out.bins = bins;
    out.values.assign(static_cast<std::size_t>(frames) * bins, 0.0f);
    out.frame_hop_s = static_cast<double>(hop) / sr;
    out.kind = FeatureKind::cqt;
    out.sample_rate = sr;
    out.hop_samples = hop;
    out.window_samples = longest;
    out.bin_labels = freqs;

    const float* x = audio.samples.data();
    for (int t = 0; t < frames; ++t) {
        const long center = static_cast<long>(t) * hop;
        float* row = out.row(t);
        for (int k = 0; k < bins; ++k) {
            const Kernel& kern = kernels[k];
            const long first = center - kern.length / 2;
            long i0 = std::max(0L, -first);
            long i1 = std::min<long>(kern.length, static_cast<long>(n) - first);
            float acc_re = 0.0f, acc_im = 0.0f;
            const float* xs = x + first;
            for (long i = i0; i < i1; ++i) {
                const float v = xs[i];
                acc_re += v * kern.re[i];
                acc_im += v * kern.im[i];
            }
            row[k] = std::sqrt(acc_re * acc_re + acc_im * acc_im) * kern.norm;
        }
    }
    return out;
}

FeatureMatrix chroma(const FeatureMatrix& cqt) {
    if (cqt.kind != FeatureKind::cqt)
        raise(ErrorKind::invalid_argument, "chroma expects a cqt feature matrix");

    // bins per semitone from the bin labels' geometric spacing
    const int bpo = cqt.bins > 1
                        ? static_cast<int>(std::lround(
                              1.0 / std::log2(cqt.bin_labels[1] / cqt.bin_labels[0])))
                        : 12;
    const double bins_per_semitone = bpo / 12.0;

    FeatureMatrix out;
    out.frames = cqt.frames;
    out.bins = 12;
    out.values.assign(static_cast<std::size_t>(cqt.frames) * 12, 0.0f);
    out.frame_hop_s = cqt.frame_hop_s;
    out.kind = FeatureKind::chroma;
    out.sample_rate = cqt.sample_rate;
    out.hop_samples = cqt.hop_samples;
    out.window_samples = cqt.window_samples;
    out.bin_labels.resize(12);
    for (int c = 0; c < 12; ++c) out.bin_labels[c] = c;

    // f_min is C2, so bin k sits k / bins_per_semitone semitones above C
    std::vector<int> pitch_class(cqt.bins);
    for (int k = 0; k < cqt.bins; ++k) {
        const int semis = static_cast<int>(std::lround(k / bins_per_semitone));
        pitch_class[k] = semis % 12;
    }

    for (int t = 0; t < cqt.frames; ++t) {
        const float* src = cqt.row(t);
        float* dst = out.row(t);
        for (int k = 0; k < cqt.bins; ++k) dst[pitch_class[k]] += src[k];
        float peak = 0.0f;
        for (int c = 0; c < 12; ++c) peak = std::max(peak, dst[c]);
        if (peak > 0.0f)
            for (int c = 0; c < 12; ++c) dst[c] /= peak;
    }
    return out;
}

FeatureMatrix log_compress(FeatureMatrix m, double gamma) {
    for (float& v : m.values)
        v = static_cast<float>(std::log1p(gamma * static_cast<double>(v)));
    return m;
}

void write_feature_csv(const FeatureMatrix& m, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) raise(ErrorKind::io, "cannot open for writing: " + path);
    out << "kind," << to_string(m.kind) << "\n";
    out.precision(12);
    out << "hop_s," << m.frame_hop_s << "\n";
    out << "sample_rate," << m.sample_rate << "\n";
    out << "hop_samples," << m.hop_samples << "\n";
    out << "window_samples," << m.window_samples << "\n";
    out << "bins";
    for (double b : m.bin_labels) out << "," << b;
    out << "\n";
    out.precision(9);
    for (int t = 0; t < m.frames; ++t) {
        const float* row = m.row(t);
        for (int k = 0; k < m.bins; ++k) out << (k ? "," : "") << row[k];
        out << "\n";
    }
    if (!out) raise(ErrorKind::io, "short write: " + path);
}

FeatureMatrix read_feature_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorKind::io, "cannot open feature csv: " + path);

    FeatureMatrix m;
    std::string line;
    auto next_field = [&](const std::string& key) -> std::string {
        if (!std::getline(in, line))
            raise(ErrorKind::format, "feature csv truncated: " + path);
        const auto comma = line.find(',');
        if (comma == std::string::npos || line.substr(0, comma) != key)
            raise(ErrorKind::format, "feature csv missing header: " + key);
        return line.substr(comma + 1);
    };

    m.kind = feature_kind_from_string(next_field("kind"));
    m.frame_hop_s = std::stod(next_field("hop_s"));
    m.sample_rate = std::stoi(next_field("sample_rate"));
    m.hop_samples = std::stoi(next_field("hop_samples"));
    m.window_samples = std::stoi(next_field("window_samples"));

    if (!std::getline(in, line) || line.rfind("bins", 0) != 0)
        raise(ErrorKind::format, "feature csv missing bins header");
    {
        std::stringstream ss(line.substr(4));
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!tok.empty()) m.bin_labels.push_back(std::stod(tok));
    }
    m.bins = static_cast<int>(m.bin_labels.size());
    if (m.bins == 0) raise(ErrorKind::format, "feature csv has no bins");

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        int count = 0;
        while (std::getline(ss, tok, ',')) {
            m.values.push_back(std::stof(tok));
            ++count;
        }
        if (count != m.bins)
            raise(ErrorKind::format, "feature csv row width mismatch");
        ++m.frames;
    }
    return m;
}

} // namespace sialign
