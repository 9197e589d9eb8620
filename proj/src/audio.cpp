#include "sialign/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "sialign/error.hpp"

namespace sialign {
namespace {

constexpr std::uint16_t kFormatPcm = 0x0001;
constexpr std::uint16_t kFormatFloat = 0x0003;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
    out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xFF));
}

float clamp_unit(float x) {
    if (!std::isfinite(x)) return 0.0f;
    return std::min(1.0f, std::max(-1.0f, x));
}

} // namespace

AudioBuffer load_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::io, "cannot open wav file: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());

    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        raise(ErrorKind::format, "not a RIFF/WAVE file: " + path);

    bool have_fmt = false, have_data = false;
    std::uint16_t format_tag = 0, num_channels = 0, bits_per_sample = 0;
    std::uint32_t sample_rate = 0;
    std::size_t data_offset = 0, data_size = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
        const std::uint32_t chunk_size = read_u32(bytes.data() + pos + 4);
        const std::size_t body = pos + 8;
        if (body + chunk_size > bytes.size())
            raise(ErrorKind::format, "wav chunk overruns file: " + path);

        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (chunk_size < 16) raise(ErrorKind::format, "wav fmt chunk too short");
            format_tag = read_u16(bytes.data() + body);
            num_channels = read_u16(bytes.data() + body + 2);
            sample_rate = read_u32(bytes.data() + body + 4);
            bits_per_sample = read_u16(bytes.data() + body + 14);
            if (format_tag == kFormatExtensible) {
                // sub-format code is the first word of the GUID
                if (chunk_size >= 40)
                    format_tag = read_u16(bytes.data() + body + 24);
                else
                    raise(ErrorKind::format, "wav extensible fmt chunk too short");
            }
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            data_offset = body;
            data_size = chunk_size;
            have_data = true;
        }
        if (have_fmt && have_data) break;
        pos = body + chunk_size + (chunk_size & 1); // chunks are word-aligned
    }

    if (!have_fmt) raise(ErrorKind::format, "wav file has no fmt chunk: " + path);
    if (!have_data) raise(ErrorKind::format, "wav file has no data chunk: " + path);
    if (num_channels == 0 || sample_rate == 0)
        raise(ErrorKind::format, "wav fmt chunk has zero channels or rate");

    const bool is_pcm16 = format_tag == kFormatPcm && bits_per_sample == 16;
    const bool is_float32 = format_tag == kFormatFloat && bits_per_sample == 32;
    if (!is_pcm16 && !is_float32)
        raise(ErrorKind::unsupported,
              "unsupported wav encoding (format " + std::to_string(format_tag) +
                  ", " + std::to_string(bits_per_sample) + " bits); expected PCM16 or float32");

    const std::size_t bytes_per_sample = bits_per_sample / 8;
    const std::size_t frame_bytes = bytes_per_sample * num_channels;
    const std::size_t frames = frame_bytes ? data_size / frame_bytes : 0;

    AudioBuffer out;
    out.sample_rate = static_cast<int>(sample_rate);
    out.channels = 1;
    out.samples.resize(frames);

    const std::uint8_t* data = bytes.data() + data_offset;
    const double inv_channels = num_channels ? 1.0 / num_channels : 0.0;
    for (std::size_t f = 0; f < frames; ++f) {
        double acc = 0.0;
        for (std::uint16_t c = 0; c < num_channels; ++c) {
            const std::uint8_t* p = data + f * frame_bytes + c * bytes_per_sample;
            if (is_pcm16) {
                std::int16_t v;
                std::memcpy(&v, p, 2);
                acc += static_cast<double>(v) / 32768.0;
            } else {
                float v;
                std::memcpy(&v, p, 4);
                acc += static_cast<double>(clamp_unit(v));
            }
        }
        out.samples[f] = clamp_unit(static_cast<float>(acc * inv_channels));
    }
    return out;
}

void save_wav(const AudioBuffer& buffer, const std::string& path,
              WavSampleFormat format) {
    const bool pcm = format == WavSampleFormat::pcm16;
    const std::uint16_t bits = pcm ? 16 : 32;
    const std::uint32_t sr = static_cast<std::uint32_t>(buffer.sample_rate);
    const std::uint32_t block_align = bits / 8;
    const std::uint32_t data_size =
        static_cast<std::uint32_t>(buffer.samples.size() * block_align);

    std::vector<std::uint8_t> out;
    out.reserve(44 + data_size);
    out.insert(out.end(), {'R', 'I', 'F', 'F'});
    put_u32(out, 36 + data_size);
    out.insert(out.end(), {'W', 'A', 'V', 'E'});
    out.insert(out.end(), {'f', 'm', 't', ' '});
    put_u32(out, 16);
    put_u16(out, pcm ? kFormatPcm : kFormatFloat);
    put_u16(out, 1); // mono
    put_u32(out, sr);
    put_u32(out, sr * block_align);
    put_u16(out, static_cast<std::uint16_t>(block_align));
    put_u16(out, bits);
    out.insert(out.end(), {'d', 'a', 't', 'a'});
    put_u32(out, data_size);

    for (float s : buffer.samples) {
        if (pcm) {
            const double scaled = std::lround(static_cast<double>(clamp_unit(s)) * 32768.0);
            const std::int16_t q = static_cast<std::int16_t>(
                std::min(32767.0, std::max(-32768.0, scaled)));
            put_u16(out, static_cast<std::uint16_t>(q));
        } else {
            std::uint32_t u;
            const float v = s;
            std::memcpy(&u, &v, 4);
            put_u32(out, u);
        }
    }

    std::ofstream of(path, std::ios::binary | std::ios::trunc);
    if (!of) raise(ErrorKind::io, "cannot open for writing: " + path);
    of.write(reinterpret_cast<const char*>(out.data()),
             static_cast<std::streamsize>(out.size()));
    if (!of) raise(ErrorKind::io, "short write: " + path);
}

} // namespace sialign
