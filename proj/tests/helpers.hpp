#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "sialign/audio.hpp"

namespace test_helpers {

// fresh directory under the system temp root, removed on destruction
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("sialign-test-" + std::to_string(::getpid()) + "-" +
                 std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

// test-local WAV writer, independent of the library's save path
inline std::vector<std::uint8_t> wav_bytes_pcm16(
    const std::vector<std::vector<std::int16_t>>& channels, std::uint32_t sample_rate) {
    const std::uint16_t nch = static_cast<std::uint16_t>(channels.size());
    const std::uint32_t frames =
        nch ? static_cast<std::uint32_t>(channels[0].size()) : 0;
    const std::uint32_t data_size = frames * nch * 2;

    std::vector<std::uint8_t> b;
    auto u16 = [&b](std::uint16_t v) {
        b.push_back(v & 0xFF);
        b.push_back(v >> 8);
    };
    auto u32 = [&b](std::uint32_t v) {
        b.push_back(v & 0xFF);
        b.push_back((v >> 8) & 0xFF);
        b.push_back((v >> 16) & 0xFF);
        b.push_back((v >> 24) & 0xFF);
    };
    b.insert(b.end(), {'R', 'I', 'F', 'F'});
    u32(36 + data_size);
    b.insert(b.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
    u32(16);
    u16(1);
    u16(nch);
    u32(sample_rate);
    u32(sample_rate * nch * 2);
    u16(static_cast<std::uint16_t>(nch * 2));
    u16(16);
    b.insert(b.end(), {'d', 'a', 't', 'a'});
    u32(data_size);
    for (std::uint32_t f = 0; f < frames; ++f)
        for (std::uint16_t c = 0; c < nch; ++c)
            u16(static_cast<std::uint16_t>(channels[c][f]));
    return b;
}

inline sialign::AudioBuffer sine_audio(double freq_hz, double seconds, int sample_rate,
                                       float amplitude = 0.5f) {
    sialign::AudioBuffer buf;
    buf.sample_rate = sample_rate;
    const std::size_t n = static_cast<std::size_t>(seconds * sample_rate);
    buf.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        buf.samples[i] = amplitude * static_cast<float>(std::sin(
                                         2.0 * M_PI * freq_hz * i / sample_rate));
    return buf;
}

} // namespace test_helpers
