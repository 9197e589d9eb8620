#pragma once

#include <string>
#include <vector>

namespace sialign {

// Mono audio. Samples are clamped to [-1, 1] on load; multichannel input is
// mixed down by the arithmetic channel mean.
struct AudioBuffer {
    std::vector<float> samples;
    int sample_rate = 0;
    int channels = 1; // always 1 after load; kept for format metadata

    double duration_s() const {
        return sample_rate > 0
                   ? static_cast<double>(samples.size()) / sample_rate
                   : 0.0;
    }
};

enum class WavSampleFormat {
    pcm16,   // 16-bit signed PCM (the default write format)
    float32, // IEEE float, bit-exact round trip
};

// Reads a RIFF/WAVE file (PCM 16-bit or IEEE float 32-bit, any channel
// count) into a mono buffer. Distinct errors: io (missing file), format
// (malformed header), unsupported (other encodings).
AudioBuffer load_wav(const std::string& path);

// Writes mono WAV. PCM16 quantizes with round(x * 32768) clamped to the
// int16 range, so a load/save round trip stays within one quantization step.
void save_wav(const AudioBuffer& buffer, const std::string& path,
              WavSampleFormat format = WavSampleFormat::pcm16);

} // namespace sialign
