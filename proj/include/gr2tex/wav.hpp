#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace gr2tex {

struct WavInfo {
    std::uint16_t audio_format = 0;  // 1 = PCM
    std::uint16_t channels = 0;
    std::uint32_t sample_rate = 0;
    std::uint16_t bits_per_sample = 0;
    std::size_t data_bytes = 0;

    double duration_seconds() const;
};

inline constexpr std::uint32_t kAsrSampleRate = 16000;

/// Reads the RIFF/WAVE header chunks. Throws ClientError(format) when the
/// bytes are not a WAV file.
WavInfo parse_wav(std::string_view bytes);

/// parse_wav plus the ASR contract: PCM, 16-bit, mono, 16 kHz. No resampling.
WavInfo require_asr_wav(std::string_view bytes);

// Little-endian PCM-16 WAV file.
std::string encode_wav_pcm16(std::span<const std::int16_t> samples, std::uint32_t sample_rate = kAsrSampleRate,
                             std::uint16_t channels = 1);

}  // namespace gr2tex
