#include "gr2tex/wav.hpp"

#include <algorithm>

#include "gr2tex/http_transport.hpp"

namespace gr2tex {
namespace {

std::uint32_t read_u32(std::string_view b, std::size_t at) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(b[at])) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 1])) << 8 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 2])) << 16 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 3])) << 24;
}

std::uint16_t read_u16(std::string_view b, std::size_t at) {
    return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                      static_cast<unsigned char>(b[at + 1]) << 8);
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

[[noreturn]] void not_wav(const std::string& why) {
    throw ClientError(ClientErrorKind::format, "not a WAV file: " + why);
}

}  // namespace

double WavInfo::duration_seconds() const {
    const double bytes_per_second =
        static_cast<double>(sample_rate) * channels * (static_cast<double>(bits_per_sample) / 8.0);
    return bytes_per_second > 0 ? static_cast<double>(data_bytes) / bytes_per_second : 0.0;
}

WavInfo parse_wav(std::string_view bytes) {
    if (bytes.size() < 12 || bytes.substr(0, 4) != "RIFF" || bytes.substr(8, 4) != "WAVE") {
        not_wav("missing RIFF/WAVE header");
    }
    WavInfo info;
    bool have_fmt = false;
    bool have_data = false;
    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const auto id = bytes.substr(pos, 4);
        const std::size_t size = read_u32(bytes, pos + 4);
        const std::size_t body = pos + 8;
        if (id == "fmt ") {
            if (size < 16 || body + 16 > bytes.size()) not_wav("truncated fmt chunk");
            info.audio_format = read_u16(bytes, body);
            info.channels = read_u16(bytes, body + 2);
            info.sample_rate = read_u32(bytes, body + 4);
            info.bits_per_sample = read_u16(bytes, body + 14);
            have_fmt = true;
        } else if (id == "data") {
            // Streaming writers sometimes leave the size unset; clamp to what is there.
            info.data_bytes = std::min(size, bytes.size() - body);
            have_data = true;
            break;
        }
        pos = body + size + (size & 1);
    }
    if (!have_fmt) not_wav("missing fmt chunk");
    if (!have_data) not_wav("missing data chunk");
    return info;
}

WavInfo require_asr_wav(std::string_view bytes) {
    const auto info = parse_wav(bytes);
    if (info.audio_format != 1 || info.bits_per_sample != 16 || info.channels != 1 ||
        info.sample_rate != kAsrSampleRate) {
        throw ClientError(ClientErrorKind::format,
                          "unsupported audio: got format " + std::to_string(info.audio_format) + ", " +
                              std::to_string(info.channels) + " channel(s), " + std::to_string(info.sample_rate) +
                              " Hz, " + std::to_string(info.bits_per_sample) +
                              "-bit; expected WAV PCM 16-bit, mono, 16000 Hz");
    }
    return info;
}

std::string encode_wav_pcm16(std::span<const std::int16_t> samples, std::uint32_t sample_rate,
                             std::uint16_t channels) {
    const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
    std::string out;
    out.reserve(44 + data_bytes);
    out += "RIFF";
    put_u32(out, 36 + data_bytes);
    out += "WAVEfmt ";
    put_u32(out, 16);
    put_u16(out, 1);
    put_u16(out, channels);
    put_u32(out, sample_rate);
    put_u32(out, sample_rate * channels * 2);
    put_u16(out, static_cast<std::uint16_t>(channels * 2));
    put_u16(out, 16);
    out += "data";
    put_u32(out, data_bytes);
    for (const auto s : samples) put_u16(out, static_cast<std::uint16_t>(s));
    return out;
}

}  // namespace gr2tex
