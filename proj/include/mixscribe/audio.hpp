#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "mixscribe/errors.hpp"
#include "mixscribe/spectrogram.hpp"

namespace mixscribe {

namespace wav_detail {

inline std::uint32_t read_u32(std::istream& in)
{
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8)
           | (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint16_t read_u16(std::istream& in)
{
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline void write_u32(std::ostream& out, std::uint32_t v)
{
    const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                       static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
}

inline void write_u16(std::ostream& out, std::uint16_t v)
{
    const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
    out.write(b, 2);
}

} // namespace wav_detail

// Reads a RIFF/WAVE file: PCM 16/24-bit or IEEE float 32-bit, any rate.
// Multichannel input is averaged down to mono.
inline AudioBuffer read_wav(const std::string& path)
{
    using namespace wav_detail;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open WAV file: " + path);

    char tag[4];
    in.read(tag, 4);
    if (!in || std::memcmp(tag, "RIFF", 4) != 0) throw IoError(path + ": not a RIFF file");
    read_u32(in); // riff size
    in.read(tag, 4);
    if (!in || std::memcmp(tag, "WAVE", 4) != 0) throw IoError(path + ": not a WAVE file");

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    bool have_fmt = false;
    std::vector<char> payload;

    while (in.read(tag, 4)) {
        const std::uint32_t chunk_size = read_u32(in);
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            format = read_u16(in);
            channels = read_u16(in);
            rate = read_u32(in);
            read_u32(in); // byte rate
            read_u16(in); // block align
            bits = read_u16(in);
            std::uint32_t consumed = 16;
            if (format == 0xFFFE && chunk_size >= 40) {
                read_u16(in);                // cbSize
                read_u16(in);                // valid bits
                read_u32(in);                // channel mask
                format = read_u16(in);       // first word of SubFormat GUID
                in.ignore(14);
                consumed = 40;
            }
            if (chunk_size > consumed) in.ignore(chunk_size - consumed);
            have_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            payload.resize(chunk_size);
            in.read(payload.data(), chunk_size);
            if (static_cast<std::uint32_t>(in.gcount()) != chunk_size)
                throw IoError(path + ": truncated data chunk");
            break;
        } else {
            in.ignore(chunk_size + (chunk_size & 1));
        }
    }

    if (!have_fmt || payload.empty()) throw IoError(path + ": missing fmt or data chunk");
    if (channels == 0 || rate == 0) throw IoError(path + ": malformed fmt chunk");

    std::size_t bytes_per_sample;
    if (format == 1 && bits == 16) bytes_per_sample = 2;
    else if (format == 1 && bits == 24) bytes_per_sample = 3;
    else if (format == 3 && bits == 32) bytes_per_sample = 4;
    else
        throw IoError(path + ": unsupported encoding (format " + std::to_string(format) + ", "
                      + std::to_string(bits) + " bits); expected PCM 16/24-bit or float 32-bit");

    const std::size_t n_frames = payload.size() / (bytes_per_sample * channels);
    AudioBuffer out;
    out.sample_rate = static_cast<int>(rate);
    out.samples.resize(n_frames);

    const unsigned char* p = reinterpret_cast<const unsigned char*>(payload.data());
    for (std::size_t i = 0; i < n_frames; ++i) {
        double acc = 0.0;
        for (std::uint16_t c = 0; c < channels; ++c) {
            const unsigned char* s = p + (i * channels + c) * bytes_per_sample;
            if (bytes_per_sample == 2) {
                const std::int16_t v = static_cast<std::int16_t>(s[0] | (s[1] << 8));
                acc += static_cast<double>(v) / 32768.0;
            } else if (bytes_per_sample == 3) {
                std::int32_t v = s[0] | (s[1] << 8) | (s[2] << 16);
                if (v & 0x800000) v |= ~0xFFFFFF; // sign extend
                acc += static_cast<double>(v) / 8388608.0;
            } else {
                float f;
                std::memcpy(&f, s, 4);
                acc += static_cast<double>(f);
            }
        }
        out.samples[i] = acc / channels;
    }
    return out;
}

// Writes mono IEEE float 32-bit WAV. Deterministic byte-for-byte given the
// same samples.
inline void write_wav(const std::string& path, const AudioBuffer& audio)
{
    using namespace wav_detail;
    if (audio.sample_rate <= 0) throw InvalidInput("write_wav: sample rate must be positive");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot create WAV file: " + path);

    const std::uint32_t data_bytes = static_cast<std::uint32_t>(audio.samples.size() * 4);
    out.write("RIFF", 4);
    write_u32(out, 36 + data_bytes);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    write_u32(out, 16);
    write_u16(out, 3); // IEEE float
    write_u16(out, 1); // mono
    write_u32(out, static_cast<std::uint32_t>(audio.sample_rate));
    write_u32(out, static_cast<std::uint32_t>(audio.sample_rate) * 4);
    write_u16(out, 4);
    write_u16(out, 32);
    out.write("data", 4);
    write_u32(out, data_bytes);
    for (double v : audio.samples) {
        const float f = static_cast<float>(v);
        char b[4];
        std::memcpy(b, &f, 4);
        out.write(b, 4);
    }
    if (!out) throw IoError("short write: " + path);
}

} // namespace mixscribe
