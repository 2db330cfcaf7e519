// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The warpest authors

#include "warpest/wav_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace warpest {

namespace {

constexpr std::uint16_t kFormatPcm = 0x0001;
constexpr std::uint16_t kFormatFloat = 0x0003;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(v & 0xff);
    out.push_back((v >> 8) & 0xff);
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(v & 0xff);
    out.push_back((v >> 8) & 0xff);
    out.push_back((v >> 16) & 0xff);
    out.push_back((v >> 24) & 0xff);
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
    out.insert(out.end(), tag, tag + 4);
}

std::uint16_t get_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

WavWriteResult write_wav(const std::string& path, const SampledSignal& x, WavFormat format) {
    if (x.samples.empty()) throw std::invalid_argument("write_wav: empty signal");
    if (!(x.fs > 0.0)) throw std::invalid_argument("write_wav: invalid sample rate");

    WavWriteResult result;
    const std::uint32_t n = static_cast<std::uint32_t>(x.size());
    const std::uint16_t bits =
        format == WavFormat::pcm16 ? 16 : (format == WavFormat::pcm24 ? 24 : 32);
    const std::uint16_t block = bits / 8;
    const std::uint32_t rate = static_cast<std::uint32_t>(std::lround(x.fs));

    double peak = 0.0;
    for (double v : x.samples) peak = std::max(peak, std::abs(v));
    double gain = 1.0;
    if (format != WavFormat::float32 && peak >= 1.0) gain = 0.99 / peak;
    result.gain = gain;

    std::vector<std::uint8_t> data;
    data.reserve(static_cast<std::size_t>(n) * block);
    for (double raw : x.samples) {
        const double v = raw * gain;
        if (format == WavFormat::float32) {
            const float f = static_cast<float>(v);
            std::uint32_t bitsle;
            std::memcpy(&bitsle, &f, 4);
            put_u32(data, bitsle);
        } else if (format == WavFormat::pcm16) {
            const double clipped = std::clamp(v, -1.0, 1.0);
            const auto q = static_cast<std::int32_t>(std::lround(clipped * 32767.0));
            put_u16(data, static_cast<std::uint16_t>(q & 0xffff));
        } else {
            const double clipped = std::clamp(v, -1.0, 1.0);
            const auto q = static_cast<std::int32_t>(std::lround(clipped * 8388607.0));
            data.push_back(q & 0xff);
            data.push_back((q >> 8) & 0xff);
            data.push_back((q >> 16) & 0xff);
        }
    }

    std::vector<std::uint8_t> out;
    out.reserve(data.size() + 64);
    put_tag(out, "RIFF");
    put_u32(out, static_cast<std::uint32_t>(36 + data.size()));
    put_tag(out, "WAVE");
    put_tag(out, "fmt ");
    put_u32(out, 16);
    put_u16(out, format == WavFormat::float32 ? kFormatFloat : kFormatPcm);
    put_u16(out, 1);  // mono
    put_u32(out, rate);
    put_u32(out, rate * block);
    put_u16(out, block);
    put_u16(out, bits);
    put_tag(out, "data");
    put_u32(out, static_cast<std::uint32_t>(data.size()));
    out.insert(out.end(), data.begin(), data.end());

    std::ofstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("write_wav: cannot open " + path);
    file.write(reinterpret_cast<const char*>(out.data()),
               static_cast<std::streamsize>(out.size()));
    if (!file) throw std::runtime_error("write_wav: write failed for " + path);
    return result;
}

SampledSignal read_wav(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("read_wav: cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(file)),
                                    std::istreambuf_iterator<char>());
    if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw std::runtime_error("read_wav: not a RIFF/WAVE file: " + path);

    std::uint16_t fmt_tag = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    const std::uint8_t* data_ptr = nullptr;
    std::uint32_t data_len = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const std::uint32_t chunk_len = get_u32(bytes.data() + pos + 4);
        const std::uint8_t* body = bytes.data() + pos + 8;
        if (pos + 8 + chunk_len > bytes.size()) break;
        if (std::memcmp(bytes.data() + pos, "fmt ", 4) == 0 && chunk_len >= 16) {
            fmt_tag = get_u16(body);
            channels = get_u16(body + 2);
            rate = get_u32(body + 4);
            bits = get_u16(body + 14);
        } else if (std::memcmp(bytes.data() + pos, "data", 4) == 0) {
            data_ptr = body;
            data_len = chunk_len;
        }
        pos += 8 + chunk_len + (chunk_len & 1);  // chunks are word-aligned
    }
    if (!data_ptr || rate == 0) throw std::runtime_error("read_wav: missing chunks in " + path);
    if (channels != 1)
        throw std::runtime_error("read_wav: only mono input is supported: " + path);

    SampledSignal out;
    out.fs = rate;
    if (fmt_tag == kFormatFloat && bits == 32) {
        const std::size_t n = data_len / 4;
        out.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            float f;
            std::uint32_t le = get_u32(data_ptr + 4 * i);
            std::memcpy(&f, &le, 4);
            out.samples[i] = f;
        }
    } else if (fmt_tag == kFormatPcm && bits == 16) {
        const std::size_t n = data_len / 2;
        out.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto v = static_cast<std::int16_t>(get_u16(data_ptr + 2 * i));
            out.samples[i] = v / 32768.0;
        }
    } else if (fmt_tag == kFormatPcm && bits == 24) {
        const std::size_t n = data_len / 3;
        out.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::int32_t v = data_ptr[3 * i] | (data_ptr[3 * i + 1] << 8) |
                             (data_ptr[3 * i + 2] << 16);
            if (v & 0x800000) v |= ~0xffffff;  // sign extend
            out.samples[i] = v / 8388608.0;
        }
    } else {
        throw std::runtime_error("read_wav: unsupported format in " + path);
    }
    if (out.samples.size() < 2) throw std::runtime_error("read_wav: too short: " + path);
    return out;
}

}  // namespace warpest
