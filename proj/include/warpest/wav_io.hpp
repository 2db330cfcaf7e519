// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The warpest authors

#pragma once

#include <string>

#include "warpest/types.hpp"

namespace warpest {

enum class WavFormat { pcm16, pcm24, float32 };

struct WavWriteResult {
    /// Gain applied before writing when PCM samples would have clipped
    /// (1.0 when untouched). Float output is never rescaled.
    double gain = 1.0;
};

/// Writes a mono WAV file. PCM data that would clip is rescaled to 99% of
/// full scale and the applied gain reported.
WavWriteResult write_wav(const std::string& path, const SampledSignal& x,
                         WavFormat format = WavFormat::float32);

/// Reads a mono WAV file (PCM 16/24-bit or IEEE float 32-bit).
SampledSignal read_wav(const std::string& path);

}  // namespace warpest
