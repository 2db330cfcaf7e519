// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The warpest authors

#pragma once

#include <cstdint>
#include <string>

#include "warpest/estimator.hpp"
#include "warpest/wav_io.hpp"
#include "warpest/wavelet.hpp"

namespace warpest {

/// One JSON document configures every command; unknown keys are rejected
/// with the offending path named.
struct ExperimentConfig {
    double sample_rate = 8000.0;
    int n_samples = 1 << 16;
    std::uint64_t seed = 1;

    struct Spectrum {
        double center_1 = 600.0;  // Hz
        double width_1 = 200.0;
        double center_2 = 1200.0;
        double width_2 = 400.0;
    } spectrum;

    struct Amplitude {
        double a1 = 0.4;
        double period_fraction = 1.0 / 3.0;  // T1 / t_final
    } amplitude;

    struct Warp {
        double period2_fraction = 0.5;  // T2 / t_final
        double period3_fraction = 0.5;  // T3 / t_final
        double depth = 1.0;
    } warp;

    struct WaveletCfg {
        std::string kind = "sharp";
        double nu0 = 0.5;        // cycles/sample
        double eps = 1e-3;
        double nu1_octaves = 0.25;  // nu1 = nu0 * 2^-nu1_octaves
        int dog_order = 4;
    } wavelet;

    struct Scales {
        int count = 106;
        int subsample = 7;
        double q = 2.0;
        // Preset floor: keeps the largest analysis windows short enough that
        // the per-frame quasi-stationary model holds at benchmark warp rates.
        double fmin_hz = 150.0;
        double fmax_fraction = 0.45;
    } scales;

    EstimationConfig estimation;

    struct Synthesis {
        std::string wav_format = "float32";  // float32 | pcm16 | pcm24
    } synthesis;

    struct Doppler {
        double sound_speed = 340.0;  // m/s
        double speed = 54.0;         // m/s
        double distance = 5.0;       // m
        double snr_db = 20.0;
        int n_samples = 1 << 15;
        double engine_f0 = 90.0;     // Hz, synthetic engine fundamental
        int engine_harmonics = 14;
        std::string amplitude_envelope = "inverse_distance";  // or "none"
        int scalogram_stride = 64;
    } doppler;

    struct Bench {
        int seeds = 20;
        int n_samples = 1 << 14;
        int theorem_trials = 100;
        int theorem_n_samples = 1 << 12;
        double theorem_beta = 4.0;
        int prop1_seeds = 100;
        int prop1_n_samples = 1 << 14;
        int crlb_seeds = 20;
        int crlb_n_samples = 1 << 14;
    } bench;

    Wavelet make_wavelet() const;
    ScaleGrid make_grid(const Wavelet& w) const;
    WavFormat wav_format() const;
    double t_final() const { return (n_samples - 1) / sample_rate; }
};

/// Parses and validates; throws std::invalid_argument naming bad/unknown keys.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig default_config();

/// The configuration as a JSON document (used to echo into summaries).
std::string config_to_json(const ExperimentConfig& cfg);

}  // namespace warpest
