// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The warpest authors

#include "warpest/config.hpp"

#include <json.hpp>
#include <set>
#include <stdexcept>

namespace warpest {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& path,
                const std::set<std::string>& allowed) {
    if (!obj.is_object())
        throw std::invalid_argument("config: expected an object at " + path);
    for (const auto& [key, unused] : obj.items()) {
        if (!allowed.count(key))
            throw std::invalid_argument("config: unknown key '" + path + key + "'");
    }
}

template <typename T>
void load(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

void require_positive(double v, const std::string& name) {
    if (!(v > 0.0)) throw std::invalid_argument("config: '" + name + "' must be positive");
}

}  // namespace

Wavelet ExperimentConfig::make_wavelet() const {
    if (wavelet.kind == "sharp")
        return Wavelet(sharp_wavelet(wavelet.nu0, wavelet.eps,
                                     wavelet.nu0 * std::pow(2.0, -wavelet.nu1_octaves)));
    if (wavelet.kind == "dog")
        return Wavelet(dog_wavelet(wavelet.dog_order, wavelet.nu0));
    throw std::invalid_argument("config: wavelet.kind must be 'sharp' or 'dog'");
}

ScaleGrid ExperimentConfig::make_grid(const Wavelet& w) const {
    return default_scale_grid(w, sample_rate, scales.fmin_hz, scales.fmax_fraction,
                              scales.count, scales.subsample, scales.q);
}

WavFormat ExperimentConfig::wav_format() const {
    if (synthesis.wav_format == "float32") return WavFormat::float32;
    if (synthesis.wav_format == "pcm16") return WavFormat::pcm16;
    if (synthesis.wav_format == "pcm24") return WavFormat::pcm24;
    throw std::invalid_argument("config: synthesis.wav_format must be float32|pcm16|pcm24");
}

ExperimentConfig default_config() { return {}; }

ExperimentConfig parse_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const std::exception& e) {
        throw std::invalid_argument(std::string("config: JSON parse error: ") + e.what());
    }

    ExperimentConfig cfg;
    check_keys(root, "", {"sample_rate", "n_samples", "seed", "spectrum", "amplitude",
                          "warp", "wavelet", "scales", "estimation", "synthesis",
                          "doppler", "bench"});
    load(root, "sample_rate", cfg.sample_rate);
    load(root, "n_samples", cfg.n_samples);
    load(root, "seed", cfg.seed);

    if (root.contains("spectrum")) {
        const json& o = root["spectrum"];
        check_keys(o, "spectrum.", {"center_1", "width_1", "center_2", "width_2"});
        load(o, "center_1", cfg.spectrum.center_1);
        load(o, "width_1", cfg.spectrum.width_1);
        load(o, "center_2", cfg.spectrum.center_2);
        load(o, "width_2", cfg.spectrum.width_2);
    }
    if (root.contains("amplitude")) {
        const json& o = root["amplitude"];
        check_keys(o, "amplitude.", {"a1", "period_fraction"});
        load(o, "a1", cfg.amplitude.a1);
        load(o, "period_fraction", cfg.amplitude.period_fraction);
    }
    if (root.contains("warp")) {
        const json& o = root["warp"];
        check_keys(o, "warp.", {"period2_fraction", "period3_fraction", "depth"});
        load(o, "period2_fraction", cfg.warp.period2_fraction);
        load(o, "period3_fraction", cfg.warp.period3_fraction);
        load(o, "depth", cfg.warp.depth);
    }
    if (root.contains("wavelet")) {
        const json& o = root["wavelet"];
        check_keys(o, "wavelet.", {"kind", "nu0", "eps", "nu1_octaves", "dog_order"});
        load(o, "kind", cfg.wavelet.kind);
        load(o, "nu0", cfg.wavelet.nu0);
        load(o, "eps", cfg.wavelet.eps);
        load(o, "nu1_octaves", cfg.wavelet.nu1_octaves);
        load(o, "dog_order", cfg.wavelet.dog_order);
    }
    if (root.contains("scales")) {
        const json& o = root["scales"];
        check_keys(o, "scales.", {"count", "subsample", "q", "fmin_hz", "fmax_fraction"});
        load(o, "count", cfg.scales.count);
        load(o, "subsample", cfg.scales.subsample);
        load(o, "q", cfg.scales.q);
        load(o, "fmin_hz", cfg.scales.fmin_hz);
        load(o, "fmax_fraction", cfg.scales.fmax_fraction);
    }
    if (root.contains("estimation")) {
        const json& o = root["estimation"];
        check_keys(o, "estimation.",
                   {"stop_threshold", "max_iterations", "time_stride", "noise_variance",
                    "regularization", "spectrum_refinement", "deconvolve_iterations",
                    "welch_segment", "spectrum_stride", "final_polish"});
        load(o, "stop_threshold", cfg.estimation.stop_threshold);
        load(o, "max_iterations", cfg.estimation.max_iterations);
        load(o, "time_stride", cfg.estimation.time_stride);
        load(o, "noise_variance", cfg.estimation.noise_var);
        load(o, "regularization", cfg.estimation.regularization);
        load(o, "deconvolve_iterations", cfg.estimation.deconvolve_iterations);
        load(o, "welch_segment", cfg.estimation.welch_segment);
        load(o, "spectrum_stride", cfg.estimation.spectrum_stride);
        load(o, "final_polish", cfg.estimation.final_polish);
        if (o.contains("spectrum_refinement")) {
            const std::string mode = o["spectrum_refinement"].get<std::string>();
            if (mode == "wavelet_deconvolved")
                cfg.estimation.spectrum_refinement = SpectrumRefinement::wavelet_deconvolved;
            else if (mode == "wavelet")
                cfg.estimation.spectrum_refinement = SpectrumRefinement::wavelet;
            else if (mode == "welch_stationarized")
                cfg.estimation.spectrum_refinement = SpectrumRefinement::welch_stationarized;
            else
                throw std::invalid_argument(
                    "config: estimation.spectrum_refinement must be wavelet_deconvolved|"
                    "wavelet|welch_stationarized");
        }
    }
    if (root.contains("synthesis")) {
        const json& o = root["synthesis"];
        check_keys(o, "synthesis.", {"wav_format"});
        load(o, "wav_format", cfg.synthesis.wav_format);
    }
    if (root.contains("doppler")) {
        const json& o = root["doppler"];
        check_keys(o, "doppler.",
                   {"sound_speed", "speed", "distance", "snr_db", "n_samples", "engine_f0",
                    "engine_harmonics", "amplitude_envelope", "scalogram_stride"});
        load(o, "sound_speed", cfg.doppler.sound_speed);
        load(o, "speed", cfg.doppler.speed);
        load(o, "distance", cfg.doppler.distance);
        load(o, "snr_db", cfg.doppler.snr_db);
        load(o, "n_samples", cfg.doppler.n_samples);
        load(o, "engine_f0", cfg.doppler.engine_f0);
        load(o, "engine_harmonics", cfg.doppler.engine_harmonics);
        load(o, "amplitude_envelope", cfg.doppler.amplitude_envelope);
        load(o, "scalogram_stride", cfg.doppler.scalogram_stride);
    }
    if (root.contains("bench")) {
        const json& o = root["bench"];
        check_keys(o, "bench.",
                   {"seeds", "n_samples", "theorem_trials", "theorem_n_samples",
                    "theorem_beta", "prop1_seeds", "prop1_n_samples", "crlb_seeds",
                    "crlb_n_samples"});
        load(o, "seeds", cfg.bench.seeds);
        load(o, "n_samples", cfg.bench.n_samples);
        load(o, "theorem_trials", cfg.bench.theorem_trials);
        load(o, "theorem_n_samples", cfg.bench.theorem_n_samples);
        load(o, "theorem_beta", cfg.bench.theorem_beta);
        load(o, "prop1_seeds", cfg.bench.prop1_seeds);
        load(o, "prop1_n_samples", cfg.bench.prop1_n_samples);
        load(o, "crlb_seeds", cfg.bench.crlb_seeds);
        load(o, "crlb_n_samples", cfg.bench.crlb_n_samples);
    }

    // Range validation with the offending key named.
    require_positive(cfg.sample_rate, "sample_rate");
    if (cfg.n_samples < 4) throw std::invalid_argument("config: 'n_samples' must be >= 4");
    require_positive(cfg.spectrum.width_1, "spectrum.width_1");
    require_positive(cfg.spectrum.width_2, "spectrum.width_2");
    if (cfg.amplitude.a1 < 0.0 || cfg.amplitude.a1 >= 1.0)
        throw std::invalid_argument("config: 'amplitude.a1' must be in [0, 1)");
    require_positive(cfg.amplitude.period_fraction, "amplitude.period_fraction");
    require_positive(cfg.warp.period2_fraction, "warp.period2_fraction");
    require_positive(cfg.warp.period3_fraction, "warp.period3_fraction");
    if (!(cfg.wavelet.nu0 > 0.0 && cfg.wavelet.nu0 <= 0.5))
        throw std::invalid_argument("config: 'wavelet.nu0' must be in (0, 0.5]");
    if (!(cfg.wavelet.eps > 0.0 && cfg.wavelet.eps < 1.0))
        throw std::invalid_argument("config: 'wavelet.eps' must be in (0, 1)");
    require_positive(cfg.wavelet.nu1_octaves, "wavelet.nu1_octaves");
    if (cfg.scales.count < 2) throw std::invalid_argument("config: 'scales.count' must be >= 2");
    if (cfg.scales.subsample < 1)
        throw std::invalid_argument("config: 'scales.subsample' must be >= 1");
    if (!(cfg.scales.q > 1.0)) throw std::invalid_argument("config: 'scales.q' must be > 1");
    require_positive(cfg.scales.fmin_hz, "scales.fmin_hz");
    if (!(cfg.scales.fmax_fraction > 0.0 && cfg.scales.fmax_fraction <= 0.5))
        throw std::invalid_argument("config: 'scales.fmax_fraction' must be in (0, 0.5]");
    if (!(cfg.estimation.stop_threshold > 0.0 && cfg.estimation.stop_threshold < 1.0))
        throw std::invalid_argument("config: 'estimation.stop_threshold' must be in (0, 1)");
    if (cfg.estimation.max_iterations < 1)
        throw std::invalid_argument("config: 'estimation.max_iterations' must be >= 1");
    if (cfg.estimation.time_stride < 1)
        throw std::invalid_argument("config: 'estimation.time_stride' must be >= 1");
    if (cfg.estimation.noise_var < 0.0)
        throw std::invalid_argument("config: 'estimation.noise_variance' must be >= 0");
    if (cfg.estimation.regularization < 0.0 || cfg.estimation.regularization > 1.0)
        throw std::invalid_argument("config: 'estimation.regularization' must be in [0, 1]");
    if (!(cfg.doppler.speed > 0.0 && cfg.doppler.speed < cfg.doppler.sound_speed))
        throw std::invalid_argument(
            "config: 'doppler.speed' must satisfy 0 < speed < sound_speed");
    require_positive(cfg.doppler.distance, "doppler.distance");
    if (cfg.bench.seeds < 1) throw std::invalid_argument("config: 'bench.seeds' must be >= 1");
    (void)cfg.wav_format();  // validates the format string
    (void)cfg.make_wavelet();

    return cfg;
}

std::string config_to_json(const ExperimentConfig& cfg) {
    json o;
    o["sample_rate"] = cfg.sample_rate;
    o["n_samples"] = cfg.n_samples;
    o["seed"] = cfg.seed;
    o["spectrum"] = {{"center_1", cfg.spectrum.center_1},
                     {"width_1", cfg.spectrum.width_1},
                     {"center_2", cfg.spectrum.center_2},
                     {"width_2", cfg.spectrum.width_2}};
    o["amplitude"] = {{"a1", cfg.amplitude.a1},
                      {"period_fraction", cfg.amplitude.period_fraction}};
    o["warp"] = {{"period2_fraction", cfg.warp.period2_fraction},
                 {"period3_fraction", cfg.warp.period3_fraction},
                 {"depth", cfg.warp.depth}};
    o["wavelet"] = {{"kind", cfg.wavelet.kind},
                    {"nu0", cfg.wavelet.nu0},
                    {"eps", cfg.wavelet.eps},
                    {"nu1_octaves", cfg.wavelet.nu1_octaves},
                    {"dog_order", cfg.wavelet.dog_order}};
    o["scales"] = {{"count", cfg.scales.count},
                   {"subsample", cfg.scales.subsample},
                   {"q", cfg.scales.q},
                   {"fmin_hz", cfg.scales.fmin_hz},
                   {"fmax_fraction", cfg.scales.fmax_fraction}};
    const char* mode =
        cfg.estimation.spectrum_refinement == SpectrumRefinement::wavelet_deconvolved
            ? "wavelet_deconvolved"
            : (cfg.estimation.spectrum_refinement == SpectrumRefinement::wavelet
                   ? "wavelet"
                   : "welch_stationarized");
    o["estimation"] = {{"stop_threshold", cfg.estimation.stop_threshold},
                       {"max_iterations", cfg.estimation.max_iterations},
                       {"time_stride", cfg.estimation.time_stride},
                       {"noise_variance", cfg.estimation.noise_var},
                       {"regularization", cfg.estimation.regularization},
                       {"spectrum_refinement", mode},
                       {"deconvolve_iterations", cfg.estimation.deconvolve_iterations},
                       {"welch_segment", cfg.estimation.welch_segment},
                       {"spectrum_stride", cfg.estimation.spectrum_stride},
                       {"final_polish", cfg.estimation.final_polish}};
    o["synthesis"] = {{"wav_format", cfg.synthesis.wav_format}};
    o["doppler"] = {{"sound_speed", cfg.doppler.sound_speed},
                    {"speed", cfg.doppler.speed},
                    {"distance", cfg.doppler.distance},
                    {"snr_db", cfg.doppler.snr_db},
                    {"n_samples", cfg.doppler.n_samples},
                    {"engine_f0", cfg.doppler.engine_f0},
                    {"engine_harmonics", cfg.doppler.engine_harmonics},
                    {"amplitude_envelope", cfg.doppler.amplitude_envelope},
                    {"scalogram_stride", cfg.doppler.scalogram_stride}};
    o["bench"] = {{"seeds", cfg.bench.seeds},
                  {"n_samples", cfg.bench.n_samples},
                  {"theorem_trials", cfg.bench.theorem_trials},
                  {"theorem_n_samples", cfg.bench.theorem_n_samples},
                  {"theorem_beta", cfg.bench.theorem_beta},
                  {"prop1_seeds", cfg.bench.prop1_seeds},
                  {"prop1_n_samples", cfg.bench.prop1_n_samples},
                  {"crlb_seeds", cfg.bench.crlb_seeds},
                  {"crlb_n_samples", cfg.bench.crlb_n_samples}};
    return o.dump(2);
}

}  // namespace warpest
