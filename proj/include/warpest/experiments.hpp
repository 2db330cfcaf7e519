// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The warpest authors

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "warpest/config.hpp"
#include "warpest/diagnostics.hpp"
#include "warpest/estimator.hpp"
#include "warpest/types.hpp"

namespace warpest {

/// Exit codes shared by the drivers and the CLI:
/// 0 success, 1 usage/config error, 2 runtime failure,
/// 3 converged-with-warnings (results still written).
enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitRuntime = 2,
    kExitWarnings = 3,
};

/// Ground truth arrays for one synthesized benchmark record.
struct BenchmarkTruth {
    SampledSignal x;          // underlying stationary realization
    SampledSignal y;          // deformed observation
    AmplitudeFn amplitude;
    WarpFn warp;
    PowerSpectrum spectrum;   // one-sided, Hz
};

/// Synthesizes the benchmark family record for the given config and seed.
BenchmarkTruth make_benchmark(const ExperimentConfig& cfg, std::uint64_t seed);

/// One full estimation run scored against the truth (theta scales).
struct Table1Row {
    std::uint64_t seed = 0;
    MseTable mse;
    int iterations = 0;
    bool converged = false;
    double runtime_seconds = 0.0;
    std::vector<double> crit_theta1;
    std::vector<double> crit_theta2;
};

Table1Row run_benchmark_once(const ExperimentConfig& cfg, std::uint64_t seed,
                             EstimationState* state_out = nullptr);

/// Monte-Carlo CRLB coverage for the warp parameter: per-frame estimates with
/// the oracle spectrum against +-1.96 sqrt(CRLB) bands. The observation is
/// evaluated exactly (band-limited) so no broadband interpolation junk leaks
/// into the oracle likelihood.
struct CrlbCoverage {
    long total = 0;
    long inside = 0;
    double coverage() const { return total ? static_cast<double>(inside) / total : 0.0; }
    double mean_crlb = 0.0;
};

CrlbCoverage run_crlb_coverage(const ExperimentConfig& cfg);

/// Spectrum-estimator bias validation (zero-error and injected-error parts).
struct Prop1Validation {
    std::vector<double> freqs;        // analysis units
    std::vector<double> mean_bias;    // E[S~] - S_{X,psi} per bin (oracle thetas)
    std::vector<double> se;           // Monte-Carlo standard errors
    int bins_outside_3se = 0;
    double sup_bias_injected = 0.0;   // with injected theta errors
    Prop1Report bound;                // for the injected errors
};

Prop1Validation run_prop1_validation(const ExperimentConfig& cfg);

/// Command drivers (write files under out_dir; return an ExitCode).
int cmd_synth(const ExperimentConfig& cfg, const std::string& out_dir, bool quiet);
int cmd_estimate(const ExperimentConfig& cfg, const std::string& wav_path,
                 const std::string& truth_path, const std::string& out_dir, bool quiet);
int cmd_doppler_demo(const ExperimentConfig& cfg, const std::string& out_dir, bool quiet);
int cmd_bench(const ExperimentConfig& cfg, const std::string& out_dir, bool quiet);

}  // namespace warpest
