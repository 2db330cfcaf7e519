// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The warpest authors

#pragma once

#include <functional>
#include <string>
#include <vector>

namespace warpest {

/// Nonnegative spectral density sampled on strictly increasing frequencies.
/// Evaluation is linear between samples and zero outside the sampled support.
///
/// Two conventions share this container:
///  - "physical": one-sided density in Hz, variance = integral over [0, Fs/2];
///  - "analysis": two-sided density restricted to positive normalized
///    frequency (cycles/sample), variance = 2 * integral.
/// Converters below move between them; all covariance/likelihood code takes
/// the analysis convention.
class PowerSpectrum {
public:
    PowerSpectrum() = default;
    PowerSpectrum(std::vector<double> freqs, std::vector<double> values);

    double operator()(double nu) const;
    bool empty() const { return freqs_.empty(); }
    const std::vector<double>& freqs() const { return freqs_; }
    const std::vector<double>& values() const { return values_; }

    /// Integral of the density over its support (trapezoid on the knots).
    double integral() const;
    double support_lo() const { return freqs_.empty() ? 0.0 : freqs_.front(); }
    double support_hi() const { return freqs_.empty() ? 0.0 : freqs_.back(); }

private:
    std::vector<double> freqs_;
    std::vector<double> values_;
};

/// One-sided Hz density -> two-sided normalized density on [0, 1/2].
PowerSpectrum to_analysis_spectrum(const PowerSpectrum& physical, double fs);
/// Inverse of to_analysis_spectrum.
PowerSpectrum to_physical_spectrum(const PowerSpectrum& analysis, double fs);

/// Smooth positive amplitude envelope with grid-verified bounds
/// 0 < c_a <= a(t) <= C_a.
struct AmplitudeFn {
    std::function<double(double)> value;
    std::function<double(double)> derivative;
    double c_a = 0.0;
    double C_a = 0.0;
};

/// Strictly increasing time warp with gamma(0) = 0 and grid-verified bounds
/// 0 < c_gamma <= gamma'(t) <= C_gamma.
struct WarpFn {
    std::function<double(double)> value;      // gamma(t), seconds -> seconds
    std::function<double(double)> rate;       // gamma'(t)
    std::function<double(double)> curvature;  // gamma''(t)
    double c_gamma = 0.0;
    double C_gamma = 0.0;
};

AmplitudeFn identity_amplitude();
WarpFn identity_warp();

/// Real uniformly sampled signal.
struct SampledSignal {
    std::vector<double> samples;
    double fs = 0.0;

    std::size_t size() const { return samples.size(); }
    double duration() const { return samples.empty() ? 0.0 : (samples.size() - 1) / fs; }
};

}  // namespace warpest
