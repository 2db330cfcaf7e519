// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The warpest authors

#include "warpest/types.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace warpest {

PowerSpectrum::PowerSpectrum(std::vector<double> freqs, std::vector<double> values)
    : freqs_(std::move(freqs)), values_(std::move(values)) {
    if (freqs_.size() != values_.size())
        throw std::invalid_argument("PowerSpectrum: freqs/values size mismatch");
    for (std::size_t i = 0; i < freqs_.size(); ++i) {
        if (!std::isfinite(freqs_[i]) || !std::isfinite(values_[i]))
            throw std::invalid_argument("PowerSpectrum: non-finite sample");
        if (values_[i] < 0.0)
            throw std::invalid_argument("PowerSpectrum: negative density");
        if (i > 0 && !(freqs_[i] > freqs_[i - 1]))
            throw std::invalid_argument("PowerSpectrum: frequencies must be strictly increasing");
        if (freqs_[i] < 0.0)
            throw std::invalid_argument("PowerSpectrum: negative frequency");
    }
    // Finite J_X = int xi^-1 S(xi) dxi requires S(0) = 0.
    if (!freqs_.empty() && freqs_.front() == 0.0 && values_.front() != 0.0)
        throw std::invalid_argument("PowerSpectrum: density must vanish at zero frequency");
}

double PowerSpectrum::operator()(double nu) const {
    if (freqs_.empty() || nu < freqs_.front() || nu > freqs_.back()) return 0.0;
    auto it = std::upper_bound(freqs_.begin(), freqs_.end(), nu);
    if (it == freqs_.begin()) return values_.front();
    if (it == freqs_.end()) return values_.back();
    const std::size_t i = static_cast<std::size_t>(it - freqs_.begin()) - 1;
    const double t = (nu - freqs_[i]) / (freqs_[i + 1] - freqs_[i]);
    return values_[i] + t * (values_[i + 1] - values_[i]);
}

double PowerSpectrum::integral() const {
    double s = 0.0;
    for (std::size_t i = 1; i < freqs_.size(); ++i)
        s += 0.5 * (values_[i] + values_[i - 1]) * (freqs_[i] - freqs_[i - 1]);
    return s;
}

PowerSpectrum to_analysis_spectrum(const PowerSpectrum& physical, double fs) {
    if (fs <= 0.0) throw std::invalid_argument("to_analysis_spectrum: fs must be positive");
    std::vector<double> f = physical.freqs();
    std::vector<double> v = physical.values();
    for (auto& x : f) x /= fs;
    for (auto& x : v) x *= 0.5 * fs;
    return {std::move(f), std::move(v)};
}

PowerSpectrum to_physical_spectrum(const PowerSpectrum& analysis, double fs) {
    if (fs <= 0.0) throw std::invalid_argument("to_physical_spectrum: fs must be positive");
    std::vector<double> f = analysis.freqs();
    std::vector<double> v = analysis.values();
    for (auto& x : f) x *= fs;
    for (auto& x : v) x *= 2.0 / fs;
    return {std::move(f), std::move(v)};
}

AmplitudeFn identity_amplitude() {
    AmplitudeFn a;
    a.value = [](double) { return 1.0; };
    a.derivative = [](double) { return 0.0; };
    a.c_a = 1.0;
    a.C_a = 1.0;
    return a;
}

WarpFn identity_warp() {
    WarpFn g;
    g.value = [](double t) { return t; };
    g.rate = [](double) { return 1.0; };
    g.curvature = [](double) { return 0.0; };
    g.c_gamma = 1.0;
    g.C_gamma = 1.0;
    return g;
}

}  // namespace warpest
