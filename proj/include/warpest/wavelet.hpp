// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The warpest authors

#pragma once

#include <Eigen/Dense>
#include <numbers>
#include <utility>
#include <vector>

#include "warpest/types.hpp"

namespace warpest {

/// delta(a, b) = (a/b + b/a)/2 - 1; symmetric, nonnegative, zero iff a = b.
double divergence(double a, double b);

enum class WaveletKind { derivative_of_gaussian, sharp };

/// Analytic wavelet defined in the positive Fourier domain.
///
/// derivative_of_gaussian: psi_hat(nu) = nu^k exp(-k nu^2 / (2 nu0^2)),
/// normalized to peak 1 at nu0.
/// sharp: psi_hat(nu) = eps^{delta(nu, nu0)/delta(nu1, nu0)}.
/// Frequencies are in cycles/sample (normalized); nu0 defaults to 1/q.
/// The default tolerance point nu1 = nu0 * 2^{-1/4} balances two plug-in
/// effects: narrower designs leave the warp update hypersensitive to small
/// warp errors in the amplitude step, wider ones smear the spectrum estimate
/// until the warp stops being identifiable.
struct WaveletSpec {
    WaveletKind kind = WaveletKind::sharp;
    double nu0 = 0.5;
    int dog_order = 4;
    double eps = 1e-3;
    double nu1 = 0.5 * 0.8408964152537145;  // nu0 * 2^{-1/4}
};

WaveletSpec sharp_wavelet(double nu0 = 0.5, double eps = 1e-3, double nu1 = -1.0);
WaveletSpec dog_wavelet(int order, double nu0 = 0.5);

/// psi_hat(nu); zero for nu <= 0.
double wavelet_fourier_eval(const WaveletSpec& spec, double nu);

/// (omega0, ||psi||_2^2): centroid of |psi_hat|^2 and int |psi_hat|^2 dnu,
/// by composite trapezoid on a log-spaced grid with a Richardson check.
std::pair<double, double> centroid_and_norm(const WaveletSpec& spec);

/// Wavelet with cached centroid/norm and passband lookup.
class Wavelet {
public:
    explicit Wavelet(const WaveletSpec& spec);

    double fourier(double nu) const { return wavelet_fourier_eval(spec_, nu); }
    double omega0() const { return omega0_; }
    double norm2() const { return norm2_; }
    const WaveletSpec& spec() const { return spec_; }

    /// [lo, hi] where psi_hat >= tol (relative to the unit peak).
    std::pair<double, double> band(double tol) const;

    /// One-sided time support of the mother wavelet in samples: smallest T
    /// with less than 1e-6 of the energy beyond |t| > T. Computed lazily.
    double time_support() const;

private:
    WaveletSpec spec_;
    double omega0_;
    double norm2_;
    mutable double time_support_ = -1.0;
};

/// Arithmetic scale grid s_i = s0 + i * ds with coarse subsampling stride p.
struct ScaleGrid {
    double s0 = 0.0;
    double ds = 0.0;
    int count = 0;
    int subsample = 1;
    double q = 2.0;

    double scale(int i) const { return s0 + i * ds; }
    std::vector<double> scales() const;
    std::vector<int> coarse_indices() const;   // every subsample-th index
    std::vector<double> coarse_scales() const;
    /// Analysis frequency q^{-s_i} * omega0 (cycles/sample).
    double frequency(int i, double omega0) const;
};

/// Grid whose analysis frequencies q^{-s} omega0 cover
/// [fmin_hz/fs, fmax_frac] (normalized), lowest scale first.
ScaleGrid default_scale_grid(const Wavelet& wavelet, double fs, double fmin_hz = 50.0,
                             double fmax_frac = 0.45, int count = 106, int subsample = 7,
                             double q = 2.0);

/// Discretized continuous wavelet transform on scale x time; rows are scales,
/// columns are sample times. Periodic (FFT) boundary; `margin` gives the
/// number of edge samples affected by wrap-around at the largest scale.
struct TimeScaleTransform {
    Eigen::MatrixXcd coeffs;
    ScaleGrid grid;
    double fs = 0.0;
    int margin = 0;
};

/// Edge margin in samples: 4 q^{s_max} / nu0.
int cwt_margin_samples(const ScaleGrid& grid, const Wavelet& wavelet);

TimeScaleTransform cwt(const SampledSignal& x, const ScaleGrid& grid, const Wavelet& wavelet);

}  // namespace warpest
