// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The warpest authors

#pragma once

#include <cstdint>

#include "warpest/types.hpp"

namespace warpest {

/// Two-bump raised-cosine test spectrum (one-sided, Hz):
///   S(nu) = sum_l [1 + cos(2*pi*(nu - nu0_l)/dnu_l)] on |nu - nu0_l| < dnu_l/2.
/// Sample knots are placed so bump centers and edges are exact.
PowerSpectrum synth_spectrum(double nu0_1, double dnu_1, double nu0_2, double dnu_2,
                             double fs, int samples_per_bump = 800);

/// Sinusoidal amplitude envelope a(t) = a0 (1 + a1 cos(2*pi*t/T1)) with a0
/// solved so the mean square of a over [0, t_final] is 1.
AmplitudeFn synth_amplitude(double a1, double t1, double t_final);

/// Warp with log_q gamma'(t) = Gamma + depth * cos(2*pi*t/T2) exp(-t/T3);
/// Gamma is solved (bisection) so gamma' has unit mean over [0, t_final], and
/// gamma comes from cumulative trapezoid integration with gamma(0) = 0.
WarpFn synth_warp(double t2, double t3, double t_final, double q = 2.0,
                  double grid_step = 1.0 / 8000.0, double depth = 1.0);

/// Doppler warp for a source passing at speed V (m/s) and distance d (m) with
/// sound speed c (m/s); the rate is
///   gamma'(t) = c^2/(c^2 - V^2) * (1 - V^2 t / sqrt(d^2 (c^2 - V^2) + (cVt)^2)).
/// gamma is integrated on [t_lo, t_hi] with gamma(0) = 0; t = 0 is the instant
/// the source passes in front of the observer.
WarpFn doppler_warp(double c, double V, double d, double t_lo = -8.0, double t_hi = 8.0,
                    double grid_step = 1.0 / 8000.0);

/// Analytic Doppler rate, usable without constructing the WarpFn.
double doppler_rate(double c, double V, double d, double t);

/// Stationary zero-mean Gaussian realization whose one-sided PSD matches
/// `spectrum` (spectral synthesis; deterministic given seed).
SampledSignal gaussian_stationary_synth(const PowerSpectrum& spectrum, std::size_t n,
                                        double fs, std::uint64_t seed);

/// y(t_n) = a(t_n) sqrt(gamma'(t_n)) x(gamma(t_n)), with x evaluated by cubic
/// spline interpolation. The warp may overshoot the span of x by up to two
/// samples (clamped); beyond that the first offending time is reported.
SampledSignal apply_deformation(const SampledSignal& x, const AmplitudeFn& a,
                                const WarpFn& gamma);

}  // namespace warpest
