// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The warpest authors

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "warpest/covariance.hpp"
#include "warpest/types.hpp"
#include "warpest/wavelet.hpp"

namespace warpest {

struct AscentControls {
    double init_step = 0.1;
    double backtrack = 0.5;
    int max_iters = 50;
    double grad_tol = 1e-5;
    double fd_step = 1e-4;
};

enum class SpectrumRefinement {
    wavelet_deconvolved,  // wavelet-domain variance, band-pass kernel deconvolved
    wavelet,              // wavelet-domain empirical variance as-is
    welch_stationarized,  // Welch periodogram of the stationarized signal
};

struct EstimationConfig {
    double stop_threshold = 1e-3;  // T in (0, 1)
    int max_iterations = 15;       // k_max
    /// Plug-in spectrum for the next iteration. The raw wavelet-domain
    /// estimate is smeared by the band-pass kernel |psi_hat|^2, and the
    /// smeared model drags every per-frame warp estimate toward the mean;
    /// Richardson-Lucy deconvolution of the (exactly known) kernel keeps the
    /// alternation anchored.
    SpectrumRefinement spectrum_refinement = SpectrumRefinement::wavelet_deconvolved;
    int deconvolve_iterations = 30;
    /// Annealed residual-spread deconvolution: the forward kernel also
    /// carries a log-frequency Gaussian of this width (octaves), halved each
    /// iteration down to the floor, modelling the spread the current warp
    /// residuals leave in the unwarped coefficients.
    double anneal_spread_oct = 0.25;
    double anneal_spread_floor = 0.02;
    /// After convergence, polish every frame once against the Welch spectrum
    /// of the stationarized signal. Off by default: the stationarized Welch
    /// model is smeared by the same residual spread and measurably weaker
    /// than the deconvolved wavelet plug-in.
    bool final_polish = false;
    /// Half-width (in frames) of the local-quadratic smoother applied to the
    /// final per-frame trajectories; the per-frame estimates fluctuate about
    /// the smooth deformations and are reported raw alongside. 0 disables.
    int smooth_halfwidth = 56;
    int welch_segment = 2048;
    /// Column stride for the spectrum update (finer than the estimation
    /// stride: more averaging costs only interpolation).
    int spectrum_stride = 16;
    AscentControls theta2_ascent;
    AscentControls theta1_ascent;
    int time_stride = 64;          // samples between estimation frames
    double noise_var = 0.0;        // sigma_W^2; 0 selects the clean model
    double regularization = 1e-3;  // r on the fine scale grid (0 on the coarse grid)
    double theta1_floor_rel = 1e-8;
    /// Standing diagonal floor (relative to the largest model variance) for
    /// the coarse-grid warp likelihood; keeps scales carrying only numerical
    /// junk from shaping the objective.
    double theta2_ridge_rel = 1e-4;
    /// Mode-hopping guard for the warp update: before the gradient ascent,
    /// scan theta2 on a grid around the previous iterate (a wide scan on the
    /// first iteration, +-rescan_range afterwards) and start from the best
    /// point. The per-frame likelihood under an early plug-in spectrum is
    /// multimodal; a purely local ascent can freeze on a wrong mode.
    double theta2_scan_range = 0.8;
    double theta2_rescan_range = 0.4;
    double theta2_scan_step = 0.05;
    /// Sanity cap on the amplitude update, relative to the median over
    /// frames (mirrors the floor on silent frames).
    double theta1_cap_rel = 1e2;
    /// Normalize the quadratic form by Trace{C0_r^{-1} C0} instead of M_s in
    /// the per-frame amplitude update. Both coincide for r -> 0 and a
    /// full-rank covariance; the trace form stays unbiased when the fine-grid
    /// covariance is numerically rank deficient.
    bool trace_normalized_theta1 = true;
};

struct EstimationState {
    std::vector<int> frames;             // sample indices of retained frames
    std::vector<double> frame_times;     // seconds
    std::vector<double> theta1;          // final per-frame a(tau_n)^2 (smoothed)
    std::vector<double> theta2;          // final per-frame log_q gamma'(tau_n) (smoothed)
    std::vector<double> theta1_raw;      // per-frame maximum-likelihood values
    std::vector<double> theta2_raw;
    std::vector<double> theta3;          // gamma~(tau_n)
    std::vector<double> baseline_theta1; // average-energy baseline
    std::vector<double> baseline_theta2; // scalogram center-of-mass baseline
    std::vector<double> crit_theta1;     // stopping-criterion series, j = 1
    std::vector<double> crit_theta2;     // stopping-criterion series, j = 2
    std::vector<PowerSpectrum> spectra;  // plug-in spectra (analysis units), k = 0..K
    PowerSpectrum spectrum_wavelet;      // final wavelet-domain estimate
    int iterations = 0;
    bool converged = false;
    int theta2_ascent_failures = 0;
    int theta1_ascent_failures = 0;
    std::vector<double> amplitude;       // a~ on the full time grid
    std::vector<double> warp_rate;       // gamma~' on the full time grid
    std::vector<double> warp;            // gamma~ on the full time grid, gamma~(0) = 0
    double fs = 0.0;
    double q = 2.0;
    double omega0 = 0.0;
};

/// L(Theta_n) = -1/2 ln|det C| - 1/2 <C^{-1} w, w>.
/// Clean model (noise_var = 0): C = theta1 * ((1-r) C0(theta2) + r I).
/// Noisy model:                 C = (1-r)(theta1 C0(theta2) + C_wn) + r I.
double frame_log_likelihood(const LocalParams& params, const Eigen::VectorXcd& w,
                            const PowerSpectrum& analysis_spectrum,
                            const std::vector<double>& scales, const Wavelet& wavelet,
                            double q, double noise_var = 0.0, double r = 0.0);

/// Closed-form clean-model amplitude update:
/// theta1~ = <C0_r(theta2)^{-1} w, w> / M_s.
double estimate_theta1_closed_form(const Eigen::VectorXcd& w, double theta2,
                                   const PowerSpectrum& analysis_spectrum,
                                   const std::vector<double>& scales,
                                   const Wavelet& wavelet, double q, double r);

/// Same quadratic form normalized by Trace{C0_r^{-1} C0}; reduces to the
/// closed form when C0 is full rank and r -> 0.
double estimate_theta1_rank_corrected(const Eigen::VectorXcd& w, double theta2,
                                      const PowerSpectrum& analysis_spectrum,
                                      const std::vector<double>& scales,
                                      const Wavelet& wavelet, double q, double r);

/// Warp update: gradient ascent (central differences, backtracking line
/// search) of the frame likelihood in theta2 on the coarse scale grid.
double estimate_theta2(const Eigen::VectorXcd& w_coarse, double theta1,
                       const PowerSpectrum& analysis_spectrum,
                       const std::vector<double>& coarse_scales, const Wavelet& wavelet,
                       double q, double noise_var, double init,
                       const AscentControls& controls = {}, bool* converged = nullptr);

/// Noisy-model amplitude update: gradient ascent over theta1 > 0
/// (log-parametrized so positivity is structural).
double estimate_theta1_noisy(const Eigen::VectorXcd& w, double theta2,
                             const PowerSpectrum& analysis_spectrum,
                             const std::vector<double>& scales, const Wavelet& wavelet,
                             double q, double noise_var, double init,
                             const AscentControls& controls = {}, double r = 0.0,
                             bool* converged = nullptr);

/// Result of undoing the deformation in the wavelet domain: column n holds
/// W_y(s - theta2_n, tau_n)/sqrt(theta1_n), rows needing extrapolation in
/// scale are marked invalid.
struct UnwarpedTransform {
    Eigen::MatrixXcd coeffs;
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> valid;
    std::vector<double> scales;
    double q = 2.0;
};

UnwarpedTransform unwarp_coeffs(const Eigen::MatrixXcd& columns,
                                const std::vector<double>& scales, double q,
                                const std::vector<double>& theta1,
                                const std::vector<double>& theta2);

UnwarpedTransform unwarp_coeffs(const TimeScaleTransform& Wy,
                                const std::vector<double>& theta1,
                                const std::vector<double>& theta2);

/// S~(q^{-s_m} omega0) = ||row m over valid columns||^2 / (N_valid ||psi||^2),
/// extended to the full band by linear interpolation with S~(0) = 0.
PowerSpectrum spectrum_estimate(const UnwarpedTransform& Wx, const Wavelet& wavelet);
PowerSpectrum spectrum_estimate(const TimeScaleTransform& Wx, const Wavelet& wavelet);

/// Alternating joint estimation of theta1, theta2 and the spectrum.
EstimationState run_joint_estimation(const SampledSignal& y, const EstimationConfig& cfg,
                                     const ScaleGrid& grid, const Wavelet& wavelet);

/// x~ = D_{gamma~^{-1}} A_{a~^{-1}} y on the uniform grid.
SampledSignal stationarize(const SampledSignal& y, const EstimationState& state);

/// Averaged modified periodogram (Hann window), one-sided density in Hz
/// normalized so the integral approximates the variance.
PowerSpectrum welch_psd(const SampledSignal& x, int segment_length, double overlap = 0.5);

}  // namespace warpest
