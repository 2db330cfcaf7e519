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

/// Average-energy amplitude baseline: ||w||^2 / M_s.
double baseline_theta1(const Eigen::VectorXcd& w);

/// Scalogram scale-center-of-mass warp baseline, shifted to zero mean.
/// The sign is chosen so the output estimates +theta2: a warp speed-up moves
/// coefficient energy toward smaller scales, so the centered center of mass
/// enters with a minus sign. Zero-energy columns yield 0 and are flagged.
std::vector<double> baseline_theta2(const Eigen::MatrixXcd& columns,
                                    const std::vector<double>& scales,
                                    std::vector<std::uint8_t>* zero_energy = nullptr);

/// Closed form CRLB(theta1) = 2 theta1^2 / M_s.
double crlb_theta1(double theta1, int m_scales);

/// Slepian-Bangs bound 2 / Trace{(C^{-1} dC/dtheta)^2}.
double slepian_bangs(const Eigen::MatrixXd& C, const Eigen::MatrixXd& dC);

/// CRLB for theta2 at the given local parameters; dC/dtheta2 by central
/// finite differences of the covariance assembly (step fd_step).
double crlb_theta2(const LocalParams& params, const PowerSpectrum& analysis_spectrum,
                   const std::vector<double>& scales, const Wavelet& wavelet, double q,
                   double noise_var = 0.0, double fd_step = 1e-4);

/// Plug-in amplitude bias
///   b = (theta1 / M_s) Trace{ C0~_r(theta2~)^{-1} C0(theta2) - I }
/// plus, when noise_var > 0, the white-noise term
///   (1 / M_s) Trace{ C0~_r(theta2~)^{-1} C_wn }.
double bias_theta1(double theta1, const PowerSpectrum& true_spectrum,
                   const PowerSpectrum& est_spectrum, double true_theta2,
                   double est_theta2, const std::vector<double>& scales,
                   const Wavelet& wavelet, double q, double r, double noise_var = 0.0);

/// Constants and per-scale values of the tangent-approximation error bound
///   E|eps(s, tau)|^2 <= C_a^2 q^{3s} (K1 ||g''|| + K2 q^{mu s} ||g''||^rho
///                                      + K3 ||a'||)^2.
/// All quantities are evaluated in normalized units (time in samples).
/// `psi_decay_scale` is sup_t (1 + |t|^beta) |psi(t)|; the stated bound holds
/// for a wavelet with that sup equal to 1, so the reported per-scale bound is
/// multiplied by its square.
struct Theorem1Report {
    double beta = 0, rho = 0, mu = 0;
    double sigma_X2 = 0, I_X_rho = 0;
    double K1 = 0, K2 = 0, K3 = 0;
    double gamma_curv_sup = 0, amp_deriv_sup = 0;
    double c_a = 0, C_a = 0, c_gamma = 0, C_gamma = 0;
    double psi_decay_scale = 1.0;
    std::vector<double> scales;
    std::vector<double> bound;
};

/// sup_t (1 + |t|^beta) |psi(t)| for the time-domain wavelet (t in samples).
double wavelet_time_decay_scale(const Wavelet& wavelet, double beta);

Theorem1Report theorem1_bound(const AmplitudeFn& a, const WarpFn& gamma,
                              const PowerSpectrum& physical_spectrum, double fs,
                              double t_lo, double t_hi, double beta,
                              const std::vector<double>& scales, double q,
                              const Wavelet* premise_wavelet = nullptr);

/// Monte-Carlo estimate of E|eps(s, tau)|^2 where eps is the difference
/// between the wavelet transform of the deformed signal and its tangent
/// approximation a(tau) W_x(s + log_q gamma'(tau), gamma(tau)); the reference
/// transform is evaluated exactly from the synthesis Fourier coefficients.
struct ApproxErrorReport {
    Theorem1Report theory;
    std::vector<int> tau_samples;
    Eigen::MatrixXd mean_sq_error;  // scales x taus
    int violations = 0;
    int trials = 0;
};

ApproxErrorReport empirical_approx_error(const AmplitudeFn& a, const WarpFn& gamma,
                                         const PowerSpectrum& physical_spectrum,
                                         const ScaleGrid& grid, const Wavelet& wavelet,
                                         double fs, int n_samples, double beta,
                                         int n_trials, std::uint64_t seed, int n_taus = 9);

/// Spectrum-bias bound of the plug-in wavelet spectrum estimator:
///   ||b||_inf <= (J_X / ||psi||^2) (K1' ||theta1 - theta1~||_inf
///                                    + K2' ||theta2~ - theta2||_inf).
struct Prop1Report {
    double K1p = 0, K2p = 0;
    double J_X = 0, psi_norm2 = 0;
    double phi1_sup = 0, phi2_sup = 0, psi_hat_deriv_sup = 0;
    double eta_decay_margin = 0;  // sup of |psi_hat(u)| u^eta over the tail
    double theta1_err = 0, theta2_err = 0, c_theta1 = 0;
    double bound = 0;
};

Prop1Report prop1_bias_bound(const Wavelet& wavelet, const PowerSpectrum& analysis_spectrum,
                             double q, double theta1_err_sup, double theta2_err_sup,
                             double c_theta1, double eta = 2.5);

/// Band-pass filtered spectrum S_{X,psi}(q^{-s} omega0)
///   = (1/||psi||^2) int S(xi) q^s |psi_hat(q^s xi)|^2 dxi
/// (the bias target of the wavelet-domain spectrum estimator).
double bandpass_spectrum_value(const PowerSpectrum& analysis_spectrum,
                               const Wavelet& wavelet, double q, double s);

double mean_squared_error(const std::vector<double>& est, const std::vector<double>& truth);

struct MseTable {
    double baseline_amplitude = 0;
    double algorithm_amplitude = 0;
    double baseline_warp = 0;
    double algorithm_warp = 0;
};

/// Table of mean square errors on the theta scales (amplitude on theta1 = a^2,
/// warping on theta2 = log_q gamma'). The amplitude baseline is rescaled to
/// unit mean before scoring (the benchmark family normalizes mean a^2 = 1,
/// mirroring the zero-mean convention of the warp baseline); the algorithm
/// estimates are scored as-is.
MseTable mse_report(const std::vector<double>& baseline1, const std::vector<double>& algo1,
                    const std::vector<double>& baseline2, const std::vector<double>& algo2,
                    const std::vector<double>& truth1, const std::vector<double>& truth2,
                    bool normalize_baseline_amplitude = true);

}  // namespace warpest
