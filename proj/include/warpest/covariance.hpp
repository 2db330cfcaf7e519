// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The warpest authors

#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "warpest/types.hpp"
#include "warpest/wavelet.hpp"

namespace warpest {

/// Per-frame amplitude/warp parameters: theta1 = a(tau_n)^2,
/// theta2 = log_q gamma'(tau_n).
struct LocalParams {
    double theta1 = 1.0;
    double theta2 = 0.0;
    int frame = 0;
};

/// Fixed-time covariance of the wavelet coefficient vector across scales.
/// The analysis wavelets here have real nonnegative Fourier transforms, so
/// these matrices are real symmetric (the Hermitian case with zero imaginary
/// part).
struct CovMatrix {
    enum class Provenance { clean, noisy, regularized };

    Eigen::MatrixXd entries;
    std::vector<double> scales;
    Provenance provenance = Provenance::clean;
    double noise_var = 0.0;
    double reg = 0.0;

    int size() const { return static_cast<int>(entries.rows()); }
};

/// Shared quadrature state for covariance assembly on a fixed scale set:
/// log-spaced frequency nodes over the union of wavelet passbands, with
/// per-scale tables of psi_hat values. When `align_step` (= ds * ln q of the
/// scale grid) is positive, the node spacing divides it so dilations by whole
/// scale steps map nodes onto nodes.
class CovWorkspace {
public:
    CovWorkspace(std::vector<double> scales, const Wavelet& wavelet, double q,
                 int log2_nodes = 11, double align_step = 0.0);

    const std::vector<double>& scales() const { return scales_; }
    double q() const { return q_; }

    /// C0(theta2)_ij = q^{(s_i+s_j)/2} int S(q^{-theta2} xi)
    ///                 psi_hat(q^{s_i} xi) psi_hat(q^{s_j} xi) dxi
    Eigen::MatrixXd c0(double theta2, const PowerSpectrum& analysis_spectrum) const;

    /// Unit-density Gram matrix: int psi_hat(q^{s_i} xi) psi_hat(q^{s_j} xi) dxi
    /// with the same q^{(s_i+s_j)/2} prefactor (white-noise covariance core).
    const Eigen::MatrixXd& gram() const { return gram_; }

private:
    std::vector<double> scales_;
    std::vector<double> prefactor_;
    std::vector<double> nodes_;
    std::vector<double> weights_;
    std::vector<int> lo_;
    std::vector<std::vector<double>> tab_;
    Eigen::MatrixXd gram_;
    double q_;

    Eigen::MatrixXd assemble(const std::vector<double>& node_density) const;
};

/// Clean fixed-time covariance core (no amplitude factor). `verify` runs the
/// quadrature at doubled resolution and fails on > 1e-6 relative disagreement.
CovMatrix build_C0(double theta2, const PowerSpectrum& analysis_spectrum,
                   const std::vector<double>& scales, const Wavelet& wavelet, double q,
                   bool verify = true);

/// theta1 * C0(theta2) + C_wn with (C_wn)_ij = noise_var * Gram_ij.
CovMatrix build_C_noisy(const LocalParams& params, double noise_var,
                        const PowerSpectrum& analysis_spectrum,
                        const std::vector<double>& scales, const Wavelet& wavelet, double q,
                        bool verify = true);

/// (1 - r) C + r I for r in [0, 1].
CovMatrix regularize(const CovMatrix& C, double r);

/// Full time-scale covariance kernel C(s, s', tau, tau') evaluated pointwise
/// (tau, tau' in seconds; spectrum in analysis convention).
std::complex<double> full_kernel(const AmplitudeFn& a, const WarpFn& gamma,
                                 const PowerSpectrum& analysis_spectrum,
                                 const Wavelet& wavelet, double q, double fs, double s,
                                 double s_prime, double tau, double tau_prime);

struct LogDetSolve {
    double log_det = 0.0;
    Eigen::VectorXcd solution;
};

/// Cholesky log|det C| and C^{-1} w for symmetric positive definite C.
/// Throws std::runtime_error instructing the caller to regularize otherwise.
LogDetSolve log_det_and_solve(const Eigen::MatrixXd& C, const Eigen::VectorXcd& w);

}  // namespace warpest
