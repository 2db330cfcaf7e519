// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The warpest authors

#include "warpest/diagnostics.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "warpest/numerics.hpp"
#include "warpest/signal_model.hpp"

namespace warpest {

double baseline_theta1(const Eigen::VectorXcd& w) {
    if (w.size() == 0) throw std::invalid_argument("baseline_theta1: empty vector");
    return w.squaredNorm() / static_cast<double>(w.size());
}

std::vector<double> baseline_theta2(const Eigen::MatrixXcd& columns,
                                    const std::vector<double>& scales,
                                    std::vector<std::uint8_t>* zero_energy) {
    const Eigen::Index m = columns.rows();
    const Eigen::Index f = columns.cols();
    if (static_cast<std::size_t>(m) != scales.size())
        throw std::invalid_argument("baseline_theta2: row/scale mismatch");
    if (f == 0) throw std::invalid_argument("baseline_theta2: no columns");

    std::vector<double> out(f, 0.0);
    if (zero_energy) zero_energy->assign(f, 0);
    std::vector<bool> usable(f, false);
    double mean = 0.0;
    long n_usable = 0;
    for (Eigen::Index n = 0; n < f; ++n) {
        double energy = 0.0, com = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            const double p = std::norm(columns(i, n));
            energy += p;
            com += scales[i] * p;
        }
        if (energy <= 0.0) {
            if (zero_energy) (*zero_energy)[n] = 1;
            continue;
        }
        // Minus sign: energy centered at scale sbar - theta2 for warp theta2.
        out[n] = -com / energy;
        usable[n] = true;
        mean += out[n];
        ++n_usable;
    }
    if (n_usable > 0) {
        mean /= n_usable;
        for (Eigen::Index n = 0; n < f; ++n)
            if (usable[n]) out[n] -= mean;
    }
    return out;
}

double crlb_theta1(double theta1, int m_scales) {
    if (!(theta1 > 0.0)) throw std::invalid_argument("crlb_theta1: theta1 must be positive");
    if (m_scales < 1) throw std::invalid_argument("crlb_theta1: need at least one scale");
    return 2.0 * theta1 * theta1 / m_scales;
}

double slepian_bangs(const Eigen::MatrixXd& C, const Eigen::MatrixXd& dC) {
    if (C.rows() != C.cols() || dC.rows() != dC.cols() || C.rows() != dC.rows())
        throw std::invalid_argument("slepian_bangs: dimension mismatch");
    Eigen::LLT<Eigen::MatrixXd> llt(C);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("slepian_bangs: covariance is not positive definite");
    const Eigen::MatrixXd A = llt.solve(dC);  // C^{-1} dC
    const double tr = (A * A).trace();
    if (!(tr > 0.0))
        throw std::runtime_error("slepian_bangs: parameter not identifiable (zero trace)");
    return 2.0 / tr;
}

double crlb_theta2(const LocalParams& params, const PowerSpectrum& spectrum,
                   const std::vector<double>& scales, const Wavelet& wavelet, double q,
                   double noise_var, double fd_step) {
    CovWorkspace ws(scales, wavelet, q);
    Eigen::MatrixXd C = params.theta1 * ws.c0(params.theta2, spectrum);
    if (noise_var > 0.0) C += noise_var * ws.gram();
    // Compactly supported spectra leave dead scales with exactly zero
    // rows; a vanishing relative ridge keeps the trace formula stable.
    C += 1e-11 * C.diagonal().maxCoeff() *
         Eigen::MatrixXd::Identity(C.rows(), C.cols());
    const Eigen::MatrixXd dC =
        params.theta1 *
        (ws.c0(params.theta2 + fd_step, spectrum) - ws.c0(params.theta2 - fd_step, spectrum)) /
        (2.0 * fd_step);
    return slepian_bangs(C, dC);
}

double bias_theta1(double theta1, const PowerSpectrum& true_spectrum,
                   const PowerSpectrum& est_spectrum, double true_theta2,
                   double est_theta2, const std::vector<double>& scales,
                   const Wavelet& wavelet, double q, double r, double noise_var) {
    CovWorkspace ws(scales, wavelet, q);
    const Eigen::Index m = static_cast<Eigen::Index>(scales.size());
    Eigen::MatrixXd est = ws.c0(est_theta2, est_spectrum);
    if (r > 0.0) est = (1.0 - r) * est + r * Eigen::MatrixXd::Identity(m, m);
    Eigen::LLT<Eigen::MatrixXd> llt(est);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("bias_theta1: estimated covariance not positive definite");
    const Eigen::MatrixXd target = llt.solve(ws.c0(true_theta2, true_spectrum));
    double bias = theta1 / static_cast<double>(m) *
                  (target.trace() - static_cast<double>(m));
    if (noise_var > 0.0)
        bias += llt.solve(noise_var * ws.gram()).trace() / static_cast<double>(m);
    return bias;
}

// ------------------------------------------------------------- Theorem 1

double wavelet_time_decay_scale(const Wavelet& wavelet, double beta) {
    // psi(t) = int_0^inf psi_hat(nu) e^{2 pi i nu t} dnu, sampled by a long
    // zero-padded FFT; |psi(-t)| = |psi(t)| because psi_hat is real.
    const double nu_max = wavelet.band(1e-16).second * 1.05;
    const int n_spec = 1 << 13;
    const int n_fft = 1 << 17;
    const double dnu = nu_max / n_spec;

    Fft fft(n_fft);
    std::vector<cplx> spec(n_fft, cplx{0.0, 0.0});
    for (int k = 0; k < n_spec; ++k) {
        const double w = (k == 0) ? 0.5 : 1.0;  // trapezoid end correction
        spec[k] = w * wavelet.fourier(k * dnu);
    }
    // inverse() of the conjugate gives e^{+i} sign with the right scaling
    std::vector<cplx> time = fft.inverse(spec);

    const double dt = 1.0 / (n_fft * dnu);
    double sup = 0.0;
    for (int j = 0; j < n_fft / 2; ++j) {
        const double t = j * dt;
        const double mag = std::abs(time[j]) * dnu * n_fft;  // undo 1/N, apply dnu
        const double v = (1.0 + std::pow(t, beta)) * mag;
        sup = std::max(sup, v);
    }
    return sup;
}

namespace {

double sup_on_grid(const std::function<double(double)>& f, double lo, double hi, int n) {
    double sup = 0.0;
    for (int i = 0; i <= n; ++i)
        sup = std::max(sup, std::abs(f(lo + (hi - lo) * i / n)));
    return sup;
}

}  // namespace

Theorem1Report theorem1_bound(const AmplitudeFn& a, const WarpFn& gamma,
                              const PowerSpectrum& physical_spectrum, double fs,
                              double t_lo, double t_hi, double beta,
                              const std::vector<double>& scales, double q,
                              const Wavelet* premise_wavelet) {
    if (!(beta > 2.0)) throw std::invalid_argument("theorem1_bound: requires beta > 2");
    if (!(t_hi > t_lo)) throw std::invalid_argument("theorem1_bound: empty time span");

    Theorem1Report rep;
    rep.beta = beta;
    rep.rho = (beta - 1.0) / (beta + 2.0);
    rep.mu = (beta - 4.0) / (beta + 2.0);

    const PowerSpectrum S = to_analysis_spectrum(physical_spectrum, fs);
    rep.sigma_X2 = 2.0 * S.integral();  // variance: two-sided density
    {
        // I_X^rho = sqrt(int xi^{2 rho} S(xi) dxi), trapezoid on the knots.
        const auto& fr = S.freqs();
        const auto& va = S.values();
        double acc = 0.0;
        for (std::size_t i = 1; i < fr.size(); ++i)
            acc += 0.5 * (fr[i] - fr[i - 1]) *
                   (std::pow(fr[i], 2.0 * rep.rho) * va[i] +
                    std::pow(fr[i - 1], 2.0 * rep.rho) * va[i - 1]);
        if (!std::isfinite(acc))
            throw std::runtime_error("theorem1_bound: I_X^rho is not finite");
        rep.I_X_rho = std::sqrt(acc);
    }

    // Sup norms as grid maxima of central finite differences on a dense
    // sampling; gamma' is unitless, so gamma'' in 1/s becomes gamma''/fs in
    // normalized (per-sample) time, and likewise for a'.
    const int n_grid = 1 << 12;
    const double fd = (t_hi - t_lo) / (4.0 * n_grid);
    rep.gamma_curv_sup = sup_on_grid(
        [&](double t) { return (gamma.rate(t + fd) - gamma.rate(t - fd)) / (2.0 * fd); },
        t_lo + fd, t_hi - fd, n_grid) / fs;
    rep.amp_deriv_sup = sup_on_grid(
        [&](double t) { return (a.value(t + fd) - a.value(t - fd)) / (2.0 * fd); },
        t_lo + fd, t_hi - fd, n_grid) / fs;
    rep.c_a = a.c_a;
    rep.C_a = a.C_a;
    rep.c_gamma = gamma.c_gamma;
    rep.C_gamma = gamma.C_gamma;
    if (!(rep.c_a > 0.0) || !(rep.c_gamma > 0.0))
        throw std::invalid_argument("theorem1_bound: bounds c_a, c_gamma must be positive");

    const double sigma = std::sqrt(rep.sigma_X2);
    rep.K1 = beta * sigma / (2.0 * (beta - 2.0) * std::sqrt(rep.c_gamma));
    rep.K2 = rep.I_X_rho * std::pow(0.5 * M_PI, rep.rho) * std::sqrt(rep.C_gamma) * 4.0 /
             (3.0 * rep.rho);
    rep.K3 = std::sqrt(rep.C_gamma) * beta * sigma / ((beta - 2.0) * rep.c_a);

    rep.psi_decay_scale =
        premise_wavelet ? wavelet_time_decay_scale(*premise_wavelet, beta) : 1.0;

    rep.scales = scales;
    rep.bound.resize(scales.size());
    const double g = rep.gamma_curv_sup, ad = rep.amp_deriv_sup;
    for (std::size_t i = 0; i < scales.size(); ++i) {
        const double s = scales[i];
        const double core = rep.K1 * g + rep.K2 * std::pow(q, rep.mu * s) * std::pow(g, rep.rho) +
                            rep.K3 * ad;
        rep.bound[i] = rep.C_a * rep.C_a * std::pow(q, 3.0 * s) * core * core *
                       rep.psi_decay_scale * rep.psi_decay_scale;
    }
    return rep;
}

ApproxErrorReport empirical_approx_error(const AmplitudeFn& a, const WarpFn& gamma,
                                         const PowerSpectrum& physical_spectrum,
                                         const ScaleGrid& grid, const Wavelet& wavelet,
                                         double fs, int n_samples, double beta,
                                         int n_trials, std::uint64_t seed, int n_taus) {
    if (n_trials < 1) throw std::invalid_argument("empirical_approx_error: need trials >= 1");
    const int n = n_samples;
    const double t_hi = (n - 1) / fs;

    ApproxErrorReport rep;
    rep.trials = n_trials;
    rep.theory = theorem1_bound(a, gamma, physical_spectrum, fs, 0.0, t_hi, beta,
                                grid.scales(), grid.q, &wavelet);

    // Half again the transform margin: the comparison points must sit clear
    // of any FFT wrap-around tail.
    const int margin = cwt_margin_samples(grid, wavelet) * 3 / 2;
    if (2 * margin + 2 >= n)
        throw std::invalid_argument("empirical_approx_error: signal shorter than margins");
    for (int j = 0; j < n_taus; ++j)
        rep.tau_samples.push_back(margin + static_cast<int>((n - 1.0 - 2 * margin) * j /
                                                            std::max(1, n_taus - 1)));

    rep.mean_sq_error.setZero(grid.count, n_taus);

    Fft fft(n);
    std::vector<cplx> xin(n), coeffs(n);
    for (int trial = 0; trial < n_trials; ++trial) {
        SampledSignal x = gaussian_stationary_synth(physical_spectrum, n, fs,
                                                    derive_seed(seed, trial));
        for (int i = 0; i < n; ++i) xin[i] = x.samples[i];
        fft.forward(xin.data(), coeffs.data());

        // Nonzero positive-frequency bins of the synthesis; the Nyquist bin
        // (self-conjugate) carries weight 1/2 in the real-signal sum.
        std::vector<int> bins;
        for (int k = 1; k <= n / 2; ++k)
            if (std::norm(coeffs[k]) > 0.0) bins.push_back(k);

        // Exact band-limited evaluation of x at arbitrary (fractional) sample u.
        auto x_exact = [&](double u) {
            double acc = 0.0;
            for (int k : bins) {
                const double ph = 2.0 * M_PI * k * u / n;
                const cplx c = coeffs[k];
                const double w = (2 * k == n) ? 1.0 : 2.0;
                acc += w * (c.real() * std::cos(ph) - c.imag() * std::sin(ph));
            }
            return acc / n;
        };

        // Deformed signal (exact warp, no interpolation error).
        SampledSignal y;
        y.fs = fs;
        y.samples.resize(n);
        for (int i = 0; i < n; ++i) {
            const double t = i / fs;
            y.samples[i] = a.value(t) * std::sqrt(gamma.rate(t)) * x_exact(gamma.value(t) * fs);
        }
        TimeScaleTransform Wy = cwt(y, grid, wavelet);

        // Exact W_x(sigma, u) from the synthesis coefficients.
        auto wx_exact = [&](double sigma, double u) {
            const double dil = std::pow(grid.q, sigma);
            const double amp = std::sqrt(dil);
            cplx acc{0.0, 0.0};
            for (int k : bins) {
                const double w = wavelet.fourier(dil * k / static_cast<double>(n));
                if (w == 0.0) continue;
                acc += coeffs[k] * w * std::polar(1.0, 2.0 * M_PI * k * u / n);
            }
            return acc * (amp / static_cast<double>(n));
        };

        const double lnq = std::log(grid.q);
        for (int j = 0; j < n_taus; ++j) {
            const int tau = rep.tau_samples[j];
            const double t = tau / fs;
            const double shift = std::log(gamma.rate(t)) / lnq;
            const double u = gamma.value(t) * fs;
            for (int m = 0; m < grid.count; ++m) {
                const cplx approx = a.value(t) * wx_exact(grid.scale(m) + shift, u);
                const cplx err = Wy.coeffs(m, tau) - approx;
                rep.mean_sq_error(m, j) += std::norm(err);
            }
        }
    }
    rep.mean_sq_error /= static_cast<double>(n_trials);

    for (int m = 0; m < grid.count; ++m)
        for (int j = 0; j < n_taus; ++j)
            if (rep.mean_sq_error(m, j) > rep.theory.bound[m]) ++rep.violations;
    return rep;
}

// ------------------------------------------------------------- Proposition 1

Prop1Report prop1_bias_bound(const Wavelet& wavelet, const PowerSpectrum& spectrum,
                             double q, double theta1_err_sup, double theta2_err_sup,
                             double c_theta1, double eta) {
    if (!(c_theta1 > 0.0)) throw std::invalid_argument("prop1_bias_bound: c_theta1 must be > 0");
    if (!(eta > 2.0)) throw std::invalid_argument("prop1_bias_bound: requires eta > 2");

    Prop1Report rep;
    rep.theta1_err = theta1_err_sup;
    rep.theta2_err = theta2_err_sup;
    rep.c_theta1 = c_theta1;
    rep.psi_norm2 = wavelet.norm2();

    const auto [lo, hi] = wavelet.band(1e-16);
    const int n = 1 << 12;
    const double lg_lo = std::log(lo * 0.5), lg_hi = std::log(hi * 2.0);
    double phi1 = 0.0, phi2 = 0.0, dpsi = 0.0, tail = 0.0;
    const double h = (lg_hi - lg_lo) / n;
    for (int i = 0; i <= n; ++i) {
        const double u = std::exp(lg_lo + i * h);
        const double p = wavelet.fourier(u);
        phi1 = std::max(phi1, u * p * p);
        phi2 = std::max(phi2, u * u * p);
        const double du = 1e-6 * u;
        dpsi = std::max(dpsi, std::abs(wavelet.fourier(u + du) - wavelet.fourier(u - du)) /
                                  (2.0 * du));
        if (u > hi) tail = std::max(tail, p * std::pow(u, eta));
    }
    rep.phi1_sup = phi1;
    rep.phi2_sup = phi2;
    rep.psi_hat_deriv_sup = dpsi;
    rep.eta_decay_margin = tail;

    // J_X = int xi^{-1} S(xi) dxi, exact on the piecewise-linear spectrum.
    const auto& fr = spectrum.freqs();
    const auto& va = spectrum.values();
    if (!fr.empty() && fr.front() == 0.0 && va.front() > 0.0)
        throw std::runtime_error("prop1_bias_bound: J_X diverges (S(0) != 0)");
    double jx = 0.0;
    for (std::size_t i = 1; i < fr.size(); ++i) {
        const double x0 = fr[i - 1], x1 = fr[i];
        const double y0 = va[i - 1], y1 = va[i];
        const double b = (y1 - y0) / (x1 - x0);
        const double a0 = y0 - b * x0;
        if (x0 == 0.0) {
            // S linear through the origin on this piece: integrand -> b.
            jx += b * (x1 - x0);
        } else {
            jx += a0 * std::log(x1 / x0) + b * (x1 - x0);
        }
    }
    rep.J_X = jx;
    if (!std::isfinite(jx)) throw std::runtime_error("prop1_bias_bound: J_X diverges");

    rep.K1p = phi1 / c_theta1;
    rep.K2p = std::log(q) * (phi1 + 2.0 * dpsi * phi2);
    rep.bound = rep.J_X / rep.psi_norm2 *
                (rep.K1p * theta1_err_sup + rep.K2p * theta2_err_sup);
    return rep;
}

double bandpass_spectrum_value(const PowerSpectrum& spectrum, const Wavelet& wavelet,
                               double q, double s) {
    const auto [lo, hi] = wavelet.band(1e-14);
    const double dil = std::pow(q, s);
    const double xi_lo = lo / dil, xi_hi = hi / dil;
    const int n = 1 << 12;
    const double lg_lo = std::log(xi_lo);
    const double h = (std::log(xi_hi) - lg_lo) / n;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double xi = std::exp(lg_lo + i * h);
        const double p = wavelet.fourier(dil * xi);
        const double w = (i == 0 || i == n) ? 0.5 : 1.0;
        acc += w * spectrum(xi) * p * p * xi;
    }
    return acc * h * dil / wavelet.norm2();
}

double mean_squared_error(const std::vector<double>& est, const std::vector<double>& truth) {
    if (est.size() != truth.size() || est.empty())
        throw std::invalid_argument("mean_squared_error: size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < est.size(); ++i) {
        const double d = est[i] - truth[i];
        acc += d * d;
    }
    return acc / est.size();
}

MseTable mse_report(const std::vector<double>& baseline1, const std::vector<double>& algo1,
                    const std::vector<double>& baseline2, const std::vector<double>& algo2,
                    const std::vector<double>& truth1, const std::vector<double>& truth2,
                    bool normalize_baseline_amplitude) {
    std::vector<double> b1 = baseline1;
    if (normalize_baseline_amplitude && !b1.empty()) {
        double mean = 0.0;
        for (double v : b1) mean += v;
        mean /= b1.size();
        if (mean > 0.0)
            for (double& v : b1) v /= mean;
    }
    MseTable out;
    out.baseline_amplitude = mean_squared_error(b1, truth1);
    out.algorithm_amplitude = mean_squared_error(algo1, truth1);
    out.baseline_warp = mean_squared_error(baseline2, truth2);
    out.algorithm_warp = mean_squared_error(algo2, truth2);
    return out;
}

}  // namespace warpest
