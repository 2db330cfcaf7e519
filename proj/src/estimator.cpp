// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The warpest authors

#include "warpest/estimator.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "warpest/diagnostics.hpp"
#include "warpest/numerics.hpp"

namespace warpest {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

SampledSignal stationarize_impl(const SampledSignal& y, const EstimationState& state,
                                bool strict);

/// Interpolates the frame estimates onto the full time grid: a~ = sqrt of the
/// theta1 spline, gamma~' = q^(theta2 spline), gamma~ by cumulative trapezoid
/// with gamma~(0) = 0; constant extension beyond the retained frames.
void fill_curves(EstimationState& st, const std::vector<double>& th1,
                 const std::vector<double>& th2, double q, double fs, int n) {
    CubicSpline s1(st.frame_times, th1), s2(st.frame_times, th2);
    st.amplitude.resize(n);
    st.warp_rate.resize(n);
    const double t_first = st.frame_times.front(), t_last = st.frame_times.back();
    // Spline overshoot between frames must not leave the estimated range
    // (1/sqrt(theta1) and q^theta2 amplify it badly).
    const auto [th1_min, th1_max] = std::minmax_element(th1.begin(), th1.end());
    const double lo1 = std::max(0.25 * *th1_min, 1e-300), hi1 = 4.0 * *th1_max;
    const auto [th2_min, th2_max] = std::minmax_element(th2.begin(), th2.end());
    const double lo2 = *th2_min - 0.5, hi2 = *th2_max + 0.5;
    for (int t = 0; t < n; ++t) {
        const double tt = std::clamp(t / fs, t_first, t_last);
        st.amplitude[t] = std::sqrt(std::clamp(s1(tt), lo1, hi1));
        st.warp_rate[t] = std::pow(q, std::clamp(s2(tt), lo2, hi2));
    }
    st.warp = cumulative_trapezoid(st.warp_rate, 1.0 / fs);
}

double quad_form(const Eigen::LLT<Eigen::MatrixXd>& llt, const Eigen::VectorXcd& w) {
    const Eigen::VectorXd re = llt.solve(w.real());
    const Eigen::VectorXd im = llt.solve(w.imag());
    return w.real().dot(re) + w.imag().dot(im);
}

double log_det(const Eigen::LLT<Eigen::MatrixXd>& llt) {
    double out = 0.0;
    const auto& L = llt.matrixLLT();
    for (Eigen::Index i = 0; i < L.rows(); ++i) out += 2.0 * std::log(L(i, i));
    return out;
}

/// Frame-level likelihood machinery bound to one workspace + spectrum.
struct FrameModel {
    const CovWorkspace& ws;
    const PowerSpectrum& spectrum;
    double noise_var = 0.0;
    double r = 0.0;

    Eigen::MatrixXd covariance(double theta1, double theta2) const {
        Eigen::MatrixXd C = ws.c0(theta2, spectrum);
        if (noise_var > 0.0)
            C = theta1 * C + noise_var * ws.gram();
        else
            C *= theta1;
        if (r > 0.0) {
            const Eigen::Index m = C.rows();
            if (noise_var > 0.0)
                C = (1.0 - r) * C + r * Eigen::MatrixXd::Identity(m, m);
            else  // clean model: theta1 multiplies the regularized core
                C = (1.0 - r) * C + theta1 * r * Eigen::MatrixXd::Identity(m, m);
        }
        return C;
    }

    double loglik(double theta1, double theta2, const Eigen::VectorXcd& w) const {
        const Eigen::MatrixXd C = covariance(theta1, theta2);
        Eigen::LLT<Eigen::MatrixXd> llt(C);
        if (llt.info() != Eigen::Success) return kNegInf;
        return -0.5 * (log_det(llt) + quad_form(llt, w));
    }
};

/// One-dimensional gradient ascent with central-difference gradients, a
/// backtracking (Armijo) line search with step memory, and a final parabolic
/// polish of the maximizer.
double ascend(const std::function<double(double)>& f, double x0, const AscentControls& c,
              bool* converged_out, double lo = -4.0, double hi = 4.0) {
    double x = std::clamp(x0, lo, hi);
    double fx = f(x);
    bool converged = false;
    double step_mem = c.init_step;
    double last_step = c.init_step;
    if (std::isfinite(fx)) {
        for (int it = 0; it < c.max_iters; ++it) {
            const double g = (f(x + c.fd_step) - f(x - c.fd_step)) / (2.0 * c.fd_step);
            if (!std::isfinite(g)) break;
            if (std::abs(g) <= c.grad_tol) {
                converged = true;
                break;
            }
            const double dir = g > 0.0 ? 1.0 : -1.0;
            double step = step_mem;
            bool accepted = false;
            while (step > 1e-14) {
                const double cand = std::clamp(x + dir * step, lo, hi);
                const double fc = f(cand);
                if (std::isfinite(fc) && fc > fx + 1e-4 * step * std::abs(g) &&
                    cand != x) {
                    x = cand;
                    fx = fc;
                    accepted = true;
                    last_step = step;
                    step_mem = std::min(c.init_step, 2.0 * step);
                    break;
                }
                step *= c.backtrack;
            }
            if (!accepted) {
                // No improving step within line-search resolution: treat as a
                // (finite-difference limited) stationary point.
                converged = true;
                break;
            }
        }
        // Parabolic refinement around the line-search resolution.
        double h = std::max(2.0 * last_step, 8.0 * c.fd_step);
        for (int round = 0; round < 3; ++round) {
            const double la = f(std::clamp(x - h, lo, hi));
            const double lc = f(std::clamp(x + h, lo, hi));
            const double denom = la - 2.0 * fx + lc;
            if (std::isfinite(la) && std::isfinite(lc) && denom < 0.0) {
                const double cand = std::clamp(x + 0.5 * h * (la - lc) / denom, lo, hi);
                const double fcand = f(cand);
                if (std::isfinite(fcand) && fcand >= fx) {
                    x = cand;
                    fx = fcand;
                }
            }
            h *= 0.25;
        }
    }
    if (converged_out) *converged_out = converged;
    return x;
}

double theta1_quadratic(const CovWorkspace& ws, const PowerSpectrum& spectrum,
                        double theta2, double r, const Eigen::VectorXcd& w,
                        bool trace_normalized) {
    const Eigen::MatrixXd C0 = ws.c0(theta2, spectrum);
    const Eigen::Index m = C0.rows();
    Eigen::MatrixXd C0r = C0;
    if (r > 0.0) C0r = (1.0 - r) * C0 + r * Eigen::MatrixXd::Identity(m, m);
    Eigen::LLT<Eigen::MatrixXd> llt(C0r);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error(
            "estimate_theta1: covariance is not positive definite; regularize");
    const double quad = quad_form(llt, w);
    double denom = static_cast<double>(m);
    if (trace_normalized && r > 0.0) {
        if (r >= 1.0) {
            denom = C0.trace();
        } else {
            const double tr_inv =
                llt.solve(Eigen::MatrixXd::Identity(m, m)).trace();
            denom = (static_cast<double>(m) - r * tr_inv) / (1.0 - r);
        }
        denom = std::max(denom, 1e-12);
    }
    return quad / denom;
}

}  // namespace

double frame_log_likelihood(const LocalParams& params, const Eigen::VectorXcd& w,
                            const PowerSpectrum& spectrum,
                            const std::vector<double>& scales, const Wavelet& wavelet,
                            double q, double noise_var, double r) {
    if (static_cast<std::size_t>(w.size()) != scales.size())
        throw std::invalid_argument("frame_log_likelihood: |w| must match the scale grid");
    CovWorkspace ws(scales, wavelet, q);
    FrameModel model{ws, spectrum, noise_var, r};
    const Eigen::MatrixXd C = model.covariance(params.theta1, params.theta2);
    Eigen::LLT<Eigen::MatrixXd> llt(C);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error(
            "frame_log_likelihood: covariance is not positive definite; regularize");
    return -0.5 * (log_det(llt) + quad_form(llt, w));
}

double estimate_theta1_closed_form(const Eigen::VectorXcd& w, double theta2,
                                   const PowerSpectrum& spectrum,
                                   const std::vector<double>& scales,
                                   const Wavelet& wavelet, double q, double r) {
    CovWorkspace ws(scales, wavelet, q);
    return theta1_quadratic(ws, spectrum, theta2, r, w, false);
}

double estimate_theta1_rank_corrected(const Eigen::VectorXcd& w, double theta2,
                                      const PowerSpectrum& spectrum,
                                      const std::vector<double>& scales,
                                      const Wavelet& wavelet, double q, double r) {
    CovWorkspace ws(scales, wavelet, q);
    return theta1_quadratic(ws, spectrum, theta2, r, w, true);
}

namespace {

double estimate_theta2_ws(const CovWorkspace& ws, const Eigen::VectorXcd& w,
                          double theta1, const PowerSpectrum& spectrum, double noise_var,
                          double init, const AscentControls& controls, bool* converged,
                          double ridge_rel = 0.0, double scan_range = 0.0,
                          double scan_step = 0.05, double trust = 4.0) {
    // ridge_rel > 0 puts a standing diagonal floor (relative to the largest
    // model variance) under the covariance: scales whose plug-in spectrum is
    // numerical junk then contribute a constant instead of a jagged
    // pseudo-likelihood. With ridge_rel = 0 a vanishing ridge is escalated
    // only when compactly supported spectra leave the matrix singular.
    const double diag_scale =
        std::max(ws.c0(init, spectrum).diagonal().maxCoeff(), 1e-300) *
        std::max(theta1, 1e-300);
    std::array<double, 4> levels{ridge_rel, 1e-12, 1e-9, 1e-6};
    for (double level : levels) {
        const double ridge = std::min(0.5, level * diag_scale);
        FrameModel model{ws, spectrum, noise_var, ridge};
        auto f = [&](double th2) { return model.loglik(theta1, th2, w); };
        double start = init;
        if (!std::isfinite(f(start))) continue;
        if (scan_range > 0.0) {
            double best = f(start);
            for (double cand = init - scan_range; cand <= init + scan_range;
                 cand += scan_step) {
                const double l = f(cand);
                if (l > best) {
                    best = l;
                    start = cand;
                }
            }
        }
        return ascend(f, start, controls, converged, init - trust, init + trust);
    }
    if (converged) *converged = false;
    return init;
}

}  // namespace

double estimate_theta2(const Eigen::VectorXcd& w_coarse, double theta1,
                       const PowerSpectrum& spectrum,
                       const std::vector<double>& coarse_scales, const Wavelet& wavelet,
                       double q, double noise_var, double init,
                       const AscentControls& controls, bool* converged) {
    CovWorkspace ws(coarse_scales, wavelet, q);
    return estimate_theta2_ws(ws, w_coarse, theta1, spectrum, noise_var, init, controls,
                              converged);
}

double estimate_theta1_noisy(const Eigen::VectorXcd& w, double theta2,
                             const PowerSpectrum& spectrum,
                             const std::vector<double>& scales, const Wavelet& wavelet,
                             double q, double noise_var, double init,
                             const AscentControls& controls, double r, bool* converged) {
    if (!(noise_var > 0.0))
        throw std::invalid_argument("estimate_theta1_noisy: requires noise_var > 0");
    CovWorkspace ws(scales, wavelet, q);
    FrameModel model{ws, spectrum, noise_var, r};
    // Ascent over u = ln(theta1) keeps theta1 positive structurally.
    const double u0 = std::log(std::max(init, 1e-12));
    auto f = [&](double u) { return model.loglik(std::exp(u), theta2, w); };
    const double u = ascend(f, u0, controls, converged, u0 - 30.0, u0 + 30.0);
    return std::exp(u);
}

UnwarpedTransform unwarp_coeffs(const Eigen::MatrixXcd& columns,
                                const std::vector<double>& scales, double q,
                                const std::vector<double>& theta1,
                                const std::vector<double>& theta2) {
    const Eigen::Index m = columns.rows();
    const Eigen::Index f = columns.cols();
    if (static_cast<std::size_t>(m) != scales.size())
        throw std::invalid_argument("unwarp_coeffs: row/scale mismatch");
    if (theta1.size() != static_cast<std::size_t>(f) || theta2.size() != theta1.size())
        throw std::invalid_argument("unwarp_coeffs: parameter vectors must match columns");

    UnwarpedTransform out;
    out.coeffs.setZero(m, f);
    out.valid.setZero(m, f);
    out.scales = scales;
    out.q = q;

    const double s_lo = scales.front(), s_hi = scales.back();
    const double edge = 1e-12 * std::max(1.0, std::abs(s_hi));
    std::vector<double> re(m), im(m);
    for (Eigen::Index n = 0; n < f; ++n) {
        if (!(theta1[n] > 0.0))
            throw std::invalid_argument("unwarp_coeffs: theta1 must be positive (clamp first)");
        for (Eigen::Index i = 0; i < m; ++i) {
            re[i] = columns(i, n).real();
            im[i] = columns(i, n).imag();
        }
        CubicSpline sre(scales, re), sim(scales, im);
        const double inv_amp = 1.0 / std::sqrt(theta1[n]);
        int n_valid = 0;
        for (Eigen::Index i = 0; i < m; ++i) {
            const double target = scales[i] - theta2[n];
            if (target < s_lo - edge || target > s_hi + edge) continue;
            out.coeffs(i, n) = cplx{sre(target), sim(target)} * inv_amp;
            out.valid(i, n) = 1;
            ++n_valid;
        }
        if (n_valid == 0)
            throw std::runtime_error("unwarp_coeffs: every scale requires extrapolation for a column");
    }
    return out;
}

UnwarpedTransform unwarp_coeffs(const TimeScaleTransform& Wy,
                                const std::vector<double>& theta1,
                                const std::vector<double>& theta2) {
    return unwarp_coeffs(Wy.coeffs, Wy.grid.scales(), Wy.grid.q, theta1, theta2);
}

namespace {

/// Richardson-Lucy deconvolution of the band-pass kernel from the binned
/// wavelet-domain spectrum estimate. freqs are the ascending bin labels
/// q^{-s_m} omega0 (no leading zero knot); the kernel row for bin i is the
/// exact forward map S -> S_{X,psi}(nu_i) discretized on the same knots.
PowerSpectrum deconvolve_spectrum_bins(const std::vector<double>& freqs,
                                       const std::vector<double>& vals,
                                       const Wavelet& wavelet, int iterations,
                                       double extra_spread_oct = 0.0) {
    const int m = static_cast<int>(freqs.size());
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(m, m);
    const auto [band_lo, band_hi] = wavelet.band(1e-10);
    const double norm2 = wavelet.norm2();
    // Forward kernel = band-pass |psi_hat|^2 composed with a log-frequency
    // Gaussian modelling the residual warp spread of the current iterate.
    const double sig = extra_spread_oct * std::numbers::ln2_v<double>;
    std::vector<double> goff, gwgt;
    if (sig > 0.0) {
        const int half = 8;
        double total = 0.0;
        for (int t = -half; t <= half; ++t) {
            const double u = 3.0 * sig * t / half;
            const double wg = std::exp(-0.5 * u * u / (sig * sig));
            goff.push_back(u);
            gwgt.push_back(wg);
            total += wg;
        }
        for (double& wg : gwgt) wg /= total;
    } else {
        goff.push_back(0.0);
        gwgt.push_back(1.0);
    }
    auto deposit = [&](int i, double xi, double wgt) {
        if (xi <= freqs.front()) {
            K(i, 0) += wgt;
        } else if (xi >= freqs.back()) {
            K(i, m - 1) += wgt;
        } else {
            const auto it = std::upper_bound(freqs.begin(), freqs.end(), xi);
            const int j = static_cast<int>(it - freqs.begin()) - 1;
            const double t = (xi - freqs[j]) / (freqs[j + 1] - freqs[j]);
            K(i, j) += wgt * (1.0 - t);
            K(i, j + 1) += wgt * t;
        }
    };
    for (int i = 0; i < m; ++i) {
        const double dil = wavelet.omega0() / freqs[i];  // q^{s_i}
        const double lo = band_lo / dil, hi = band_hi / dil;
        const int nn = 512;
        const double lg_lo = std::log(lo), h = (std::log(hi) - lg_lo) / nn;
        for (int k = 0; k <= nn; ++k) {
            const double xi = std::exp(lg_lo + k * h);
            const double p = wavelet.fourier(dil * xi);
            const double wgt = ((k == 0 || k == nn) ? 0.5 : 1.0) * h * xi * dil * p * p / norm2;
            for (std::size_t gi = 0; gi < goff.size(); ++gi)
                deposit(i, xi * std::exp(goff[gi]), wgt * gwgt[gi]);
        }
    }
    Eigen::VectorXd v(m), est(m);
    for (int i = 0; i < m; ++i) v(i) = est(i) = std::max(vals[i], 0.0);
    const Eigen::VectorXd colsum = K.colwise().sum();
    Eigen::VectorXd next(m);
    for (int t = 0; t < iterations; ++t) {
        const Eigen::VectorXd pred = K * est;
        Eigen::VectorXd ratio(m);
        for (int i = 0; i < m; ++i) ratio(i) = pred(i) > 0.0 ? v(i) / pred(i) : 0.0;
        const Eigen::VectorXd corr = K.transpose() * ratio;
        for (int j = 0; j < m; ++j)
            next(j) = colsum(j) > 0.0 ? est(j) * corr(j) / colsum(j) : 0.0;
        // Damping: a three-point smoothing pass per iteration suppresses the
        // edge ringing that otherwise plants phantom shoulders (and with them
        // spurious likelihood modes) next to sharp spectral edges.
        for (int j = 0; j < m; ++j) {
            const double left = next(std::max(j - 1, 0));
            const double right = next(std::min(j + 1, m - 1));
            est(j) = 0.7 * next(j) + 0.15 * (left + right);
        }
    }
    std::vector<double> out_f, out_v;
    out_f.reserve(m + 1);
    out_v.reserve(m + 1);
    if (freqs.front() > 0.0) {
        out_f.push_back(0.0);
        out_v.push_back(0.0);
    }
    for (int i = 0; i < m; ++i) {
        out_f.push_back(freqs[i]);
        out_v.push_back(est(i));
    }
    return {std::move(out_f), std::move(out_v)};
}

PowerSpectrum spectrum_from_rows(const Eigen::MatrixXcd& coeffs,
                                 const Eigen::Matrix<std::uint8_t, Eigen::Dynamic,
                                                     Eigen::Dynamic>* valid,
                                 const std::vector<double>& scales, double q,
                                 const Wavelet& wavelet) {
    const Eigen::Index m = coeffs.rows();
    const double norm2 = wavelet.norm2();
    const double w0 = wavelet.omega0();

    std::vector<std::pair<double, double>> bins;  // (frequency, density)
    bins.reserve(static_cast<std::size_t>(m) + 1);
    for (Eigen::Index i = 0; i < m; ++i) {
        double energy = 0.0;
        long count = 0;
        for (Eigen::Index n = 0; n < coeffs.cols(); ++n) {
            if (valid && !(*valid)(i, n)) continue;
            energy += std::norm(coeffs(i, n));
            ++count;
        }
        const double value = count > 0 ? energy / (static_cast<double>(count) * norm2) : 0.0;
        bins.emplace_back(std::pow(q, -scales[i]) * w0, value);
    }
    std::sort(bins.begin(), bins.end());
    std::vector<double> freqs, values;
    freqs.reserve(bins.size() + 1);
    values.reserve(bins.size() + 1);
    if (bins.empty() || bins.front().first > 0.0) {
        freqs.push_back(0.0);
        values.push_back(0.0);
    }
    for (const auto& [nu, v] : bins) {
        freqs.push_back(nu);
        values.push_back(v);
    }
    return {std::move(freqs), std::move(values)};
}

}  // namespace

PowerSpectrum spectrum_estimate(const UnwarpedTransform& Wx, const Wavelet& wavelet) {
    return spectrum_from_rows(Wx.coeffs, &Wx.valid, Wx.scales, Wx.q, wavelet);
}

PowerSpectrum spectrum_estimate(const TimeScaleTransform& Wx, const Wavelet& wavelet) {
    return spectrum_from_rows(Wx.coeffs, nullptr, Wx.grid.scales(), Wx.grid.q, wavelet);
}

namespace {

/// Running median with window 2k+1 (shrinking near the edges); kills
/// isolated outlier frames before the least-squares smoothing.
std::vector<double> running_median(const std::vector<double>& v, int k) {
    const int n = static_cast<int>(v.size());
    if (k < 1 || n < 3) return v;
    std::vector<double> out(v.size());
    std::vector<double> buf;
    for (int i = 0; i < n; ++i) {
        const int w = std::min({k, i, n - 1 - i});
        buf.assign(v.begin() + (i - w), v.begin() + (i + w + 1));
        std::nth_element(buf.begin(), buf.begin() + w, buf.end());
        out[i] = buf[w];
    }
    return out;
}

/// Local quadratic least-squares smoother (Savitzky-Golay flavor) with a
/// window shrinking near the edges.
std::vector<double> smooth_local_quadratic(const std::vector<double>& v, int half) {
    const int n = static_cast<int>(v.size());
    if (half < 1 || n < 5) return v;
    std::vector<double> out(v.size());
    for (int i = 0; i < n; ++i) {
        const int w = std::min({half, i, n - 1 - i});
        if (w < 2) {
            out[i] = v[i];
            continue;
        }
        // Fit c0 + c1 x + c2 x^2 on x = -w..w; value at x = 0 is c0.
        double s0 = 0, s2 = 0, s4 = 0, m0 = 0, m2 = 0;
        for (int x = -w; x <= w; ++x) {
            const double y = v[i + x];
            s0 += 1.0;
            s2 += static_cast<double>(x) * x;
            s4 += static_cast<double>(x) * x * x * x;
            m0 += y;
            m2 += y * static_cast<double>(x) * x;
        }
        const double det = s0 * s4 - s2 * s2;
        out[i] = det != 0.0 ? (s4 * m0 - s2 * m2) / det : v[i];
    }
    return out;
}

double relative_update(const std::vector<double>& now, const std::vector<double>& prev) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < now.size(); ++i) {
        const double d = now[i] - prev[i];
        num += d * d;
        den += prev[i] * prev[i];
    }
    return num / std::max(den, 1e-300);
}

}  // namespace

EstimationState run_joint_estimation(const SampledSignal& y, const EstimationConfig& cfg,
                                     const ScaleGrid& grid, const Wavelet& wavelet) {
    if (!(cfg.stop_threshold > 0.0 && cfg.stop_threshold < 1.0))
        throw std::invalid_argument("run_joint_estimation: stop threshold must be in (0, 1)");
    if (cfg.max_iterations < 1)
        throw std::invalid_argument("run_joint_estimation: k_max must be >= 1");
    for (double v : y.samples)
        if (!std::isfinite(v))
            throw std::invalid_argument("run_joint_estimation: input has non-finite samples");

    EstimationState st;
    st.fs = y.fs;
    st.q = grid.q;
    st.omega0 = wavelet.omega0();

    TimeScaleTransform W = cwt(y, grid, wavelet);
    const int n = static_cast<int>(y.size());
    const int margin = W.margin;
    for (int t = margin; t < n - margin; t += cfg.time_stride) st.frames.push_back(t);
    const int n_frames = static_cast<int>(st.frames.size());
    if (n_frames < 2)
        throw std::invalid_argument(
            "run_joint_estimation: signal too short for the scale grid margins");
    for (int t : st.frames) st.frame_times.push_back(t / y.fs);

    const std::vector<double> scales = grid.scales();
    const std::vector<int> coarse_idx = grid.coarse_indices();
    const std::vector<double> coarse_scales = grid.coarse_scales();

    Eigen::MatrixXcd cols(grid.count, n_frames);
    for (int j = 0; j < n_frames; ++j) cols.col(j) = W.coeffs.col(st.frames[j]);

    // Denser column set for the spectrum update only.
    std::vector<int> spec_frames;
    const int spec_stride = std::max(1, std::min(cfg.spectrum_stride, cfg.time_stride));
    for (int t = margin; t < n - margin; t += spec_stride) spec_frames.push_back(t);
    const int n_spec = static_cast<int>(spec_frames.size());
    Eigen::MatrixXcd cols_spec(grid.count, n_spec);
    for (int j = 0; j < n_spec; ++j) cols_spec.col(j) = W.coeffs.col(spec_frames[j]);
    W.coeffs.resize(0, 0);  // full transform no longer needed

    // Baselines straight off the observed coefficients.
    st.baseline_theta1.resize(n_frames);
    for (int j = 0; j < n_frames; ++j)
        st.baseline_theta1[j] = baseline_theta1(cols.col(j));
    st.baseline_theta2 = baseline_theta2(cols, scales);

    CovWorkspace ws_fine(scales, wavelet, grid.q);
    CovWorkspace ws_coarse(coarse_scales, wavelet, grid.q);

    // Initialization: spectrum of the observations, unit amplitude.
    std::vector<double> th1(n_frames, 1.0), th2(n_frames, 0.0);
    auto refine = [&](PowerSpectrum raw, double spread_oct) {
        if (cfg.spectrum_refinement != SpectrumRefinement::wavelet_deconvolved ||
            cfg.deconvolve_iterations < 1)
            return raw;
        std::vector<double> f = raw.freqs(), v = raw.values();
        if (!f.empty() && f.front() == 0.0) {
            f.erase(f.begin());
            v.erase(v.begin());
        }
        if (f.empty()) return raw;
        return deconvolve_spectrum_bins(f, v, wavelet, cfg.deconvolve_iterations,
                                        spread_oct);
    };
    // Two plug-ins per iteration: the warp update wants the deconvolved
    // (sharp) spectrum, while the amplitude update stays on the raw
    // band-passed estimate, whose smearing matches the measured envelopes
    // and whose common scale factor is absorbed by the gauge.
    PowerSpectrum s_raw = spectrum_from_rows(cols_spec, nullptr, scales, grid.q, wavelet);
    PowerSpectrum s_sharp = refine(s_raw, cfg.anneal_spread_oct);
    st.spectra.push_back(s_sharp);

    Eigen::VectorXcd w_coarse(static_cast<Eigen::Index>(coarse_idx.size()));
    std::vector<double> th1_new(n_frames), th2_new(n_frames);
    for (int k = 1; k <= cfg.max_iterations; ++k) {
        // The covariances carry signal-power units, so the identity floor of
        // the regularization is scaled to the largest model variance.
        const double r_fine = std::min(
            0.5, cfg.regularization * ws_fine.c0(0.0, s_raw).diagonal().maxCoeff());

        for (int j = 0; j < n_frames; ++j) {
            for (std::size_t c = 0; c < coarse_idx.size(); ++c)
                w_coarse(static_cast<Eigen::Index>(c)) = cols(coarse_idx[c], j);
            bool ok2 = false;
            th2_new[j] = estimate_theta2_ws(ws_coarse, w_coarse, th1[j], s_sharp,
                                            cfg.noise_var, th2[j], cfg.theta2_ascent, &ok2,
                                            cfg.theta2_ridge_rel,
                                            k == 1 ? cfg.theta2_scan_range
                                                   : cfg.theta2_rescan_range,
                                            cfg.theta2_scan_step,
                                            k == 1 ? cfg.theta2_scan_range
                                                   : cfg.theta2_rescan_range);
            if (!ok2) ++st.theta2_ascent_failures;
        }

        // Gauge fixing, warp: gamma is identifiable only up to an affine map
        // (a common shift of theta2 trades exactly against a dilation of the
        // spectrum estimate), so pin the retained-frame mean of the warp rate
        // q^theta2 to one, the normalization of the synthesis family.
        {
            double m = 0.0;
            for (double v : th2_new) m += std::pow(grid.q, v);
            m /= th2_new.size();
            if (m > 0.0) {
                const double shift = std::log(m) / std::log(grid.q);
                for (double& v : th2_new) v -= shift;
            }
        }

        for (int j = 0; j < n_frames; ++j) {
            if (cfg.noise_var > 0.0) {
                FrameModel model{ws_fine, s_raw, cfg.noise_var, r_fine};
                bool ok1 = false;
                const double u0 = std::log(std::max(th1[j], 1e-12));
                auto f = [&](double u) { return model.loglik(std::exp(u), th2_new[j], cols.col(j)); };
                th1_new[j] = std::exp(
                    ascend(f, u0, cfg.theta1_ascent, &ok1, u0 - 30.0, u0 + 30.0));
                if (!ok1) ++st.theta1_ascent_failures;
            } else {
                th1_new[j] = theta1_quadratic(ws_fine, s_raw, th2_new[j], r_fine,
                                              cols.col(j), cfg.trace_normalized_theta1);
            }
        }

        // Silent/degenerate frames first: keep 1/sqrt(theta1) finite in the
        // unwarp step and cut absurd excursions before they touch the gauge.
        {
            std::vector<double> sorted = th1_new;
            std::sort(sorted.begin(), sorted.end());
            const double median = sorted[sorted.size() / 2];
            const double floor_v =
                std::max(cfg.theta1_floor_rel * std::max(median, 0.0), 1e-300);
            const double cap_v = std::max(cfg.theta1_cap_rel * std::max(median, 0.0), floor_v);
            for (auto& v : th1_new) v = std::clamp(v, floor_v, cap_v);
        }

        // Gauge fixing, amplitude: a is identifiable only up to a constant
        // (theta1 * S~ is what the likelihood sees), so pin mean theta1 = 1.
        // A 5%-trimmed mean keeps stray frames from tilting the gauge.
        {
            std::vector<double> sorted = th1_new;
            std::sort(sorted.begin(), sorted.end());
            const std::size_t trim = sorted.size() / 20;
            double m = 0.0;
            std::size_t cnt = 0;
            for (std::size_t i = trim; i + trim < sorted.size(); ++i, ++cnt) m += sorted[i];
            if (cnt > 0) m /= cnt;
            if (m > 0.0)
                for (double& v : th1_new) v /= m;
        }

        st.crit_theta1.push_back(relative_update(th1_new, th1));
        st.crit_theta2.push_back(relative_update(th2_new, th2));
        th1 = th1_new;
        th2 = th2_new;
        st.iterations = k;


        const bool use_welch =
            cfg.spectrum_refinement == SpectrumRefinement::welch_stationarized && k >= 2;
        if (use_welch) {
            fill_curves(st, th1, th2, grid.q, y.fs, n);
            SampledSignal x_hat = stationarize_impl(y, st, false);
            // Drop the wrap-around margins: the inverse warp is extrapolated
            // there and its glitches would lift the broadband floor.
            const int lo = st.frames.front(), hi = st.frames.back();
            x_hat.samples.assign(x_hat.samples.begin() + lo, x_hat.samples.begin() + hi);
            const int segment =
                std::clamp(cfg.welch_segment, 64, static_cast<int>(x_hat.size()) / 4);
            s_raw = to_analysis_spectrum(welch_psd(x_hat, segment), y.fs);
            s_sharp = s_raw;
        } else {
            // Interpolate the frame estimates onto the denser spectrum
            // columns (the same splines as the final output curves).
            fill_curves(st, th1, th2, grid.q, y.fs, n);
            std::vector<double> th1_spec(n_spec), th2_spec(n_spec);
            const double lq = std::log(grid.q);
            for (int j = 0; j < n_spec; ++j) {
                const double amp = st.amplitude[spec_frames[j]];
                th1_spec[j] = std::max(amp * amp, 1e-300);
                th2_spec[j] = std::log(st.warp_rate[spec_frames[j]]) / lq;
            }
            UnwarpedTransform Wx =
                unwarp_coeffs(cols_spec, scales, grid.q, th1_spec, th2_spec);
            s_raw = spectrum_from_rows(Wx.coeffs, &Wx.valid, scales, grid.q, wavelet);
            const double spread = k == 1 ? cfg.anneal_spread_oct : cfg.anneal_spread_floor;
            s_sharp = refine(s_raw, spread);
        }
        st.spectra.push_back(s_sharp);

        if (st.crit_theta1.back() < cfg.stop_threshold &&
            st.crit_theta2.back() < cfg.stop_threshold) {
            st.converged = true;
            break;
        }
    }

    if (cfg.final_polish) {
        fill_curves(st, th1, th2, grid.q, y.fs, n);
        SampledSignal x_hat = stationarize_impl(y, st, false);
        const int lo = st.frames.front(), hi = st.frames.back();
        x_hat.samples.assign(x_hat.samples.begin() + lo, x_hat.samples.begin() + hi);
        const int segment =
            std::clamp(cfg.welch_segment, 64, static_cast<int>(x_hat.size()) / 4);
        const PowerSpectrum s_polish =
            to_analysis_spectrum(welch_psd(x_hat, segment), y.fs);

        for (int j = 0; j < n_frames; ++j) {
            for (std::size_t c = 0; c < coarse_idx.size(); ++c)
                w_coarse(static_cast<Eigen::Index>(c)) = cols(coarse_idx[c], j);
            bool ok2 = false;
            th2[j] = estimate_theta2_ws(ws_coarse, w_coarse, th1[j], s_polish,
                                        cfg.noise_var, th2[j], cfg.theta2_ascent, &ok2,
                                        cfg.theta2_ridge_rel, cfg.theta2_rescan_range,
                                        cfg.theta2_scan_step, cfg.theta2_rescan_range);
        }
        {
            double m = 0.0;
            for (double v : th2) m += std::pow(grid.q, v);
            m /= th2.size();
            if (m > 0.0) {
                const double shift = std::log(m) / std::log(grid.q);
                for (double& v : th2) v -= shift;
            }
        }
        const double r_fine = std::min(
            0.5, cfg.regularization * ws_fine.c0(0.0, s_raw).diagonal().maxCoeff());
        for (int j = 0; j < n_frames; ++j) {
            if (cfg.noise_var > 0.0) continue;  // keep the converged values
            th1[j] = theta1_quadratic(ws_fine, s_raw, th2[j], r_fine, cols.col(j),
                                      cfg.trace_normalized_theta1);
        }
        {
            std::vector<double> sorted = th1;
            std::sort(sorted.begin(), sorted.end());
            const double median = sorted[sorted.size() / 2];
            const double floor_v =
                std::max(cfg.theta1_floor_rel * std::max(median, 0.0), 1e-300);
            const double cap_v = std::max(cfg.theta1_cap_rel * std::max(median, 0.0), floor_v);
            for (auto& v : th1) v = std::clamp(v, floor_v, cap_v);
            const std::size_t trim = sorted.size() / 20;
            double m = 0.0;
            std::size_t cnt = 0;
            for (std::size_t i = trim; i + trim < sorted.size(); ++i, ++cnt) m += sorted[i];
            if (cnt > 0) m /= cnt;
            if (m > 0.0)
                for (double& v : th1) v /= m;
        }
    }

    st.theta1_raw = th1;
    st.theta2_raw = th2;
    // The paper notes the per-frame estimates carry spurious fluctuations
    // that appropriate filtering removes; the deformations themselves are
    // smooth by assumption.
    if (cfg.smooth_halfwidth > 0) {
        const int half = std::min(cfg.smooth_halfwidth, n_frames / 8);
        // theta1 is positive and multiplicative: filter its logarithm.
        std::vector<double> log1(th1.size());
        for (std::size_t j = 0; j < th1.size(); ++j)
            log1[j] = std::log(std::max(th1[j], 1e-300));
        log1 = smooth_local_quadratic(running_median(log1, 2), half);
        for (std::size_t j = 0; j < th1.size(); ++j) th1[j] = std::exp(log1[j]);
        th2 = smooth_local_quadratic(running_median(th2, 2), half);
    }
    st.theta1 = th1;
    st.theta2 = th2;

    fill_curves(st, th1, th2, grid.q, y.fs, n);
    st.theta3.resize(n_frames);
    for (int j = 0; j < n_frames; ++j) st.theta3[j] = st.warp[st.frames[j]];

    {
        UnwarpedTransform Wx = unwarp_coeffs(cols, scales, grid.q, th1, th2);
        st.spectrum_wavelet =
            spectrum_from_rows(Wx.coeffs, &Wx.valid, scales, grid.q, wavelet);
    }
    return st;
}

SampledSignal stationarize(const SampledSignal& y, const EstimationState& state) {
    return stationarize_impl(y, state, true);
}

namespace {

SampledSignal stationarize_impl(const SampledSignal& y, const EstimationState& state,
                                bool strict) {
    const std::size_t n = y.size();
    if (n < 2 || state.warp.size() != n || state.amplitude.size() != n)
        throw std::invalid_argument("stationarize: state does not match the signal");
    const double fs = y.fs;

    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = i / fs;
    CubicSpline y_spline(t, y.samples);
    CubicSpline warp_spline(t, state.warp);
    CubicSpline rate_spline(t, state.warp_rate);
    CubicSpline amp_spline(t, state.amplitude);

    const double t_max = (n - 1) / fs;
    const double tol = 2.0 / fs;
    const double g_max = state.warp.back();

    SampledSignal out;
    out.fs = fs;
    out.samples.resize(n);
    std::size_t p = 0;  // targets and gamma~ are both increasing
    for (std::size_t i = 0; i < n; ++i) {
        double target = t[i];
        if (strict && target > g_max + tol)
            throw std::invalid_argument(
                "stationarize: time grid leaves the range of the estimated warp");
        target = std::clamp(target, 0.0, g_max);
        while (p + 2 < n && state.warp[p + 1] < target) ++p;
        // Linear inverse on the bracketing knot interval, then Newton polish.
        const double span = state.warp[p + 1] - state.warp[p];
        double u = t[p];
        if (span > 0.0) u += (target - state.warp[p]) / span / fs;
        for (int it = 0; it < 2; ++it) {
            const double r = rate_spline(u);
            if (!(r > 0.0)) break;
            u = std::clamp(u - (warp_spline(u) - target) / r, 0.0, t_max);
        }
        const double rate = std::max(rate_spline(u), 1e-12);
        out.samples[i] = y_spline(u) / (std::sqrt(rate) * amp_spline(u));
    }
    return out;
}

}  // namespace

PowerSpectrum welch_psd(const SampledSignal& x, int segment_length, double overlap) {
    const int n = static_cast<int>(x.size());
    if (segment_length < 4 || segment_length > n)
        throw std::invalid_argument("welch_psd: segment length must be in [4, n]");
    if (overlap < 0.0 || overlap >= 1.0)
        throw std::invalid_argument("welch_psd: overlap must be in [0, 1)");
    const int hop = std::max(1, static_cast<int>(segment_length * (1.0 - overlap)));
    const int n_segments = 1 + (n - segment_length) / hop;

    std::vector<double> window(segment_length);
    double w2 = 0.0;
    for (int i = 0; i < segment_length; ++i) {
        window[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / segment_length));
        w2 += window[i] * window[i];
    }
    w2 /= segment_length;

    Fft fft(segment_length);
    std::vector<cplx> buf(segment_length), spec(segment_length);
    const int half = segment_length / 2;
    std::vector<double> acc(half + 1, 0.0);
    for (int s = 0; s < n_segments; ++s) {
        const int off = s * hop;
        for (int i = 0; i < segment_length; ++i)
            buf[i] = x.samples[off + i] * window[i];
        fft.forward(buf.data(), spec.data());
        for (int k = 0; k <= half; ++k) acc[k] += std::norm(spec[k]);
    }

    const double base = 1.0 / (x.fs * segment_length * w2 * n_segments);
    std::vector<double> freqs(half + 1), values(half + 1);
    for (int k = 0; k <= half; ++k) {
        freqs[k] = k * x.fs / segment_length;
        const double one_sided = (k == 0 || k == half) ? 1.0 : 2.0;
        values[k] = one_sided * base * acc[k];
    }
    values[0] = 0.0;  // density vanishes at zero frequency by convention
    return {std::move(freqs), std::move(values)};
}

}  // namespace warpest
