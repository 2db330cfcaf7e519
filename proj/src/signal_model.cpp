// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The warpest authors

#include "warpest/signal_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "warpest/numerics.hpp"

namespace warpest {

namespace {

void add_bump_knots(std::map<double, int>& knots, double nu0, double dnu, int n) {
    // Odd knot count keeps the center and both edges exact sample points.
    const double lo = nu0 - 0.5 * dnu;
    for (int i = 0; i <= n; ++i) knots.emplace(lo + dnu * i / n, 0);
}

double bump(double nu, double nu0, double dnu) {
    if (std::abs(nu - nu0) >= 0.5 * dnu) return 0.0;
    return 1.0 + std::cos(2.0 * M_PI * (nu - nu0) / dnu);
}

}  // namespace

PowerSpectrum synth_spectrum(double nu0_1, double dnu_1, double nu0_2, double dnu_2,
                             double fs, int samples_per_bump) {
    if (dnu_1 <= 0.0 || dnu_2 <= 0.0)
        throw std::invalid_argument("synth_spectrum: bump widths must be positive");
    for (auto [nu0, dnu] : {std::pair{nu0_1, dnu_1}, std::pair{nu0_2, dnu_2}}) {
        if (nu0 - 0.5 * dnu <= 0.0 || nu0 + 0.5 * dnu >= 0.5 * fs)
            throw std::invalid_argument("synth_spectrum: bump exceeds (0, fs/2)");
    }
    if (samples_per_bump % 2 != 0) ++samples_per_bump;

    std::map<double, int> knots;
    add_bump_knots(knots, nu0_1, dnu_1, samples_per_bump);
    add_bump_knots(knots, nu0_2, dnu_2, samples_per_bump);
    std::vector<double> f, v;
    f.reserve(knots.size());
    v.reserve(knots.size());
    for (const auto& [nu, unused] : knots) {
        f.push_back(nu);
        v.push_back(bump(nu, nu0_1, dnu_1) + bump(nu, nu0_2, dnu_2));
    }
    return {std::move(f), std::move(v)};
}

AmplitudeFn synth_amplitude(double a1, double t1, double t_final) {
    if (a1 < 0.0 || a1 >= 1.0)
        throw std::invalid_argument("synth_amplitude: need 0 <= a1 < 1 so that c_a > 0");
    if (t1 <= 0.0 || t_final <= 0.0)
        throw std::invalid_argument("synth_amplitude: periods must be positive");

    // Mean of (1 + a1 cos)^2 over [0, t_final], then bisection on a0.
    const int n = 1 << 16;
    const double h = t_final / n;
    std::vector<double> sq(n + 1);
    for (int i = 0; i <= n; ++i) {
        const double c = 1.0 + a1 * std::cos(2.0 * M_PI * (i * h) / t1);
        sq[i] = c * c;
    }
    const double mean_sq = trapezoid(sq, h) / t_final;
    const double a0 =
        bisect([&](double a) { return a * a * mean_sq - 1.0; }, 0.1, 10.0, 1e-14);

    AmplitudeFn out;
    out.value = [a0, a1, t1](double t) {
        return a0 * (1.0 + a1 * std::cos(2.0 * M_PI * t / t1));
    };
    out.derivative = [a0, a1, t1](double t) {
        return -a0 * a1 * (2.0 * M_PI / t1) * std::sin(2.0 * M_PI * t / t1);
    };
    out.c_a = a0 * (1.0 - a1);
    out.C_a = a0 * (1.0 + a1);
    return out;
}

namespace {

/// Builds a WarpFn from an analytic rate: gamma by cumulative trapezoid on
/// [t_lo, t_hi] with the given step, anchored at gamma(0) = 0. Evaluation
/// between knots refines the running integral with one local trapezoid step,
/// so value() is exact at knots and smooth in between.
WarpFn warp_from_rate(std::function<double(double)> rate,
                      std::function<double(double)> curvature, double t_lo, double t_hi,
                      double step) {
    const int n = static_cast<int>(std::ceil((t_hi - t_lo) / step));
    const double h = (t_hi - t_lo) / n;
    auto knots = std::make_shared<std::vector<double>>();
    knots->resize(n + 1);
    std::vector<double> rates(n + 1);
    for (int i = 0; i <= n; ++i) rates[i] = rate(t_lo + i * h);
    double acc = 0.0;
    (*knots)[0] = 0.0;
    for (int i = 1; i <= n; ++i) {
        acc += 0.5 * h * (rates[i - 1] + rates[i]);
        (*knots)[i] = acc;
    }
    // Anchor gamma(0) = 0.
    const double at_zero = [&] {
        const double u = (0.0 - t_lo) / h;
        const int i = std::clamp(static_cast<int>(u), 0, n - 1);
        const double t_i = t_lo + i * h;
        return (*knots)[i] + 0.5 * (0.0 - t_i) * (rates[i] + rate(0.0));
    }();
    for (auto& g : *knots) g -= at_zero;

    double c_gamma = rates[0], C_gamma = rates[0];
    for (double r : rates) {
        c_gamma = std::min(c_gamma, r);
        C_gamma = std::max(C_gamma, r);
    }
    if (c_gamma <= 0.0) throw std::invalid_argument("warp rate must stay positive");

    WarpFn out;
    auto rate_copy = rate;
    out.value = [knots, rate = std::move(rate), t_lo, h, n](double t) {
        const double u = (t - t_lo) / h;
        const int i = std::clamp(static_cast<int>(std::floor(u)), 0, n - 1);
        const double t_i = t_lo + i * h;
        return (*knots)[i] + 0.5 * (t - t_i) * (rate(t_i) + rate(t));
    };
    out.rate = std::move(rate_copy);
    out.curvature = std::move(curvature);
    out.c_gamma = c_gamma;
    out.C_gamma = C_gamma;
    return out;
}

}  // namespace

WarpFn synth_warp(double t2, double t3, double t_final, double q, double grid_step,
                  double depth) {
    if (t2 <= 0.0 || t3 <= 0.0 || t_final <= 0.0)
        throw std::invalid_argument("synth_warp: periods must be positive");
    if (q <= 0.0 || q == 1.0) throw std::invalid_argument("synth_warp: q must be positive, != 1");

    auto modulation = [t2, t3, depth](double t) {
        return depth * std::cos(2.0 * M_PI * t / t2) * std::exp(-t / t3);
    };

    // Unit-mean rate: bisection on Gamma against the trapezoid mean of q^mod.
    const int n = std::max(1 << 12, static_cast<int>(std::ceil(t_final / grid_step)));
    const double h = t_final / n;
    std::vector<double> pow_mod(n + 1);
    for (int i = 0; i <= n; ++i) pow_mod[i] = std::pow(q, modulation(i * h));
    const double mean_pow = trapezoid(pow_mod, h) / t_final;
    const double gamma0 = bisect(
        [&](double g) { return std::pow(q, g) * mean_pow - 1.0; }, -8.0, 8.0, 1e-14);

    const double lnq = std::log(q);
    auto rate = [gamma0, modulation, q](double t) {
        return std::pow(q, gamma0 + modulation(t));
    };
    auto curvature = [rate, modulation, t2, t3, depth, lnq](double t) {
        const double mod_deriv = depth * std::exp(-t / t3) *
                                 (-(2.0 * M_PI / t2) * std::sin(2.0 * M_PI * t / t2) -
                                  std::cos(2.0 * M_PI * t / t2) / t3);
        return lnq * rate(t) * mod_deriv;
    };
    return warp_from_rate(rate, curvature, 0.0, t_final, grid_step);
}

double doppler_rate(double c, double V, double d, double t) {
    const double c2 = c * c, v2 = V * V;
    const double root = std::sqrt(d * d * (c2 - v2) + c2 * v2 * t * t);
    return c2 / (c2 - v2) * (1.0 - v2 * t / root);
}

WarpFn doppler_warp(double c, double V, double d, double t_lo, double t_hi,
                    double grid_step) {
    if (!(V > 0.0) || !(V < c)) throw std::invalid_argument("doppler_warp: need 0 < V < c");
    if (d <= 0.0) throw std::invalid_argument("doppler_warp: need d > 0");
    if (!(t_lo < 0.0 && t_hi > 0.0))
        throw std::invalid_argument("doppler_warp: integration span must contain 0");

    const double c2 = c * c, v2 = V * V;
    const double D = d * d * (c2 - v2);
    auto rate = [c, V, d](double t) { return doppler_rate(c, V, d, t); };
    auto curvature = [c2, v2, D](double t) {
        const double R = std::sqrt(D + c2 * v2 * t * t);
        return -c2 / (c2 - v2) * v2 * D / (R * R * R);
    };
    return warp_from_rate(rate, curvature, t_lo, t_hi, grid_step);
}

SampledSignal gaussian_stationary_synth(const PowerSpectrum& spectrum, std::size_t n,
                                        double fs, std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("gaussian_stationary_synth: need n >= 2");
    if (fs <= 0.0) throw std::invalid_argument("gaussian_stationary_synth: fs must be positive");
    if (!spectrum.empty() && spectrum.support_hi() > 0.5 * fs + 1e-9)
        throw std::invalid_argument("gaussian_stationary_synth: spectrum exceeds [0, fs/2]");

    SampledSignal out;
    out.fs = fs;
    out.samples.assign(n, 0.0);
    if (spectrum.empty()) return out;

    Rng rng(seed);
    std::vector<cplx> coeffs(n, cplx{0.0, 0.0});
    const double dnu = fs / static_cast<double>(n);
    const std::size_t half = n / 2;
    for (std::size_t k = 1; k < half; ++k) {
        const double s = spectrum(k * dnu);
        // E|X_k|^2 = n * fs * S / 2 makes the sample variance match the
        // one-sided density (conjugate pair counted).
        const double sigma = std::sqrt(0.5 * static_cast<double>(n) * fs * s);
        const cplx z = rng.circular_normal();
        coeffs[k] = sigma * z;
        coeffs[n - k] = std::conj(coeffs[k]);
    }
    if (n % 2 == 0 && half >= 1) {
        const double s = spectrum(half * dnu);
        coeffs[half] = std::sqrt(static_cast<double>(n) * fs * s) * rng.normal();
    }

    Fft fft(static_cast<int>(n));
    std::vector<cplx> x = fft.inverse(coeffs);
    for (std::size_t i = 0; i < n; ++i) out.samples[i] = x[i].real();
    return out;
}

SampledSignal apply_deformation(const SampledSignal& x, const AmplitudeFn& a,
                                const WarpFn& gamma) {
    if (x.size() < 2) throw std::invalid_argument("apply_deformation: signal too short");
    const double fs = x.fs;
    const std::size_t n = x.size();

    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = i / fs;
    CubicSpline spline(t, x.samples);

    const double tol = 2.0 / fs;  // boundary tolerance: two samples, clamped
    const double t_max = (n - 1) / fs;

    SampledSignal y;
    y.fs = fs;
    y.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double u = gamma.value(t[i]);
        if (u < -tol || u > t_max + tol) {
            std::ostringstream msg;
            msg << "apply_deformation: warp leaves the signal span at t = " << t[i]
                << " s (gamma(t) = " << u << ", span [0, " << t_max << "])";
            throw std::invalid_argument(msg.str());
        }
        u = std::clamp(u, 0.0, t_max);
        const double rate = gamma.rate(t[i]);
        if (!(rate > 0.0))
            throw std::invalid_argument("apply_deformation: warp rate must be positive");
        y.samples[i] = a.value(t[i]) * std::sqrt(rate) * spline(u);
    }
    return y;
}

}  // namespace warpest
