// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The warpest authors

#include "warpest/wavelet.hpp"

#include <cmath>
#include <stdexcept>

#include "warpest/numerics.hpp"

namespace warpest {

double divergence(double a, double b) {
    if (!(a > 0.0) || !(b > 0.0))
        throw std::invalid_argument("divergence: arguments must be positive");
    return 0.5 * (a / b + b / a) - 1.0;
}

WaveletSpec sharp_wavelet(double nu0, double eps, double nu1) {
    if (!(nu0 > 0.0)) throw std::invalid_argument("sharp_wavelet: nu0 must be positive");
    if (!(eps > 0.0 && eps < 1.0))
        throw std::invalid_argument("sharp_wavelet: eps must be in (0, 1)");
    WaveletSpec spec;
    spec.kind = WaveletKind::sharp;
    spec.nu0 = nu0;
    spec.eps = eps;
    spec.nu1 = nu1 > 0.0 ? nu1 : nu0 * std::pow(2.0, -0.25);
    if (spec.nu1 == nu0) throw std::invalid_argument("sharp_wavelet: nu1 must differ from nu0");
    return spec;
}

WaveletSpec dog_wavelet(int order, double nu0) {
    if (order < 1) throw std::invalid_argument("dog_wavelet: order must be >= 1");
    if (!(nu0 > 0.0)) throw std::invalid_argument("dog_wavelet: nu0 must be positive");
    WaveletSpec spec;
    spec.kind = WaveletKind::derivative_of_gaussian;
    spec.dog_order = order;
    spec.nu0 = nu0;
    return spec;
}

double wavelet_fourier_eval(const WaveletSpec& spec, double nu) {
    if (nu <= 0.0) return 0.0;
    if (spec.kind == WaveletKind::sharp) {
        const double exponent = divergence(nu, spec.nu0) / divergence(spec.nu1, spec.nu0);
        return std::pow(spec.eps, exponent);
    }
    // Derivative of Gaussian, normalized so psi_hat(nu0) = 1.
    const double z = nu / spec.nu0;
    const int k = spec.dog_order;
    const double log_val = k * std::log(z) - 0.5 * k * (z * z - 1.0);
    return std::exp(log_val);
}

namespace {

std::pair<double, double> band_impl(const WaveletSpec& spec, double tol) {
    if (!(tol > 0.0 && tol < 1.0)) throw std::invalid_argument("band: tol must be in (0,1)");
    if (spec.kind == WaveletKind::sharp) {
        // Solve delta(nu, nu0) = D in closed form: nu/nu0 = (1+D) +- sqrt((1+D)^2-1).
        const double D = divergence(spec.nu1, spec.nu0) * std::log(tol) / std::log(spec.eps);
        const double u = 1.0 + D;
        const double r = std::sqrt(u * u - 1.0);
        return {spec.nu0 * (u - r), spec.nu0 * (u + r)};
    }
    auto f = [&](double nu) { return wavelet_fourier_eval(spec, nu) - tol; };
    double lo = spec.nu0, hi = spec.nu0;
    while (f(lo) > 0.0) lo *= 0.5;
    while (f(hi) > 0.0) hi *= 2.0;
    const double left = bisect(f, lo, 2.0 * lo, 1e-12 * spec.nu0);
    const double right = bisect(f, 0.5 * hi, hi, 1e-12 * spec.nu0);
    return {left, right};
}

}  // namespace

std::pair<double, double> centroid_and_norm(const WaveletSpec& spec) {
    auto [lo, hi] = band_impl(spec, 1e-14);
    auto integrate = [&](int n) {
        const double lg_lo = std::log(lo), lg_hi = std::log(hi);
        const double h = (lg_hi - lg_lo) / n;
        double m0 = 0.0, m1 = 0.0;
        for (int i = 0; i <= n; ++i) {
            const double nu = std::exp(lg_lo + i * h);
            const double p = wavelet_fourier_eval(spec, nu);
            const double w = (i == 0 || i == n) ? 0.5 : 1.0;
            m0 += w * p * p * nu;       // dnu = nu du on the log grid
            m1 += w * p * p * nu * nu;
        }
        return std::pair{m0 * h, m1 * h};
    };
    const int n = 1 << 12;
    auto [m0, m1] = integrate(n);
    auto [m0h, m1h] = integrate(n / 2);
    if (std::abs(m0 - m0h) > 1e-6 * m0 || std::abs(m1 - m1h) > 1e-6 * m1)
        throw std::runtime_error("centroid_and_norm: quadrature did not converge");
    return {m1 / m0, m0};
}

Wavelet::Wavelet(const WaveletSpec& spec) : spec_(spec) {
    auto [omega0, norm2] = centroid_and_norm(spec);
    omega0_ = omega0;
    norm2_ = norm2;
    if (!(norm2_ > 0.0)) throw std::invalid_argument("Wavelet: zero norm");
}

std::pair<double, double> Wavelet::band(double tol) const { return band_impl(spec_, tol); }

double Wavelet::time_support() const {
    if (time_support_ >= 0.0) return time_support_;
    // psi(t) through a long zero-padded inverse FFT of psi_hat; the support is
    // where the cumulative tail energy drops below 1e-6 of the total.
    const double nu_max = band(1e-16).second * 1.05;
    const int n_spec = 1 << 13;
    const int n_fft = 1 << 17;
    const double dnu = nu_max / n_spec;
    Fft fft(n_fft);
    std::vector<cplx> spec(n_fft, cplx{0.0, 0.0});
    for (int k = 0; k < n_spec; ++k) spec[k] = fourier(k * dnu);
    const std::vector<cplx> time = fft.inverse(spec);
    double total = 0.0;
    for (int j = 0; j < n_fft / 2; ++j) total += std::norm(time[j]);
    double tail = 0.0;
    int j_eff = n_fft / 2 - 1;
    for (int j = n_fft / 2 - 1; j >= 0; --j) {
        tail += std::norm(time[j]);
        if (tail > 1e-6 * total) {
            j_eff = j;
            break;
        }
    }
    time_support_ = (j_eff + 1) / (n_fft * dnu);
    return time_support_;
}

std::vector<double> ScaleGrid::scales() const {
    std::vector<double> out(count);
    for (int i = 0; i < count; ++i) out[i] = scale(i);
    return out;
}

std::vector<int> ScaleGrid::coarse_indices() const {
    std::vector<int> out;
    const int m = count / subsample;
    out.reserve(m);
    for (int j = 0; j < m; ++j) out.push_back(j * subsample);
    return out;
}

std::vector<double> ScaleGrid::coarse_scales() const {
    std::vector<double> out;
    for (int i : coarse_indices()) out.push_back(scale(i));
    return out;
}

double ScaleGrid::frequency(int i, double omega0) const {
    return std::pow(q, -scale(i)) * omega0;
}

ScaleGrid default_scale_grid(const Wavelet& wavelet, double fs, double fmin_hz,
                             double fmax_frac, int count, int subsample, double q) {
    if (count < 2) throw std::invalid_argument("default_scale_grid: count must be >= 2");
    if (!(fmin_hz > 0.0 && fmax_frac > fmin_hz / fs && fmax_frac <= 0.5))
        throw std::invalid_argument("default_scale_grid: bad frequency range");
    const double w0 = wavelet.omega0();
    const double s_min = std::log(w0 / fmax_frac) / std::log(q);
    const double s_max = std::log(w0 * fs / fmin_hz) / std::log(q);
    ScaleGrid grid;
    grid.s0 = s_min;
    grid.ds = (s_max - s_min) / (count - 1);
    grid.count = count;
    grid.subsample = subsample;
    grid.q = q;
    return grid;
}

int cwt_margin_samples(const ScaleGrid& grid, const Wavelet& wavelet) {
    // Twice the measured wavelet support at the largest (widest) scale.
    const double s_max = grid.scale(grid.count - 1);
    return static_cast<int>(std::ceil(2.0 * wavelet.time_support() * std::pow(grid.q, s_max)));
}

TimeScaleTransform cwt(const SampledSignal& x, const ScaleGrid& grid, const Wavelet& wavelet) {
    const std::size_t n = x.size();
    if (n < 2) throw std::invalid_argument("cwt: signal must have >= 2 samples");
    if (grid.count < 1) throw std::invalid_argument("cwt: empty scale grid");

    Fft fft(static_cast<int>(n));
    std::vector<cplx> xin(n);
    for (std::size_t i = 0; i < n; ++i) xin[i] = x.samples[i];
    std::vector<cplx> spectrum = fft.forward(xin);

    TimeScaleTransform out;
    out.grid = grid;
    out.fs = x.fs;
    out.margin = cwt_margin_samples(grid, wavelet);
    out.coeffs.resize(grid.count, static_cast<Eigen::Index>(n));

    std::vector<cplx> filtered(n), row(n);
    const std::size_t half = n / 2;
    for (int m = 0; m < grid.count; ++m) {
        const double dil = std::pow(grid.q, grid.scale(m));
        const double amp = std::sqrt(dil);
        std::fill(filtered.begin(), filtered.end(), cplx{0.0, 0.0});
        // Positive-frequency bins only; psi_hat vanishes for nu <= 0.
        for (std::size_t k = 1; k <= half; ++k) {
            const double nu = static_cast<double>(k) / static_cast<double>(n);
            const double w = wavelet.fourier(dil * nu);
            if (w != 0.0) filtered[k] = spectrum[k] * (amp * w);
        }
        fft.inverse(filtered.data(), row.data());
        for (std::size_t t = 0; t < n; ++t) out.coeffs(m, static_cast<Eigen::Index>(t)) = row[t];
    }
    return out;
}

}  // namespace warpest
