// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The warpest authors

#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "test_util.hpp"
#include "warpest/numerics.hpp"
#include "warpest/signal_model.hpp"
#include "warpest/wavelet.hpp"

using namespace warpest;

TEST_CASE("divergence: values and symmetries") {
    for (double x : {0.5, 1.0, 3.7}) CHECK(divergence(x, x) == 0.0);
    CHECK(divergence(2.0, 1.0) == 0.25);
    for (auto [a, b] : {std::pair{3.0, 7.0}, std::pair{0.2, 1.9}}) {
        CHECK(divergence(a, b) == divergence(b, a));
        CHECK(std::abs(divergence(a, b) - divergence(1.0 / a, 1.0 / b)) < 1e-14);
        CHECK(divergence(a, b) > 0.0);
    }
    CHECK_THROWS(divergence(-1.0, 2.0));
    CHECK_THROWS(divergence(1.0, 0.0));
}

TEST_CASE("wavelet_fourier_eval: sharp wavelet pinned values") {
    const WaveletSpec spec = sharp_wavelet(0.5);
    CHECK(wavelet_fourier_eval(spec, spec.nu0) == 1.0);
    CHECK(wavelet_fourier_eval(spec, spec.nu1) == spec.eps);
    CHECK(wavelet_fourier_eval(spec, 0.0) == 0.0);
    CHECK(wavelet_fourier_eval(spec, -0.3) == 0.0);
    // Log-axis symmetry: psi_hat(nu0^2 / nu) = psi_hat(nu).
    for (double nu : {0.3, 0.42, 0.77}) {
        const double mirrored = spec.nu0 * spec.nu0 / nu;
        CHECK(std::abs(wavelet_fourier_eval(spec, mirrored) -
                       wavelet_fourier_eval(spec, nu)) < 1e-12);
    }
}

TEST_CASE("wavelet_fourier_eval: derivative-of-Gaussian peaks at nu0") {
    const WaveletSpec spec = dog_wavelet(4, 0.5);
    CHECK(wavelet_fourier_eval(spec, 0.5) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(wavelet_fourier_eval(spec, 0.49) < 1.0);
    CHECK(wavelet_fourier_eval(spec, 0.51) < 1.0);
    CHECK(wavelet_fourier_eval(spec, -1.0) == 0.0);
}

TEST_CASE("wavelet_fourier_eval: unimodal on the positive axis") {
    for (const WaveletSpec& spec : {sharp_wavelet(0.5), dog_wavelet(4, 0.5)}) {
        int sign_changes = 0;
        double prev = wavelet_fourier_eval(spec, 0.01);
        bool rising = true;
        for (int i = 1; i <= 4000; ++i) {
            const double nu = 0.01 * std::pow(300.0, i / 4000.0);
            const double v = wavelet_fourier_eval(spec, nu);
            if (rising && v < prev - 1e-300) {
                rising = false;
                ++sign_changes;
            } else if (!rising && v > prev * (1.0 + 1e-12) + 1e-300) {
                ++sign_changes;
            }
            prev = v;
        }
        CHECK(sign_changes == 1);
    }
}

TEST_CASE("centroid_and_norm: oracle quadrature, scaling, positivity") {
    const WaveletSpec spec = sharp_wavelet(0.5);
    const auto [omega0, norm2] = centroid_and_norm(spec);
    CHECK(omega0 >= spec.nu0);  // log-symmetric density is right-skewed linearly
    CHECK(norm2 > 0.0);

    // Independent oracle: fine linear-grid trapezoid.
    const int n = 1 << 16;
    const double hi = 2.5;
    double m0 = 0.0, m1 = 0.0;
    for (int i = 1; i <= n; ++i) {
        const double nu = hi * i / n;
        const double p = wavelet_fourier_eval(spec, nu);
        const double w = (i == n) ? 0.5 : 1.0;
        m0 += w * p * p;
        m1 += w * p * p * nu;
    }
    m0 *= hi / n;
    m1 *= hi / n;
    CHECK(testutil::rel_err(norm2, m0) < 1e-5);
    CHECK(testutil::rel_err(omega0, m1 / m0) < 1e-5);

    const auto [omega0_scaled, norm2_scaled] = centroid_and_norm(sharp_wavelet(1.0));
    CHECK(testutil::rel_err(omega0_scaled, 2.0 * omega0) < 1e-9);
    CHECK(testutil::rel_err(norm2_scaled, 2.0 * norm2) < 1e-9);
}

TEST_CASE("default_scale_grid: covers the requested band") {
    const Wavelet& w = testutil::sharp();
    const double fs = 8000.0;
    const ScaleGrid g = default_scale_grid(w, fs);
    CHECK(g.count == 106);
    CHECK(g.subsample == 7);
    CHECK(g.coarse_indices().size() == 15);
    CHECK(std::abs(g.frequency(0, w.omega0()) - 0.45) < 1e-12);
    CHECK(std::abs(g.frequency(g.count - 1, w.omega0()) - 50.0 / fs) < 1e-12);
    for (int i = 0; i < g.count; ++i) {
        CHECK(g.frequency(i, w.omega0()) > 0.0);
        CHECK(g.frequency(i, w.omega0()) <= 0.5);
    }
}

TEST_CASE("cwt: zero signal, linearity, circular translation covariance") {
    const Wavelet& w = testutil::sharp();
    const ScaleGrid g = testutil::small_grid();
    const double fs = 8000.0;
    const std::size_t n = 1 << 10;

    SampledSignal zero;
    zero.fs = fs;
    zero.samples.assign(n, 0.0);
    CHECK(cwt(zero, g, w).coeffs.cwiseAbs().maxCoeff() == 0.0);

    SampledSignal x = gaussian_stationary_synth(testutil::bumps(fs), n, fs, 5);
    SampledSignal y = gaussian_stationary_synth(testutil::bumps(fs), n, fs, 6);
    SampledSignal mix;
    mix.fs = fs;
    mix.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        mix.samples[i] = 2.0 * x.samples[i] - 0.5 * y.samples[i];
    const auto wx = cwt(x, g, w), wy = cwt(y, g, w), wmix = cwt(mix, g, w);
    const double lin_err =
        (wmix.coeffs - 2.0 * wx.coeffs + 0.5 * wy.coeffs).cwiseAbs().maxCoeff();
    CHECK(lin_err < 1e-10 * wx.coeffs.cwiseAbs().maxCoeff());

    const int shift = 37;
    SampledSignal xs;
    xs.fs = fs;
    xs.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) xs.samples[i] = x.samples[(i + shift) % n];
    const auto wxs = cwt(xs, g, w);
    double max_err = 0.0;
    for (int m = 0; m < g.count; ++m)
        for (std::size_t t = 0; t < n; ++t)
            max_err = std::max(max_err, std::abs(wxs.coeffs(m, t) -
                                                 wx.coeffs(m, (t + shift) % n)));
    CHECK(max_err < 1e-9 * wx.coeffs.cwiseAbs().maxCoeff());
}

TEST_CASE("cwt: pure tone peaks at the scale predicted by the filter response") {
    const Wavelet& w = testutil::sharp();
    ScaleGrid g = testutil::small_grid(24, 0.8, 0.125);
    const double fs = 8000.0;
    const std::size_t n = 1 << 12;
    const int k0 = 512;  // exactly periodic tone
    const double f0 = static_cast<double>(k0) / n;  // normalized frequency

    SampledSignal tone;
    tone.fs = fs;
    tone.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        tone.samples[i] = std::cos(2.0 * M_PI * k0 * static_cast<double>(i) / n);
    const auto W = cwt(tone, g, w);

    int best_measured = 0, best_predicted = 0;
    for (int m = 1; m < g.count; ++m) {
        if (std::abs(W.coeffs(m, n / 2)) > std::abs(W.coeffs(best_measured, n / 2)))
            best_measured = m;
        const auto resp = [&](int i) {
            const double dil = std::pow(g.q, g.scale(i));
            return std::sqrt(dil) * w.fourier(dil * f0);
        };
        if (resp(m) > resp(best_predicted)) best_predicted = m;
    }
    CHECK(best_measured == best_predicted);
}

TEST_CASE("cwt: dilation by an exact octave shifts rows") {
    const Wavelet& w = testutil::sharp();
    ScaleGrid g;
    g.s0 = 0.5;
    g.ds = 1.0 / 17.0;
    g.count = 60;
    g.subsample = 7;
    g.q = 2.0;
    const double fs = 8000.0;
    const int n = 1 << 12;

    // Band-limited x via spectral synthesis, dilated x_d(t) = 2^{-1/2} x(t/2);
    // content kept well below Nyquist so the spline resampling is clean.
    SampledSignal x = gaussian_stationary_synth(
        synth_spectrum(400.0, 200.0, 700.0, 240.0, fs), n, fs, 17);
    std::vector<double> t(n);
    for (int i = 0; i < n; ++i) t[i] = i / fs;
    CubicSpline spline(t, x.samples);
    SampledSignal xd;
    xd.fs = fs;
    xd.samples.resize(n);
    for (int i = 0; i < n; ++i)
        xd.samples[i] = std::sqrt(0.5) * spline(0.5 * i / fs);

    const auto wx = cwt(x, g, w), wd = cwt(xd, g, w);
    const int row_shift = 17;  // s0 = 1 octave = 17 * ds
    const int margin = 600;
    double num = 0.0, den = 0.0;
    for (int m = row_shift; m < g.count; ++m) {
        for (int i = 2 * margin; i < n - 2 * margin; i += 2) {
            // W_{D_1 x}(s, tau) = W_x(s - 1, tau / 2)
            const cplx lhs = wd.coeffs(m, i);
            const cplx rhs = wx.coeffs(m - row_shift, i / 2);
            num += std::norm(lhs - rhs);
            den += std::norm(rhs);
        }
    }
    CHECK(std::sqrt(num / den) < 1e-3);
}

TEST_CASE("cwt: coefficients of a real Gaussian signal are circular") {
    const Wavelet& w = testutil::sharp();
    const ScaleGrid g = testutil::small_grid(6, 1.4, 0.3);
    const double fs = 8000.0;
    const std::size_t n = 1 << 11;

    cplx mean_sq{0.0, 0.0};
    double mean_abs2 = 0.0;
    long count = 0;
    for (int trial = 0; trial < 40; ++trial) {
        SampledSignal x = gaussian_stationary_synth(testutil::bumps(fs), n, fs, 100 + trial);
        const auto W = cwt(x, g, w);
        for (int m = 0; m < g.count; ++m)
            for (std::size_t i = 0; i < n; i += 64) {
                const cplx v = W.coeffs(m, i);
                mean_sq += v * v;
                mean_abs2 += std::norm(v);
                ++count;
            }
    }
    mean_sq /= static_cast<double>(count);
    mean_abs2 /= static_cast<double>(count);
    CHECK(std::abs(mean_sq) < 0.05 * mean_abs2);
    CHECK(mean_abs2 > 0.0);
}
