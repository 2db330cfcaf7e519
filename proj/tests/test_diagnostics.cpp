// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The warpest authors

#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "test_util.hpp"
#include "warpest/covariance.hpp"
#include "warpest/diagnostics.hpp"
#include "warpest/estimator.hpp"
#include "warpest/numerics.hpp"
#include "warpest/signal_model.hpp"

using namespace warpest;

TEST_CASE("baseline_theta1: pinned values and identity-covariance equality") {
    Eigen::VectorXcd z = Eigen::VectorXcd::Zero(8);
    CHECK(baseline_theta1(z) == 0.0);
    Eigen::VectorXcd v(4);
    v << 1.0, 1.0, cplx{0.0, 1.0}, cplx{0.0, -1.0};  // ||v||^2 = 4 = M_s
    CHECK(baseline_theta1(v) == 1.0);

    // Replacing the covariance by the identity (r = 1) turns the closed form
    // into the baseline.
    const Wavelet& w = testutil::sharp();
    const ScaleGrid g = testutil::small_grid();
    const PowerSpectrum s = to_analysis_spectrum(testutil::bumps(), 8000.0);
    Rng rng(3);
    Eigen::VectorXcd u(g.count);
    for (int i = 0; i < g.count; ++i) u(i) = rng.circular_normal();
    CHECK(std::abs(baseline_theta1(u) -
                   estimate_theta1_closed_form(u, 0.0, s, g.scales(), w, g.q, 1.0)) < 1e-12);
}

TEST_CASE("baseline_theta2: centering cases and zero-energy flags") {
    const std::vector<double> scales{1.0, 1.2, 1.4, 1.6};
    Eigen::MatrixXcd same(4, 5);
    for (int n = 0; n < 5; ++n)
        same.col(n) << cplx{1, 0}, cplx{0, 2}, cplx{0.5, 0.5}, cplx{-1, 0};
    for (double v : baseline_theta2(same, scales)) CHECK(std::abs(v) < 1e-14);

    Eigen::MatrixXcd single = Eigen::MatrixXcd::Zero(4, 3);
    single(2, 0) = 5.0;
    single(2, 1) = cplx{0, -2};
    single(2, 2) = 0.1;
    for (double v : baseline_theta2(single, scales)) CHECK(std::abs(v) < 1e-14);

    Eigen::MatrixXcd with_zero = same;
    with_zero.col(2).setZero();
    std::vector<std::uint8_t> flags;
    const auto est = baseline_theta2(with_zero, scales, &flags);
    CHECK(flags == std::vector<std::uint8_t>{0, 0, 1, 0, 0});
    CHECK(est[2] == 0.0);
}

TEST_CASE("crlb_theta1: closed form and Slepian-Bangs consistency") {
    CHECK(crlb_theta1(1.0, 106) == 2.0 / 106);
    CHECK(crlb_theta1(1.0, 212) == doctest::Approx(0.5 * crlb_theta1(1.0, 106)));
    CHECK_THROWS(crlb_theta1(-1.0, 10));

    const Wavelet& w = testutil::sharp();
    const ScaleGrid g = testutil::small_grid(12, 1.7, 0.11);
    const PowerSpectrum s = to_analysis_spectrum(testutil::bumps(), 8000.0);
    const double th1 = 1.7;
    const Eigen::MatrixXd c0 = build_C0(0.0, s, g.scales(), w, g.q).entries;
    const double sb = slepian_bangs(th1 * c0, c0);
    CHECK(testutil::rel_err(sb, crlb_theta1(th1, g.count)) < 1e-6);

    // Invariance under simultaneous scaling of C and dC.
    CHECK(testutil::rel_err(slepian_bangs(3.0 * th1 * c0, 3.0 * c0), sb) < 1e-10);

    CHECK_THROWS(slepian_bangs(Eigen::MatrixXd::Identity(4, 4),
                               Eigen::MatrixXd::Zero(4, 4)));
}

TEST_CASE("bias_theta1: zero at truth, doubled-spectrum case, Monte-Carlo check") {
    const Wavelet& w = testutil::sharp();
    const ScaleGrid g = testutil::small_grid(12, 1.7, 0.11);
    const double fs = 8000.0;
    const PowerSpectrum s = to_analysis_spectrum(testutil::bumps(fs), fs);
    const double th1 = 1.3, th2 = 0.05;

    CHECK(std::abs(bias_theta1(th1, s, s, th2, th2, g.scales(), w, g.q, 0.0)) < 1e-10);

    std::vector<double> doubled = s.values();
    for (double& v : doubled) v *= 2.0;
    const PowerSpectrum s2(s.freqs(), doubled);
    CHECK(std::abs(bias_theta1(th1, s, s2, th2, th2, g.scales(), w, g.q, 0.0) -
                   (-0.5 * th1)) < 1e-9);

    // Monte-Carlo: estimates from a deliberately perturbed spectrum have the
    // predicted mean offset.
    std::vector<double> tilted = s.values();
    for (std::size_t i = 0; i < tilted.size(); ++i)
        tilted[i] *= 1.0 + 0.3 * std::sin(0.01 * s.freqs()[i] * fs);
    const PowerSpectrum s_tilt(s.freqs(), tilted);
    const double predicted = bias_theta1(th1, s, s_tilt, th2, th2, g.scales(), w, g.q, 0.0);

    const Eigen::MatrixXd c0_true = build_C0(th2, s, g.scales(), w, g.q).entries;
    Eigen::LLT<Eigen::MatrixXd> llt(c0_true);
    REQUIRE(llt.info() == Eigen::Success);
    const Eigen::MatrixXd L = llt.matrixL();
    Rng rng(21);
    const int trials = 4000;
    double mean = 0.0, m2 = 0.0;
    for (int t = 0; t < trials; ++t) {
        Eigen::VectorXd zr(g.count), zi(g.count);
        for (int i = 0; i < g.count; ++i) {
            zr(i) = rng.normal() * M_SQRT1_2;
            zi(i) = rng.normal() * M_SQRT1_2;
        }
        const Eigen::VectorXd wr = L * zr, wi = L * zi;
        Eigen::VectorXcd v(g.count);
        for (int i = 0; i < g.count; ++i) v(i) = std::sqrt(th1) * cplx{wr(i), wi(i)};
        const double est =
            estimate_theta1_closed_form(v, th2, s_tilt, g.scales(), w, g.q, 0.0);
        mean += est - th1;
        m2 += (est - th1) * (est - th1);
    }
    mean /= trials;
    const double se = std::sqrt((m2 / trials - mean * mean) / trials);
    CHECK(std::abs(mean - predicted) <= 3.0 * se);
}

TEST_CASE("theorem1_bound: exponents, degenerate deformations, monotonicity") {
    const double fs = 8000.0, tf = 2.0;
    const PowerSpectrum s = testutil::bumps(fs);
    const std::vector<double> scales{0.5, 1.0, 1.5, 2.0, 2.5, 3.0};

    const auto r4 = theorem1_bound(identity_amplitude(), identity_warp(), s, fs, 0.0, tf,
                                   4.0, scales, 2.0);
    CHECK(r4.rho == doctest::Approx(0.5));
    CHECK(r4.mu == doctest::Approx(0.0));
    for (double b : r4.bound) CHECK(b == 0.0);  // affine warp, constant amplitude

    const AmplitudeFn a = synth_amplitude(0.4, tf / 3.0, tf);
    const WarpFn gamma = synth_warp(tf / 2.0, tf / 2.0, tf, 2.0, 1.0 / fs);
    const auto rep = theorem1_bound(a, gamma, s, fs, 0.0, tf, 4.0, scales, 2.0);
    CHECK(rep.sigma_X2 == doctest::Approx(600.0).epsilon(1e-3));
    for (std::size_t i = 1; i < rep.bound.size(); ++i)
        CHECK(rep.bound[i] > rep.bound[i - 1]);  // decays toward small scales
    CHECK(rep.K1 > 0.0);
    CHECK(rep.K2 > 0.0);
    CHECK(rep.K3 > 0.0);

    // K1, K3 shrink when the lower bounds c_gamma, c_a grow.
    AmplitudeFn a_hi = a;
    a_hi.c_a = 2.0 * a.c_a;
    WarpFn g_hi = gamma;
    g_hi.c_gamma = 2.0 * gamma.c_gamma;
    const auto rep_hi = theorem1_bound(a_hi, g_hi, s, fs, 0.0, tf, 4.0, scales, 2.0);
    CHECK(rep_hi.K1 < rep.K1);
    CHECK(rep_hi.K3 < rep.K3);

    CHECK_THROWS(theorem1_bound(a, gamma, s, fs, 0.0, tf, 1.5, scales, 2.0));
}

TEST_CASE("wavelet_time_decay_scale: finite and stable for the sharp wavelet") {
    const double m4 = wavelet_time_decay_scale(testutil::sharp(), 4.0);
    CHECK(m4 > 0.0);
    CHECK(m4 < 1e4);  // high-Q wavelets sit far above the unit premise
    const double m3 = wavelet_time_decay_scale(testutil::sharp(), 3.0);
    CHECK(m3 <= m4 + 1e-12);  // smaller beta weights the tail less
}

TEST_CASE("empirical_approx_error: exact for affine warps, bounded for the benchmark") {
    const Wavelet& w = testutil::sharp();
    const double fs = 8000.0;
    const int n = 1 << 12;
    const double tf = (n - 1) / fs;
    ScaleGrid g = default_scale_grid(w, fs, 200.0, 0.45, 24, 4);
    const PowerSpectrum s = testutil::bumps(fs);

    // Affine warp + constant amplitude: the tangent approximation is exact.
    WarpFn affine = identity_warp();
    affine.value = [](double t) { return 0.9 * t; };
    affine.rate = [](double) { return 0.9; };
    affine.c_gamma = affine.C_gamma = 0.9;
    const auto exact = empirical_approx_error(identity_amplitude(), affine, s, g, w, fs,
                                              n, 4.0, 8, 1234, 5);
    // Error limited to FFT wrap-around leakage, far below coefficient energy.
    SampledSignal probe = gaussian_stationary_synth(s, n, fs, 1);
    const auto W = cwt(probe, g, w);
    double rms2_max = 0.0;
    for (int m = 0; m < g.count; ++m)
        rms2_max = std::max(rms2_max, W.coeffs.row(m).squaredNorm() / n);
    for (int m = 0; m < g.count; ++m)
        for (int j = 1; j + 1 < 5; ++j)
            CHECK(exact.mean_sq_error(m, j) <= 1e-6 * rms2_max);

    // Benchmark-shaped deformations: no bound violations, and the error grows
    // with the warp modulation speed (slow base rate keeps the sweep inside
    // the growth regime, away from saturation).
    const AmplitudeFn a = synth_amplitude(0.25, tf / 2.0, tf);
    double prev_total = 0.0;
    for (double speed : {1.0, 2.0, 4.0}) {
        const WarpFn gamma =
            synth_warp(4.0 * tf / speed, 2.0 * tf, tf, 2.0, 1.0 / fs, 0.12);
        const auto rep =
            empirical_approx_error(a, gamma, s, g, w, fs, n, 4.0, 24, 99, 5);
        CHECK(rep.violations == 0);
        const double total = rep.mean_sq_error.sum();
        CHECK(total > prev_total);
        prev_total = total;
    }
}

TEST_CASE("prop1_bias_bound: zero errors, linearity, J_X") {
    const Wavelet& w = testutil::sharp();
    const PowerSpectrum s = to_analysis_spectrum(testutil::bumps(), 8000.0);

    const auto zero = prop1_bias_bound(w, s, 2.0, 0.0, 0.0, 0.5);
    CHECK(zero.bound == 0.0);
    CHECK(zero.J_X > 0.0);
    CHECK(zero.K1p > 0.0);
    CHECK(zero.K2p > 0.0);

    const auto b10 = prop1_bias_bound(w, s, 2.0, 0.1, 0.0, 0.5);
    const auto b01 = prop1_bias_bound(w, s, 2.0, 0.0, 0.2, 0.5);
    const auto b11 = prop1_bias_bound(w, s, 2.0, 0.1, 0.2, 0.5);
    CHECK(b11.bound == doctest::Approx(b10.bound + b01.bound).epsilon(1e-12));
    const auto b20 = prop1_bias_bound(w, s, 2.0, 0.2, 0.0, 0.5);
    CHECK(b20.bound == doctest::Approx(2.0 * b10.bound).epsilon(1e-12));

    CHECK_THROWS(prop1_bias_bound(w, s, 2.0, 0.1, 0.1, -1.0));
}

TEST_CASE("prop1: empirical spectrum bias with injected errors stays below the bound") {
    const Wavelet& w = testutil::sharp();
    const double fs = 8000.0;
    const int n = 1 << 13;
    ScaleGrid g = default_scale_grid(w, fs, 300.0, 0.4, 24, 4);
    const PowerSpectrum s_phys = testutil::bumps(fs);
    const PowerSpectrum s = to_analysis_spectrum(s_phys, fs);

    const double e1 = 0.15, e2 = 0.06;  // injected sup errors
    const int seeds = 60;
    std::vector<double> mean(g.count, 0.0);
    std::vector<int> frames;
    for (int seed = 0; seed < seeds; ++seed) {
        SampledSignal x = gaussian_stationary_synth(s_phys, n, fs, 9000 + seed);
        const auto W = cwt(x, g, w);
        if (frames.empty())
            for (int tau = W.margin; tau < n - W.margin; tau += 64) frames.push_back(tau);
        Eigen::MatrixXcd cols(g.count, static_cast<int>(frames.size()));
        for (std::size_t j = 0; j < frames.size(); ++j) cols.col(j) = W.coeffs.col(frames[j]);
        std::vector<double> th1(frames.size()), th2(frames.size());
        for (std::size_t j = 0; j < frames.size(); ++j) {
            th1[j] = 1.0 + e1 * ((j % 2) ? 1.0 : -1.0);
            th2[j] = e2 * ((j % 3) ? 1.0 : -1.0);
        }
        const auto un = unwarp_coeffs(cols, g.scales(), g.q, th1, th2);
        const PowerSpectrum est = spectrum_estimate(un, w);
        for (int i = 0; i < g.count; ++i)
            mean[i] += est(g.frequency(i, w.omega0())) / seeds;
    }
    double sup_bias = 0.0;
    for (int i = 0; i < g.count; ++i)
        sup_bias = std::max(sup_bias,
                            std::abs(mean[i] - bandpass_spectrum_value(s, w, g.q, g.scale(i))));

    const auto rep = prop1_bias_bound(w, s, g.q, e1, e2, 1.0 - e1);
    CHECK(sup_bias <= rep.bound);
}

TEST_CASE("mse_report: exact cases") {
    const std::vector<double> truth1{1.0, 1.2, 0.8}, truth2{0.0, 0.1, -0.1};
    const MseTable zero = mse_report(truth1, truth1, truth2, truth2, truth1, truth2, false);
    CHECK(zero.baseline_amplitude == 0.0);
    CHECK(zero.algorithm_amplitude == 0.0);
    CHECK(zero.baseline_warp == 0.0);
    CHECK(zero.algorithm_warp == 0.0);

    std::vector<double> off2 = truth2;
    for (double& v : off2) v += 0.3;
    const MseTable c2 = mse_report(truth1, truth1, off2, off2, truth1, truth2, false);
    CHECK(c2.baseline_warp == doctest::Approx(0.09).epsilon(1e-12));
}
