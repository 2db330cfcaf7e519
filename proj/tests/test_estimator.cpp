// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The warpest authors

#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numeric>

#include "test_util.hpp"
#include "warpest/covariance.hpp"
#include "warpest/diagnostics.hpp"
#include "warpest/estimator.hpp"
#include "warpest/numerics.hpp"
#include "warpest/signal_model.hpp"

using namespace warpest;

namespace {

Eigen::VectorXcd random_w(int m, std::uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    Eigen::VectorXcd w(m);
    for (int i = 0; i < m; ++i) w(i) = scale * rng.circular_normal();
    return w;
}

/// Draw w ~ CN(0, theta1 * C0) through a Cholesky factor.
Eigen::VectorXcd sample_frame(const Eigen::MatrixXd& c0, double theta1, Rng& rng) {
    Eigen::LLT<Eigen::MatrixXd> llt(
        c0 + 1e-12 * c0.diagonal().maxCoeff() *
                 Eigen::MatrixXd::Identity(c0.rows(), c0.cols()));
    const Eigen::MatrixXd L = llt.matrixL();
    Eigen::VectorXd zr(c0.rows()), zi(c0.rows());
    for (Eigen::Index i = 0; i < c0.rows(); ++i) {
        zr(i) = rng.normal() * M_SQRT1_2;
        zi(i) = rng.normal() * M_SQRT1_2;
    }
    const Eigen::VectorXd wr = L * zr, wi = L * zi;
    Eigen::VectorXcd out(c0.rows());
    for (Eigen::Index i = 0; i < c0.rows(); ++i)
        out(i) = std::sqrt(theta1) * cplx{wr(i), wi(i)};
    return out;
}

}  // namespace

TEST_CASE("frame_log_likelihood: identity covariance via r = 1") {
    const Wavelet& w = testutil::sharp();
    const ScaleGrid g = testutil::small_grid();
    const PowerSpectrum s = to_analysis_spectrum(testutil::bumps(), 8000.0);
    const Eigen::VectorXcd v = random_w(g.count, 1);
    // r = 1 turns the clean covariance into theta1 * I.
    const double got = frame_log_likelihood({1.0, 0.0, 0}, v, s, g.scales(), w, g.q, 0.0, 1.0);
    CHECK(std::abs(got - (-0.5 * v.squaredNorm())) < 1e-12 * std::abs(got));
}

TEST_CASE("frame_log_likelihood: amplitude-scaling identity") {
    const Wavelet& w = testutil::sharp();
    const ScaleGrid g = testutil::small_grid();
    const PowerSpectrum s = to_analysis_spectrum(testutil::bumps(), 8000.0);
    const Eigen::VectorXcd v = random_w(g.count, 2, 5.0);
    const double r = 1e-4, th1 = 0.8, alpha = 2.7;
    const int m = g.count;

    const double base = frame_log_likelihood({th1, 0.1, 0}, v, s, g.scales(), w, g.q, 0.0, r);
    const double scaled =
        frame_log_likelihood({alpha * th1, 0.1, 0}, v, s, g.scales(), w, g.q, 0.0, r);
    // L(a t1) = L(t1) - (M/2) ln a - (1/a - 1)/2 <C^{-1}w, w> with C = t1 C0_r.
    const Eigen::MatrixXd c = th1 * regularize(build_C0(0.1, s, g.scales(), w, g.q), r).entries;
    const auto lds = log_det_and_solve(c, v);
    const double quad = v.dot(lds.solution).real();
    const double predicted = base - 0.5 * m * std::log(alpha) - 0.5 * (1.0 / alpha - 1.0) * quad;
    CHECK(std::abs(scaled - predicted) < 1e-9 * std::abs(scaled));
}

TEST_CASE("frame_log_likelihood: matches dense circular-Gaussian density oracle") {
    const Wavelet& w = testutil::sharp();
    const ScaleGrid g = testutil::small_grid(5, 1.4, 0.3);
    const PowerSpectrum s = to_analysis_spectrum(testutil::bumps(), 8000.0);
    const Eigen::VectorXcd v = random_w(5, 3, 2.0);
    const LocalParams params{1.3, 0.07, 0};
    const double r = 1e-3;

    const double got =
        frame_log_likelihood(params, v, s, g.scales(), w, g.q, 0.0, r);

    // Oracle: the explicit density formula evaluated with a dense inverse.
    const Eigen::MatrixXd c =
        params.theta1 * regularize(build_C0(params.theta2, s, g.scales(), w, g.q), r).entries;
    Eigen::MatrixXcd cz = c.cast<cplx>();
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(cz);
    const cplx det = lu.determinant();
    const double quad = (v.adjoint() * lu.inverse() * v)(0, 0).real();
    const double oracle = -0.5 * std::log(std::abs(det)) - 0.5 * quad;
    CHECK(std::abs(got - oracle) < 1e-8 * std::max(1.0, std::abs(oracle)));

    // Noisy-model variant against the same oracle construction.
    const double nv = 0.6;
    const double got_noisy =
        frame_log_likelihood(params, v, s, g.scales(), w, g.q, nv, 0.0);
    const Eigen::MatrixXd cn =
        build_C_noisy(params, nv, s, g.scales(), w, g.q).entries;
    Eigen::FullPivLU<Eigen::MatrixXcd> lun(cn.cast<cplx>());
    const double quad_n = (v.adjoint() * lun.inverse() * v)(0, 0).real();
    const double oracle_n = -0.5 * std::log(std::abs(lun.determinant())) - 0.5 * quad_n;
    CHECK(std::abs(got_noisy - oracle_n) < 1e-8 * std::max(1.0, std::abs(oracle_n)));
}

TEST_CASE("estimate_theta1_closed_form: pinned cases and grid-search oracle") {
    const Wavelet& w = testutil::sharp();
    const ScaleGrid g = testutil::small_grid();
    const PowerSpectrum s = to_analysis_spectrum(testutil::bumps(), 8000.0);
    const int m = g.count;

    Eigen::VectorXcd v = random_w(m, 4);
    v *= std::sqrt(static_cast<double>(m)) / v.norm();  // ||w||^2 = M_s
    CHECK(std::abs(estimate_theta1_closed_form(v, 0.0, s, g.scales(), w, g.q, 1.0) - 1.0) <
          1e-12);
    CHECK(estimate_theta1_closed_form(Eigen::VectorXcd::Zero(m), 0.0, s, g.scales(), w,
                                      g.q, 1e-3) == 0.0);

    // Random instance: the closed form maximizes the frame likelihood in theta1.
    const double r = 1e-3;
    const Eigen::VectorXcd v2 = random_w(m, 5, 20.0);
    const double closed = estimate_theta1_closed_form(v2, 0.05, s, g.scales(), w, g.q, r);
    const double step = 1e-3 * closed;
    double best = -1e300, best_t = 0.0;
    for (double t = 0.2 * closed; t <= 3.0 * closed; t += step) {
        const double l = frame_log_likelihood({t, 0.05, 0}, v2, s, g.scales(), w, g.q, 0.0, r);
        if (l > best) {
            best = l;
            best_t = t;
        }
    }
    CHECK(std::abs(closed - best_t) <= step);
}

TEST_CASE("estimate_theta1 trace-corrected form is unbiased under rank deficiency") {
    const Wavelet& w = testutil::sharp();
    const ScaleGrid g = testutil::small_grid(24, 0.7, 0.125);
    const PowerSpectrum s = to_analysis_spectrum(testutil::bumps(), 8000.0);
    const double r = 1e-3, th1 = 1.9;
    const Eigen::MatrixXd c0 = build_C0(0.0, s, g.scales(), w, g.q).entries;

    Rng rng(99);
    const int trials = 600;
    double mean_corrected = 0.0, m2 = 0.0;
    for (int t = 0; t < trials; ++t) {
        const Eigen::VectorXcd v = sample_frame(c0, th1, rng);
        const double est = estimate_theta1_rank_corrected(v, 0.0, s, g.scales(), w, g.q, r);
        mean_corrected += est;
        m2 += est * est;
    }
    mean_corrected /= trials;
    const double se = std::sqrt((m2 / trials - mean_corrected * mean_corrected) / trials);
    CHECK(std::abs(mean_corrected - th1) <= 3.0 * se);
}

TEST_CASE("estimate_theta2: affine warp with oracle spectrum, ascent property") {
    const Wavelet& w = testutil::sharp();
    ScaleGrid g = default_scale_grid(w, 8000.0, 150.0, 0.45, 40, 4);
    const double fs = 8000.0;
    const int n = 1 << 13;
    const double s0 = -0.25, lambda = std::pow(2.0, s0);  // gamma' < 1 keeps range inside
    const PowerSpectrum s_phys = testutil::bumps(fs);
    const PowerSpectrum s = to_analysis_spectrum(s_phys, fs);

    const std::vector<int> coarse = g.coarse_indices();
    std::vector<double> coarse_scales = g.coarse_scales();
    Eigen::VectorXcd wc(static_cast<Eigen::Index>(coarse.size()));

    const double crlb = crlb_theta2({1.0, s0, 0}, s, coarse_scales, w, g.q);
    double mean_est = 0.0;
    int n_frames = 0, inside = 0;
    Fft fft(n);
    for (int seed = 0; seed < 6; ++seed) {
        SampledSignal x = gaussian_stationary_synth(s_phys, n, fs, 700 + seed);
        // Exact band-limited warp evaluation (an oracle-spectrum likelihood
        // is sensitive to broadband interpolation junk at dead scales).
        std::vector<cplx> xin(n);
        for (int i = 0; i < n; ++i) xin[i] = x.samples[i];
        const auto coeffs = fft.forward(xin);
        SampledSignal y;
        y.fs = fs;
        y.samples.resize(n);
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int k = 1; k < n / 2; ++k) {
                if (std::norm(coeffs[k]) == 0.0) continue;
                const double ph = 2.0 * M_PI * k * (lambda * i) / n;
                acc += 2.0 * (coeffs[k].real() * std::cos(ph) -
                              coeffs[k].imag() * std::sin(ph));
            }
            y.samples[i] = std::sqrt(lambda) * acc / n;
        }
        const auto W = cwt(y, g, w);
        for (int tau = W.margin; tau < n - W.margin; tau += 1024) {
            for (std::size_t c = 0; c < coarse.size(); ++c)
                wc(static_cast<Eigen::Index>(c)) = W.coeffs(coarse[c], tau);
            bool ok = false;
            const double est =
                estimate_theta2(wc, 1.0, s, coarse_scales, w, g.q, 0.0, 0.0, {}, &ok);
            mean_est += est;
            ++n_frames;
            if (std::abs(est - s0) <= 2.0 * std::sqrt(crlb)) ++inside;

            // Ascent contract: likelihood at the estimate >= at the init.
            const double l_init =
                frame_log_likelihood({1.0, 0.0, 0}, wc, s, coarse_scales, w, g.q, 0.0, 1e-9);
            const double l_est =
                frame_log_likelihood({1.0, est, 0}, wc, s, coarse_scales, w, g.q, 0.0, 1e-9);
            CHECK(l_est >= l_init - 1e-9 * std::abs(l_init));
        }
    }
    mean_est /= n_frames;
    CHECK(std::abs(mean_est - s0) <= 3.0 * std::sqrt(crlb / n_frames) + 0.01);
    CHECK(inside >= static_cast<int>(0.75 * n_frames));
}

TEST_CASE("estimate_theta1_noisy: clean limit and ascent property") {
    const Wavelet& w = testutil::sharp();
    // All analysis frequencies inside the spectrum support and scale spacing
    // well above the wavelet bandwidth: the clean-limit comparison is an
    // identity only for a numerically full-rank covariance.
    const ScaleGrid g = testutil::small_grid(5, 1.75, 0.28);
    const PowerSpectrum s = to_analysis_spectrum(testutil::bumps(), 8000.0);
    const Eigen::MatrixXd c0 = build_C0(0.0, s, g.scales(), w, g.q).entries;

    Rng rng(7);
    const Eigen::VectorXcd v = sample_frame(c0, 1.4, rng);
    const double closed = estimate_theta1_closed_form(v, 0.0, s, g.scales(), w, g.q, 1e-6);
    const double tiny_noise = 1e-8 * c0.diagonal().maxCoeff();
    bool ok = false;
    AscentControls ctl;
    ctl.grad_tol = 1e-8;
    ctl.max_iters = 200;
    const double noisy =
        estimate_theta1_noisy(v, 0.0, s, g.scales(), w, g.q, tiny_noise, 1.0, ctl, 1e-6, &ok);
    CHECK(std::abs(noisy - closed) < 0.01 * closed);

    // Pure-noise frame: the amplitude estimate collapses toward zero.
    const double nv = c0.diagonal().maxCoeff();
    CovWorkspace ws(g.scales(), w, g.q);
    const Eigen::VectorXcd noise_w = sample_frame(nv * ws.gram(), 1.0, rng);
    const double est0 =
        estimate_theta1_noisy(noise_w, 0.0, s, g.scales(), w, g.q, nv, 1.0, ctl, 0.0, &ok);
    CHECK(est0 < 0.15);

    CHECK_THROWS(estimate_theta1_noisy(v, 0.0, s, g.scales(), w, g.q, 0.0, 1.0));
}

TEST_CASE("unwarp_coeffs: identity, integer shifts, failure when all rows leave") {
    const Wavelet& w = testutil::sharp();
    const ScaleGrid g = testutil::small_grid(10, 1.0, 0.2);
    Eigen::MatrixXcd cols = Eigen::MatrixXcd::Random(g.count, 3);

    const auto id = unwarp_coeffs(cols, g.scales(), g.q, {1.0, 1.0, 1.0}, {0.0, 0.0, 0.0});
    CHECK((id.coeffs - cols).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(id.valid.minCoeff() == 1);

    // theta2 = one whole scale step: exact row shift, interpolation-free.
    const double d = g.ds;
    const auto sh = unwarp_coeffs(cols, g.scales(), g.q, {4.0, 4.0, 4.0}, {d, d, d});
    for (int n = 0; n < 3; ++n) {
        CHECK(sh.valid(0, n) == 0);  // bottom row extrapolates
        for (int i = 1; i < g.count; ++i) {
            CHECK(sh.valid(i, n) == 1);
            CHECK(std::abs(sh.coeffs(i, n) - cols(i - 1, n) / 2.0) < 1e-12);
        }
    }

    CHECK_THROWS(unwarp_coeffs(cols, g.scales(), g.q, {1.0, 1.0, 1.0}, {0.0, 99.0, 0.0}));
}

TEST_CASE("unwarp_coeffs: round trip through a constant deformation") {
    const Wavelet& w = testutil::sharp();
    ScaleGrid g = default_scale_grid(w, 8000.0, 200.0, 0.45, 120, 8);
    const double fs = 8000.0;
    const int n = 1 << 13;
    const double s0 = -1.0;  // gamma' = 1/2, amplitude a0 = 1.3
    const double lambda = std::pow(2.0, s0), a0 = 1.3;

    const PowerSpectrum s_phys = testutil::bumps(fs);
    SampledSignal x = gaussian_stationary_synth(s_phys, n, fs, 31);
    AmplitudeFn amp = identity_amplitude();
    amp.value = [a0](double) { return a0; };
    amp.c_a = amp.C_a = a0;
    WarpFn warp = identity_warp();
    warp.value = [lambda](double t) { return lambda * t; };
    warp.rate = [lambda](double) { return lambda; };
    warp.c_gamma = warp.C_gamma = lambda;

    SampledSignal y = apply_deformation(x, amp, warp);
    const auto Wy = cwt(y, g, w);
    const auto Wx = cwt(x, g, w);

    // Frames where lambda * tau is an integer sample of x.
    std::vector<int> frames;
    for (int tau = Wy.margin + (Wy.margin % 2); tau < n - Wy.margin; tau += 2)
        frames.push_back(tau);
    Eigen::MatrixXcd cols(g.count, static_cast<int>(frames.size()));
    for (std::size_t j = 0; j < frames.size(); ++j) cols.col(j) = Wy.coeffs.col(frames[j]);

    std::vector<double> th1(frames.size(), a0 * a0), th2(frames.size(), s0);
    const auto un = unwarp_coeffs(cols, g.scales(), g.q, th1, th2);

    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < frames.size(); ++j) {
        const int tx = static_cast<int>(lambda * frames[j]);
        if (tx < Wx.margin || tx >= n - Wx.margin) continue;
        for (int i = 0; i < g.count; ++i) {
            if (!un.valid(i, static_cast<int>(j))) continue;
            num += std::norm(un.coeffs(i, static_cast<int>(j)) - Wx.coeffs(i, tx));
            den += std::norm(Wx.coeffs(i, tx));
        }
    }
    CHECK(std::sqrt(num / den) < 0.02);
}

TEST_CASE("spectrum_estimate: zero input and white-noise flatness") {
    const Wavelet& w = testutil::sharp();
    ScaleGrid g = default_scale_grid(w, 8000.0, 100.0, 0.4, 64, 4);
    const double fs = 8000.0;

    TimeScaleTransform zero;
    zero.coeffs.setZero(g.count, 128);
    zero.grid = g;
    const PowerSpectrum sz = spectrum_estimate(zero, w);
    for (double v : sz.values()) CHECK(v == 0.0);

    const double sigma2 = 3.0;
    const int n = 1 << 15;
    SampledSignal x = gaussian_stationary_synth(testutil::white(sigma2, fs), n, fs, 8);
    const auto W = cwt(x, g, w);
    const PowerSpectrum est = spectrum_estimate(W, w);
    // The analysis-convention level of a white signal equals its variance.
    const double level = to_analysis_spectrum(testutil::white(sigma2, fs), fs)(0.1);
    for (int i = 0; i < g.count; ++i) {
        const double nu = g.frequency(i, w.omega0());
        if (nu < 0.08 || nu > 0.32) continue;  // keep passbands inside the synth band
        CHECK(testutil::rel_err(est(nu), level) < 0.10);
    }
}

TEST_CASE("spectrum_estimate: mean matches the band-pass filtered spectrum") {
    const Wavelet& w = testutil::sharp();
    ScaleGrid g = default_scale_grid(w, 8000.0, 200.0, 0.45, 32, 4);
    const double fs = 8000.0;
    const int n = 1 << 12;
    const PowerSpectrum s_phys = testutil::bumps(fs);
    const PowerSpectrum s = to_analysis_spectrum(s_phys, fs);

    const int seeds = 100;
    std::vector<double> mean(g.count, 0.0), m2(g.count, 0.0);
    for (int seed = 0; seed < seeds; ++seed) {
        SampledSignal x = gaussian_stationary_synth(s_phys, n, fs, 4000 + seed);
        const auto W = cwt(x, g, w);
        std::vector<int> frames;
        for (int tau = W.margin; tau < n - W.margin; tau += 64) frames.push_back(tau);
        Eigen::MatrixXcd cols(g.count, static_cast<int>(frames.size()));
        for (std::size_t j = 0; j < frames.size(); ++j) cols.col(j) = W.coeffs.col(frames[j]);
        TimeScaleTransform sub;
        sub.coeffs = cols;
        sub.grid = g;
        const PowerSpectrum est = spectrum_estimate(sub, w);
        for (int i = 0; i < g.count; ++i) {
            const double v = est(g.frequency(i, w.omega0()));
            mean[i] += v;
            m2[i] += v * v;
        }
    }
    for (int i = 0; i < g.count; ++i) {
        mean[i] /= seeds;
        const double se = std::sqrt((m2[i] / seeds - mean[i] * mean[i]) / seeds);
        const double target = bandpass_spectrum_value(s, w, g.q, g.scale(i));
        CHECK(std::abs(mean[i] - target) <= 3.0 * se + 1e-9);
    }
}

TEST_CASE("welch_psd: white level, tone peak, Parseval") {
    const double fs = 8000.0, sigma2 = 1.7;
    const int n = 1 << 15;
    SampledSignal x = gaussian_stationary_synth(testutil::white(sigma2, fs), n, fs, 12);
    const PowerSpectrum psd = welch_psd(x, 1024);
    const double level = 2.0 * sigma2 / fs;
    double band_mean = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < psd.freqs().size(); ++i) {
        if (psd.freqs()[i] < 200.0 || psd.freqs()[i] > 3800.0) continue;
        band_mean += psd.values()[i];
        ++count;
    }
    band_mean /= count;
    CHECK(testutil::rel_err(band_mean, level) < 0.05);

    double var = 0.0;
    for (double v : x.samples) var += v * v;
    var /= n;
    CHECK(testutil::rel_err(psd.integral(), var) < 0.03);

    SampledSignal tone;
    tone.fs = fs;
    tone.samples.resize(1 << 13);
    for (std::size_t i = 0; i < tone.samples.size(); ++i)
        tone.samples[i] = std::sin(2.0 * M_PI * 1000.0 * i / fs);
    const PowerSpectrum tp = welch_psd(tone, 512);
    std::size_t peak = 0;
    for (std::size_t i = 1; i < tp.values().size(); ++i)
        if (tp.values()[i] > tp.values()[peak]) peak = i;
    CHECK(std::abs(tp.freqs()[peak] - 1000.0) <= fs / 512.0);

    CHECK_THROWS(welch_psd(tone, 1 << 20));
    CHECK_THROWS(welch_psd(tone, 512, 1.5));
}
