// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The warpest authors

#include "warpest/covariance.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace warpest {

CovWorkspace::CovWorkspace(std::vector<double> scales, const Wavelet& wavelet, double q,
                           int log2_nodes, double align_step)
    : scales_(std::move(scales)), q_(q) {
    if (scales_.empty()) throw std::invalid_argument("CovWorkspace: no scales");
    if (!(q > 0.0) || q == 1.0) throw std::invalid_argument("CovWorkspace: bad q");

    const auto [band_lo, band_hi] = wavelet.band(1e-14);
    const double s_min = *std::min_element(scales_.begin(), scales_.end());
    const double s_max = *std::max_element(scales_.begin(), scales_.end());
    const double lo = std::pow(q, -s_max) * band_lo;
    const double hi = std::pow(q, -s_min) * band_hi;

    if (align_step <= 0.0 && scales_.size() >= 2) {
        // Uniformly spaced scales: lock the node lattice to the scale step so
        // dilations by whole steps map nodes onto nodes.
        const double ds = scales_[1] - scales_[0];
        bool uniform = ds > 0.0;
        for (std::size_t i = 2; i < scales_.size() && uniform; ++i)
            uniform = std::abs(scales_[i] - scales_[i - 1] - ds) < 1e-12;
        if (uniform) align_step = ds * std::log(q);
    }

    const int target = 1 << log2_nodes;
    const double span = std::log(hi / lo);
    double h = span / (target - 1);
    if (align_step > 0.0) {
        const int k = std::max(1, static_cast<int>(std::lround(align_step / h)));
        h = align_step / k;
    }
    const int count = static_cast<int>(std::floor(span / h)) + 1;

    nodes_.resize(count);
    weights_.resize(count);
    const double lg_lo = std::log(lo);
    for (int j = 0; j < count; ++j) {
        nodes_[j] = std::exp(lg_lo + j * h);
        weights_[j] = h * nodes_[j];
    }
    weights_.front() *= 0.5;
    weights_.back() *= 0.5;

    const int m = static_cast<int>(scales_.size());
    prefactor_.resize(m);
    lo_.resize(m);
    tab_.resize(m);
    for (int i = 0; i < m; ++i) {
        prefactor_[i] = std::pow(q, 0.5 * scales_[i]);
        const double dil = std::pow(q, scales_[i]);
        const double xi_lo = band_lo / dil, xi_hi = band_hi / dil;
        int jl = static_cast<int>(std::floor((std::log(xi_lo) - lg_lo) / h));
        int jh = static_cast<int>(std::ceil((std::log(xi_hi) - lg_lo) / h)) + 1;
        jl = std::clamp(jl, 0, count);
        jh = std::clamp(jh, jl, count);
        lo_[i] = jl;
        tab_[i].resize(jh - jl);
        for (int j = jl; j < jh; ++j) tab_[i][j - jl] = wavelet.fourier(dil * nodes_[j]);
    }
    gram_ = assemble(weights_);
}

Eigen::MatrixXd CovWorkspace::assemble(const std::vector<double>& node_density) const {
    const int m = static_cast<int>(scales_.size());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
        const int li = lo_[i];
        const int hi_i = li + static_cast<int>(tab_[i].size());
        for (int j = i; j < m; ++j) {
            const int lj = lo_[j];
            const int k0 = std::max(li, lj);
            const int k1 = std::min(hi_i, lj + static_cast<int>(tab_[j].size()));
            if (k0 >= k1) continue;
            double acc = 0.0;
            const double* ti = tab_[i].data() + (k0 - li);
            const double* tj = tab_[j].data() + (k0 - lj);
            const double* sv = node_density.data() + k0;
            for (int k = 0; k < k1 - k0; ++k) acc += sv[k] * ti[k] * tj[k];
            out(i, j) = out(j, i) = prefactor_[i] * prefactor_[j] * acc;
        }
    }
    return out;
}

Eigen::MatrixXd CovWorkspace::c0(double theta2, const PowerSpectrum& spectrum) const {
    const double shrink = std::pow(q_, -theta2);
    std::vector<double> sv(nodes_.size());
    for (std::size_t j = 0; j < nodes_.size(); ++j)
        sv[j] = spectrum(shrink * nodes_[j]) * weights_[j];
    return assemble(sv);
}

namespace {

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

Eigen::MatrixXd c0_verified(double theta2, const PowerSpectrum& spectrum,
                            const std::vector<double>& scales, const Wavelet& wavelet,
                            double q, bool verify) {
    CovWorkspace ws(scales, wavelet, q, 11);
    Eigen::MatrixXd c = ws.c0(theta2, spectrum);
    if (verify) {
        CovWorkspace fine(scales, wavelet, q, 12);
        const Eigen::MatrixXd cf = fine.c0(theta2, spectrum);
        const double scale = std::max(max_abs(cf), 1e-300);
        if (max_abs(c - cf) > 1e-6 * scale)
            throw std::runtime_error("build_C0: quadrature did not converge");
    }
    return c;
}

}  // namespace

CovMatrix build_C0(double theta2, const PowerSpectrum& spectrum,
                   const std::vector<double>& scales, const Wavelet& wavelet, double q,
                   bool verify) {
    CovMatrix out;
    out.entries = c0_verified(theta2, spectrum, scales, wavelet, q, verify);
    out.scales = scales;
    out.provenance = CovMatrix::Provenance::clean;
    return out;
}

CovMatrix build_C_noisy(const LocalParams& params, double noise_var,
                        const PowerSpectrum& spectrum, const std::vector<double>& scales,
                        const Wavelet& wavelet, double q, bool verify) {
    if (noise_var < 0.0) throw std::invalid_argument("build_C_noisy: negative noise variance");
    CovWorkspace ws(scales, wavelet, q, 11);
    CovMatrix out;
    out.entries = params.theta1 * c0_verified(params.theta2, spectrum, scales, wavelet, q, verify) +
                  noise_var * ws.gram();
    out.scales = scales;
    out.provenance = CovMatrix::Provenance::noisy;
    out.noise_var = noise_var;
    return out;
}

CovMatrix regularize(const CovMatrix& C, double r) {
    if (r < 0.0 || r > 1.0) throw std::invalid_argument("regularize: r must be in [0, 1]");
    CovMatrix out = C;
    out.entries = (1.0 - r) * C.entries +
                  r * Eigen::MatrixXd::Identity(C.entries.rows(), C.entries.cols());
    out.provenance = CovMatrix::Provenance::regularized;
    out.reg = r;
    return out;
}

std::complex<double> full_kernel(const AmplitudeFn& a, const WarpFn& gamma,
                                 const PowerSpectrum& spectrum, const Wavelet& wavelet,
                                 double q, double fs, double s, double s_prime, double tau,
                                 double tau_prime) {
    const double g1 = gamma.rate(tau), g2 = gamma.rate(tau_prime);
    if (!(g1 > 0.0 && g2 > 0.0)) throw std::invalid_argument("full_kernel: warp rate <= 0");
    const auto [band_lo, band_hi] = wavelet.band(1e-14);
    const double d1 = std::pow(q, s) * g1;
    const double d2 = std::pow(q, s_prime) * g2;
    const double lo = std::max(band_lo / d1, band_lo / d2);
    const double hi = std::min(band_hi / d1, band_hi / d2);
    if (!(lo < hi)) return {0.0, 0.0};

    // Normalized time shift; the phase factor is exp(2*pi*i*xi*shift).
    const double shift = (gamma.value(tau) - gamma.value(tau_prime)) * fs;

    const int n = 1 << 13;
    const double lg_lo = std::log(lo);
    const double h = (std::log(hi) - lg_lo) / n;
    std::complex<double> acc{0.0, 0.0};
    for (int j = 0; j <= n; ++j) {
        const double xi = std::exp(lg_lo + j * h);
        const double w = (j == 0 || j == n) ? 0.5 : 1.0;
        const double f =
            spectrum(xi) * wavelet.fourier(d1 * xi) * wavelet.fourier(d2 * xi) * xi * w;
        if (f != 0.0) {
            const double ph = 2.0 * M_PI * xi * shift;
            acc += f * std::complex<double>{std::cos(ph), std::sin(ph)};
        }
    }
    acc *= h;
    const double pref = a.value(tau) * a.value(tau_prime) *
                        std::pow(q, 0.5 * (s + s_prime)) * std::sqrt(g1 * g2);
    return pref * acc;
}

LogDetSolve log_det_and_solve(const Eigen::MatrixXd& C, const Eigen::VectorXcd& w) {
    if (C.rows() != C.cols() || C.rows() != w.size())
        throw std::invalid_argument("log_det_and_solve: dimension mismatch");
    Eigen::LLT<Eigen::MatrixXd> llt(C);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error(
            "log_det_and_solve: matrix is not positive definite; regularize the covariance");
    double log_det = 0.0;
    const auto& L = llt.matrixLLT();
    for (Eigen::Index i = 0; i < L.rows(); ++i) log_det += 2.0 * std::log(L(i, i));

    LogDetSolve out;
    out.log_det = log_det;
    out.solution.resize(w.size());
    const Eigen::VectorXd re = llt.solve(w.real());
    const Eigen::VectorXd im = llt.solve(w.imag());
    for (Eigen::Index i = 0; i < w.size(); ++i) out.solution(i) = {re(i), im(i)};
    return out;
}

}  // namespace warpest
