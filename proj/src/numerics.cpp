// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The warpest authors

#include "warpest/numerics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace warpest {

// ---------------------------------------------------------------- Fft

Fft::Fft(int n) : n_(n) {
    if (n < 1) throw std::invalid_argument("Fft: size must be >= 1");
    buf_in_ = reinterpret_cast<cplx*>(fftw_alloc_complex(static_cast<size_t>(n)));
    buf_out_ = reinterpret_cast<cplx*>(fftw_alloc_complex(static_cast<size_t>(n)));
    if (!buf_in_ || !buf_out_) throw std::bad_alloc();
    // FFTW_ESTIMATE keeps planning deterministic across runs.
    fwd_ = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(buf_in_),
                            reinterpret_cast<fftw_complex*>(buf_out_), FFTW_FORWARD,
                            FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(buf_in_),
                            reinterpret_cast<fftw_complex*>(buf_out_), FFTW_BACKWARD,
                            FFTW_ESTIMATE);
}

Fft::~Fft() {
    fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
    fftw_destroy_plan(static_cast<fftw_plan>(bwd_));
    fftw_free(buf_in_);
    fftw_free(buf_out_);
}

void Fft::forward(const cplx* in, cplx* out) {
    std::memcpy(buf_in_, in, sizeof(cplx) * static_cast<size_t>(n_));
    fftw_execute(static_cast<fftw_plan>(fwd_));
    std::memcpy(out, buf_out_, sizeof(cplx) * static_cast<size_t>(n_));
}

void Fft::inverse(const cplx* in, cplx* out) {
    std::memcpy(buf_in_, in, sizeof(cplx) * static_cast<size_t>(n_));
    fftw_execute(static_cast<fftw_plan>(bwd_));
    const double scale = 1.0 / n_;
    for (int i = 0; i < n_; ++i) out[i] = buf_out_[i] * scale;
}

std::vector<cplx> Fft::forward(const std::vector<cplx>& in) {
    if (static_cast<int>(in.size()) != n_) throw std::invalid_argument("Fft: size mismatch");
    std::vector<cplx> out(in.size());
    forward(in.data(), out.data());
    return out;
}

std::vector<cplx> Fft::inverse(const std::vector<cplx>& in) {
    if (static_cast<int>(in.size()) != n_) throw std::invalid_argument("Fft: size mismatch");
    std::vector<cplx> out(in.size());
    inverse(in.data(), out.data());
    return out;
}

// ---------------------------------------------------------------- CubicSpline

CubicSpline::CubicSpline(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n) throw std::invalid_argument("CubicSpline: need >= 2 knots");
    for (std::size_t i = 1; i < n; ++i)
        if (!(x_[i] > x_[i - 1]))
            throw std::invalid_argument("CubicSpline: knots must be strictly increasing");

    // Natural boundary: second derivative zero at both ends. Thomas algorithm.
    m_.assign(n, 0.0);
    if (n == 2) return;
    std::vector<double> diag(n - 2), rhs(n - 2), upper(n - 2);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double h0 = x_[i] - x_[i - 1];
        const double h1 = x_[i + 1] - x_[i];
        diag[i - 1] = 2.0 * (h0 + h1);
        upper[i - 1] = h1;
        rhs[i - 1] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
    }
    for (std::size_t i = 1; i < diag.size(); ++i) {
        const double h = x_[i + 1] - x_[i];  // sub-diagonal element
        const double w = h / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    for (std::size_t i = diag.size(); i-- > 0;) {
        const double up = (i + 1 < diag.size()) ? upper[i] * m_[i + 2] : 0.0;
        m_[i + 1] = (rhs[i] - up) / diag[i];
    }
}

std::size_t CubicSpline::interval(double x) const {
    if (x <= x_.front()) return 0;
    if (x >= x_.back()) return x_.size() - 2;
    auto it = std::upper_bound(x_.begin(), x_.end(), x);
    return static_cast<std::size_t>(it - x_.begin()) - 1;
}

double CubicSpline::operator()(double x) const {
    const std::size_t i = interval(x);
    const double h = x_[i + 1] - x_[i];
    const double a = (x_[i + 1] - x) / h;
    const double b = (x - x_[i]) / h;
    return a * y_[i] + b * y_[i + 1] +
           ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
}

double CubicSpline::derivative(double x) const {
    const std::size_t i = interval(x);
    const double h = x_[i + 1] - x_[i];
    const double a = (x_[i + 1] - x) / h;
    const double b = (x - x_[i]) / h;
    return (y_[i + 1] - y_[i]) / h +
           ((3.0 * b * b - 1.0) * m_[i + 1] - (3.0 * a * a - 1.0) * m_[i]) * h / 6.0;
}

// ---------------------------------------------------------------- quadrature

double trapezoid(const std::vector<double>& y, double h) {
    if (y.size() < 2) return 0.0;
    double s = 0.5 * (y.front() + y.back());
    for (std::size_t i = 1; i + 1 < y.size(); ++i) s += y[i];
    return s * h;
}

std::vector<double> cumulative_trapezoid(const std::vector<double>& y, double h) {
    std::vector<double> out(y.size(), 0.0);
    for (std::size_t i = 1; i < y.size(); ++i)
        out[i] = out[i - 1] + 0.5 * h * (y[i - 1] + y[i]);
    return out;
}

double bisect(const std::function<double(double)>& f, double lo, double hi, double tol,
              int max_iter) {
    double flo = f(lo), fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0))
        throw std::invalid_argument("bisect: endpoints do not bracket a root");
    for (int it = 0; it < max_iter && hi - lo > tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------- Rng

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
    std::uint64_t z = root + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double Rng::uniform() {
    // 53-bit mantissa in [0, 1)
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
    if (has_cached_) {
        has_cached_ = false;
        return cached_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
}

cplx Rng::circular_normal() {
    const double re = normal();
    const double im = normal();
    return {re * M_SQRT1_2, im * M_SQRT1_2};
}

}  // namespace warpest
