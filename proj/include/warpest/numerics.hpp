// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The warpest authors

#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

namespace warpest {

using cplx = std::complex<double>;

/// Complex-to-complex FFT of a fixed size, backed by FFTW.
/// forward:  X[k] = sum_n x[n] e^{-2*pi*i*k*n/N}
/// inverse:  x[n] = (1/N) sum_k X[k] e^{+2*pi*i*k*n/N}
class Fft {
public:
    explicit Fft(int n);
    ~Fft();
    Fft(const Fft&) = delete;
    Fft& operator=(const Fft&) = delete;

    int size() const { return n_; }
    void forward(const cplx* in, cplx* out);
    void inverse(const cplx* in, cplx* out);

    std::vector<cplx> forward(const std::vector<cplx>& in);
    std::vector<cplx> inverse(const std::vector<cplx>& in);

private:
    int n_;
    void* fwd_;
    void* bwd_;
    cplx* buf_in_;
    cplx* buf_out_;
};

/// Natural cubic spline through strictly increasing knots.
class CubicSpline {
public:
    CubicSpline() = default;
    CubicSpline(std::vector<double> x, std::vector<double> y);

    double operator()(double x) const;
    double derivative(double x) const;
    bool empty() const { return x_.empty(); }
    double x_front() const { return x_.front(); }
    double x_back() const { return x_.back(); }

private:
    std::vector<double> x_, y_, m_;  // m_: second derivatives at knots
    std::size_t interval(double x) const;
};

/// Trapezoid rule over sampled values with uniform step h.
double trapezoid(const std::vector<double>& y, double h);

/// Cumulative trapezoid with out[0] = 0.
std::vector<double> cumulative_trapezoid(const std::vector<double>& y, double h);

/// Scalar root bracketing by bisection. f(lo) and f(hi) must differ in sign.
double bisect(const std::function<double(double)>& f, double lo, double hi,
              double tol = 1e-12, int max_iter = 200);

/// Stream-splitting seed derivation (splitmix64 step).
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream);

/// Deterministic Gaussian generator: mt19937_64 + Box-Muller.
/// std::normal_distribution is avoided so output does not depend on the
/// standard library implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}
    double uniform();            // [0, 1)
    double normal();             // N(0, 1)
    cplx circular_normal();      // E|z|^2 = 1, E z^2 = 0

private:
    std::mt19937_64 eng_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace warpest
