#include "gar/numcore.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

namespace gar {

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (rows == 0 || cols == 0) {
        throw ShapeError("matrix dims must be positive, got " + std::to_string(rows) + "x" +
                         std::to_string(cols));
    }
}

namespace {

inline std::uint64_t splitmix_next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace

std::uint64_t Rng::next_u64() { return splitmix_next(state_); }

double Rng::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

double Rng::gaussian() {
    if (has_cached_gauss_) {
        has_cached_gauss_ = false;
        return cached_gauss_;
    }
    // Box-Muller on (0,1] x [0,1).
    double u1 = 1.0 - next_double();
    double u2 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    cached_gauss_ = r * std::sin(theta);
    has_cached_gauss_ = true;
    return r * std::cos(theta);
}

std::size_t Rng::below(std::size_t n) {
    if (n == 0) throw DomainError("Rng::below requires n > 0");
    return static_cast<std::size_t>(next_u64() % n);
}

Rng Rng::fork(std::uint64_t stream) const {
    // Two finalizer passes over (seed, stream) decorrelate adjacent streams.
    std::uint64_t s = seed_ ^ (stream * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL);
    std::uint64_t tmp = s;
    s = splitmix_next(tmp);
    return Rng(s);
}

namespace {

// Largest double below 1. Saturated outputs clamp here so sigmoid stays in
// (0,1) and tanh in (-1,1) even where f64 would round to the endpoints;
// the LSTM's |h| < 1 guarantee depends on o_t < 1 holding strictly.
constexpr double kBelowOne = 0x1.fffffffffffffp-1;
constexpr double kTinyPositive = 0x1p-1022;

} // namespace

double sigmoid(double x) {
    // Evaluate via the non-overflowing branch: exp of a non-positive argument.
    double v;
    if (x >= 0.0) {
        v = 1.0 / (1.0 + std::exp(-x));
    } else {
        double e = std::exp(x);
        v = e / (1.0 + e);
    }
    return std::min(std::max(v, kTinyPositive), kBelowOne);
}

double tanh_act(double x) {
    double v = std::tanh(x);
    return std::min(std::max(v, -kBelowOne), kBelowOne);
}

Vec matvec(const Matrix& m, const Vec& v) {
    if (m.cols() != v.size()) {
        throw ShapeError("matvec: matrix cols " + std::to_string(m.cols()) +
                         " != vector dim " + std::to_string(v.size()));
    }
    Vec out(m.rows(), 0.0);
    const double* row = m.data().data();
    for (std::size_t r = 0; r < m.rows(); ++r, row += m.cols()) {
        double acc = 0.0;
        for (std::size_t c = 0; c < m.cols(); ++c) acc += row[c] * v[c];
        out[r] = acc;
    }
    return out;
}

Vec matvec_t(const Matrix& m, const Vec& v) {
    if (m.rows() != v.size()) {
        throw ShapeError("matvec_t: matrix rows " + std::to_string(m.rows()) +
                         " != vector dim " + std::to_string(v.size()));
    }
    Vec out(m.cols(), 0.0);
    const double* row = m.data().data();
    for (std::size_t r = 0; r < m.rows(); ++r, row += m.cols()) {
        double vr = v[r];
        for (std::size_t c = 0; c < m.cols(); ++c) out[c] += row[c] * vr;
    }
    return out;
}

void add_outer(Matrix& m, const Vec& a, const Vec& b) {
    if (m.rows() != a.size() || m.cols() != b.size()) {
        throw ShapeError("add_outer: matrix " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + " vs vectors " + std::to_string(a.size()) +
                         ", " + std::to_string(b.size()));
    }
    double* row = m.data().data();
    for (std::size_t r = 0; r < m.rows(); ++r, row += m.cols()) {
        double ar = a[r];
        for (std::size_t c = 0; c < m.cols(); ++c) row[c] += ar * b[c];
    }
}

void axpy(Vec& y, double a, const Vec& x) {
    if (y.size() != x.size()) {
        throw ShapeError("axpy: dims " + std::to_string(y.size()) + " vs " +
                         std::to_string(x.size()));
    }
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) {
        throw ShapeError("dot: dims " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

Matrix init_uniform(std::size_t rows, std::size_t cols, double scale, Rng& rng) {
    if (scale <= 0.0) throw DomainError("init_uniform: scale must be > 0");
    Matrix m(rows, cols);
    for (double& x : m.data()) x = rng.uniform(-scale, scale);
    return m;
}

double glorot_scale(std::size_t rows, std::size_t cols) {
    return std::sqrt(6.0 / static_cast<double>(rows + cols));
}

bool all_finite(std::span<const double> xs) {
    for (double x : xs) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

void check_finite(std::span<const double> xs, const char* tag) {
    if (!all_finite(xs)) {
        throw DomainError(std::string("non-finite value in ") + tag);
    }
}

} // namespace gar
