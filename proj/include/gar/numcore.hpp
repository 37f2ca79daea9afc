#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gar/error.hpp"

namespace gar {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles. All arithmetic in this project is f64;
// single precision makes finite-difference gradient checks meaningless.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool operator==(const Matrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Deterministic 64-bit generator. The core is splitmix64 (Steele et al.):
// state advances by the golden-ratio increment and the output is the
// mix13 finalizer. Same seed gives the same stream on every platform;
// no std:: distributions are used anywhere, so streams are portable.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

    std::uint64_t next_u64();

    // Uniform in [0,1) with 53 random bits.
    double next_double();

    double uniform(double lo, double hi);

    // Standard normal via Box-Muller; generates pairs, caches the second.
    double gaussian();

    // Uniform integer in [0, n). n must be positive.
    std::size_t below(std::size_t n);

    // Independent substream derived from (seed, stream). Forking does not
    // disturb this generator's state.
    Rng fork(std::uint64_t stream) const;

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::uint64_t state_;
    bool has_cached_gauss_ = false;
    double cached_gauss_ = 0.0;
};

// Numerically stable logistic function, exact for |x| up to ~745.
double sigmoid(double x);

// tanh activation (named to distinguish it from std::tanh call sites).
double tanh_act(double x);

// y = M v. Throws ShapeError naming both dims on mismatch.
Vec matvec(const Matrix& m, const Vec& v);

// y = M^T v (v.dim = rows, result dim = cols). Used by backprop.
Vec matvec_t(const Matrix& m, const Vec& v);

// m += a b^T. Gradient accumulation for weight matrices.
void add_outer(Matrix& m, const Vec& a, const Vec& b);

// y += a x (vectors of equal dim).
void axpy(Vec& y, double a, const Vec& x);

double dot(const Vec& a, const Vec& b);

// Entries i.i.d. uniform in [-scale, scale]. scale must be > 0.
Matrix init_uniform(std::size_t rows, std::size_t cols, double scale, Rng& rng);

// Default initialization scale sqrt(6 / (rows + cols)).
double glorot_scale(std::size_t rows, std::size_t cols);

bool all_finite(std::span<const double> xs);

// Throws DomainError(tag) if any entry is NaN or infinite.
void check_finite(std::span<const double> xs, const char* tag);

// "%.17g" — enough digits that writing and re-reading a double is exact.
std::string format_real(double v);

} // namespace gar
