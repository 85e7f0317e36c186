#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dbsadam {

using Vector = std::vector<double>;

/// Raised when operand shapes do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a computation produces or receives NaN/Inf.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  void append_row(std::span<const double> row);
  std::string shape_string() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

Matrix matmul(const Matrix& a, const Matrix& b);

/// y = a * x for a matrix and a column vector.
Vector matvec(const Matrix& a, std::span<const double> x);

/// y += a^T * x.
void matvec_transposed_accumulate(const Matrix& a, std::span<const double> x, std::span<double> y);

/// a += alpha * x y^T.
void outer_accumulate(Matrix& a, std::span<const double> x, std::span<const double> y,
                      double alpha = 1.0);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

double sigmoid(double x);
double tanh_activation(double x);
Vector sigmoid(std::span<const double> v);
Vector tanh_activation(std::span<const double> v);

bool all_finite(std::span<const double> v);

/// Central-difference gradient of a scalar function. Throws NonFiniteError naming
/// the coordinate if any probe evaluates to a non-finite value.
Vector finite_difference_gradient(const std::function<double(const Vector&)>& f,
                                  const Vector& theta, double h = 1e-5);

/// Deterministic generator: xoshiro256** seeded through splitmix64.
///
/// Every derived quantity (uniform doubles, bounded integers, normals, shuffles)
/// is computed here rather than through <random> distributions, whose output is
/// implementation-defined, so identical seeds give identical streams on every
/// platform and standard library.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n), unbiased (rejection on the 128-bit product).
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller (one value per two uniforms, no caching).
  double normal();
  bool bernoulli(double p);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  /// Independent child stream keyed by (this seed, stream id). Does not advance *this.
  SeededRng split(std::uint64_t stream) const;

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace dbsadam
