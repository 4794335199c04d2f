#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "qcnn/errors.hpp"

namespace qcnn {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  std::string shape_string() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Throws DimensionError when a.cols() != b.rows().
Matrix matmul(const Matrix& a, const Matrix& b);

/// xoshiro256** seeded through splitmix64. Bit-reproducible for a given seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1) with 53 bits of mantissa.
  double uniform() noexcept;
  /// Uniform integer in [0, bound). bound must be positive.
  std::uint64_t uniform_index(std::uint64_t bound) noexcept;
  /// Standard normal via Box-Muller; the second value of each pair is cached.
  double normal() noexcept;

 private:
  std::uint64_t state_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// splitmix64 finalizer, used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

std::vector<double> rng_normal(Rng& rng, double mean, double stdev, std::size_t n);

/// Seeded Fisher-Yates shuffle of indices 0..n-1.
std::vector<std::size_t> shuffled_indices(Rng& rng, std::size_t n);

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central differences (f(x + eps e_i) - f(x - eps e_i)) / (2 eps) for each i.
/// Throws NumericalError naming the coordinate if f is non-finite.
std::vector<double> finite_difference_grad(const ScalarFunction& f, std::span<const double> x,
                                           double eps = 1e-5);

}  // namespace qcnn
