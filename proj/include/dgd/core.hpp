#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace dgd {

/// Stacked local iterates: row i is agent i's copy of the decision variable.
using IterateMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Point = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Input rejected by a constructor or validator.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation produced NaN or Inf.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline bool all_finite(const IterateMatrix& x) { return x.allFinite(); }

/// Seeded standard-normal generator: mt19937_64 bits through Box-Muller.
///
/// std::normal_distribution is implementation-defined, so instances built
/// from the same seed would differ between standard libraries.
class NormalGenerator {
 public:
  explicit NormalGenerator(std::uint64_t seed) : engine_(seed) {}

  double uniform() {
    // 53 random bits mapped to (0, 1).
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  std::uint64_t next_bits() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Mean of the rows, returned as a column vector.
inline Point row_average(const IterateMatrix& x) {
  return x.colwise().mean().transpose();
}

/// ||x - 1 xbar^T||_F.
inline double consensus_error(const IterateMatrix& x) {
  const Eigen::RowVectorXd mean = x.colwise().mean();
  return (x.rowwise() - mean).norm();
}

/// max_i ||x_(i) - xbar||.
inline double max_row_deviation(const IterateMatrix& x) {
  const Eigen::RowVectorXd mean = x.colwise().mean();
  return (x.rowwise() - mean).rowwise().norm().maxCoeff();
}

}  // namespace dgd
