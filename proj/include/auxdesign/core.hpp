#pragma once

#include <chrono>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace auxdesign {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a configuration or input fails validation before any compute.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Raised when a numerical fit (MLE, emulator, copula) cannot be completed.
class FitError : public Error {
 public:
  using Error::Error;
};

/// Stable 64-bit seed derived from a parent seed, a stage label and an index.
/// Used for every RNG substream so that results never depend on scheduling.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view label, std::uint64_t index = 0);

inline Rng make_rng(std::uint64_t parent, std::string_view label, std::uint64_t index = 0) {
  return Rng(derive_seed(parent, label, index));
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

/// Number of worker threads used by parallel_for (1 = serial).
void set_thread_count(int threads);
int thread_count();

}  // namespace auxdesign
