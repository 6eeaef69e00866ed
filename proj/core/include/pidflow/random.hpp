#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace pidflow {

/// Seedable generator whose output is identical across standard libraries.
/// std::mt19937_64 is fully specified; the uniform mapping is done here
/// instead of through std::uniform_real_distribution, which is not.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream for the same user seed (stream 0 is the plain seed).
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id);

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi);

  Eigen::VectorXd uniform_vector(Eigen::Index size, double lo, double hi);

  /// Filled row by row.
  Eigen::MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols, double lo, double hi);

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace pidflow
