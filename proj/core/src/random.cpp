#include "pidflow/random.hpp"

#include <array>

namespace pidflow {

Rng Rng::stream(std::uint64_t seed, std::uint64_t stream_id) {
  if (stream_id == 0) return Rng(seed);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id),
                    static_cast<std::uint32_t>(stream_id >> 32)};
  std::array<std::uint64_t, 1> state{};
  seq.generate(reinterpret_cast<std::uint32_t*>(state.data()),
               reinterpret_cast<std::uint32_t*>(state.data() + 1));
  return Rng(state[0]);
}

double Rng::uniform(double lo, double hi) {
  // 53 random mantissa bits -> [0, 1)
  const double unit = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * unit;
}

Eigen::VectorXd Rng::uniform_vector(Eigen::Index size, double lo, double hi) {
  Eigen::VectorXd v(size);
  for (Eigen::Index i = 0; i < size; ++i) v[i] = uniform(lo, hi);
  return v;
}

Eigen::MatrixXd Rng::uniform_matrix(Eigen::Index rows, Eigen::Index cols, double lo, double hi) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = uniform(lo, hi);
  }
  return m;
}

}  // namespace pidflow
