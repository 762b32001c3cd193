#pragma once

#include "csac/tensor.hpp"

#include <cstdint>
#include <random>
#include <string>

namespace csac {

// Seeded random stream. Engine and normal-distribution cache are both part
// of the serialized state so checkpoints resume bit-exactly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  // Independent child stream derived from (seed, stream id).
  static Rng derived(std::uint64_t seed, std::uint64_t stream);

  double uniform() { return unit_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit_(engine_); }
  double normal() { return normal_(engine_); }
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  Matrix normalMatrix(Index rows, Index cols);

  std::string serialize() const;
  void deserialize(const std::string& state);

  bool operator==(const Rng& other) const {
    return engine_ == other.engine_ && normal_ == other.normal_;
  }

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace csac
