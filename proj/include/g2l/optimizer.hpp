#pragma once

#include <cstdint>
#include <vector>

#include "g2l/error.hpp"

namespace g2l {

struct OptimizerConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int accumulation_steps = 8;

  void validate() const;
};

/// First/second moment accumulators mirroring the flat parameter layout.
template <class T>
struct OptimizerState {
  std::vector<T> m;
  std::vector<T> v;
  std::uint64_t t = 0;

  OptimizerState() = default;
  explicit OptimizerState(std::size_t n) : m(n, T(0)), v(n, T(0)) {}

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

}  // namespace g2l
