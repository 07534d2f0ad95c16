#pragma once

#include <cmath>

#include "normscaler/model.hpp"
#include "normscaler/rng.hpp"

namespace testsupport {

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

// Gaussian matrix from a plain counter stream; independent of gen_instance.
inline normscaler::Matrix gaussian_matrix(int rows, int cols, std::uint64_t seed) {
  normscaler::CounterRng rng(seed);
  normscaler::Matrix m(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) m(i, j) = rng.next_gaussian();
  }
  return m;
}

inline normscaler::Vector gaussian_vector(int n, std::uint64_t seed) {
  return gaussian_matrix(n, 1, seed).col(0);
}

}  // namespace testsupport
