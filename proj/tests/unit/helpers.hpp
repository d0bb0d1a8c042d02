#pragma once

#include <cmath>
#include <cstddef>

#include "rtn/rng.hpp"
#include "rtn/tensor.hpp"

namespace rtn::fixtures {

inline Tensor random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double sd = 1.0, double mean = 0.0) {
  Tensor t({rows, cols});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal(mean, sd);
  return t;
}

// Rows drawn uniformly from the probability simplex (normalized exponentials).
inline Tensor random_simplex(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t({rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      t(r, c) = -std::log(1.0 - rng.uniform());
      s += t(r, c);
    }
    for (std::size_t c = 0; c < cols; ++c) t(r, c) /= s;
  }
  return t;
}

}  // namespace rtn::fixtures
