#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "psytriage/core.hpp"
#include "psytriage/rng.hpp"

namespace testing {

// Two Gaussian blobs along the first column; remaining columns are noise.
inline psytriage::Dataset blobs(std::size_t n, std::size_t d, double separation, std::uint64_t seed) {
  psytriage::Rng rng(seed);
  psytriage::Dataset data;
  for (std::size_t j = 0; j < d; ++j) data.feature_names.push_back("x" + std::to_string(j));
  for (std::size_t i = 0; i < n; ++i) {
    const int y = i % 2 == 0 ? 1 : 0;
    std::vector<double> row(d);
    for (std::size_t j = 0; j < d; ++j) row[j] = rng.normal();
    row[0] += y == 1 ? separation / 2 : -separation / 2;
    data.rows.push_back(std::move(row));
    data.labels.push_back(y);
  }
  return data;
}

inline bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

}  // namespace testing
