#pragma once

// Helpers and plain-loop reference implementations shared by the tests.

#include <cmath>
#include <random>
#include <vector>

#include "memrw/nn/params.hpp"

namespace memrw::testing {

using nn::Index;
using nn::Matrix;
using nn::ParamId;
using nn::ParamStore;

inline Matrix random_matrix(std::mt19937_64& rng, Index r, Index c,
                            double scale = 1.0) {
  std::uniform_real_distribution<double> d(-scale, scale);
  Matrix m(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) m(i, j) = d(rng);
  return m;
}

inline void randomize(ParamStore& store, std::mt19937_64& rng, double scale = 0.5) {
  for (std::size_t i = 0; i < store.size(); ++i) {
    Matrix& v = store.value(ParamId{i});
    v = random_matrix(rng, v.rows(), v.cols(), scale);
  }
}

inline double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Plain-loop LSTM used as an independent reference. w_input is 4H x in,
// stored row-major as nested vectors; gate order i, f, g, o.
inline std::vector<std::vector<double>> reference_lstm(const Matrix& wx, const Matrix& wh,
                                                const Matrix& b,
                                                const std::vector<std::vector<double>>& xs,
                                                bool reverse) {
  const int hidden = static_cast<int>(wh.cols());
  const int in = static_cast<int>(wx.cols());
  const int steps = static_cast<int>(xs.size());
  std::vector<std::vector<double>> out(steps, std::vector<double>(hidden));
  std::vector<double> h(hidden, 0.0), c(hidden, 0.0);
  for (int s = 0; s < steps; ++s) {
    const int t = reverse ? steps - 1 - s : s;
    std::vector<double> z(4 * hidden);
    for (int r = 0; r < 4 * hidden; ++r) {
      double acc = b(r, 0);
      for (int k = 0; k < in; ++k) acc += wx(r, k) * xs[t][k];
      for (int k = 0; k < hidden; ++k) acc += wh(r, k) * h[k];
      z[r] = acc;
    }
    for (int k = 0; k < hidden; ++k) {
      const double ig = sig(z[k]);
      const double fg = sig(z[hidden + k]);
      const double gg = std::tanh(z[2 * hidden + k]);
      const double og = sig(z[3 * hidden + k]);
      c[k] = fg * c[k] + ig * gg;
      h[k] = og * std::tanh(c[k]);
    }
    out[t] = h;
  }
  return out;
}


}  // namespace memrw::testing
