#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

#include "memrw/nn/params.hpp"

namespace memrw::nn {

// Evaluates the loss at the store's current values. When `grads` is not
// null the callee must also backpropagate into it.
using LossFn = std::function<double(const ParamStore&, Gradients*)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  std::string worst_param;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Central differences (f(x+h) - f(x-h)) / 2h against backprop, coordinate
// by coordinate. Relative error is |a - n| / max(|a|, |n|, abs_floor); the
// floor keeps gradients that are zero up to roundoff from dominating.
// When max_coords_per_param > 0 a seeded sample of coordinates is checked
// in each array instead of all of them.
GradCheckResult grad_check(ParamStore& params, const LossFn& loss, double h = 1e-5,
                           std::size_t max_coords_per_param = 0,
                           std::uint64_t seed = 0, double abs_floor = 1e-6);

}  // namespace memrw::nn
