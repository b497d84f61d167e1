#include "memrw/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace memrw::nn {

GradCheckResult grad_check(ParamStore& params, const LossFn& loss, double h,
                           std::size_t max_coords_per_param, std::uint64_t seed,
                           double abs_floor) {
  Gradients analytic(params);
  loss(params, &analytic);

  std::mt19937_64 rng(seed);
  GradCheckResult result;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const ParamId id{p};
    Matrix& value = params.value(id);
    std::vector<Index> coords(static_cast<std::size_t>(value.size()));
    std::iota(coords.begin(), coords.end(), Index{0});
    if (max_coords_per_param > 0 && coords.size() > max_coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(max_coords_per_param);
    }
    for (Index k : coords) {
      double* x = value.data() + k;
      const double saved = *x;
      *x = saved + h;
      const double up = loss(params, nullptr);
      *x = saved - h;
      const double down = loss(params, nullptr);
      *x = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[id].data()[k];
      const double denom = std::max({std::abs(a), std::abs(numeric), abs_floor});
      const double rel = std::abs(a - numeric) / denom;
      ++result.coords_checked;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param = params.name(id) + "[" + std::to_string(k) + "]";
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace memrw::nn
