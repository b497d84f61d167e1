#pragma once

#include <cstdint>
#include <vector>

#include "memrw/nn/params.hpp"

namespace memrw::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias-corrected moments. Moments are laid out like the store.
class Adam {
 public:
  Adam(const ParamStore& params, AdamConfig config = {});

  // Applies one update. Throws Error(kDivergence) without touching any
  // state if a gradient entry is not finite.
  void step(ParamStore& params, const Gradients& grads);

  std::int64_t steps() const { return step_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<Matrix>& first_moments() const { return m_; }
  const std::vector<Matrix>& second_moments() const { return v_; }

  // Restores a saved optimizer state (checkpoint resume).
  void restore(std::int64_t step, std::vector<Matrix> m, std::vector<Matrix> v);

 private:
  AdamConfig config_;
  std::int64_t step_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

}  // namespace memrw::nn
