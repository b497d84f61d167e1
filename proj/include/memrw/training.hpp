#pragma once

// Mini-batch training loop shared by both models.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "memrw/nn/adam.hpp"
#include "memrw/nn/params.hpp"

namespace memrw {

struct TrainOptions {
  int epochs = 10;
  // Epochs already done; training runs epochs start_epoch + 1 .. epochs.
  int start_epoch = 0;
  // Target number of weighted examples per update.
  double batch_size = 256;
  int threads = 1;
  std::uint64_t seed = 0;
};

struct LossTrace {
  std::vector<double> epoch_loss;
  std::vector<double> batch_loss;
};

// Loss of one training unit summed over its examples, and the number of
// (weighted) examples it contributes to the batch average.
struct UnitLoss {
  double loss_sum = 0.0;
  double weight = 0.0;
};

// Computes the unit's summed loss at `params`; when `grads` is not null it
// also adds d(loss_sum)/d(params) into it.
using UnitLossFn = std::function<UnitLoss(const nn::ParamStore& params, std::size_t unit,
                                          nn::Gradients* grads)>;

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

// Shuffles units each epoch (epoch e uses its own seeded stream, so a run
// resumed at start_epoch matches an uninterrupted one) and packs
// consecutive units into batches of at least `batch_size` weight (unit_weights gives each unit's weight ahead of
// time). Each batch's gradient is the summed gradient divided by the batch
// weight. Each batch is cut into a fixed number of contiguous chunks that
// are reduced in order, so results do not depend on the thread count.
// Throws Error(kDivergence) on a non-finite loss or gradient.
LossTrace train_units(nn::ParamStore& params, nn::Adam& adam,
                      const std::vector<double>& unit_weights, const TrainOptions& options,
                      const UnitLossFn& unit_loss, const EpochCallback& on_epoch = {});

// Evaluates fn(i) for i in [0, n) on `threads` workers; fn must only touch
// slot i of any shared output.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace memrw
