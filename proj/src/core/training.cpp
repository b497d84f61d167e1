#include "memrw/training.hpp"

#include <cmath>
#include <exception>
#include <numeric>
#include <string>
#include <thread>

#include "memrw/error.hpp"
#include "memrw/rng.hpp"

namespace memrw {
namespace {

// Batches are cut into this many contiguous chunks whatever the thread
// count, and chunk gradients are summed in order.
constexpr std::size_t kChunks = 4;

}  // namespace

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w * n / workers; i < (w + 1) * n / workers; ++i) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

LossTrace train_units(nn::ParamStore& params, nn::Adam& adam,
                      const std::vector<double>& unit_weights, const TrainOptions& options,
                      const UnitLossFn& unit_loss, const EpochCallback& on_epoch) {
  LossTrace trace;
  std::vector<std::size_t> units;
  for (std::size_t i = 0; i < unit_weights.size(); ++i) {
    if (unit_weights[i] > 0.0) units.push_back(i);
  }
  if (units.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no training examples");
  }
  const int threads = std::max(options.threads, 1);
  std::vector<nn::Gradients> partial(kChunks, nn::Gradients(params));
  nn::Gradients total(params);

  for (int epoch = options.start_epoch; epoch < options.epochs; ++epoch) {
    std::vector<std::size_t> order = units;
    Rng rng = Rng::stream(options.seed, "shuffle." + std::to_string(epoch));
    rng.shuffle(order);
    double epoch_loss = 0.0;
    double epoch_weight = 0.0;
    std::size_t at = 0;
    while (at < order.size()) {
      std::vector<std::size_t> batch;
      double weight = 0.0;
      while (at < order.size() && weight < options.batch_size) {
        batch.push_back(order[at]);
        weight += unit_weights[order[at]];
        ++at;
      }
      const std::size_t chunks = std::min(kChunks, batch.size());
      std::vector<UnitLoss> sums(chunks);
      parallel_for(chunks, threads, [&](std::size_t c) {
        nn::Gradients& g = partial[c];
        g.zero();
        for (std::size_t k = c * batch.size() / chunks; k < (c + 1) * batch.size() / chunks; ++k) {
          const UnitLoss u = unit_loss(params, batch[k], &g);
          sums[c].loss_sum += u.loss_sum;
          sums[c].weight += u.weight;
        }
      });
      total.zero();
      double loss = 0.0;
      double w_sum = 0.0;
      for (std::size_t c = 0; c < chunks; ++c) {
        total += partial[c];
        loss += sums[c].loss_sum;
        w_sum += sums[c].weight;
      }
      if (!std::isfinite(loss)) {
        throw Error(ErrorCode::kDivergence, "divergence: non-finite loss in epoch " +
                                                std::to_string(epoch + 1));
      }
      if (w_sum <= 0.0) continue;
      total.scale(1.0 / w_sum);
      adam.step(params, total);
      trace.batch_loss.push_back(loss / w_sum);
      epoch_loss += loss;
      epoch_weight += w_sum;
    }
    const double mean = epoch_weight > 0.0 ? epoch_loss / epoch_weight : 0.0;
    trace.epoch_loss.push_back(mean);
    if (on_epoch) on_epoch(epoch + 1, mean);
  }
  return trace;
}

}  // namespace memrw
