#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "memrw/rng.hpp"

namespace memrw::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

struct ParamId {
  std::size_t index = 0;
  friend bool operator==(ParamId, ParamId) = default;
};

// Named dense parameter arrays. Names are unique and insertion order is
// the canonical order used by the optimizer and the checkpoint writer.
class ParamStore {
 public:
  ParamId add(std::string name, Index rows, Index cols);

  Matrix& value(ParamId id) { return values_.at(id.index); }
  const Matrix& value(ParamId id) const { return values_.at(id.index); }
  const std::string& name(ParamId id) const { return names_.at(id.index); }
  std::size_t size() const { return values_.size(); }
  std::optional<ParamId> find(std::string_view name) const;
  std::size_t total_scalars() const;

  // Uniform(-scale, scale) for every array whose name does not end in
  // ".b"; biases are zeroed. Draw order follows insertion order.
  void init_uniform(Rng& rng, double scale = 0.08);

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
  std::unordered_map<std::string, std::size_t> by_name_;
};

// One gradient array per parameter, shaped like the store it was made for.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(const ParamStore& store);

  Matrix& operator[](ParamId id) { return grads_.at(id.index); }
  const Matrix& operator[](ParamId id) const { return grads_.at(id.index); }
  std::size_t size() const { return grads_.size(); }

  void zero();
  void scale(double s);
  Gradients& operator+=(const Gradients& other);
  bool all_finite() const;
  double max_abs() const;

 private:
  std::vector<Matrix> grads_;
};

}  // namespace memrw::nn
