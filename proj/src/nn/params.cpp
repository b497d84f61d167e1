#include "memrw/nn/params.hpp"

#include <stdexcept>

namespace memrw::nn {

ParamId ParamStore::add(std::string name, Index rows, Index cols) {
  if (rows <= 0 || cols <= 0) {
    throw std::invalid_argument("parameter '" + name + "' has an empty shape");
  }
  if (by_name_.contains(name)) {
    throw std::invalid_argument("duplicate parameter name '" + name + "'");
  }
  const std::size_t idx = values_.size();
  by_name_.emplace(name, idx);
  names_.push_back(std::move(name));
  values_.push_back(Matrix::Zero(rows, cols));
  return ParamId{idx};
}

std::optional<ParamId> ParamStore::find(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) return std::nullopt;
  return ParamId{it->second};
}

std::size_t ParamStore::total_scalars() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += static_cast<std::size_t>(v.size());
  return n;
}

void ParamStore::init_uniform(Rng& rng, double scale) {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const std::string& n = names_[i];
    const bool is_bias = n.size() >= 2 && n.compare(n.size() - 2, 2, ".b") == 0;
    Matrix& v = values_[i];
    if (is_bias) {
      v.setZero();
      continue;
    }
    for (Index c = 0; c < v.cols(); ++c) {
      for (Index r = 0; r < v.rows(); ++r) v(r, c) = rng.uniform(-scale, scale);
    }
  }
}

Gradients::Gradients(const ParamStore& store) {
  grads_.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    const Matrix& v = store.value(ParamId{i});
    grads_.push_back(Matrix::Zero(v.rows(), v.cols()));
  }
}

void Gradients::zero() {
  for (auto& g : grads_) g.setZero();
}

void Gradients::scale(double s) {
  for (auto& g : grads_) g *= s;
}

Gradients& Gradients::operator+=(const Gradients& other) {
  if (other.grads_.size() != grads_.size()) {
    throw std::invalid_argument("gradient sets have different layouts");
  }
  for (std::size_t i = 0; i < grads_.size(); ++i) grads_[i] += other.grads_[i];
  return *this;
}

bool Gradients::all_finite() const {
  for (const auto& g : grads_) {
    if (!g.allFinite()) return false;
  }
  return true;
}

double Gradients::max_abs() const {
  double m = 0.0;
  for (const auto& g : grads_) {
    if (g.size() > 0) m = std::max(m, g.cwiseAbs().maxCoeff());
  }
  return m;
}

}  // namespace memrw::nn
