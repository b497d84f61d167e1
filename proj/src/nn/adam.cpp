#include "memrw/nn/adam.hpp"

#include <cmath>

#include "memrw/error.hpp"

namespace memrw::nn {

Adam::Adam(const ParamStore& params, AdamConfig config) : config_(config) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& p = params.value(ParamId{i});
    m_.push_back(Matrix::Zero(p.rows(), p.cols()));
    v_.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
}

void Adam::step(ParamStore& params, const Gradients& grads) {
  if (grads.size() != params.size() || m_.size() != params.size()) {
    throw Error(ErrorCode::kInternal, "optimizer state does not match parameters");
  }
  if (!grads.all_finite()) {
    throw Error(ErrorCode::kDivergence, "divergence: non-finite gradient");
  }
  ++step_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& g = grads[ParamId{i}];
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g.cwiseProduct(g);
    Matrix& p = params.value(ParamId{i});
    p.array() -= config_.lr * (m_[i].array() / corr1) /
                 ((v_[i].array() / corr2).sqrt() + config_.eps);
  }
}

void Adam::restore(std::int64_t step, std::vector<Matrix> m, std::vector<Matrix> v) {
  if (m.size() != m_.size() || v.size() != v_.size()) {
    throw Error(ErrorCode::kMismatch, "optimizer state has the wrong layout");
  }
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i].rows() != m_[i].rows() || m[i].cols() != m_[i].cols() ||
        v[i].rows() != v_[i].rows() || v[i].cols() != v_[i].cols()) {
      throw Error(ErrorCode::kMismatch, "optimizer moment has the wrong shape");
    }
  }
  step_ = step;
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace memrw::nn
