#include "memrw/nn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace memrw::nn {
namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("graph: ") + what);
}

double clamp_prob(double p) {
  return std::clamp(p, kProbFloor, 1.0 - kProbFloor);
}

Matrix sigmoid_of(const Matrix& x) {
  return (1.0 + (-x.array()).exp()).inverse().matrix();
}

}  // namespace

Graph::Graph(const ParamStore& params) : params_(&params) {
  nodes_.reserve(256);
}

Expr Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return Expr{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Matrix& Graph::val(std::uint32_t id) const {
  const Node& n = nodes_[id];
  if (n.op == Op::kParam) return params_->value(n.pid);
  return n.value;
}

const Matrix& Graph::value(Expr e) const {
  require(e.id < nodes_.size(), "unknown expression");
  return val(e.id);
}

double Graph::softmax_deviation() const {
  double worst = 0.0;
  for (const Node& n : nodes_) {
    if (n.op == Op::kSoftmax) {
      worst = std::max(worst, std::abs(n.value.sum() - 1.0));
    } else if (n.op == Op::kSegmentSoftmax) {
      for (std::size_t u = 0; u + 1 < n.aux.size(); ++u) {
        const double s = n.value.middleRows(n.aux[u], n.aux[u + 1] - n.aux[u]).sum();
        worst = std::max(worst, std::abs(s - 1.0));
      }
    }
  }
  return worst;
}

std::size_t Graph::softmax_count() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) {
    return n.op == Op::kSoftmax || n.op == Op::kSegmentSoftmax;
  }));
}

Matrix& Graph::grad_of(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) {
    const Matrix& v = val(id);
    n.grad = Matrix::Zero(v.rows(), v.cols());
  }
  return n.grad;
}

void Graph::accumulate(std::uint32_t id, const Matrix& g) {
  Node& n = nodes_[id];
  if (n.op == Op::kConstant) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

std::uint32_t Graph::param_node(ParamId id) {
  auto it = param_nodes_.find(id.index);
  if (it != param_nodes_.end()) return it->second;
  Node n;
  n.op = Op::kParam;
  n.pid = id;
  const Expr e = push(std::move(n));
  param_nodes_.emplace(id.index, e.id);
  return e.id;
}

Expr Graph::constant(Matrix value) {
  Node n;
  n.op = Op::kConstant;
  n.value = std::move(value);
  return push(std::move(n));
}

Expr Graph::param(ParamId id) {
  require(id.index < params_->size(), "unknown parameter");
  return Expr{param_node(id)};
}

Expr Graph::lookup_sum(ParamId table, std::span<const int> ids) {
  require(!ids.empty(), "lookup_sum needs at least one id");
  const Matrix& t = params_->value(table);
  Matrix v = Matrix::Zero(t.rows(), 1);
  for (int id : ids) {
    require(id >= 0 && id < t.cols(), "embedding id out of range");
    v.col(0) += t.col(id);
  }
  Node n;
  n.op = Op::kLookupSum;
  n.a = param_node(table);
  n.ids.assign(ids.begin(), ids.end());
  n.value = std::move(v);
  return push(std::move(n));
}

Expr Graph::matmul(Expr a, Expr b) {
  const Matrix& va = val(a.id);
  const Matrix& vb = val(b.id);
  require(va.cols() == vb.rows(), "matmul shape mismatch");
  Node n;
  n.op = Op::kMatmul;
  n.a = a.id;
  n.b = b.id;
  n.value.noalias() = va * vb;
  return push(std::move(n));
}

Expr Graph::transpose(Expr a) {
  Node n;
  n.op = Op::kTranspose;
  n.a = a.id;
  n.value = val(a.id).transpose();
  return push(std::move(n));
}

Expr Graph::add(Expr a, Expr b) {
  const Matrix& va = val(a.id);
  const Matrix& vb = val(b.id);
  Node n;
  n.a = a.id;
  n.b = b.id;
  if (va.rows() == vb.rows() && va.cols() == vb.cols()) {
    n.op = Op::kAdd;
    n.value = va + vb;
  } else {
    require(vb.cols() == 1 && vb.rows() == va.rows(), "add shape mismatch");
    n.op = Op::kAddBroadcast;
    n.value = va.colwise() + vb.col(0);
  }
  return push(std::move(n));
}

Expr Graph::sum(std::span<const Expr> terms) {
  require(!terms.empty(), "sum of nothing");
  Matrix v = val(terms[0].id);
  for (std::size_t i = 1; i < terms.size(); ++i) {
    const Matrix& t = val(terms[i].id);
    require(t.rows() == v.rows() && t.cols() == v.cols(), "sum shape mismatch");
    v += t;
  }
  Node n;
  n.op = Op::kSum;
  for (Expr t : terms) n.inputs.push_back(t.id);
  n.value = std::move(v);
  return push(std::move(n));
}

Expr Graph::cwise_mul(Expr a, Expr b) {
  const Matrix& va = val(a.id);
  const Matrix& vb = val(b.id);
  require(va.rows() == vb.rows() && va.cols() == vb.cols(),
          "cwise_mul shape mismatch");
  Node n;
  n.op = Op::kCwiseMul;
  n.a = a.id;
  n.b = b.id;
  n.value = va.cwiseProduct(vb);
  return push(std::move(n));
}

Expr Graph::scale(Expr a, double s) {
  Node n;
  n.op = Op::kScale;
  n.a = a.id;
  n.s = s;
  n.value = val(a.id) * s;
  return push(std::move(n));
}

Expr Graph::scalar_mul(Expr s, Expr a) {
  const Matrix& vs = val(s.id);
  require(vs.size() == 1, "scalar_mul needs a 1 x 1 factor");
  Node n;
  n.op = Op::kScalarMul;
  n.a = s.id;
  n.b = a.id;
  n.value = val(a.id) * vs(0, 0);
  return push(std::move(n));
}

Expr Graph::tanh(Expr a) {
  Node n;
  n.op = Op::kTanh;
  n.a = a.id;
  n.value = val(a.id).array().tanh().matrix();
  return push(std::move(n));
}

Expr Graph::sigmoid(Expr a) {
  Node n;
  n.op = Op::kSigmoid;
  n.a = a.id;
  n.value = sigmoid_of(val(a.id));
  return push(std::move(n));
}

Expr Graph::vcat(std::span<const Expr> parts) {
  require(!parts.empty(), "vcat of nothing");
  Index rows = 0;
  const Index cols = val(parts[0].id).cols();
  for (Expr p : parts) {
    require(val(p.id).cols() == cols, "vcat column mismatch");
    rows += val(p.id).rows();
  }
  Matrix v(rows, cols);
  Index at = 0;
  for (Expr p : parts) {
    const Matrix& vp = val(p.id);
    v.middleRows(at, vp.rows()) = vp;
    at += vp.rows();
  }
  Node n;
  n.op = Op::kVcat;
  for (Expr p : parts) n.inputs.push_back(p.id);
  n.value = std::move(v);
  return push(std::move(n));
}

Expr Graph::hcat(std::span<const Expr> parts) {
  require(!parts.empty(), "hcat of nothing");
  Index cols = 0;
  const Index rows = val(parts[0].id).rows();
  for (Expr p : parts) {
    require(val(p.id).rows() == rows, "hcat row mismatch");
    cols += val(p.id).cols();
  }
  Matrix v(rows, cols);
  Index at = 0;
  for (Expr p : parts) {
    const Matrix& vp = val(p.id);
    v.middleCols(at, vp.cols()) = vp;
    at += vp.cols();
  }
  Node n;
  n.op = Op::kHcat;
  for (Expr p : parts) n.inputs.push_back(p.id);
  n.value = std::move(v);
  return push(std::move(n));
}

Expr Graph::rows(Expr a, Index start, Index count) {
  const Matrix& va = val(a.id);
  require(start >= 0 && count > 0 && start + count <= va.rows(),
          "row slice out of range");
  Node n;
  n.op = Op::kRows;
  n.a = a.id;
  n.aux = {start, count};
  n.value = va.middleRows(start, count);
  return push(std::move(n));
}

Expr Graph::gather_rows(Expr a, std::span<const Index> rows) {
  const Matrix& va = val(a.id);
  require(!rows.empty(), "gather of nothing");
  Matrix v(static_cast<Index>(rows.size()), va.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i] >= 0 && rows[i] < va.rows(), "gather row out of range");
    v.row(static_cast<Index>(i)) = va.row(rows[i]);
  }
  Node n;
  n.op = Op::kGatherRows;
  n.a = a.id;
  n.aux.assign(rows.begin(), rows.end());
  n.value = std::move(v);
  return push(std::move(n));
}

Expr Graph::col(Expr a, Index j) {
  const Matrix& va = val(a.id);
  require(j >= 0 && j < va.cols(), "column out of range");
  Node n;
  n.op = Op::kCol;
  n.a = a.id;
  n.aux = {j};
  n.value = va.col(j);
  return push(std::move(n));
}

Expr Graph::mean_cols(Expr a) {
  const Matrix& va = val(a.id);
  Node n;
  n.op = Op::kMeanCols;
  n.a = a.id;
  n.value = va.rowwise().mean();
  return push(std::move(n));
}

Expr Graph::pick(Expr a, Index i) {
  const Matrix& va = val(a.id);
  require(i >= 0 && i < va.size(), "pick out of range");
  Node n;
  n.op = Op::kPick;
  n.a = a.id;
  n.aux = {i};
  n.value = Matrix::Constant(1, 1, va.data()[i]);
  return push(std::move(n));
}

Expr Graph::sum_all(Expr a) {
  Node n;
  n.op = Op::kSumAll;
  n.a = a.id;
  n.value = Matrix::Constant(1, 1, val(a.id).sum());
  return push(std::move(n));
}

Expr Graph::softmax(Expr a) {
  const Matrix& va = val(a.id);
  require(va.size() > 0, "softmax of nothing");
  Eigen::Map<const Vector> x(va.data(), va.size());
  Vector e = (x.array() - x.maxCoeff()).exp();
  e /= e.sum();
  Node n;
  n.op = Op::kSoftmax;
  n.a = a.id;
  n.value = e;
  return push(std::move(n));
}

Expr Graph::segment_softmax(Expr scores, std::span<const Index> offsets) {
  const Matrix& vs = val(scores.id);
  require(offsets.size() >= 2 && offsets.front() == 0 &&
              offsets.back() == vs.size(),
          "segment offsets do not cover the scores");
  Eigen::Map<const Vector> x(vs.data(), vs.size());
  Vector out(vs.size());
  for (std::size_t u = 0; u + 1 < offsets.size(); ++u) {
    const Index lo = offsets[u];
    const Index len = offsets[u + 1] - lo;
    require(len > 0, "empty segment");
    auto seg = x.segment(lo, len);
    Vector e = (seg.array() - seg.maxCoeff()).exp();
    out.segment(lo, len) = e / e.sum();
  }
  Node n;
  n.op = Op::kSegmentSoftmax;
  n.a = scores.id;
  n.aux.assign(offsets.begin(), offsets.end());
  n.value = std::move(out);
  return push(std::move(n));
}

Expr Graph::segment_weighted_sum(Expr keys, Expr weights,
                                 std::span<const Index> offsets) {
  const Matrix& k = val(keys.id);
  const Matrix& w = val(weights.id);
  require(w.size() == k.cols(), "weights do not match key count");
  require(offsets.size() >= 2 && offsets.back() == k.cols(),
          "segment offsets do not cover the keys");
  const Index segs = static_cast<Index>(offsets.size()) - 1;
  Matrix out = Matrix::Zero(k.rows(), segs);
  Eigen::Map<const Vector> wv(w.data(), w.size());
  for (Index u = 0; u < segs; ++u) {
    const Index lo = offsets[u];
    const Index len = offsets[u + 1] - lo;
    out.col(u).noalias() = k.middleCols(lo, len) * wv.segment(lo, len);
  }
  Node n;
  n.op = Op::kSegmentWeightedSum;
  n.a = keys.id;
  n.b = weights.id;
  n.aux.assign(offsets.begin(), offsets.end());
  n.value = std::move(out);
  return push(std::move(n));
}

Expr Graph::segment_scale(Expr weights, Expr seg_values,
                          std::span<const Index> offsets) {
  const Matrix& w = val(weights.id);
  const Matrix& u = val(seg_values.id);
  require(offsets.size() >= 2 && offsets.back() == w.size(),
          "segment offsets do not cover the weights");
  require(u.size() == static_cast<Index>(offsets.size()) - 1,
          "one value per segment required");
  Vector out(w.size());
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    for (Index i = offsets[s]; i < offsets[s + 1]; ++i) {
      out(i) = w.data()[i] * u.data()[s];
    }
  }
  Node n;
  n.op = Op::kSegmentScale;
  n.a = weights.id;
  n.b = seg_values.id;
  n.aux.assign(offsets.begin(), offsets.end());
  n.value = std::move(out);
  return push(std::move(n));
}

Expr Graph::scatter_add(Expr x, std::span<const int> targets, Index out_size) {
  const Matrix& vx = val(x.id);
  require(static_cast<Index>(targets.size()) == vx.size(),
          "one scatter target per entry required");
  Vector out = Vector::Zero(out_size);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    require(targets[i] >= 0 && targets[i] < out_size,
            "scatter target out of range");
    out(targets[i]) += vx.data()[i];
  }
  Node n;
  n.op = Op::kScatterAdd;
  n.a = x.id;
  n.ids.assign(targets.begin(), targets.end());
  n.value = std::move(out);
  return push(std::move(n));
}

Expr Graph::lstm(Expr inputs, ParamId w_input, ParamId w_hidden, ParamId bias,
                 bool reverse) {
  const Matrix& x = val(inputs.id);
  const Matrix& wx = params_->value(w_input);
  const Matrix& wh = params_->value(w_hidden);
  const Matrix& b = params_->value(bias);
  const Index hidden = wh.cols();
  require(wh.rows() == 4 * hidden, "recurrent weight must be 4H x H");
  require(wx.rows() == 4 * hidden && wx.cols() == x.rows(),
          "input weight must be 4H x input_dim");
  require(b.rows() == 4 * hidden && b.cols() == 1, "bias must be 4H x 1");
  require(x.cols() > 0, "lstm over an empty sequence");

  const Index steps = x.cols();
  Matrix gates(4 * hidden, steps);
  gates.noalias() = wx * x;
  gates.colwise() += b.col(0);
  Matrix cells(hidden, steps);
  Matrix out(hidden, steps);
  Vector h = Vector::Zero(hidden);
  Vector c = Vector::Zero(hidden);
  Vector z(4 * hidden);
  for (Index s = 0; s < steps; ++s) {
    const Index t = reverse ? steps - 1 - s : s;
    z.noalias() = gates.col(t) + wh * h;
    auto zi = z.segment(0, hidden);
    auto zf = z.segment(hidden, hidden);
    auto zg = z.segment(2 * hidden, hidden);
    auto zo = z.segment(3 * hidden, hidden);
    zi = (1.0 + (-zi.array()).exp()).inverse().matrix();
    zf = (1.0 + (-zf.array()).exp()).inverse().matrix();
    zg = zg.array().tanh().matrix();
    zo = (1.0 + (-zo.array()).exp()).inverse().matrix();
    c = zf.cwiseProduct(c) + zi.cwiseProduct(zg);
    h = zo.cwiseProduct(c.array().tanh().matrix());
    gates.col(t) = z;
    cells.col(t) = c;
    out.col(t) = h;
  }

  Node n;
  n.op = Op::kLstm;
  n.a = inputs.id;
  n.inputs = {param_node(w_input), param_node(w_hidden), param_node(bias)};
  n.flag = reverse;
  n.value = std::move(out);
  n.cache1 = std::move(gates);
  n.cache2 = std::move(cells);
  return push(std::move(n));
}

Expr Graph::neg_log(Expr p) {
  const Matrix& vp = val(p.id);
  require(vp.size() == 1, "neg_log needs a 1 x 1 input");
  Node n;
  n.op = Op::kNegLog;
  n.a = p.id;
  n.value = Matrix::Constant(1, 1, -std::log(clamp_prob(vp(0, 0))));
  return push(std::move(n));
}

Expr Graph::binary_cross_entropy(Expr p, double label) {
  const Matrix& vp = val(p.id);
  require(vp.size() == 1, "binary_cross_entropy needs a 1 x 1 input");
  const double q = clamp_prob(vp(0, 0));
  Node n;
  n.op = Op::kBce;
  n.a = p.id;
  n.s = label;
  n.value = Matrix::Constant(
      1, 1, -label * std::log(q) - (1.0 - label) * std::log(1.0 - q));
  return push(std::move(n));
}

void Graph::backward(Expr loss, Gradients& out, double seed) {
  require(!backward_done_, "backward called twice on one graph");
  require(loss.id < nodes_.size() && val(loss.id).size() == 1,
          "backward needs a scalar loss");
  backward_done_ = true;
  nodes_[loss.id].grad = Matrix::Constant(1, 1, seed);
  for (std::uint32_t id = loss.id + 1; id-- > 0;) {
    if (nodes_[id].grad.size() == 0) continue;
    backward_node(id);
  }
  for (const auto& [pidx, node] : param_nodes_) {
    const Matrix& g = nodes_[node].grad;
    if (g.size() != 0) out[ParamId{pidx}] += g;
  }
}

void Graph::backward_node(std::uint32_t id) {
  // `n` stays valid: backward never appends nodes.
  Node& n = nodes_[id];
  const Matrix& g = n.grad;
  switch (n.op) {
    case Op::kConstant:
    case Op::kParam:
      break;
    case Op::kLookupSum: {
      Matrix& gt = grad_of(n.a);
      for (int i : n.ids) gt.col(i) += g.col(0);
      break;
    }
    case Op::kMatmul: {
      const Matrix& va = val(n.a);
      const Matrix& vb = val(n.b);
      if (nodes_[n.a].op != Op::kConstant) grad_of(n.a).noalias() += g * vb.transpose();
      if (nodes_[n.b].op != Op::kConstant) grad_of(n.b).noalias() += va.transpose() * g;
      break;
    }
    case Op::kTranspose:
      accumulate(n.a, g.transpose());
      break;
    case Op::kAdd:
      accumulate(n.a, g);
      accumulate(n.b, g);
      break;
    case Op::kAddBroadcast:
      accumulate(n.a, g);
      accumulate(n.b, g.rowwise().sum());
      break;
    case Op::kSum:
      for (std::uint32_t in : n.inputs) accumulate(in, g);
      break;
    case Op::kCwiseMul:
      accumulate(n.a, g.cwiseProduct(val(n.b)));
      accumulate(n.b, g.cwiseProduct(val(n.a)));
      break;
    case Op::kScale:
      accumulate(n.a, g * n.s);
      break;
    case Op::kScalarMul: {
      const Matrix& va = val(n.b);
      accumulate(n.a, Matrix::Constant(1, 1, g.cwiseProduct(va).sum()));
      accumulate(n.b, g * val(n.a)(0, 0));
      break;
    }
    case Op::kTanh:
      accumulate(n.a, g.cwiseProduct(
                          (1.0 - n.value.array().square()).matrix()));
      break;
    case Op::kSigmoid:
      accumulate(n.a, g.cwiseProduct(
                          (n.value.array() * (1.0 - n.value.array())).matrix()));
      break;
    case Op::kVcat: {
      Index at = 0;
      for (std::uint32_t in : n.inputs) {
        const Index r = val(in).rows();
        accumulate(in, g.middleRows(at, r));
        at += r;
      }
      break;
    }
    case Op::kHcat: {
      Index at = 0;
      for (std::uint32_t in : n.inputs) {
        const Index c = val(in).cols();
        accumulate(in, g.middleCols(at, c));
        at += c;
      }
      break;
    }
    case Op::kRows:
      if (nodes_[n.a].op != Op::kConstant) {
        grad_of(n.a).middleRows(n.aux[0], n.aux[1]) += g;
      }
      break;
    case Op::kGatherRows:
      if (nodes_[n.a].op != Op::kConstant) {
        Matrix& ga = grad_of(n.a);
        for (std::size_t i = 0; i < n.aux.size(); ++i) {
          ga.row(n.aux[i]) += g.row(static_cast<Index>(i));
        }
      }
      break;
    case Op::kCol:
      if (nodes_[n.a].op != Op::kConstant) grad_of(n.a).col(n.aux[0]) += g;
      break;
    case Op::kMeanCols:
      if (nodes_[n.a].op != Op::kConstant) {
        Matrix& ga = grad_of(n.a);
        ga.colwise() += g.col(0) / static_cast<double>(ga.cols());
      }
      break;
    case Op::kPick:
      if (nodes_[n.a].op != Op::kConstant) grad_of(n.a).data()[n.aux[0]] += g(0, 0);
      break;
    case Op::kSumAll:
      if (nodes_[n.a].op != Op::kConstant) grad_of(n.a).array() += g(0, 0);
      break;
    case Op::kSoftmax: {
      const Matrix& y = n.value;
      const double dot = y.cwiseProduct(g).sum();
      Matrix gx = y.cwiseProduct((g.array() - dot).matrix());
      const Matrix& va = val(n.a);
      gx.resize(va.rows(), va.cols());
      accumulate(n.a, gx);
      break;
    }
    case Op::kSegmentSoftmax: {
      const Matrix& y = n.value;
      Vector gx(y.size());
      for (std::size_t u = 0; u + 1 < n.aux.size(); ++u) {
        const Index lo = n.aux[u];
        const Index len = n.aux[u + 1] - lo;
        auto ys = y.col(0).segment(lo, len);
        auto gs = g.col(0).segment(lo, len);
        const double dot = ys.dot(gs);
        gx.segment(lo, len) = ys.cwiseProduct((gs.array() - dot).matrix());
      }
      const Matrix& va = val(n.a);
      Matrix gm = gx;
      gm.resize(va.rows(), va.cols());
      accumulate(n.a, gm);
      break;
    }
    case Op::kSegmentWeightedSum: {
      const Matrix& k = val(n.a);
      const Matrix& w = val(n.b);
      Eigen::Map<const Vector> wv(w.data(), w.size());
      Matrix gk(k.rows(), k.cols());
      Vector gw(w.size());
      for (std::size_t u = 0; u + 1 < n.aux.size(); ++u) {
        const Index lo = n.aux[u];
        const Index len = n.aux[u + 1] - lo;
        const auto gu = g.col(static_cast<Index>(u));
        gk.middleCols(lo, len).noalias() =
            gu * wv.segment(lo, len).transpose();
        gw.segment(lo, len).noalias() = k.middleCols(lo, len).transpose() * gu;
      }
      accumulate(n.a, gk);
      Matrix gwm = gw;
      gwm.resize(w.rows(), w.cols());
      accumulate(n.b, gwm);
      break;
    }
    case Op::kSegmentScale: {
      const Matrix& w = val(n.a);
      const Matrix& u = val(n.b);
      Matrix gw(w.rows(), w.cols());
      Matrix gu = Matrix::Zero(u.rows(), u.cols());
      for (std::size_t s = 0; s + 1 < n.aux.size(); ++s) {
        for (Index i = n.aux[s]; i < n.aux[s + 1]; ++i) {
          gw.data()[i] = g(i, 0) * u.data()[s];
          gu.data()[s] += g(i, 0) * w.data()[i];
        }
      }
      accumulate(n.a, gw);
      accumulate(n.b, gu);
      break;
    }
    case Op::kScatterAdd: {
      const Matrix& vx = val(n.a);
      Matrix gx(vx.rows(), vx.cols());
      for (std::size_t i = 0; i < n.ids.size(); ++i) gx.data()[i] = g(n.ids[i], 0);
      accumulate(n.a, gx);
      break;
    }
    case Op::kLstm: {
      const Matrix& x = val(n.a);
      const Matrix& wx = val(n.inputs[0]);
      const Matrix& wh = val(n.inputs[1]);
      const Matrix& gates = n.cache1;
      const Matrix& cells = n.cache2;
      const Index hidden = wh.cols();
      const Index steps = x.cols();
      const bool reverse = n.flag;
      Matrix dz(4 * hidden, steps);
      Matrix h_prev = Matrix::Zero(hidden, steps);
      Vector dh_next = Vector::Zero(hidden);
      Vector dc_next = Vector::Zero(hidden);
      for (Index s = steps; s-- > 0;) {
        const Index t = reverse ? steps - 1 - s : s;
        const bool first = s == 0;
        const Index t_prev = reverse ? t + 1 : t - 1;
        auto i = gates.col(t).segment(0, hidden).array();
        auto f = gates.col(t).segment(hidden, hidden).array();
        auto gg = gates.col(t).segment(2 * hidden, hidden).array();
        auto o = gates.col(t).segment(3 * hidden, hidden).array();
        const Vector tc = cells.col(t).array().tanh().matrix();
        const Vector dh = g.col(t) + dh_next;
        Vector dc = (dh.array() * o * (1.0 - tc.array().square())).matrix() + dc_next;
        const Vector c_prev =
            first ? Vector::Zero(hidden) : Vector(cells.col(t_prev));
        if (!first) h_prev.col(t) = n.value.col(t_prev);
        auto dzt = dz.col(t);
        dzt.segment(0, hidden) = (dc.array() * gg * i * (1.0 - i)).matrix();
        dzt.segment(hidden, hidden) =
            (dc.array() * c_prev.array() * f * (1.0 - f)).matrix();
        dzt.segment(2 * hidden, hidden) =
            (dc.array() * i * (1.0 - gg.square())).matrix();
        dzt.segment(3 * hidden, hidden) =
            (dh.array() * tc.array() * o * (1.0 - o)).matrix();
        dc_next = (dc.array() * f).matrix();
        dh_next.noalias() = wh.transpose() * dzt;
      }
      grad_of(n.inputs[0]).noalias() += dz * x.transpose();
      grad_of(n.inputs[1]).noalias() += dz * h_prev.transpose();
      grad_of(n.inputs[2]) += dz.rowwise().sum();
      if (nodes_[n.a].op != Op::kConstant) {
        grad_of(n.a).noalias() += wx.transpose() * dz;
      }
      break;
    }
    case Op::kNegLog: {
      const double p = val(n.a)(0, 0);
      const double d = (p < kProbFloor || p > 1.0 - kProbFloor) ? 0.0 : -1.0 / p;
      accumulate(n.a, Matrix::Constant(1, 1, g(0, 0) * d));
      break;
    }
    case Op::kBce: {
      const double p = val(n.a)(0, 0);
      double d = 0.0;
      if (p >= kProbFloor && p <= 1.0 - kProbFloor) {
        d = -n.s / p + (1.0 - n.s) / (1.0 - p);
      }
      accumulate(n.a, Matrix::Constant(1, 1, g(0, 0) * d));
      break;
    }
  }
}

}  // namespace memrw::nn
