#include "memrw/nn/layers.hpp"

#include <array>

#include "memrw/error.hpp"

namespace memrw::nn {

Dense Dense::create(ParamStore& store, const std::string& name, Index in,
                    Index out) {
  return Dense{store.add(name + ".w", out, in), store.add(name + ".b", out, 1)};
}

Expr Dense::apply(Graph& g, Expr x, Activation act) const {
  Expr y = g.add(g.matmul(g.param(w), x), g.param(b));
  switch (act) {
    case Activation::kNone: return y;
    case Activation::kTanh: return g.tanh(y);
    case Activation::kSigmoid: return g.sigmoid(y);
  }
  return y;
}

Lstm Lstm::create(ParamStore& store, const std::string& name, Index in,
                  Index hidden) {
  return Lstm{store.add(name + ".wx", 4 * hidden, in),
              store.add(name + ".wh", 4 * hidden, hidden),
              store.add(name + ".b", 4 * hidden, 1)};
}

void Lstm::set_forget_bias(ParamStore& store, double value) const {
  const Index h = hidden(store);
  store.value(bias).middleRows(h, h).setConstant(value);
}

Index Lstm::hidden(const ParamStore& store) const {
  return store.value(w_hidden).cols();
}

Expr Lstm::run(Graph& g, Expr inputs, bool reverse) const {
  return g.lstm(inputs, w_input, w_hidden, bias, reverse);
}

BiLstm BiLstm::create(ParamStore& store, const std::string& name, Index in,
                      Index hidden) {
  return BiLstm{Lstm::create(store, name + ".fwd", in, hidden),
                Lstm::create(store, name + ".bwd", in, hidden)};
}

void BiLstm::set_forget_bias(ParamStore& store, double value) const {
  forward.set_forget_bias(store, value);
  backward.set_forget_bias(store, value);
}

Expr BiLstm::encode(Graph& g, Expr inputs) const {
  const std::array<Expr, 2> parts{forward.run(g, inputs, false),
                                  backward.run(g, inputs, true)};
  return g.vcat(parts);
}

LstmState lstm_cell(Graph& g, const Lstm& cell, Expr x, LstmState prev) {
  const Index h = g.value(prev.h).rows();
  Expr z = g.add(g.add(g.matmul(g.param(cell.w_input), x),
                       g.matmul(g.param(cell.w_hidden), prev.h)),
                 g.param(cell.bias));
  Expr i = g.sigmoid(g.rows(z, 0, h));
  Expr f = g.sigmoid(g.rows(z, h, h));
  Expr c_hat = g.tanh(g.rows(z, 2 * h, h));
  Expr o = g.sigmoid(g.rows(z, 3 * h, h));
  const std::array<Expr, 2> terms{g.cwise_mul(f, prev.c), g.cwise_mul(i, c_hat)};
  Expr c = g.sum(terms);
  return LstmState{g.cwise_mul(o, g.tanh(c)), c};
}

Attention Attention::create(ParamStore& store, const std::string& name,
                            AttentionKind kind, Index query_dim, Index key_dim,
                            Index attn_dim) {
  Attention a;
  a.kind = kind;
  if (kind == AttentionKind::kAdditive) {
    a.w_query = store.add(name + ".wq", attn_dim, query_dim);
    a.w_key = store.add(name + ".wk", attn_dim, key_dim);
    a.v = store.add(name + ".v", 1, attn_dim);
  } else {
    a.w_query = store.add(name + ".wqk", key_dim, query_dim);
  }
  return a;
}

Expr Attention::project_keys(Graph& g, Expr keys) const {
  if (kind == AttentionKind::kMultiplicative) return keys;
  return g.matmul(g.param(w_key), keys);
}

Expr Attention::scores(Graph& g, Expr query, Expr projected_keys) const {
  Expr q = g.matmul(g.param(w_query), query);
  if (kind == AttentionKind::kMultiplicative) {
    return g.matmul(g.transpose(q), projected_keys);
  }
  return g.matmul(g.param(v), g.tanh(g.add(projected_keys, q)));
}

AttentionOutput Attention::attend(Graph& g, Expr query, Expr keys) const {
  Expr w = g.softmax(scores(g, query, project_keys(g, keys)));
  return AttentionOutput{w, g.matmul(keys, w)};
}

AttentionKind parse_attention_kind(const std::string& s) {
  if (s == "additive") return AttentionKind::kAdditive;
  if (s == "multiplicative") return AttentionKind::kMultiplicative;
  throw Error(ErrorCode::kConfig, "config error: unknown attention kind '" + s + "'");
}

std::string to_string(AttentionKind kind) {
  return kind == AttentionKind::kAdditive ? "additive" : "multiplicative";
}

}  // namespace memrw::nn
