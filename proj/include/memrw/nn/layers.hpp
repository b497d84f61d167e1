#pragma once

#include <string>

#include "memrw/nn/graph.hpp"

namespace memrw::nn {

enum class Activation { kNone, kTanh, kSigmoid };

// activation(W x + b). x may be a matrix; b broadcasts over its columns.
struct Dense {
  ParamId w;
  ParamId b;

  static Dense create(ParamStore& store, const std::string& name, Index in,
                      Index out);
  Expr apply(Graph& g, Expr x, Activation act = Activation::kNone) const;
};

struct Lstm {
  ParamId w_input;
  ParamId w_hidden;
  ParamId bias;

  static Lstm create(ParamStore& store, const std::string& name, Index in,
                     Index hidden);
  // Sets the forget-gate slice of the bias; call after initialization.
  void set_forget_bias(ParamStore& store, double value) const;
  Index hidden(const ParamStore& store) const;
  Expr run(Graph& g, Expr inputs, bool reverse = false) const;
};

// Per-position outputs are [forward_t ; backward_t], 2H x T.
struct BiLstm {
  Lstm forward;
  Lstm backward;

  static BiLstm create(ParamStore& store, const std::string& name, Index in,
                       Index hidden);
  void set_forget_bias(ParamStore& store, double value) const;
  Expr encode(Graph& g, Expr inputs) const;
};

// One step of a unidirectional LSTM cell with explicit state.
struct LstmState {
  Expr h;
  Expr c;
};
LstmState lstm_cell(Graph& g, const Lstm& cell, Expr x, LstmState prev);

enum class AttentionKind { kAdditive, kMultiplicative };

struct AttentionOutput {
  Expr weights;  // N x 1, sums to one
  Expr context;  // key_dim x 1
};

// additive:       score_i = v . tanh(W_q q + W_k k_i)
// multiplicative: score_i = q . (W k_i)
struct Attention {
  AttentionKind kind = AttentionKind::kAdditive;
  ParamId w_query;  // additive: A x q; multiplicative: k x q
  ParamId w_key;    // additive: A x k; unused otherwise
  ParamId v;        // additive: 1 x A; unused otherwise

  static Attention create(ParamStore& store, const std::string& name,
                          AttentionKind kind, Index query_dim, Index key_dim,
                          Index attn_dim);

  // Query-independent part, computed once per key set.
  Expr project_keys(Graph& g, Expr keys) const;
  // Raw scores, 1 x N.
  Expr scores(Graph& g, Expr query, Expr projected_keys) const;
  AttentionOutput attend(Graph& g, Expr query, Expr keys) const;
};

AttentionKind parse_attention_kind(const std::string& s);
std::string to_string(AttentionKind kind);

}  // namespace memrw::nn
