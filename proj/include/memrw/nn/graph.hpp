#pragma once

// Reverse-mode differentiation over dense Eigen matrices.
//
// A Graph records operations as they are evaluated (define-by-run) and
// replays them backwards once. Values are column-major matrices; vectors
// are n x 1 and scalars are 1 x 1. Parameters are read from a ParamStore
// that the graph never mutates, so any number of graphs may share one
// store across threads while each accumulates into its own Gradients.

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "memrw/nn/params.hpp"

namespace memrw::nn {

// Probabilities are clamped to this band before taking logs.
inline constexpr double kProbFloor = 1e-12;

struct Expr {
  std::uint32_t id = 0;
};

class Graph {
 public:
  explicit Graph(const ParamStore& params);

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaves.
  Expr constant(Matrix value);
  Expr param(ParamId id);
  // Sum of the given columns of an embedding table (dim x vocab).
  Expr lookup_sum(ParamId table, std::span<const int> ids);

  // Linear algebra.
  Expr matmul(Expr a, Expr b);
  Expr transpose(Expr a);
  // a + b; b may also be a column (rows(a) x 1) broadcast over a's columns.
  Expr add(Expr a, Expr b);
  Expr sum(std::span<const Expr> terms);
  Expr cwise_mul(Expr a, Expr b);
  Expr scale(Expr a, double s);
  // Multiplies every entry of a by the 1 x 1 value s.
  Expr scalar_mul(Expr s, Expr a);

  // Pointwise.
  Expr tanh(Expr a);
  Expr sigmoid(Expr a);

  // Shape.
  Expr vcat(std::span<const Expr> parts);
  Expr hcat(std::span<const Expr> parts);
  Expr rows(Expr a, Index start, Index count);
  Expr gather_rows(Expr a, std::span<const Index> rows);
  Expr col(Expr a, Index j);
  Expr mean_cols(Expr a);
  // Entry i of a (column-major flattening) as 1 x 1.
  Expr pick(Expr a, Index i);
  Expr sum_all(Expr a);

  // Softmax over all entries of a, returned as an n x 1 column.
  Expr softmax(Expr a);
  // Softmax within each segment [offsets[u], offsets[u+1]) of the
  // flattened scores. Returns an N x 1 column.
  Expr segment_softmax(Expr scores, std::span<const Index> offsets);
  // Column u of the result is sum over segment u of w[i] * K.col(i).
  Expr segment_weighted_sum(Expr keys, Expr weights,
                            std::span<const Index> offsets);
  // Result[i] = w[i] * u[segment(i)].
  Expr segment_scale(Expr weights, Expr seg_values,
                     std::span<const Index> offsets);
  // Result[targets[i]] += x[i]; result has out_size rows.
  Expr scatter_add(Expr x, std::span<const int> targets, Index out_size);

  // Unidirectional LSTM over the columns of inputs (in x T) from zero
  // initial state. Gate rows are ordered input, forget, cell, output.
  // Returns the hidden states as H x T, column t aligned with input t.
  Expr lstm(Expr inputs, ParamId w_input, ParamId w_hidden, ParamId bias,
            bool reverse);

  // Losses on 1 x 1 probabilities, clamped to [kProbFloor, 1 - kProbFloor].
  Expr neg_log(Expr p);
  Expr binary_cross_entropy(Expr p, double label);

  const Matrix& value(Expr e) const;
  double scalar(Expr e) const { return value(e)(0, 0); }
  std::size_t node_count() const { return nodes_.size(); }
  // Largest |sum - 1| over every softmax output built so far, per segment
  // for segment softmax. Zero when there is none.
  double softmax_deviation() const;
  std::size_t softmax_count() const;

  // Backpropagates d(loss)/d(loss) = seed from the 1 x 1 node `loss` and
  // adds parameter gradients into `out`. May be called once per graph.
  void backward(Expr loss, Gradients& out, double seed = 1.0);

 private:
  enum class Op : std::uint8_t {
    kConstant,
    kParam,
    kLookupSum,
    kMatmul,
    kTranspose,
    kAdd,
    kAddBroadcast,
    kSum,
    kCwiseMul,
    kScale,
    kScalarMul,
    kTanh,
    kSigmoid,
    kVcat,
    kHcat,
    kRows,
    kGatherRows,
    kCol,
    kMeanCols,
    kPick,
    kSumAll,
    kSoftmax,
    kSegmentSoftmax,
    kSegmentWeightedSum,
    kSegmentScale,
    kScatterAdd,
    kLstm,
    kNegLog,
    kBce,
  };

  struct Node {
    Op op = Op::kConstant;
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    std::vector<std::uint32_t> inputs;
    std::vector<Index> aux;
    std::vector<int> ids;
    double s = 0.0;
    bool flag = false;
    ParamId pid;
    Matrix value;
    Matrix grad;
    Matrix cache1;
    Matrix cache2;
  };

  Expr push(Node n);
  const Matrix& val(std::uint32_t id) const;
  Matrix& grad_of(std::uint32_t id);
  void accumulate(std::uint32_t id, const Matrix& g);
  std::uint32_t param_node(ParamId id);
  void backward_node(std::uint32_t id);

  const ParamStore* params_;
  std::vector<Node> nodes_;
  std::unordered_map<std::size_t, std::uint32_t> param_nodes_;
  bool backward_done_ = false;
};

}  // namespace memrw::nn
