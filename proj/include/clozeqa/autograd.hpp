#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "clozeqa/tensor.hpp"

// Minimal reverse-mode differentiation over dense row-major matrices.
//
// Every op returns a Var wrapping a graph node; backward() walks the graph in
// reverse topological order. Leaf parameters keep their gradient buffers
// across calls so that a batch accumulates before the optimizer step.
namespace clozeqa::ag {

struct Node {
  Matrix value;
  Matrix grad;  // empty until something flows in
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  void accumulate(const Matrix& g);
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  const Matrix& value() const { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double scalar() const { return node_->value(0, 0); }
  bool requires_grad() const { return node_->requires_grad; }
  const std::shared_ptr<Node>& node() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node> node_;
};

Var constant(Matrix value);
Var scalar_constant(double v);
// A leaf that collects gradient (a trainable tensor).
Var leaf(Matrix value);

// Seeds d(root)/d(root) = 1 for a 1x1 root and accumulates into all leaves.
void backward(const Var& root);

Var matmul(const Var& a, const Var& b);
Var matmul_bt(const Var& a, const Var& b);  // a * b^T
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var add_row(const Var& a, const Var& row);  // broadcast a 1xC row over every row of a
Var scale(const Var& a, double s);
Var gelu(const Var& a);  // tanh approximation
Var exp(const Var& a);
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);
Var softmax_rows(const Var& a);
Var log_softmax_rows(const Var& a);

// out.row(i) = table.row(idx[i]); gradient scatters back.
Var gather_rows(const Var& table, const std::vector<int>& idx);
// Copy of `a` with rows idx[i] replaced by rows i of `b`.
Var replace_rows(const Var& a, const std::vector<int>& idx, const Var& b);
// Copy of `a` with rows i of `delta` added to rows idx[i].
Var add_at_rows(const Var& a, const std::vector<int>& idx, const Var& delta);
Var slice_rows(const Var& a, int begin, int count);
Var slice_cols(const Var& a, int begin, int count);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);

// Column vector of a(r, c) for each requested (r, c).
Var pick(const Var& a, const std::vector<std::pair<int, int>>& cells);
Var sum(const Var& a);   // 1x1
Var mean(const Var& a);  // 1x1
// log(sum(exp(a))) over all entries, max-shifted; 1x1.
Var logsumexp(const Var& a);

}  // namespace clozeqa::ag
