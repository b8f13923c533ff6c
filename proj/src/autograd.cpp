#include "clozeqa/autograd.hpp"

#include <cmath>
#include <unordered_set>

#include "clozeqa/error.hpp"

namespace clozeqa::ag {

void Node::accumulate(const Matrix& g) {
  if (!requires_grad) return;
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

namespace {

Var make(Matrix value, std::vector<std::shared_ptr<Node>> inputs,
         std::function<void(Node&)> bw) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  for (const auto& in : inputs) n->requires_grad = n->requires_grad || in->requires_grad;
  if (n->requires_grad) {
    n->inputs = std::move(inputs);
    n->backward = std::move(bw);
  }
  return Var(std::move(n));
}

void check(bool ok, const char* op, const std::string& detail) {
  if (!ok) throw ShapeError(std::string(op) + ": " + detail);
}

std::string dims(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

Node& in(Node& n, std::size_t i) { return *n.inputs[i]; }

}  // namespace

Var constant(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var scalar_constant(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

Var leaf(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(std::move(n));
}

void backward(const Var& root) {
  check(root.rows() == 1 && root.cols() == 1, "backward", "root must be 1x1, got " + dims(root.value()));
  if (!root.requires_grad()) return;
  // Iterative post-order DFS for a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node().get(), 0}};
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.push_back({child, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order) {
    if (n->backward) n->grad.resize(0, 0);
  }
  root.node()->grad = Matrix::Ones(1, 1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() > 0) n->backward(*n);
  }
}

Var matmul(const Var& a, const Var& b) {
  check(a.cols() == b.rows(), "matmul", dims(a.value()) + " * " + dims(b.value()));
  return make(a.value() * b.value(), {a.node(), b.node()}, [](Node& n) {
    in(n, 0).accumulate(n.grad * in(n, 1).value.transpose());
    in(n, 1).accumulate(in(n, 0).value.transpose() * n.grad);
  });
}

Var matmul_bt(const Var& a, const Var& b) {
  check(a.cols() == b.cols(), "matmul_bt", dims(a.value()) + " * (" + dims(b.value()) + ")^T");
  return make(a.value() * b.value().transpose(), {a.node(), b.node()}, [](Node& n) {
    in(n, 0).accumulate(n.grad * in(n, 1).value);
    in(n, 1).accumulate(n.grad.transpose() * in(n, 0).value);
  });
}

Var add(const Var& a, const Var& b) {
  check(a.rows() == b.rows() && a.cols() == b.cols(), "add", dims(a.value()) + " + " + dims(b.value()));
  return make(a.value() + b.value(), {a.node(), b.node()}, [](Node& n) {
    in(n, 0).accumulate(n.grad);
    in(n, 1).accumulate(n.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  check(a.rows() == b.rows() && a.cols() == b.cols(), "sub", dims(a.value()) + " - " + dims(b.value()));
  return make(a.value() - b.value(), {a.node(), b.node()}, [](Node& n) {
    in(n, 0).accumulate(n.grad);
    in(n, 1).accumulate(-n.grad);
  });
}

Var add_row(const Var& a, const Var& row) {
  check(row.rows() == 1 && row.cols() == a.cols(), "add_row", dims(a.value()) + " + " + dims(row.value()));
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return make(std::move(out), {a.node(), row.node()}, [](Node& n) {
    in(n, 0).accumulate(n.grad);
    in(n, 1).accumulate(n.grad.colwise().sum());
  });
}

Var scale(const Var& a, double s) {
  return make(a.value() * s, {a.node()}, [s](Node& n) { in(n, 0).accumulate(n.grad * s); });
}

Var gelu(const Var& a) {
  static constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  static constexpr double kA = 0.044715;
  const Matrix& x = a.value();
  Matrix t = ((x.array() + kA * x.array().cube()) * kC).tanh().matrix();
  Matrix out = (0.5 * x.array() * (1.0 + t.array())).matrix();
  return make(std::move(out), {a.node()}, [t = std::move(t)](Node& n) {
    const auto& x = in(n, 0).value.array();
    const auto dt = (1.0 - t.array().square()) * kC * (1.0 + 3.0 * kA * x.square());
    const Matrix d = (0.5 * (1.0 + t.array()) + 0.5 * x * dt).matrix();
    in(n, 0).accumulate(n.grad.cwiseProduct(d));
  });
}

Var exp(const Var& a) {
  Matrix out = a.value().array().exp().matrix();
  return make(out, {a.node()}, [out](Node& n) { in(n, 0).accumulate(n.grad.cwiseProduct(out)); });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  const auto h = x.cols();
  check(gain.rows() == 1 && gain.cols() == h && bias.rows() == 1 && bias.cols() == h, "layer_norm",
        dims(x.value()) + " with gain " + dims(gain.value()));
  const Matrix& xv = x.value();
  Matrix xhat(xv.rows(), h);
  Vector inv_std(xv.rows());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    const double mu = xv.row(r).mean();
    const double var = (xv.row(r).array() - mu).square().mean();
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (xv.row(r).array() - mu) * inv_std[r];
  }
  Matrix out = xhat;
  out.array().rowwise() *= gain.value().row(0).array();
  out.rowwise() += bias.value().row(0);
  return make(std::move(out), {x.node(), gain.node(), bias.node()},
              [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& n) {
                const auto& g = n.grad;
                const auto& gain = in(n, 1).value;
                in(n, 1).accumulate(g.cwiseProduct(xhat).colwise().sum());
                in(n, 2).accumulate(g.colwise().sum());
                if (!in(n, 0).requires_grad) return;
                Matrix dxhat = g;
                dxhat.array().rowwise() *= gain.row(0).array();
                Matrix dx(g.rows(), g.cols());
                const double hh = static_cast<double>(g.cols());
                for (Eigen::Index r = 0; r < g.rows(); ++r) {
                  const double m1 = dxhat.row(r).mean();
                  const double m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).sum() / hh;
                  dx.row(r) = (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2) * inv_std[r];
                }
                in(n, 0).accumulate(dx);
              });
}

Var softmax_rows(const Var& a) {
  Matrix out = a.value();
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double mx = out.row(r).maxCoeff();
    out.row(r) = (out.row(r).array() - mx).exp();
    out.row(r) /= out.row(r).sum();
  }
  return make(out, {a.node()}, [out](Node& n) {
    Matrix d(out.rows(), out.cols());
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      const double dot = n.grad.row(r).dot(out.row(r));
      d.row(r) = out.row(r).array() * (n.grad.row(r).array() - dot);
    }
    in(n, 0).accumulate(d);
  });
}

Var log_softmax_rows(const Var& a) {
  Matrix out = a.value();
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double mx = out.row(r).maxCoeff();
    const double lse = mx + std::log((out.row(r).array() - mx).exp().sum());
    out.row(r).array() -= lse;
  }
  return make(out, {a.node()}, [out](Node& n) {
    Matrix d(out.rows(), out.cols());
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      const double gs = n.grad.row(r).sum();
      d.row(r) = n.grad.row(r).array() - out.row(r).array().exp() * gs;
    }
    in(n, 0).accumulate(d);
  });
}

Var gather_rows(const Var& table, const std::vector<int>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), table.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    check(idx[i] >= 0 && idx[i] < table.rows(), "gather_rows",
          "index " + std::to_string(idx[i]) + " outside " + dims(table.value()));
    out.row(static_cast<Eigen::Index>(i)) = table.value().row(idx[i]);
  }
  return make(std::move(out), {table.node()}, [idx](Node& n) {
    Node& t = in(n, 0);
    Matrix d = Matrix::Zero(t.value.rows(), t.value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) d.row(idx[i]) += n.grad.row(static_cast<Eigen::Index>(i));
    t.accumulate(d);
  });
}

Var replace_rows(const Var& a, const std::vector<int>& idx, const Var& b) {
  check(b.rows() == static_cast<Eigen::Index>(idx.size()) && b.cols() == a.cols(), "replace_rows",
        dims(a.value()) + " <- " + dims(b.value()));
  Matrix out = a.value();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    check(idx[i] >= 0 && idx[i] < a.rows(), "replace_rows", "index out of range");
    out.row(idx[i]) = b.value().row(static_cast<Eigen::Index>(i));
  }
  return make(std::move(out), {a.node(), b.node()}, [idx](Node& n) {
    Matrix da = n.grad;
    Matrix db(static_cast<Eigen::Index>(idx.size()), n.grad.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      db.row(static_cast<Eigen::Index>(i)) = n.grad.row(idx[i]);
      da.row(idx[i]).setZero();
    }
    in(n, 0).accumulate(da);
    in(n, 1).accumulate(db);
  });
}

Var add_at_rows(const Var& a, const std::vector<int>& idx, const Var& delta) {
  check(delta.rows() == static_cast<Eigen::Index>(idx.size()) && delta.cols() == a.cols(),
        "add_at_rows", dims(a.value()) + " += " + dims(delta.value()));
  Matrix out = a.value();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    check(idx[i] >= 0 && idx[i] < a.rows(), "add_at_rows", "index out of range");
    out.row(idx[i]) = a.value().row(idx[i]) + delta.value().row(static_cast<Eigen::Index>(i));
  }
  return make(std::move(out), {a.node(), delta.node()}, [idx](Node& n) {
    in(n, 0).accumulate(n.grad);
    Matrix dd(static_cast<Eigen::Index>(idx.size()), n.grad.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) dd.row(static_cast<Eigen::Index>(i)) = n.grad.row(idx[i]);
    in(n, 1).accumulate(dd);
  });
}

Var slice_rows(const Var& a, int begin, int count) {
  check(begin >= 0 && count >= 0 && begin + count <= a.rows(), "slice_rows", "range outside " + dims(a.value()));
  return make(a.value().middleRows(begin, count), {a.node()}, [begin, count](Node& n) {
    Matrix d = Matrix::Zero(in(n, 0).value.rows(), in(n, 0).value.cols());
    d.middleRows(begin, count) = n.grad;
    in(n, 0).accumulate(d);
  });
}

Var slice_cols(const Var& a, int begin, int count) {
  check(begin >= 0 && count >= 0 && begin + count <= a.cols(), "slice_cols", "range outside " + dims(a.value()));
  return make(a.value().middleCols(begin, count), {a.node()}, [begin, count](Node& n) {
    Matrix d = Matrix::Zero(in(n, 0).value.rows(), in(n, 0).value.cols());
    d.middleCols(begin, count) = n.grad;
    in(n, 0).accumulate(d);
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  check(!parts.empty(), "concat_cols", "no inputs");
  Eigen::Index total = 0;
  for (const auto& p : parts) {
    check(p.rows() == parts[0].rows(), "concat_cols", "row mismatch");
    total += p.cols();
  }
  Matrix out(parts[0].rows(), total);
  std::vector<std::shared_ptr<Node>> nodes;
  std::vector<Eigen::Index> widths;
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
    nodes.push_back(p.node());
    widths.push_back(p.cols());
  }
  return make(std::move(out), std::move(nodes), [widths](Node& n) {
    Eigen::Index c = 0;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      in(n, i).accumulate(n.grad.middleCols(c, widths[i]));
      c += widths[i];
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  check(!parts.empty(), "concat_rows", "no inputs");
  Eigen::Index total = 0;
  for (const auto& p : parts) {
    check(p.cols() == parts[0].cols(), "concat_rows", "column mismatch");
    total += p.rows();
  }
  Matrix out(total, parts[0].cols());
  std::vector<std::shared_ptr<Node>> nodes;
  std::vector<Eigen::Index> heights;
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
    nodes.push_back(p.node());
    heights.push_back(p.rows());
  }
  return make(std::move(out), std::move(nodes), [heights](Node& n) {
    Eigen::Index r = 0;
    for (std::size_t i = 0; i < heights.size(); ++i) {
      in(n, i).accumulate(n.grad.middleRows(r, heights[i]));
      r += heights[i];
    }
  });
}

Var pick(const Var& a, const std::vector<std::pair<int, int>>& cells) {
  Matrix out(static_cast<Eigen::Index>(cells.size()), 1);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto [r, c] = cells[i];
    check(r >= 0 && r < a.rows() && c >= 0 && c < a.cols(), "pick", "cell outside " + dims(a.value()));
    out(static_cast<Eigen::Index>(i), 0) = a.value()(r, c);
  }
  return make(std::move(out), {a.node()}, [cells](Node& n) {
    Matrix d = Matrix::Zero(in(n, 0).value.rows(), in(n, 0).value.cols());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      d(cells[i].first, cells[i].second) += n.grad(static_cast<Eigen::Index>(i), 0);
    }
    in(n, 0).accumulate(d);
  });
}

Var sum(const Var& a) {
  Matrix out(1, 1);
  // Sequential row-major accumulation keeps the summation order explicit.
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.value().size(); ++i) s += a.value().data()[i];
  out(0, 0) = s;
  return make(std::move(out), {a.node()}, [](Node& n) {
    in(n, 0).accumulate(Matrix::Constant(in(n, 0).value.rows(), in(n, 0).value.cols(), n.grad(0, 0)));
  });
}

Var mean(const Var& a) {
  check(a.value().size() > 0, "mean", "empty input");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var logsumexp(const Var& a) {
  check(a.value().size() > 0, "logsumexp", "empty input");
  const double mx = a.value().maxCoeff();
  const Matrix shifted = (a.value().array() - mx).exp().matrix();
  const double s = shifted.sum();
  Matrix out(1, 1);
  out(0, 0) = mx + std::log(s);
  Matrix soft = shifted / s;
  return make(std::move(out), {a.node()}, [soft = std::move(soft)](Node& n) {
    in(n, 0).accumulate(soft * n.grad(0, 0));
  });
}

}  // namespace clozeqa::ag
