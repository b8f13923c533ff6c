#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "clozeqa/autograd.hpp"
#include "clozeqa/model.hpp"

namespace testing {

struct GradCheck {
  double max_rel = 0.0;
  std::string worst;
  std::size_t checked = 0;
  std::map<std::string, double> per_param;  // max relative error per tensor
  std::map<std::string, double> grad_norm;  // analytic gradient norm per tensor
};

// Central differences over every entry of every parameter. Relative error is
// |a - n| / max(|a|, |n|, floor); the floor keeps entries whose true
// gradient is ~0 from dividing rounding noise by ~0.
template <class LossFn>
GradCheck grad_check(clozeqa::Model& model, LossFn loss, double step = 1e-5, double floor = 1e-6) {
  model.zero_grad();
  clozeqa::ag::backward(loss());
  GradCheck out;
  for (auto& p : model.parameters()) {
    auto& node = *p.var.node();
    const clozeqa::Matrix analytic =
        node.grad.size() ? node.grad : clozeqa::Matrix::Zero(node.value.rows(), node.value.cols());
    out.grad_norm[p.name] = analytic.norm();
    double worst = 0.0;
    for (Eigen::Index i = 0; i < node.value.size(); ++i) {
      const double saved = node.value.data()[i];
      node.value.data()[i] = saved + step;
      const double up = loss().scalar();
      node.value.data()[i] = saved - step;
      const double down = loss().scalar();
      node.value.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic.data()[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      worst = std::max(worst, rel);
      if (rel > out.max_rel) {
        out.max_rel = rel;
        out.worst = p.name + "[" + std::to_string(i) + "]";
      }
      ++out.checked;
    }
    out.per_param[p.name] = worst;
  }
  model.zero_grad();
  return out;
}

}  // namespace testing
