#include "clozeqa/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace clozeqa {

AdamW::AdamW(std::vector<Parameter>& params, AdamWConfig config)
    : params_(params), cfg_(config) {
  for (const auto& p : params_) {
    m_.push_back(Matrix::Zero(p.var.rows(), p.var.cols()));
    v_.push_back(Matrix::Zero(p.var.rows(), p.var.cols()));
  }
}

double AdamW::learning_rate(ParamGroup group, long step) const {
  if (group == ParamGroup::Backbone) return cfg_.lr_backbone;
  const double warmup = cfg_.warmup_fraction * static_cast<double>(cfg_.total_steps);
  if (warmup <= 0.0) return cfg_.lr_new_modules;
  return cfg_.lr_new_modules * std::min(1.0, static_cast<double>(step + 1) / warmup);
}

void AdamW::step() {
  const double t = static_cast<double>(step_ + 1);
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& node = *params_[i].var.node();
    const double lr = learning_rate(params_[i].group, step_);
    if (lr > 0.0 && cfg_.weight_decay > 0.0) node.value *= 1.0 - lr * cfg_.weight_decay;
    if (node.grad.size() == 0) continue;
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * node.grad;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * node.grad.cwiseAbs2();
    node.value.array() -= lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + cfg_.eps);
    node.grad.resize(0, 0);
  }
  ++step_;
}

}  // namespace clozeqa
