#include "clozeqa/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>

#include "clozeqa/error.hpp"
#include "clozeqa/lexicon.hpp"

namespace clozeqa {

double token_f1(const std::vector<std::string>& predicted, const std::vector<std::string>& gold) {
  if (gold.empty()) throw ContractError("token_f1: empty gold answer");
  if (predicted.empty()) return 0.0;
  std::map<std::string, int> counts;
  for (const auto& g : gold) ++counts[lexicon::to_lower(g)];
  int overlap = 0;
  for (const auto& p : predicted) {
    auto it = counts.find(lexicon::to_lower(p));
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  const double precision = static_cast<double>(overlap) / static_cast<double>(predicted.size());
  const double recall = static_cast<double>(overlap) / static_cast<double>(gold.size());
  return 2.0 * precision * recall / (precision + recall);
}

double window_accuracy(const std::vector<Span>& predictions, const std::vector<Span>& golds,
                       int n_w) {
  if (predictions.size() != golds.size()) {
    throw ContractError("window_accuracy: " + std::to_string(predictions.size()) +
                        " predictions for " + std::to_string(golds.size()) + " golds");
  }
  if (n_w < 1) throw ContractError("window_accuracy: n_w must be >= 1");
  if (predictions.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (std::abs(predictions[i].start - golds[i].start) < n_w) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd r;
  if (values.empty()) return r;
  double s = 0.0;
  for (double v : values) s += v;
  r.mean = s / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - r.mean) * (v - r.mean);
  r.stddev = std::sqrt(ss / static_cast<double>(values.size()));
  return r;
}

std::string format_mean_std(const MeanStd& m) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f%%±%.2f", 100.0 * m.mean, 100.0 * m.stddev);
  return buf;
}

}  // namespace clozeqa
