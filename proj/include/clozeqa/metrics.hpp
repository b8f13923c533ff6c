#pragma once

#include <string>
#include <vector>

#include "clozeqa/dataset.hpp"

namespace clozeqa {

// Bag-of-tokens F1 after lowercasing. Empty prediction scores 0; an empty
// gold sequence is a ContractError.
double token_f1(const std::vector<std::string>& predicted, const std::vector<std::string>& gold);

// Fraction of examples with |pred.start - gold.start| < n_w, so n_w = 1 is
// exact first-token match.
double window_accuracy(const std::vector<Span>& predictions, const std::vector<Span>& golds,
                       int n_w);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

MeanStd mean_std(const std::vector<double>& values);

// "70.00%±6.32" for fractions 0.70 and 0.0632.
std::string format_mean_std(const MeanStd& m);

}  // namespace clozeqa
