#pragma once

#include <Eigen/Dense>

namespace clozeqa {

// All numerics run in 64-bit; row-major so that a row is one token.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace clozeqa
