#pragma once

#include <stdexcept>
#include <string>

namespace clozeqa {

// Caller violated a documented precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Invalid or unusable configuration / corpus.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Matrix or sequence dimensions disagree; the message names the stage.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN / Inf where a finite value is required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input file is malformed or unreadable.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace clozeqa
