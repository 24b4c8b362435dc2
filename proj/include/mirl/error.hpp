#ifndef MIRL_ERROR_HPP_
#define MIRL_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace mirl {

// Invalid configuration, malformed input files, dimension mismatches.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values encountered during training or gradient computation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller violated a documented precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace mirl

#endif  // MIRL_ERROR_HPP_
