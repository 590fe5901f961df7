#pragma once

#include <stdexcept>
#include <string>

namespace symbox {

// Non-finite value produced by a tape operation; carries the op name.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& op, const std::string& what)
      : std::runtime_error("numeric error in '" + op + "': " + what), op_(op) {}
  const std::string& op() const { return op_; }

 private:
  std::string op_;
};

// Angle code whose decode accumulators are both below threshold.
class DegenerateCodeError : public std::runtime_error {
 public:
  DegenerateCodeError() : std::runtime_error("degenerate angle code: zero accumulator") {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace symbox
