#pragma once

#include <stdexcept>
#include <string>

namespace stcseg {

// Raised for violated preconditions and malformed inputs. The CLI maps it to
// exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace stcseg
