#pragma once

#include <stdexcept>
#include <string>

namespace petal {

// Raised for malformed inputs, violated preconditions and invalid
// configurations. Anything else escaping the library is an internal fault.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace petal
