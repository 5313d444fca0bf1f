#pragma once

#include <stdexcept>
#include <string>

namespace tempmerge {

// Raised for malformed inputs, failed invariants and bad files. The CLI maps
// it to exit code 2; usage mistakes are handled by the argument parser.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tempmerge
