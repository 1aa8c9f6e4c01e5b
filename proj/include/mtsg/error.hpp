#ifndef MTSG_ERROR_HPP
#define MTSG_ERROR_HPP

#include <stdexcept>
#include <string>

namespace mtsg {

// Bad or inconsistent input data: malformed files, shape mismatches,
// constant columns where variation is required.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid parameter or configuration value supplied by the caller.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace mtsg

#endif  // MTSG_ERROR_HPP
