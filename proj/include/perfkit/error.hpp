#pragma once

#include <stdexcept>
#include <string>

namespace perfkit {

// Base for every error raised by the library. Modules derive their own
// types so callers can tell a malformed dump from a refused MSR write.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace perfkit
