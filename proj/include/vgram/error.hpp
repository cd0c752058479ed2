#pragma once

#include <stdexcept>
#include <string>

namespace vgram {

// Invalid parameters, malformed content, contract violations.
class validation_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem / stream failures.
class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace vgram
