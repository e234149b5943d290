#pragma once

#include <stdexcept>
#include <string>

namespace edgepipe {

// Input whose shape or content is wrong: schema mismatch, unparseable file,
// foreign scan token. Maps to exit code 3 in the CLI.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem or socket failure. Maps to exit code 2 in the CLI.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace edgepipe
