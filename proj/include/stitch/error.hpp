#pragma once

#include <stdexcept>
#include <string>

namespace stitch {

// Exception families map onto distinct CLI exit codes (see tools/stitchbench.cpp).

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct VerificationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace stitch
