#pragma once

#include <stdexcept>

namespace ctmed {

// Malformed config file, unusable flag combination, bad input data file.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Nuisance model fitting failed (degenerate design, zero residual variance).
struct fit_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A non-finite value appeared where a finite one is required.
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ctmed
