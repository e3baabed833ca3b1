#pragma once

#include <stdexcept>

namespace congestsim {

/// An algorithm overran its analytic phase bound; indicates a parameter or
/// properness violation on the input, never patched silently.
class RoundCapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A zero-conflict element was absent at range exhaustion.
class NoFreeElementError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace congestsim
