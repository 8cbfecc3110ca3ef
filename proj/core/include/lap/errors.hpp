#pragma once

#include <stdexcept>
#include <string>

namespace lap {

// Bad user input: malformed files, out-of-range sentences, config mistakes.
// The CLI maps this to exit code 1.
struct InputError : std::runtime_error {
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Training produced a non-finite loss. The CLI maps this to exit code 2.
struct DivergenceError : std::runtime_error {
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace lap
