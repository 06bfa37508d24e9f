#pragma once

#include <stdexcept>
#include <string>

namespace anycam {

// Bad user-facing input: malformed files, invalid configuration values,
// out-of-contract arguments. The CLI maps this to exit code 1.
class input_error : public std::runtime_error {
  public:
    explicit input_error(const std::string &msg) : std::runtime_error(msg) {}
};

// Numerical failure during optimization (non-finite losses, degenerate
// alignment). The CLI maps this to exit code 2.
class numerical_error : public std::runtime_error {
  public:
    explicit numerical_error(const std::string &msg) : std::runtime_error(msg) {}
};

} // namespace anycam
