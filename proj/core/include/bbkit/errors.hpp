#pragma once

#include <stdexcept>
#include <string>

namespace bbkit {

/// Base of every error the toolkit throws on purpose. The CLI maps the
/// concrete type onto a process exit code.
class error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration or arguments (exit code 2).
class validation_error : public error {
public:
  using error::error;
};

/// Malformed or inconsistent input data (exit code 3).
class data_error : public error {
public:
  using error::error;
};

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int validation = 2;
inline constexpr int data = 3;
inline constexpr int internal = 4;
} // namespace exit_code

} // namespace bbkit
