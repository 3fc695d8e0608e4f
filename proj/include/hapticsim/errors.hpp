#pragma once

#include <stdexcept>
#include <string>

namespace hapticsim {

/// Caller passed a value outside an operation's domain (non-finite position, dt <= 0, ...).
class InputError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A configuration value violates its invariant (f_max <= 0, bad material, ...).
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// File or socket failure.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace hapticsim
