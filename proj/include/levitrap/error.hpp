#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace levitrap {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Argument outside an operation's domain (negative mass, empty series...).
class InvalidInput : public Error {
  public:
    using Error::Error;
};

/// The linear-oscillator propagator only covers the underdamped regime.
class UnsupportedRegime : public Error {
  public:
    using Error::Error;
};

/// Inconsistent simulation or scenario configuration.
class ConfigError : public Error {
  public:
    using Error::Error;
};

class IoError : public Error {
  public:
    using Error::Error;
};

/// Malformed input file; carries the 1-based line number (0 when unknown).
class ParseError : public Error {
  public:
    ParseError(const std::string& what, std::size_t line)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

}  // namespace levitrap
