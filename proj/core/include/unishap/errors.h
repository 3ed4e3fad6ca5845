#ifndef UNISHAP_ERRORS_H_
#define UNISHAP_ERRORS_H_

#include <stdexcept>
#include <string>

namespace unishap {

// Root of the library's error hierarchy. Argument precondition violations use
// std::invalid_argument instead.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad experiment configuration: unknown names, unreadable files, bad flags.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A game failed to produce a value.
class GameError : public Error {
 public:
  using Error::Error;
};

// The request is valid but exceeds what the routine supports (e.g. d too
// large for an exhaustive oracle).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

// External game subprocess errors.
class ProtocolError : public GameError {
 public:
  ProtocolError(const std::string& what, long line)
      : GameError(what + " (response line " + std::to_string(line) + ")"),
        line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

class ProcessExitError : public GameError {
 public:
  using GameError::GameError;
};

class TimeoutError : public GameError {
 public:
  using GameError::GameError;
};

}  // namespace unishap

#endif  // UNISHAP_ERRORS_H_
