#pragma once

#include <stdexcept>
#include <string>

namespace patience {

// Base for every domain error raised by the library. The CLI maps these to
// exit code 1 and the service maps them by subclass to HTTP statuses.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class KbError : public Error {
 public:
  using Error::Error;
};

class ProbError : public Error {
 public:
  using Error::Error;
};

class BackendError : public Error {
 public:
  using Error::Error;
};

// Transport-level failure after all retries; callers may retry later.
class BackendUnavailable : public BackendError {
 public:
  using BackendError::BackendError;
};

// Strict-mode scripted backend had no entry for a request fingerprint.
class ScriptedMiss : public BackendError {
 public:
  using BackendError::BackendError;
};

// The generator produced no usable question; the engine ends the session.
class EmptyPool : public BackendError {
 public:
  using BackendError::BackendError;
};

class EngineError : public Error {
 public:
  using Error::Error;
};

class CaseError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace patience
