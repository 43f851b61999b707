#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace truncgen {

// Precondition violations on pure operations (shapes, ranges).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Model file missing, unreadable or structurally invalid.
class BackendLoadError : public BackendError {
 public:
  using BackendError::BackendError;
};

// A backend was handed (or produced) a tensor of the wrong shape.
class BackendContractError : public BackendError {
 public:
  using BackendError::BackendError;
};

class NotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Conflict : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AuthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Verdicts that reference image ids absent from the logs.
class DanglingVerdicts : public std::runtime_error {
 public:
  explicit DanglingVerdicts(std::vector<std::string> ids);
  const std::vector<std::string>& ids() const noexcept { return ids_; }

 private:
  std::vector<std::string> ids_;
};

}  // namespace truncgen
