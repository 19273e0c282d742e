#pragma once

#include <stdexcept>
#include <string>

namespace playcall {

// Parameter or covariate vector has the wrong length for the model.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input outside the domain of an operation (empty sequence, empty list, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A documented precondition does not hold (e.g. too few plays to identify a model).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Every optimizer start failed. The message carries per-start diagnostics.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// All candidate fits in a forward-selection round failed.
class SelectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input file is missing a required column or is otherwise unusable.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace playcall
