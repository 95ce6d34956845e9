#pragma once

#include <stdexcept>
#include <string>

namespace e4g {

// Base class for all structured errors thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes or extents incompatible with an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values (hyperparameters, filter band edges, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or contract-violating data (labels, annotations, mixes, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

// File I/O failures and corrupt on-disk artifacts.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace e4g
