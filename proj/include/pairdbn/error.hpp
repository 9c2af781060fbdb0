#pragma once

#include <stdexcept>
#include <string>

namespace pairdbn {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad flags, bad config values, violated preconditions on parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data that cannot be processed (malformed files, inconsistent streams).
class DataError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

class ParseError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace pairdbn
