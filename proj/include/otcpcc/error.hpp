#pragma once

#include <stdexcept>
#include <string>

namespace otcpcc {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes or dimensions of the inputs do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A weight vector, coordinate or parameter violates its domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed label tree, CSV or weight file.
class ParseError : public Error {
 public:
  using Error::Error;
};

// A solver ran past its wall-clock budget.
class TimeoutError : public Error {
 public:
  using Error::Error;
};

}  // namespace otcpcc
