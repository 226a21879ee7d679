#pragma once

#include <stdexcept>
#include <string>

namespace fixedlens {

// Root of every error raised by the library. Catch this to handle all of them.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation (e.g. object at the focal point).
class DomainError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Readable file whose content is not a supported raster layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class DegenerateError : public Error {
 public:
  using Error::Error;
};

class SingularError : public Error {
 public:
  using Error::Error;
};

class MatchError : public Error {
 public:
  using Error::Error;
};

class EmptyStackError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

// Dot detection failure. When raised from a stack, slice_index names the offending slice.
class DetectionError : public Error {
 public:
  explicit DetectionError(const std::string& what, int slice_index = -1)
      : Error(slice_index < 0 ? what : "slice " + std::to_string(slice_index) + ": " + what),
        slice_index_(slice_index) {}

  int slice_index() const noexcept { return slice_index_; }

 private:
  int slice_index_;
};

}  // namespace fixedlens
