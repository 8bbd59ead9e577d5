#pragma once

#include <stdexcept>
#include <string>

namespace cellscope {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument violated an operation's precondition.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A file could not be read, decoded, or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A representative (or a generated library) violates the 2r via separation.
class DegenerateLibraryError : public Error {
 public:
  DegenerateLibraryError(std::string type_id, const std::string& what)
      : Error(what), type_id_(std::move(type_id)) {}

  const std::string& type_id() const noexcept { return type_id_; }

 private:
  std::string type_id_;
};

}  // namespace cellscope
