#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace slag {

/// Base class for every error raised by the library. The CLI maps
/// ConfigError to exit status 2 and everything else to status 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller-supplied field or parameter violates an operation's precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A field value or node is unusable (non-finite sample, tangent pole, ...).
class DomainError : public Error {
 public:
  DomainError(const std::string& what, std::size_t node)
      : Error(what), node_(node) {}
  explicit DomainError(const std::string& what) : Error(what) {}

  std::size_t node() const noexcept { return node_; }

 private:
  std::size_t node_ = static_cast<std::size_t>(-1);
};

/// Grid too small for the requested stencil.
class DomainTooSmall : public Error {
 public:
  using Error::Error;
};

/// Convexity precondition of the Legendre transform failed.
class NotConvexError : public PreconditionError {
 public:
  NotConvexError(const std::string& what, std::size_t worst_node, double modulus)
      : PreconditionError(what), worst_node_(worst_node), modulus_(modulus) {}

  std::size_t worst_node() const noexcept { return worst_node_; }
  double modulus() const noexcept { return modulus_; }

 private:
  std::size_t worst_node_;
  double modulus_;
};

/// Malformed PF1/CSV input.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t byte_offset)
      : Error(what), offset_(byte_offset) {}

  std::size_t byte_offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Invalid experiment configuration (validated before any compute).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An invariant that should hold for valid input did not (e.g. an empty
/// subdifferential of a convex field).
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace slag
