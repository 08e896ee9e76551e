#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cludi {

// Bad shapes, out-of-range configuration values, malformed grids.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A timestep (or similar) outside the domain where a formula is defined.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Non-finite intermediate values. Carries the component that produced them
// and, when known, the offending batch item.
class NumericalFailure : public std::runtime_error {
 public:
  NumericalFailure(std::string component, std::string detail, std::int64_t item = -1)
      : std::runtime_error(compose(component, detail, item)),
        component_(std::move(component)),
        item_(item) {}

  const std::string& component() const noexcept { return component_; }
  std::int64_t item() const noexcept { return item_; }

 private:
  static std::string compose(const std::string& component, const std::string& detail,
                             std::int64_t item) {
    std::string msg = component + ": " + detail;
    if (item >= 0) msg += " (item " + std::to_string(item) + ")";
    return msg;
  }

  std::string component_;
  std::int64_t item_;
};

// E·u collapsed to the zero vector, so the target embedding has no direction.
class DegenerateTarget : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed binary or text input. For binary formats the byte offset of the
// failure is recorded.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what, std::int64_t offset = -1)
      : std::runtime_error(offset >= 0 ? what + " at byte offset " + std::to_string(offset)
                                       : what),
        offset_(offset) {}

  std::int64_t offset() const noexcept { return offset_; }

 private:
  std::int64_t offset_;
};

}  // namespace cludi
