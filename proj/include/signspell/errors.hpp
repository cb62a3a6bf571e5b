#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace signspell {

/// Base for every error raised by the library. The category drives the
/// command-line exit code.
class Error : public std::runtime_error {
 public:
  enum class Category { kUsage, kIo, kFormat, kDivergence };

  Error(Category category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  Category category() const noexcept { return category_; }

 private:
  Category category_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(Category::kUsage, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(Category::kIo, what) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(Category::kFormat, what) {}
};

class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& what)
      : Error(Category::kDivergence, what) {}
};

/// Raised for frames that break the landmark invariants.
class InvalidFrameError : public FormatError {
 public:
  using FormatError::FormatError;
};

class UnknownLabelError : public FormatError {
 public:
  explicit UnknownLabelError(std::string token)
      : FormatError("unknown label '" + token + "'"), token_(std::move(token)) {}

  const std::string& token() const noexcept { return token_; }

 private:
  std::string token_;
};

}  // namespace signspell
