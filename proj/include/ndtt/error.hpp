#pragma once

#include <stdexcept>
#include <string>

namespace ndtt {

enum class ErrorKind {
  Syntax,
  RangeRestrictionViolation,
  CyclicDeduction,
  UnstratifiedNegation,
  DuplicateDeclaration,
  BadAnnotation,
  ShapeConflict,
  UnsupportedExtension,
  DataMismatch,
  NumericFailure,
  Internal,
};

// 1-based source position; line == 0 means "no location".
struct SourcePos {
  int line = 0;
  int column = 0;
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& message, SourcePos pos = {})
      : std::runtime_error(format(kind, message, pos)), kind_(kind), pos_(pos) {}

  ErrorKind kind() const { return kind_; }
  SourcePos pos() const { return pos_; }

  static const char* kind_name(ErrorKind k);

private:
  static std::string format(ErrorKind kind, const std::string& message, SourcePos pos);

  ErrorKind kind_;
  SourcePos pos_;
};

}  // namespace ndtt
