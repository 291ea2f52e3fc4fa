#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace flatcrit {

enum class ErrorKind {
  InvalidSpec,
  NonMonotoneSurgery,
  CriticalPoint,
  NotFlat,
  OutsideWindow,
  NoFixedPoint,
  NotNice,
  BudgetExceeded,
  ToleranceFailure,
  OutsideInterval,
  OutsideBranch,
  Divergent,
  NoSignChange,
  TailDominated,
  DegenerateObservable,
  InsufficientSignal,
  ParseError,
  ValidationError,
  Io,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace flatcrit
