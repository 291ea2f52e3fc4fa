#include "flatcrit/error.hpp"

namespace flatcrit {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::NonMonotoneSurgery: return "NonMonotoneSurgery";
    case ErrorKind::CriticalPoint: return "CriticalPoint";
    case ErrorKind::NotFlat: return "NotFlat";
    case ErrorKind::OutsideWindow: return "OutsideWindow";
    case ErrorKind::NoFixedPoint: return "NoFixedPoint";
    case ErrorKind::NotNice: return "NotNice";
    case ErrorKind::BudgetExceeded: return "BudgetExceeded";
    case ErrorKind::ToleranceFailure: return "ToleranceFailure";
    case ErrorKind::OutsideInterval: return "OutsideInterval";
    case ErrorKind::OutsideBranch: return "OutsideBranch";
    case ErrorKind::Divergent: return "Divergent";
    case ErrorKind::NoSignChange: return "NoSignChange";
    case ErrorKind::TailDominated: return "TailDominated";
    case ErrorKind::DegenerateObservable: return "DegenerateObservable";
    case ErrorKind::InsufficientSignal: return "InsufficientSignal";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ValidationError: return "ValidationError";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

}  // namespace flatcrit
