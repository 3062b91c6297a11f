#pragma once

#include <stdexcept>
#include <string>

namespace mumimo {

enum class ErrorKind {
  Dimension,
  NumericalFailure,
  NotHpd,
  RankDeficient,
  SelectionFailure,
  SingularGram,
  ZeroMatrix,
  ZeroSinr,
  Io,
  Config,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::NumericalFailure: return "numerical-failure";
    case ErrorKind::NotHpd: return "not-hpd";
    case ErrorKind::RankDeficient: return "rank-deficient";
    case ErrorKind::SelectionFailure: return "selection-failure";
    case ErrorKind::SingularGram: return "singular-gram";
    case ErrorKind::ZeroMatrix: return "zero-matrix";
    case ErrorKind::ZeroSinr: return "zero-sinr";
    case ErrorKind::Io: return "io";
    case ErrorKind::Config: return "config";
  }
  return "unknown";
}

/// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace mumimo
