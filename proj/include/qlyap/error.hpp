#ifndef QLYAP_ERROR_HPP
#define QLYAP_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace qlyap {

enum class ErrorKind {
  InvalidOperator,
  NotHermitian,
  InvalidParam,
  InvalidState,
  DegenerateState,
  NumericalOverflow,
  DomainEscape,
  InvalidCharacter,
  NotLinear,
  DegreeExceeded,
  InvalidConfig,
};

inline std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidOperator: return "InvalidOperator";
    case ErrorKind::NotHermitian: return "NotHermitian";
    case ErrorKind::InvalidParam: return "InvalidParam";
    case ErrorKind::InvalidState: return "InvalidState";
    case ErrorKind::DegenerateState: return "DegenerateState";
    case ErrorKind::NumericalOverflow: return "NumericalOverflow";
    case ErrorKind::DomainEscape: return "DomainEscape";
    case ErrorKind::InvalidCharacter: return "InvalidCharacter";
    case ErrorKind::NotLinear: return "NotLinear";
    case ErrorKind::DegreeExceeded: return "DegreeExceeded";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace qlyap

#endif  // QLYAP_ERROR_HPP
