#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>
#include <string_view>

namespace qvelab {

using Complex = std::complex<double>;
using RVec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;
using Pattern = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr double kPi = 3.14159265358979323846;

enum class ErrorCode {
  InvalidArgument,
  AsymmetricKernel,
  NegativeEntry,
  BadWeights,
  DimensionTooLarge,
  EmptyBlock,
  MaxIterExceeded,
  SingularJacobian,
  Diverged,
  DegenerateTop,
  NotIsolated,
  GapTooSmall,
  SingularB,
  ZeroPsi,
  NoSupport,
  WindowTooSmall,
  FitDiverged,
  PerturbationTooLarge,
  NotSmallAlpha,
  NonPositiveInput,
  Io,
};

std::string_view to_string(ErrorCode code);

// Every failure in the library is reported through this type. Validation
// errors (bad input) and numeric failures are distinguished by is_validation().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  bool is_validation() const noexcept;

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::AsymmetricKernel: return "AsymmetricKernel";
    case ErrorCode::NegativeEntry: return "NegativeEntry";
    case ErrorCode::BadWeights: return "BadWeights";
    case ErrorCode::DimensionTooLarge: return "DimensionTooLarge";
    case ErrorCode::EmptyBlock: return "EmptyBlock";
    case ErrorCode::MaxIterExceeded: return "MaxIterExceeded";
    case ErrorCode::SingularJacobian: return "SingularJacobian";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::DegenerateTop: return "DegenerateTop";
    case ErrorCode::NotIsolated: return "NotIsolated";
    case ErrorCode::GapTooSmall: return "GapTooSmall";
    case ErrorCode::SingularB: return "SingularB";
    case ErrorCode::ZeroPsi: return "ZeroPsi";
    case ErrorCode::NoSupport: return "NoSupport";
    case ErrorCode::WindowTooSmall: return "WindowTooSmall";
    case ErrorCode::FitDiverged: return "FitDiverged";
    case ErrorCode::PerturbationTooLarge: return "PerturbationTooLarge";
    case ErrorCode::NotSmallAlpha: return "NotSmallAlpha";
    case ErrorCode::NonPositiveInput: return "NonPositiveInput";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

inline bool Error::is_validation() const noexcept {
  switch (code_) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::AsymmetricKernel:
    case ErrorCode::NegativeEntry:
    case ErrorCode::BadWeights:
    case ErrorCode::DimensionTooLarge:
    case ErrorCode::EmptyBlock:
    case ErrorCode::NonPositiveInput:
    case ErrorCode::Io:
      return true;
    default:
      return false;
  }
}

}  // namespace qvelab
