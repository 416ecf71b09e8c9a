#pragma once

#include <stdexcept>
#include <string>

namespace kamred {

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A weighted-norm term left the floating range (strip too wide for the stored modes).
struct OverflowError : Error {
  using Error::Error;
};

/// Winding computation hit a near-singular first column even after refinement.
struct NearSingularError : Error {
  using Error::Error;
};

/// An iterative estimator failed its own convergence test.
struct NonConvergenceError : Error {
  using Error::Error;
};

/// A cohomological divisor fell below the hard floor (an unremoved resonance).
struct SmallDivisorError : Error {
  using Error::Error;
};

/// A KAM step bound failed by more than the allowed slack; carries the measured norms.
struct ContractViolationError : Error {
  double measured = 0.0;
  double bound = 0.0;
  ContractViolationError(const std::string& what, double measured_, double bound_)
      : Error(what), measured(measured_), bound(bound_) {}
};

/// Real matrix logarithm requested for trace <= -2.
struct LogBranchError : Error {
  using Error::Error;
};

/// Entry smallness condition for the KAM iteration failed.
struct SmallnessError : Error {
  using Error::Error;
};

/// Wavepacket mass reached the truncated lattice boundary.
struct BoundaryContaminationError : Error {
  using Error::Error;
};

/// Homogeneity measurement over an empty spectrum indicator.
struct EmptySpectrumError : Error {
  using Error::Error;
};

/// Hyperbolicity certificate margin in the inconclusive band.
struct InconclusiveError : Error {
  double margin = 0.0;
  InconclusiveError(const std::string& what, double margin_) : Error(what), margin(margin_) {}
};

/// Invalid run configuration; names the violated constraint.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace kamred
