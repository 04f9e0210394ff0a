#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace dclab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Thrown when a numerical routine fails to produce a usable result
// (eigensolver non-convergence, overflow in the forward process, ...).
class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown on malformed inputs and violated preconditions.
class InvalidInput : public std::invalid_argument {
public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

inline constexpr const char* kArtifactVersion = "dclab 0.1.0";

}  // namespace dclab
