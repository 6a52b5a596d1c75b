#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sal {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Points = Eigen::MatrixXd;  // one point per row

/// Invalid user input: bad parameters, unknown model kind, malformed config.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure: blow-up, solver non-convergence, degenerate geometry.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kPi = 3.14159265358979323846;

inline bool all_finite(const Eigen::Ref<const Vec>& v) { return v.allFinite(); }

}  // namespace sal
