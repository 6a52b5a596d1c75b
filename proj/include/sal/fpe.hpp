#pragma once

#include "sal/grid.hpp"
#include "sal/lyapunov.hpp"

#include <Eigen/SparseCore>

#include <iosfwd>
#include <string>
#include <vector>

namespace sal {

using SparseMat = Eigen::SparseMatrix<double>;

/// Finite-volume Fokker-Planck operator: du/dt = M u, zero flux on the box boundary.
struct FpeOperator {
  Grid grid;
  double eps = 0;
  SparseMat matrix;
  // 1-D only: log(u_{i+1}/u_i) of the zero-flux state on each interior face.
  std::vector<double> face_log_ratio;
};

/// Bernoulli function z/(e^z - 1), continuous at 0.
double bernoulli(double z);

/// Exponentially fitted (Scharfetter-Gummel) drift faces, central cross-diffusion.
/// Column sums vanish, so the semi-discrete flow conserves mass.
FpeOperator assemble(const SdeSystem& sys, double eps, const Grid& grid, unsigned threads = 0);

/// Normalized nonnegative kernel vector of the operator.
/// 1-D: face-by-face zero-flux recurrence in log space. 2-D: bordered sparse LU
/// with an inverse-iteration fallback.
DensityField solve_stationary(const FpeOperator& op);

/// assemble + solve_stationary.
DensityField solve_fpe(const SdeSystem& sys, double eps, const Grid& grid, unsigned threads = 0);

/// V = -eps^2 log u shifted to min 0; NaN where u == 0.
Vec quasi_potential(const DensityField& density);

/// Relative mass outside {U < rho}, summed directly (no 1 - inside cancellation).
double superlevel_mass(const DensityField& density, const ScalarField& u, double rho);

struct IdentityCheck {
  double lhs = 0;
  double rhs = 0;
  double residual = 0;
  long boundary_samples = 0;
};

/// Compares int_S (L_eps F) u dx with the boundary flux
/// int_dS (1/2 eps^2 sum a_ij d_i F nu_j) u ds on S = {U < rho}.
IdentityCheck check_integral_identity(const DensityField& density, const SdeSystem& sys,
                                      const ScalarField& F, const ScalarField& level, double rho,
                                      int boundary_resolution = 0);

struct CoareaLevel {
  double rho = 0;
  double lhs = 0;  // d/drho of the sublevel mass, central difference
  double rhs = 0;  // int_{U = rho} u / |grad U| ds
  double rel_error = 0;
};

struct CoareaCheck {
  std::vector<CoareaLevel> levels;
  double max_rel_error = 0;
};

/// Derivative formula check on each level; levels the grid cannot resolve are rejected.
CoareaCheck coarea_check(const DensityField& density, const ScalarField& u,
                         const std::vector<double>& rho_grid, double drho = 0,
                         int boundary_resolution = 0);

/// x[,y],u rows.
void write_density_csv(std::ostream& os, const DensityField& density, const Vec& values);
/// Grid, eps and residual as a JSON object string.
std::string density_header_json(const DensityField& density, const std::string& label);

}  // namespace sal
