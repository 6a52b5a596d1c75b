#pragma once

#include "sal/experiments.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace sal {

/// Fully resolved run configuration; round-trips through JSON.
struct RunConfig {
  ModelSpec model;
  SimConfig sim;

  struct Scan {
    std::vector<double> eps = default_eps_grid();
    std::string source = "mc";
    int grid_cells = 256;
    int knn_k = 4;
    double delta = 0.01;
    std::vector<double> deltas = {0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001};
    double delta_eps = 0;
    double alpha = 0.5;
    double tail_eps = 0.1;
    std::vector<double> r;  // empty selects radii from the tail itself
  } scan;

  struct Fpe {
    double eps = 0.1;
    int cells = 256;
    std::vector<double> box;  // lower..., upper...; empty selects the state box
  } fpe;

  struct Lyapunov {
    std::string candidate = "auto";
    std::string check = "auto";  // auto | strong | fpe | weak | class_bstar
    std::vector<double> eps = {0.1};
    long samples = 10000;
    std::uint64_t seed = 7;
    double r_inner = -1, r_outer = -1;  // annulus; negative selects the model default
    double exclude_radius = -1;         // negative selects h_A
    double rho_m = -1;                  // fpe/weak region {U >= rho_m}; negative selects a default
    double p = 1.0;                     // class-B* exponent
  } lyapunov;

  struct Identity {
    std::string field = "squared_norm";
    std::string level = "";  // empty: same as field
    double rho = 1.0;
    std::vector<double> levels;  // coarea levels; empty selects mass quantiles
  } identity;

  AttractorSampling attractor;
  std::string output;
  bool plots = false;
};

Json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const Json& j);

/// Canonical model kind for a user-facing name (ou, lc, toggle, ...).
std::string canonical_model_kind(const std::string& name);

/// Lyapunov candidate by name for a system.
ScalarField make_candidate(const std::string& name, const SdeSystem& sys);

/// Runs one CLI invocation; returns the process exit code.
/// 0 ok, 2 validation error, 3 numerical failure, 4 failed check (report).
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, const char* const* argv);

}  // namespace sal
