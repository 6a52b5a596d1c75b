#pragma once

#include "sal/systems.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace sal {

struct SimConfig {
  double dt = 1e-3;
  double burn_T = 100;
  long n_traj = 100;
  long samples_per_traj = 1000;
  double thin_T = 1.0;
  std::uint64_t master_seed = 20240521;
  double eps = 0.1;
  double eps_star = 1.0;
  unsigned threads = 0;
};

void validate(const SimConfig& cfg);

struct EnsembleSample {
  Points points;                       // n_traj * samples_per_traj rows
  std::vector<std::int64_t> traj;      // trajectory index per row
  std::vector<double> time;            // simulated time per row
  SimConfig config;
  std::string system_label;
  double lag_autocorrelation = 0;      // of |X| at lag thin_T, pooled over trajectories
  bool flagged = false;                // autocorrelation >= 0.2

  double eps() const { return config.eps; }
  Eigen::Index size() const { return points.rows(); }
};

/// x + f(x) dt + eps sigma(x) sqrt(dt) z, in place. Throws NumericalError on non-finite results.
void em_step(const SdeSystem& sys, Eigen::Ref<Vec> x, double dt, double eps,
             const Eigen::Ref<const Vec>& gauss_draws);

/// Burn-in from a uniform start in the state box, then one draw every thin_T.
/// Trajectory i draws from the stream (master_seed, i), so the result does not
/// depend on the worker count.
EnsembleSample stationary_sample(const SdeSystem& sys, const SimConfig& cfg);

/// CSV with header x1..xn,traj,t.
void write_ensemble_csv(std::ostream& os, const EnsembleSample& sample);

}  // namespace sal
