#pragma once

#include "sal/attractor.hpp"
#include "sal/fpe.hpp"
#include "sal/measures.hpp"
#include "sal/sde_engine.hpp"

#include <json.hpp>

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace sal {

using Json = nlohmann::ordered_json;

/// Half-decade grid 0.2 ... 0.025.
std::vector<double> default_eps_grid();

struct ScanPoint {
  double eps = 0;
  double value = 0;
  double stderr_ = 0;
  std::string source;  // mc | fpe
  double r = 0;        // tail scans: radius of the row
};

struct ScanResult {
  std::string quantity;
  std::string system_label;
  std::string model;  // model kind, used in file names
  std::vector<ScanPoint> points;
  Json provenance = Json::object();

  std::vector<double> eps() const;
  std::vector<double> values() const;
};

struct PowerLawFit {
  std::string mode;  // loglog | lin_in_logeps
  double slope = 0;
  double intercept = 0;
  double r_squared = 0;
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();  // (slope, intercept)
  double slope_stderr() const { return std::sqrt(covariance(0, 0)); }
};

/// Least squares y = intercept + slope x with parameter covariance.
PowerLawFit fit_line(const std::vector<double>& x, const std::vector<double>& y, std::string mode);

/// loglog: log value against log eps. lin_in_logeps: value against log eps.
PowerLawFit fit_power_law(const ScanResult& scan, const std::string& mode);

struct ScanCheck {
  std::string name;
  bool passed = false;
  double measured = 0;
  double target = 0;
  double tolerance = 0;
  std::string detail;
  bool enforced = true;  // informational checks never fail a scan
};

struct ScanOutcome {
  ScanResult scan;
  std::optional<PowerLawFit> fit;
  std::vector<ScanCheck> checks;
  Json extra = Json::object();
  bool passed() const;
};

struct ScanConfig {
  SimConfig sim;                 // eps and master_seed are set per run
  std::string source = "mc";     // mc | fpe
  int grid_cells = 256;          // per axis for fpe runs
  std::optional<Box> grid_box;   // defaults to the state box
  int knn_k = 4;
  AttractorSampling attractor;
  unsigned threads = 0;
};

/// Holds one system with its attractor and caches ensembles and densities per eps.
class ScanContext {
 public:
  ScanContext(ModelSpec spec, ScanConfig cfg);

  const SdeSystem& system() const { return sys_; }
  const ModelSpec& spec() const { return spec_; }
  const ScanConfig& config() const { return cfg_; }
  const AttractorCloud& attractor() const { return cloud_; }

  /// Seed of the ensemble at eps; a function of (master_seed, eps) only.
  std::uint64_t seed_for(double eps) const;
  const EnsembleSample& sample(double eps);
  const DensityField& density(double eps);
  MeasureView view(double eps, const std::string& source);

  /// Provenance record for one eps.
  Json run_record(double eps, const std::string& source);

 private:
  ModelSpec spec_;
  ScanConfig cfg_;
  SdeSystem sys_;
  AttractorCloud cloud_;
  std::map<double, std::unique_ptr<EnsembleSample>> samples_;
  std::map<double, std::unique_ptr<DensityField>> densities_;
};

ScanOutcome run_msd_scan(ScanContext& ctx, const std::vector<double>& eps_list);
ScanOutcome run_entropy_scan(ScanContext& ctx, const std::vector<double>& eps_list);
/// delta_eps: eps of the delta scan (0 selects the middle of eps_list).
ScanOutcome run_concentration_scan(ScanContext& ctx, const std::vector<double>& eps_list, double delta,
                                   const std::vector<double>& delta_list = {}, double delta_eps = 0);
ScanOutcome run_shell_scan(ScanContext& ctx, const std::vector<double>& eps_list, double alpha);
/// Tail fit of log(-eps^2 log mu(|x| > r)) against log r; tails below the
/// resolution floor are censored. An empty r_list selects radii adaptively.
ScanOutcome run_tail_scan(ScanContext& ctx, double eps, std::vector<double> r_list = {});

/// Smallest M with mu(B(A, M eps)) >= 1 - delta, and a standard error.
Estimate concentration_radius(const MeasureView& m, const AttractorCloud& cloud, double delta);

struct TailBoundRow {
  double rho = 0;
  double empirical = 0;
  double stderr_ = 0;
  double bound = 0;
};

struct TailBoundCheck {
  double gamma = 0;
  double rho_m = 0;
  bool certified = false;
  std::vector<TailBoundRow> rows;
  bool dominated = true;  // empirical <= bound + 3 stderr on every row
};

/// Compares mu(U >= rho) with the level-set tail bound, gamma certified on {rho_m <= U} inside box.
TailBoundCheck lyapunov_tail_check(const SdeSystem& sys, const ScalarField& u, double eps,
                                   double rho_m, const std::vector<double>& rho_list,
                                   const MeasureView& m, const Box& box, const VerifyOptions& opts);

/// Box-counting radii used for the support dimension: 4 eps_min * {16, 8, 4, 2, 1}.
std::vector<double> support_radii(double eps_min);

// Serialization.
Json to_json(const PowerLawFit& fit);
Json to_json(const ScanCheck& c);
Json to_json(const LyapunovReport& rep);
Json to_json(const DimensionFit& fit);
std::string scan_csv(const ScanResult& scan);

}  // namespace sal
