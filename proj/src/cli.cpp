#include "sal/cli.hpp"

#include "sal/io.hpp"
#include "sal/parallel.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <sstream>

#ifndef SAL_VERSION
#define SAL_VERSION "0.1.0"
#endif

namespace sal {

namespace fs = std::filesystem;

namespace {

Json box_json(const std::vector<double>& v) { return v; }

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

void reject_unknown(const Json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw ConfigError("config section '" + where + "' must be an object");
  for (const auto& [k, _] : j.items()) {
    bool ok = false;
    for (const char* name : known) ok = ok || k == name;
    if (!ok) throw ConfigError("unknown config key '" + where + (where.empty() ? "" : ".") + k + "'");
  }
}

std::string eps_tag(double eps) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", eps);
  return buf;
}

}  // namespace

std::string canonical_model_kind(const std::string& name) {
  if (name == "ou" || name == "linear_ou") return "linear_ou";
  if (name == "lc" || name == "limit_cycle" || name == "limit-cycle") return "limit_cycle";
  if (name == "toggle" || name == "toggle_switch" || name == "toggle-switch") return "toggle_switch";
  if (name == "gradient" || name == "gradient_1d" || name == "gradient-1d") return "gradient_1d";
  throw ConfigError("unknown model kind '" + name + "'");
}

Json to_json(const RunConfig& c) {
  Json j;
  Json m;
  m["kind"] = c.model.kind;
  Json params = Json::object();
  for (const auto& [k, v] : c.model.params) params[k] = v;
  m["params"] = params;
  m["drift_matrix"] = c.model.drift_matrix;
  m["noise_matrix"] = c.model.noise_matrix;
  m["noise_cols"] = c.model.noise_cols;
  j["model"] = m;

  j["sim"] = {{"dt", c.sim.dt},         {"burn_T", c.sim.burn_T},
              {"n_traj", c.sim.n_traj}, {"samples_per_traj", c.sim.samples_per_traj},
              {"thin_T", c.sim.thin_T}, {"master_seed", c.sim.master_seed},
              {"eps_star", c.sim.eps_star}};
  j["scan"] = {{"eps", c.scan.eps},       {"source", c.scan.source}, {"grid_cells", c.scan.grid_cells},
               {"knn_k", c.scan.knn_k},   {"delta", c.scan.delta},   {"deltas", c.scan.deltas},
               {"delta_eps", c.scan.delta_eps}, {"alpha", c.scan.alpha}, {"tail_eps", c.scan.tail_eps},
               {"r", c.scan.r}};
  j["fpe"] = {{"eps", c.fpe.eps}, {"cells", c.fpe.cells}, {"box", box_json(c.fpe.box)}};
  j["lyapunov"] = {{"candidate", c.lyapunov.candidate}, {"check", c.lyapunov.check},
                   {"eps", c.lyapunov.eps},             {"samples", c.lyapunov.samples},
                   {"seed", c.lyapunov.seed},           {"r_inner", c.lyapunov.r_inner},
                   {"r_outer", c.lyapunov.r_outer},     {"exclude_radius", c.lyapunov.exclude_radius},
                   {"rho_m", c.lyapunov.rho_m},         {"p", c.lyapunov.p}};
  j["identity"] = {{"field", c.identity.field}, {"level", c.identity.level},
                   {"rho", c.identity.rho},     {"levels", c.identity.levels}};
  j["attractor"] = {{"seeds", c.attractor.seeds},   {"burn_T", c.attractor.burn_T},
                    {"collect_T", c.attractor.collect_T}, {"dt", c.attractor.dt},
                    {"resolution", c.attractor.resolution}, {"seed", c.attractor.seed}};
  j["output"] = c.output;
  j["plots"] = c.plots;
  return j;
}

RunConfig run_config_from_json(const Json& j) {
  RunConfig c;
  if (j.is_null()) return c;
  reject_unknown(j, {"model", "sim", "scan", "fpe", "lyapunov", "identity", "attractor", "output", "plots"}, "");

  if (j.contains("model")) {
    const Json& m = j["model"];
    reject_unknown(m, {"kind", "params", "drift_matrix", "noise_matrix", "noise_cols"}, "model");
    c.model.kind = get_or<std::string>(m, "kind", "");
    if (!c.model.kind.empty()) c.model.kind = canonical_model_kind(c.model.kind);
    if (m.contains("params")) {
      if (!m["params"].is_object()) throw ConfigError("model.params must be an object");
      for (const auto& [k, v] : m["params"].items()) {
        if (!v.is_number()) throw ConfigError("model.params." + k + " must be a number");
        c.model.params[k] = v.get<double>();
      }
    }
    c.model.drift_matrix = get_or<std::vector<double>>(m, "drift_matrix", {});
    c.model.noise_matrix = get_or<std::vector<double>>(m, "noise_matrix", {});
    c.model.noise_cols = get_or<int>(m, "noise_cols", 0);
  }
  if (j.contains("sim")) {
    const Json& s = j["sim"];
    reject_unknown(s, {"dt", "burn_T", "n_traj", "samples_per_traj", "thin_T", "master_seed", "eps_star"}, "sim");
    c.sim.dt = get_or(s, "dt", c.sim.dt);
    c.sim.burn_T = get_or(s, "burn_T", c.sim.burn_T);
    c.sim.n_traj = get_or(s, "n_traj", c.sim.n_traj);
    c.sim.samples_per_traj = get_or(s, "samples_per_traj", c.sim.samples_per_traj);
    c.sim.thin_T = get_or(s, "thin_T", c.sim.thin_T);
    c.sim.master_seed = get_or(s, "master_seed", c.sim.master_seed);
    c.sim.eps_star = get_or(s, "eps_star", c.sim.eps_star);
  }
  if (j.contains("scan")) {
    const Json& s = j["scan"];
    reject_unknown(s, {"eps", "source", "grid_cells", "knn_k", "delta", "deltas", "delta_eps", "alpha",
                       "tail_eps", "r"}, "scan");
    c.scan.eps = get_or(s, "eps", c.scan.eps);
    c.scan.source = get_or(s, "source", c.scan.source);
    c.scan.grid_cells = get_or(s, "grid_cells", c.scan.grid_cells);
    c.scan.knn_k = get_or(s, "knn_k", c.scan.knn_k);
    c.scan.delta = get_or(s, "delta", c.scan.delta);
    c.scan.deltas = get_or(s, "deltas", c.scan.deltas);
    c.scan.delta_eps = get_or(s, "delta_eps", c.scan.delta_eps);
    c.scan.alpha = get_or(s, "alpha", c.scan.alpha);
    c.scan.tail_eps = get_or(s, "tail_eps", c.scan.tail_eps);
    c.scan.r = get_or(s, "r", c.scan.r);
  }
  if (j.contains("fpe")) {
    const Json& s = j["fpe"];
    reject_unknown(s, {"eps", "cells", "box"}, "fpe");
    c.fpe.eps = get_or(s, "eps", c.fpe.eps);
    c.fpe.cells = get_or(s, "cells", c.fpe.cells);
    c.fpe.box = get_or(s, "box", c.fpe.box);
  }
  if (j.contains("lyapunov")) {
    const Json& s = j["lyapunov"];
    reject_unknown(s, {"candidate", "check", "eps", "samples", "seed", "r_inner", "r_outer", "exclude_radius",
                       "rho_m", "p"}, "lyapunov");
    auto& l = c.lyapunov;
    l.candidate = get_or(s, "candidate", l.candidate);
    l.check = get_or(s, "check", l.check);
    l.eps = get_or(s, "eps", l.eps);
    l.samples = get_or(s, "samples", l.samples);
    l.seed = get_or(s, "seed", l.seed);
    l.r_inner = get_or(s, "r_inner", l.r_inner);
    l.r_outer = get_or(s, "r_outer", l.r_outer);
    l.exclude_radius = get_or(s, "exclude_radius", l.exclude_radius);
    l.rho_m = get_or(s, "rho_m", l.rho_m);
    l.p = get_or(s, "p", l.p);
  }
  if (j.contains("identity")) {
    const Json& s = j["identity"];
    reject_unknown(s, {"field", "level", "rho", "levels"}, "identity");
    c.identity.field = get_or(s, "field", c.identity.field);
    c.identity.level = get_or(s, "level", c.identity.level);
    c.identity.rho = get_or(s, "rho", c.identity.rho);
    c.identity.levels = get_or(s, "levels", c.identity.levels);
  }
  if (j.contains("attractor")) {
    const Json& s = j["attractor"];
    reject_unknown(s, {"seeds", "burn_T", "collect_T", "dt", "resolution", "seed"}, "attractor");
    c.attractor.seeds = get_or(s, "seeds", c.attractor.seeds);
    c.attractor.burn_T = get_or(s, "burn_T", c.attractor.burn_T);
    c.attractor.collect_T = get_or(s, "collect_T", c.attractor.collect_T);
    c.attractor.dt = get_or(s, "dt", c.attractor.dt);
    c.attractor.resolution = get_or(s, "resolution", c.attractor.resolution);
    c.attractor.seed = get_or(s, "seed", c.attractor.seed);
  }
  c.output = get_or<std::string>(j, "output", "");
  c.plots = get_or(j, "plots", false);
  return c;
}

ScalarField make_candidate(const std::string& name, const SdeSystem& sys) {
  if (name == "glued") return fields::limit_cycle_glued();
  if (name == "ring_well") return fields::ring_well(1.0);
  if (name == "squared_norm") return fields::squared_norm(1.0);
  if (name == "radial") return fields::radial();
  if (name == "log_norm") return fields::log_norm();
  if (name == "const") return fields::constant(1.0);
  if (name == "dist2") {
    if (!sys.attractor) throw ConfigError("candidate dist2 needs a model with an exact attractor");
    return fields::squared_distance_to(*sys.attractor);
  }
  throw ConfigError("unknown Lyapunov candidate '" + name + "'");
}

namespace {

// Files are collected first and written only once the command succeeded.
struct Output {
  std::vector<std::pair<std::string, std::string>> files;
  void add(std::string name, std::string content) { files.emplace_back(std::move(name), std::move(content)); }
};

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ScanConfig scan_config(const RunConfig& rc, unsigned threads) {
  ScanConfig sc;
  sc.sim = rc.sim;
  sc.source = rc.scan.source;
  sc.grid_cells = rc.scan.grid_cells;
  sc.knn_k = rc.scan.knn_k;
  sc.attractor = rc.attractor;
  sc.threads = threads;
  if (!rc.fpe.box.empty()) {
    const auto n = rc.fpe.box.size() / 2;
    if (rc.fpe.box.size() % 2) throw ConfigError("fpe.box needs lower and upper corners");
    Box b{Vec(Eigen::Index(n)), Vec(Eigen::Index(n))};
    for (std::size_t i = 0; i < n; ++i) b.lower(Eigen::Index(i)) = rc.fpe.box[i], b.upper(Eigen::Index(i)) = rc.fpe.box[n + i];
    sc.grid_box = b;
  }
  return sc;
}

std::string json_text(const Json& j) { return j.dump(2) + "\n"; }

void add_scan_files(Output& out, const ScanOutcome& o, bool plots) {
  const std::string stem = o.scan.quantity + "_" + o.scan.model;
  out.add("scan_" + stem + ".csv", scan_csv(o.scan));
  Json j;
  j["quantity"] = o.scan.quantity;
  j["model"] = o.scan.system_label;
  if (o.fit) j["fit"] = to_json(*o.fit);
  Json checks = Json::array();
  for (const auto& c : o.checks) checks.push_back(to_json(c));
  j["checks"] = checks;
  j["passed"] = o.passed();
  j["extra"] = o.extra;
  j["provenance"] = o.scan.provenance;
  out.add("fit_" + stem + ".json", json_text(j));
  if (!plots) return;

  PlotSeries data{o.scan.quantity, {}, {}, false};
  const bool tail = o.scan.quantity == "tail";
  const bool loglog = o.fit && o.fit->mode == "loglog";
  for (const auto& p : o.scan.points) {
    data.x.push_back(tail ? p.r : p.eps);
    data.y.push_back(p.value);
  }
  std::vector<PlotSeries> series{data};
  if (o.fit && !tail) {
    PlotSeries line{"fit slope " + eps_tag(o.fit->slope), {}, {}, true};
    for (const auto& p : o.scan.points) {
      line.x.push_back(p.eps);
      const double v = o.fit->intercept + o.fit->slope * std::log(p.eps);
      line.y.push_back(loglog ? std::exp(v) : v);
    }
    series.push_back(line);
  }
  out.add("scan_" + stem + ".svg", render_svg_plot(o.scan.quantity + " (" + o.scan.system_label + ")",
                                                   tail ? "r" : "eps", o.scan.quantity, series, true,
                                                   loglog || tail));
}

ScanOutcome run_named_scan(const std::string& name, ScanContext& ctx, const RunConfig& rc) {
  if (name == "msd-scan") return run_msd_scan(ctx, rc.scan.eps);
  if (name == "entropy-scan") return run_entropy_scan(ctx, rc.scan.eps);
  if (name == "concentration-scan")
    return run_concentration_scan(ctx, rc.scan.eps, rc.scan.delta, rc.scan.deltas, rc.scan.delta_eps);
  if (name == "shell-scan") return run_shell_scan(ctx, rc.scan.eps, rc.scan.alpha);
  return run_tail_scan(ctx, rc.scan.tail_eps, rc.scan.r);
}

// Lyapunov checks selected by candidate and check kind.
Json run_lyapunov(const RunConfig& rc, const SdeSystem& sys, const AttractorCloud& cloud, unsigned threads,
                  bool& all_pass) {
  const auto& l = rc.lyapunov;
  std::string candidate = l.candidate;
  if (candidate == "auto") candidate = sys.label.rfind("limit_cycle", 0) == 0 ? "glued" : "squared_norm";
  const ScalarField u = make_candidate(candidate, sys);
  std::vector<std::string> kinds;
  if (l.check == "auto")
    kinds = candidate == "glued" ? std::vector<std::string>{"class_bstar", "fpe"} : std::vector<std::string>{"strong"};
  else
    kinds = {l.check};

  VerifyOptions opts;
  opts.n_samples = l.samples;
  opts.seed = l.seed;
  opts.threads = threads;
  opts.attractor = &cloud;
  const bool is_cycle = sys.label.rfind("limit_cycle", 0) == 0;
  const Vec origin = Vec::Zero(sys.n);

  Json reports = Json::array();
  all_pass = true;
  for (const auto& kind : kinds) {
    LyapunovReport rep;
    if (kind == "strong") {
      Region region = Region::make_box(sys.state_box);
      if (l.r_inner >= 0 && l.r_outer > 0) region = Region::make_annulus(origin, l.r_inner, l.r_outer);
      else if (is_cycle) region = Region::make_annulus(origin, 0.5, 1.3);
      region.exclude_cloud = &cloud;
      region.exclude_radius = l.exclude_radius >= 0 ? l.exclude_radius : 1e-3 * sys.state_box.diameter();
      rep = verify_strong_lyapunov(sys, u, region, opts);
    } else if (kind == "fpe" || kind == "weak") {
      Region region = Region::make_box(sys.state_box);
      region.level_field = u;
      region.min_level = l.rho_m >= 0 ? l.rho_m : (candidate == "glued" ? 1.5 : 1.0);
      rep = kind == "fpe" ? verify_fpe_lyapunov(sys, u, l.eps, region, opts)
                          : verify_weak_lyapunov(sys, u, l.eps.front(), region, opts);
    } else if (kind == "class_bstar") {
      const double ri = l.r_inner >= 0 ? l.r_inner : 1.4, ro = l.r_outer > 0 ? l.r_outer : 50.0;
      rep = verify_class_bstar(u, Region::make_annulus(origin, ri, ro), l.p, opts);
    } else {
      throw ConfigError("unknown Lyapunov check '" + kind + "'");
    }
    all_pass = all_pass && rep.verdict == Verdict::pass;
    Json j = to_json(rep);
    j["candidate"] = u.name;
    reports.push_back(j);
  }
  Json j;
  j["model"] = sys.label;
  j["candidate"] = candidate;
  j["reports"] = reports;
  j["verdict"] = all_pass ? "pass" : "fail";
  return j;
}

int cmd_simulate(const RunConfig& rc, unsigned threads, Output& out, std::ostream& log) {
  validate(rc.model);
  const SdeSystem sys = make_builtin(rc.model);
  ScanContext ctx(rc.model, scan_config(rc, threads));
  Json summary;
  summary["model"] = sys.label;
  summary["runs"] = Json::array();
  const Box wide = sys.state_box.inflated(1.5);
  for (const double eps : rc.scan.eps) {
    const EnsembleSample& s = ctx.sample(eps);
    std::ostringstream csv;
    write_ensemble_csv(csv, s);
    out.add("samples_" + rc.model.kind + "_eps" + eps_tag(eps) + ".csv", csv.str());
    const Vec mean = s.points.colwise().mean();
    const Points centered = s.points.rowwise() - mean.transpose();
    const Mat cov = centered.transpose() * centered / double(s.size() - 1);
    long escaped = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) escaped += !wide.contains(s.points.row(i).transpose());
    Json r = ctx.run_record(eps, "mc");
    r["mean"] = std::vector<double>(mean.data(), mean.data() + mean.size());
    std::vector<double> c(cov.data(), cov.data() + cov.size());
    r["covariance"] = c;
    r["escaped_inflated_box"] = escaped;
    summary["runs"].push_back(r);
    log << "simulate eps=" << eps_tag(eps) << " draws=" << s.size()
        << (s.flagged ? " (autocorrelation flagged)" : "") << "\n";
  }
  out.add("simulate_" + rc.model.kind + ".json", json_text(summary));
  return 0;
}

Grid fpe_grid(const RunConfig& rc, const SdeSystem& sys) {
  Box box = sys.state_box;
  if (!rc.fpe.box.empty()) box = *scan_config(rc, 1).grid_box;
  if (box.dim() != sys.n) throw ConfigError("fpe.box dimension does not match the model");
  return sys.n == 1 ? Grid::line(box.lower(0), box.upper(0), rc.fpe.cells) : Grid::rect(box, rc.fpe.cells, rc.fpe.cells);
}

int cmd_fpe_solve(const RunConfig& rc, unsigned threads, Output& out, std::ostream& log) {
  validate(rc.model);
  const SdeSystem sys = make_builtin(rc.model);
  if (sys.n > 2) throw ConfigError("fpe-solve supports 1-D and 2-D models only");
  const DensityField d = solve_fpe(sys, rc.fpe.eps, fpe_grid(rc, sys), threads);
  std::ostringstream csv, qp;
  write_density_csv(csv, d, d.u);
  write_density_csv(qp, d, quasi_potential(d));
  out.add("density_" + rc.model.kind + ".csv", csv.str());
  out.add("quasi_potential_" + rc.model.kind + ".csv", qp.str());
  out.add("density_" + rc.model.kind + ".json", density_header_json(d, sys.label) + "\n");
  log << "fpe-solve eps=" << eps_tag(d.eps) << " residual=" << d.residual << "\n";
  return 0;
}

int cmd_attractor(const RunConfig& rc, unsigned threads, Output& out, std::ostream& log) {
  validate(rc.model);
  const SdeSystem sys = make_builtin(rc.model);
  AttractorSampling as = rc.attractor;
  as.threads = threads;
  const AttractorCloud sampled = sample_attractor(sys, as);
  std::ostringstream csv;
  write_points_csv(csv, sampled.points());
  out.add("attractor_" + rc.model.kind + ".csv", csv.str());

  const std::vector<double> radii = dimension_radii(sys.state_box, sampled.resolution());
  Json j;
  j["model"] = sys.label;
  j["points"] = sampled.size();
  j["resolution"] = sampled.resolution();
  j["seeds"] = sampled.seeds;
  j["burn_T"] = sampled.burn_T;
  j["collect_T"] = sampled.collect_T;
  j["representation_for_experiments"] = default_attractor(sys, as).representation();
  j["box_dimension"] = to_json(box_dimension(sampled.points(), radii));
  j["tube_volume_scaling"] = to_json(tube_volume_scaling(sampled, radii, 100000, as.seed));
  out.add("attractor_" + rc.model.kind + ".json", json_text(j));
  log << "attractor points=" << sampled.size() << "\n";
  return 0;
}

int cmd_verify(const RunConfig& rc, unsigned threads, Output& out, std::ostream& log) {
  validate(rc.model);
  const SdeSystem sys = make_builtin(rc.model);
  AttractorSampling as = rc.attractor;
  as.threads = threads;
  const AttractorCloud cloud = default_attractor(sys, as);
  bool pass = false;
  const Json j = run_lyapunov(rc, sys, cloud, threads, pass);
  out.add("lyapunov_" + rc.model.kind + "_" + j["candidate"].get<std::string>() + ".json", json_text(j));
  log << "verify-lyapunov " << j["candidate"].get<std::string>() << ": " << (pass ? "pass" : "fail") << "\n";
  return 0;
}

int cmd_scan(const std::string& name, const RunConfig& rc, unsigned threads, Output& out, std::ostream& log) {
  ScanContext ctx(rc.model, scan_config(rc, threads));
  const ScanOutcome o = run_named_scan(name, ctx, rc);
  add_scan_files(out, o, rc.plots);
  log << name << " " << ctx.system().label;
  if (o.fit) log << " slope=" << o.fit->slope;
  log << (o.passed() ? " checks=pass" : " checks=fail") << "\n";
  return 0;
}

Json identity_report(const RunConfig& rc, const SdeSystem& sys, unsigned threads, double& worst_mid) {
  const DensityField d = solve_fpe(sys, rc.fpe.eps, fpe_grid(rc, sys), threads);
  const ScalarField F = make_candidate(rc.identity.field, sys);
  const ScalarField U = make_candidate(rc.identity.level.empty() ? rc.identity.field : rc.identity.level, sys);
  const IdentityCheck ic = check_integral_identity(d, sys, F, U, rc.identity.rho);

  std::vector<double> levels = rc.identity.levels;
  if (levels.empty()) {
    // evenly spaced between the 5% and 95% mass quantiles of U
    std::vector<std::pair<double, double>> vals;
    for (Eigen::Index k = 0; k < d.grid.size(); ++k) vals.emplace_back(U(d.grid.center(k)), d.u(k) * d.grid.cell_volume());
    std::sort(vals.begin(), vals.end());
    auto quantile = [&](double q) {
      double acc = 0;
      for (const auto& [v, w] : vals)
        if ((acc += w) >= q) return v;
      return vals.back().first;
    };
    const double lo = quantile(0.05), hi = quantile(0.95);
    for (int q = 0; q < 16; ++q) levels.push_back(lo + (hi - lo) * q / 15.0);
  }
  const CoareaCheck cc = coarea_check(d, U, levels);
  const std::size_t n = cc.levels.size(), lo = n / 4, hi = n - n / 4;
  worst_mid = 0;
  Json rows = Json::array();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& lv = cc.levels[i];
    if (i >= lo && i < hi) worst_mid = std::max(worst_mid, lv.rel_error);
    rows.push_back({{"rho", lv.rho}, {"lhs", lv.lhs}, {"rhs", lv.rhs}, {"rel_error", lv.rel_error}});
  }
  Json j;
  j["model"] = sys.label;
  j["eps"] = d.eps;
  j["grid_cells"] = rc.fpe.cells;
  j["integral_identity"] = {{"field", F.name}, {"level", U.name}, {"rho", rc.identity.rho}, {"lhs", ic.lhs},
                            {"rhs", ic.rhs}, {"residual", ic.residual}, {"boundary_samples", ic.boundary_samples}};
  j["coarea"] = {{"levels", rows}, {"max_rel_error", cc.max_rel_error}, {"max_rel_error_middle_half", worst_mid}};
  return j;
}

int cmd_identity(const RunConfig& rc, unsigned threads, Output& out, std::ostream& log) {
  validate(rc.model);
  const SdeSystem sys = make_builtin(rc.model);
  double worst = 0;
  const Json j = identity_report(rc, sys, threads, worst);
  out.add("identity_" + rc.model.kind + ".json", json_text(j));
  log << "check-identity residual=" << j["integral_identity"]["residual"].get<double>()
      << " coarea(middle half)=" << worst << "\n";
  return 0;
}

int cmd_report(const RunConfig& rc, unsigned threads, Output& out, std::ostream& log) {
  ScanContext ctx(rc.model, scan_config(rc, threads));
  Json rep;
  rep["model"] = ctx.system().label;
  rep["attractor"] = ctx.attractor().representation();
  Json sections = Json::array();
  bool ok = true;
  std::vector<std::string> scans{"msd-scan", "entropy-scan", "concentration-scan", "shell-scan"};
  // radial tails about the origin only describe attractors at the origin
  if (rc.model.kind == "linear_ou" || rc.model.kind == "gradient_1d") scans.push_back("tail-scan");
  for (const auto& name : scans) {
    Json s;
    s["scan"] = name;
    try {
      const ScanOutcome o = run_named_scan(name, ctx, rc);
      add_scan_files(out, o, rc.plots);
      Json checks = Json::array();
      for (const auto& c : o.checks) checks.push_back(to_json(c));
      s["checks"] = checks;
      if (o.fit) s["fit"] = to_json(*o.fit);
      s["passed"] = o.passed();
      ok = ok && o.passed();
    } catch (const NumericalError& e) {
      s["passed"] = false;
      s["error"] = e.what();
      ok = false;
    }
    log << name << ": " << (s["passed"].get<bool>() ? "pass" : "fail") << "\n";
    sections.push_back(s);
  }
  bool lpass = false;
  Json ly = run_lyapunov(rc, ctx.system(), ctx.attractor(), threads, lpass);
  sections.push_back({{"check", "lyapunov"}, {"passed", lpass}, {"detail", ly}});
  ok = ok && lpass;
  log << "lyapunov: " << (lpass ? "pass" : "fail") << "\n";
  rep["sections"] = sections;
  rep["passed"] = ok;
  out.add("report.json", json_text(rep));
  return ok ? 0 : 4;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stationary-measure laboratory for small-noise SDEs", "sal"};
  app.require_subcommand(1);
  app.set_version_flag("--version", SAL_VERSION);

  std::string config_path, model, out_dir, source, candidate, check;
  std::vector<std::string> params;
  std::vector<double> eps, radii;
  unsigned threads = 0;
  bool plots = false;
  std::uint64_t seed = 0;
  double dt = 0, burn = 0, thin = 0, delta = 0, alpha = 0, rho = 0;
  long n_traj = 0, per_traj = 0, samples = 0;
  int cells = 0;

  const std::pair<const char*, const char*> names[] = {
      {"simulate", "Euler-Maruyama ensembles at each eps"},
      {"fpe-solve", "stationary Fokker-Planck density on a grid"},
      {"attractor", "sample the attractor and estimate its box dimension"},
      {"verify-lyapunov", "check Lyapunov conditions for a candidate function"},
      {"msd-scan", "mean square distance to the attractor against eps"},
      {"entropy-scan", "differential entropy against log eps"},
      {"concentration-scan", "concentration radius in units of eps"},
      {"shell-scan", "mass inside the eps^alpha shell"},
      {"tail-scan", "large-deviation tail exponent"},
      {"check-identity", "integral identity and co-area check on the FPE density"},
      {"report", "run all scans and checks; exit 4 on a failed check"}};
  std::map<std::string, std::map<std::string, CLI::Option*>> opts;
  for (const auto& [name, help] : names) {
    CLI::App* sub = app.add_subcommand(name, help);
    auto& o = opts[name];
    o["config"] = sub->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    o["model"] = sub->add_option("--model", model, "limit_cycle | toggle_switch | gradient_1d | linear_ou (ou)");
    o["param"] = sub->add_option("--param", params, "model parameter name=value (repeatable)");
    o["eps"] = sub->add_option("--eps", eps, "comma-separated eps list")->delimiter(',');
    o["out"] = sub->add_option("--out", out_dir, "output directory");
    o["threads"] = sub->add_option("--threads", threads, "worker threads (0 = all cores)");
    o["plots"] = sub->add_flag("--plots", plots, "write SVG plots");
    o["seed"] = sub->add_option("--seed", seed, "master seed");
    o["dt"] = sub->add_option("--dt", dt, "time step");
    o["burn"] = sub->add_option("--burn", burn, "burn-in duration");
    o["thin"] = sub->add_option("--thin", thin, "thinning interval");
    o["n_traj"] = sub->add_option("--n-traj", n_traj, "trajectory count");
    o["per_traj"] = sub->add_option("--samples-per-traj", per_traj, "draws per trajectory");
    o["source"] = sub->add_option("--source", source, "mc | fpe");
    o["cells"] = sub->add_option("--cells", cells, "grid cells per axis");
    o["delta"] = sub->add_option("--delta", delta, "concentration level delta");
    o["alpha"] = sub->add_option("--alpha", alpha, "shell exponent alpha");
    o["r"] = sub->add_option("--r", radii, "comma-separated tail radii")->delimiter(',');
    o["candidate"] = sub->add_option("--candidate", candidate, "Lyapunov candidate");
    o["check"] = sub->add_option("--check", check, "strong | fpe | weak | class_bstar | auto");
    o["samples"] = sub->add_option("--samples", samples, "verification samples");
    o["rho"] = sub->add_option("--rho", rho, "sublevel value for check-identity");
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::CallForVersion& e) {
    out << SAL_VERSION << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "sal: " << e.what() << "\n";
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  auto& o = opts[command];
  auto given = [&](const char* key) { return o[key]->count() > 0; };

  try {
    Json cfg = Json::object();
    if (given("config")) {
      try {
        cfg = Json::parse(read_text_file(config_path));
      } catch (const Json::parse_error& e) {
        throw ConfigError("config '" + config_path + "' is not valid JSON: " + e.what());
      }
    }
    Json patch = Json::object();
    if (given("model")) patch["model"]["kind"] = canonical_model_kind(model);
    for (const auto& kv : params) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--param expects name=value, got '" + kv + "'");
      try {
        patch["model"]["params"][kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
      } catch (const std::logic_error&) {
        throw ConfigError("--param value is not a number: '" + kv + "'");
      }
    }
    if (given("eps")) {
      patch["scan"]["eps"] = eps;
      patch["fpe"]["eps"] = eps.front();
      patch["lyapunov"]["eps"] = eps;
      if (command == "tail-scan") patch["scan"]["tail_eps"] = eps.front();
    }
    if (given("out")) patch["output"] = out_dir;
    if (given("plots")) patch["plots"] = plots;
    if (given("seed")) patch["sim"]["master_seed"] = seed;
    if (given("dt")) patch["sim"]["dt"] = dt;
    if (given("burn")) patch["sim"]["burn_T"] = burn;
    if (given("thin")) patch["sim"]["thin_T"] = thin;
    if (given("n_traj")) patch["sim"]["n_traj"] = n_traj;
    if (given("per_traj")) patch["sim"]["samples_per_traj"] = per_traj;
    if (given("source")) patch["scan"]["source"] = source;
    if (given("cells")) {
      patch["scan"]["grid_cells"] = cells;
      patch["fpe"]["cells"] = cells;
    }
    if (given("delta")) patch["scan"]["delta"] = delta;
    if (given("alpha")) patch["scan"]["alpha"] = alpha;
    if (given("r")) patch["scan"]["r"] = radii;
    if (given("candidate")) patch["lyapunov"]["candidate"] = candidate;
    if (given("check")) patch["lyapunov"]["check"] = check;
    if (given("samples")) patch["lyapunov"]["samples"] = samples;
    if (given("rho")) patch["identity"]["rho"] = rho;
    cfg.merge_patch(patch);

    RunConfig rc = run_config_from_json(cfg);
    if (rc.model.kind.empty()) throw ConfigError("no model given (--model or model.kind in the config)");
    validate(rc.model);

    std::string dir = rc.output;
    if (dir.empty()) {
      const char* env = std::getenv("SAL_OUTPUT_DIR");
      dir = env && *env ? env : "sal_out";
    }
    rc.output = "";  // the directory is a property of the run, not of the result
    const unsigned nthreads = threads == 0 ? default_threads() : threads;

    Output files;
    int code = 0;
    if (command == "simulate") code = cmd_simulate(rc, nthreads, files, out);
    else if (command == "fpe-solve") code = cmd_fpe_solve(rc, nthreads, files, out);
    else if (command == "attractor") code = cmd_attractor(rc, nthreads, files, out);
    else if (command == "verify-lyapunov") code = cmd_verify(rc, nthreads, files, out);
    else if (command == "check-identity") code = cmd_identity(rc, nthreads, files, out);
    else if (command == "report") code = cmd_report(rc, nthreads, files, out);
    else code = cmd_scan(command, rc, nthreads, files, out);

    const std::string config_text = json_text(to_json(rc));
    const std::string config_hash = fnv1a_hex(config_text);
    const fs::path root(dir);
    write_text_file(root / "config.json", config_text);
    Json manifest;
    manifest["tool"] = "sal";
    manifest["version"] = SAL_VERSION;
    manifest["command"] = command;
    manifest["created"] = utc_timestamp();
    manifest["threads"] = nthreads;
    manifest["config"] = "config.json";
    manifest["config_hash"] = config_hash;
    Json entries = Json::array();
    for (const auto& [name, content] : files.files) {
      write_text_file(root / name, content);
      entries.push_back({{"path", name}, {"fnv1a", fnv1a_hex(content)}, {"config_hash", config_hash}});
    }
    manifest["files"] = entries;
    write_text_file(root / "manifest.json", json_text(manifest));
    return code;
  } catch (const ConfigError& e) {
    err << "sal: configuration error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    err << "sal: numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "sal: error: " << e.what() << "\n";
    return 1;
  }
}

int dispatch(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace sal
