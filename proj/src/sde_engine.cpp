#include "sal/sde_engine.hpp"

#include "sal/io.hpp"
#include "sal/parallel.hpp"
#include "sal/rng.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

namespace sal {

void validate(const SimConfig& cfg) {
  if (!(cfg.dt > 0)) throw ConfigError("sim: dt must be positive");
  if (!(cfg.thin_T >= cfg.dt)) throw ConfigError("sim: thin_T must be at least dt");
  if (!(cfg.burn_T >= 0)) throw ConfigError("sim: burn_T must be nonnegative");
  if (cfg.n_traj < 1 || cfg.samples_per_traj < 1) throw ConfigError("sim: need n_traj, samples_per_traj >= 1");
  if (!(cfg.eps > 0 && cfg.eps < cfg.eps_star))
    throw ConfigError("sim: eps must lie in (0, eps_star)");
}

void em_step(const SdeSystem& sys, Eigen::Ref<Vec> x, double dt, double eps,
             const Eigen::Ref<const Vec>& gauss_draws) {
  if (dt == 0) return;
  Vec f(sys.n);
  sys.drift(x, f);
  if (sys.constant_noise) {
    x += f * dt + (eps * std::sqrt(dt)) * (*sys.constant_noise * gauss_draws);
  } else {
    Mat s(sys.n, sys.m);
    sys.noise(x, s);
    x += f * dt + (eps * std::sqrt(dt)) * (s * gauss_draws);
  }
  if (!x.allFinite()) throw NumericalError("em_step: non-finite state");
}

namespace {

long steps_for(double duration, double dt) {
  return static_cast<long>(std::llround(std::ceil(duration / dt - 1e-9)));
}

}  // namespace

EnsembleSample stationary_sample(const SdeSystem& sys, const SimConfig& cfg) {
  validate(cfg);
  const long burn_steps = steps_for(cfg.burn_T, cfg.dt);
  const long thin_steps = std::max(1L, steps_for(cfg.thin_T, cfg.dt));
  const long per = cfg.samples_per_traj;
  const Eigen::Index total = Eigen::Index(cfg.n_traj) * per;

  EnsembleSample out;
  out.points.resize(total, sys.n);
  out.traj.resize(std::size_t(total));
  out.time.resize(std::size_t(total));
  out.config = cfg;
  out.system_label = sys.label;
  const double escape_limit = 1e3 * sys.state_box.diameter();

  parallel_for(std::size_t(cfg.n_traj), cfg.threads, [&](std::size_t i) {
    RandomStream rng(cfg.master_seed, i);
    Vec x(sys.n), z(sys.m), f(sys.n), w(sys.n);
    for (int d = 0; d < sys.n; ++d)
      x(d) = sys.state_box.lower(d) + (sys.state_box.upper(d) - sys.state_box.lower(d)) * rng.uniform();
    Mat s(sys.n, sys.m);
    const Mat* noise = sys.constant_noise ? &*sys.constant_noise : &s;
    const double scale = cfg.eps * std::sqrt(cfg.dt);
    const bool identity = sys.constant_noise && sys.n == sys.m && sys.constant_noise->isIdentity(0);
    long step = 0;
    auto advance = [&](long count) {
      for (long k = 0; k < count; ++k) {
        for (int j = 0; j < sys.m; ++j) z(j) = rng.normal();
        sys.drift(x, f);
        if (!sys.constant_noise) sys.noise(x, s);
        if (identity) {
          x += f * cfg.dt + scale * z;
        } else {
          w.noalias() = *noise * z;
          x += f * cfg.dt + scale * w;
        }
        ++step;
        if (!x.allFinite() || x.norm() > escape_limit) {
          std::ostringstream os;
          os << "trajectory " << i << " blew up at t = " << double(step) * cfg.dt;
          throw NumericalError(os.str());
        }
      }
    };
    advance(burn_steps);
    for (long k = 0; k < per; ++k) {
      advance(thin_steps);
      const Eigen::Index row = Eigen::Index(i) * per + k;
      out.points.row(row) = x.transpose();
      out.traj[std::size_t(row)] = std::int64_t(i);
      out.time[std::size_t(row)] = double(step) * cfg.dt;
    }
  });

  // Lag-one (= thin_T) autocorrelation of |X| pooled over trajectories.
  if (per >= 2) {
    Vec r = out.points.rowwise().norm();
    const double mean = r.mean();
    double num = 0, den = 0;
    for (long t = 0; t < cfg.n_traj; ++t)
      for (long k = 0; k < per; ++k) {
        const double a = r(t * per + k) - mean;
        den += a * a;
        if (k + 1 < per) num += a * (r(t * per + k + 1) - mean);
      }
    out.lag_autocorrelation = den > 0 ? num / den : 0.0;
    out.flagged = out.lag_autocorrelation >= 0.2;
  }
  return out;
}

void write_ensemble_csv(std::ostream& os, const EnsembleSample& sample) {
  const auto n = sample.points.cols();
  for (Eigen::Index d = 0; d < n; ++d) os << 'x' << d + 1 << ',';
  os << "traj,t\n";
  for (Eigen::Index i = 0; i < sample.points.rows(); ++i) {
    for (Eigen::Index d = 0; d < n; ++d) os << format_double(sample.points(i, d)) << ',';
    os << sample.traj[std::size_t(i)] << ',' << format_double(sample.time[std::size_t(i)]) << '\n';
  }
}

}  // namespace sal
