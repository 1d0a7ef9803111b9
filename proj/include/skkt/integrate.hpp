#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "skkt/active_set.hpp"
#include "skkt/certify.hpp"
#include "skkt/dynamics.hpp"
#include "skkt/errors.hpp"
#include "skkt/problem.hpp"
#include "skkt/switching.hpp"
#include "skkt/types.hpp"

namespace skkt {

struct SolverConfig {
  GainConfig gains{};
  double dwell = 0.1;           ///< minimum spacing between removals
  double step = 1e-3;           ///< fixed integration step
  double t_max = 50.0;          ///< horizon
  double tol_active = 1e-9;     ///< activity detection tolerance
  double tol_event = 1e-10;     ///< crossing localization tolerance
  double tol_stationary = 1e-8; ///< field-norm threshold for termination
  double tol_invariance = 1e-6; ///< violation budget asserted by diagnostics
  double tol_kkt = 1e-6;        ///< certification tolerance at the end point
  int stall_window = 50;        ///< quiet steps required before stopping
  int max_switches = 1000;      ///< chatter guard on the event count
};

inline void validate(const SolverConfig& cfg) {
  validate(cfg.gains);
  if (!(cfg.dwell > 0.0)) throw InvalidProblem("dwell must be positive");
  if (!(cfg.step > 0.0)) throw InvalidProblem("step must be positive");
  if (!(cfg.t_max > 0.0)) throw InvalidProblem("t_max must be positive");
  if (!(cfg.tol_active > 0.0) || !(cfg.tol_event > 0.0) ||
      !(cfg.tol_stationary > 0.0) || !(cfg.tol_kkt > 0.0))
    throw InvalidProblem("tolerances must be positive");
  if (cfg.tol_event > cfg.tol_active)
    throw InvalidProblem("tol_event must not exceed tol_active");
  if (cfg.stall_window < 1)
    throw InvalidProblem("stall_window must be at least 1");
  if (cfg.max_switches < 1)
    throw InvalidProblem("max_switches must be at least 1");
}

/// One classical fourth-order Runge-Kutta step of the subsystem field with
/// the active set held fixed across all four stages.  Operators are rebuilt
/// (refactorized) at every stage evaluation.
inline Vector rk4_step(const Problem& pb, const Vector& z, const ActiveSet& as,
                       const GainConfig& gains, double h) {
  const Vector s1 = subsystem_field(pb, z, as, gains);
  const Vector s2 = subsystem_field(pb, z + 0.5 * h * s1, as, gains);
  const Vector s3 = subsystem_field(pb, z + 0.5 * h * s2, as, gains);
  const Vector s4 = subsystem_field(pb, z + h * s3, as, gains);
  return z + (h / 6.0) * (s1 + 2.0 * s2 + 2.0 * s3 + s4);
}

/// Locates the first zero of g_ineq_index along the step from z_pre, given
/// that the value is negative at z_pre and non-negative at the full-step
/// point z_post.  Bisects over partial RK4 sub-steps of the same subsystem
/// (each probe integrates from z_pre with a shrunken step), stopping once
/// |g_ineq_index| <= tol_event.  Throws NumericalError if 64 bisection
/// iterations do not converge.
inline std::pair<double, Vector> locate_crossing(
    const Problem& pb, double t_pre, const Vector& z_pre, const Vector& z_post,
    double h, const ActiveSet& as, const GainConfig& gains, int index,
    double tol_event) {
  auto g_at = [&](const Vector& z) { return eval_g(pb, z).ineq[index]; };
  const double g_pre = g_at(z_pre);
  const double g_post = g_at(z_post);
  if (!(g_pre < 0.0) || !(g_post >= 0.0))
    throw StructuralError(
        "locate_crossing requires a sign change across the step");

  double s_lo = 0.0, s_hi = 1.0;
  Vector z_hi = z_post;
  double g_hi = g_post;
  if (std::abs(g_hi) <= tol_event) return {t_pre + h, z_hi};

  for (int iter = 0; iter < 64; ++iter) {
    const double s_mid = 0.5 * (s_lo + s_hi);
    const Vector z_mid = rk4_step(pb, z_pre, as, gains, s_mid * h);
    const double g_mid = g_at(z_mid);
    if (std::abs(g_mid) <= tol_event) return {t_pre + s_mid * h, z_mid};
    if (g_mid < 0.0) {
      s_lo = s_mid;
    } else {
      s_hi = s_mid;
      z_hi = z_mid;
      g_hi = g_mid;
    }
    // The bracket can collapse before the value tolerance is met when the
    // crossing is very shallow; accept the non-negative end point then.
    if (s_hi - s_lo < 1e-18 && std::abs(g_hi) <= tol_event)
      return {t_pre + s_hi * h, z_hi};
  }
  if (std::abs(g_hi) <= tol_event) return {t_pre + s_hi * h, z_hi};
  throw NumericalError(
      "event localization did not converge within 64 bisection iterations");
}

enum class Termination { stationary, horizon, error };

inline std::string to_string(Termination t) {
  switch (t) {
    case Termination::stationary: return "stationary";
    case Termination::horizon: return "horizon";
    case Termination::error: return "error";
  }
  return "error";
}

struct Sample {
  double t = 0.0;
  Vector z;
  double f = 0.0;
  Vector g_eq;
  Vector g_ineq;
  std::vector<int> sigma;
};

struct Trajectory {
  std::vector<Sample> samples;
  std::vector<SwitchEvent> events;
  Termination termination = Termination::error;
  std::string error_message;  ///< non-empty only when termination == error
  double t_end = 0.0;
  Vector z_end;
  std::vector<int> sigma_end;
};

struct SolveResult {
  Trajectory trajectory;
  std::optional<KKTReport> report;  ///< absent when the run ended in error
};

namespace detail {

inline Sample make_sample(const Problem& pb, double t, const Vector& z,
                          const ActiveSet& sigma) {
  Sample s;
  s.t = t;
  s.z = z;
  s.f = pb.objective(z);
  const ConstraintValues cv = eval_g(pb, z);
  s.g_eq = cv.eq;
  s.g_ineq = cv.ineq;
  s.sigma = sigma.indices();
  return s;
}

}  // namespace detail

/// Integrates the switched flow from z0 until the field stays below
/// tol_stationary for stall_window consecutive steps with no pending switch,
/// or until t_max.  The end point is certified (multipliers, residuals,
/// projected curvature).  The initial point must satisfy every inequality up
/// to tol_active, or InfeasibleStart is thrown.  Mid-run numerical failures
/// and the chatter guard are reported through termination == error with the
/// trajectory collected so far.
inline SolveResult solve(const Problem& pb, const Vector& z0,
                         const SolverConfig& cfg = {}) {
  validate(pb);
  validate(cfg);
  detail::require_size(z0, pb.n, "initial point");

  SolveResult result;
  Trajectory& traj = result.trajectory;

  const ConstraintValues cv0 = eval_g(pb, z0);
  for (int i = 0; i < pb.p; ++i) {
    if (cv0.ineq[i] > cfg.tol_active) {
      std::ostringstream os;
      os << "initial point violates inequality " << i << " by " << cv0.ineq[i];
      throw InfeasibleStart(os.str());
    }
  }

  SwitchState state;
  state.sigma = active_indices(cv0, cfg.tol_active);

  double t = 0.0;
  Vector z = z0;
  int quiet = 0;
  bool pending_removal = false;

  auto total_switches = [&]() {
    return static_cast<int>(state.events.size());
  };

  try {
    // Switching conditions are evaluated at t = 0 as well: the initial set is
    // just initialization, and a boundary-started flow may release at once.
    try_additions(pb, t, z, state, cfg.gains, cfg.tol_active);
    const RemovalOutcome rem0 =
        try_removals(pb, t, z, state, cfg.gains, cfg.dwell);
    pending_removal = rem0.pending;
    traj.samples.push_back(detail::make_sample(pb, t, z, state.sigma));

    for (;;) {
      const Vector h_now = subsystem_field(pb, z, state.sigma, cfg.gains);
      if (inf_norm(h_now) <= cfg.tol_stationary && !pending_removal)
        ++quiet;
      else
        quiet = 0;
      if (quiet >= cfg.stall_window) {
        traj.termination = Termination::stationary;
        break;
      }
      if (t >= cfg.t_max - 1e-12) {
        traj.termination = Termination::horizon;
        break;
      }

      const double h_step = std::min(cfg.step, cfg.t_max - t);
      const Vector z_post = rk4_step(pb, z, state.sigma, cfg.gains, h_step);
      if (!all_finite(z_post))
        throw NumericalError("integration produced a non-finite state");

      // Crossing detection for inactive constraints across the step.
      const ConstraintValues cv_pre = eval_g(pb, z);
      const ConstraintValues cv_post = eval_g(pb, z_post);
      int crossing_index = -1;
      double crossing_s = 2.0;
      Vector z_cross;
      double t_cross = 0.0;
      for (int i = 0; i < pb.p; ++i) {
        if (state.sigma.contains(i)) continue;
        if (cv_pre.ineq[i] < 0.0 && cv_post.ineq[i] >= 0.0) {
          const auto [ti, zi] =
              locate_crossing(pb, t, z, z_post, h_step, state.sigma,
                              cfg.gains, i, cfg.tol_event);
          const double si = (ti - t) / h_step;
          if (si < crossing_s) {
            crossing_s = si;
            crossing_index = i;
            z_cross = zi;
            t_cross = ti;
          }
        }
      }

      if (crossing_index >= 0) {
        // Truncate the step at the first crossing, run the addition check
        // there, and resume from the crossing state.
        t = t_cross;
        z = z_cross;
        try_additions(pb, t, z, state, cfg.gains, cfg.tol_active);
        pending_removal = false;
        quiet = 0;
      } else {
        t += h_step;
        z = z_post;
        const bool added =
            try_additions(pb, t, z, state, cfg.gains, cfg.tol_active);
        const RemovalOutcome rem =
            try_removals(pb, t, z, state, cfg.gains, cfg.dwell);
        pending_removal = rem.pending;
        if (added || rem.removed) quiet = 0;
      }

      if (total_switches() > cfg.max_switches)
        throw ChatterGuard("switch count exceeded max_switches = " +
                           std::to_string(cfg.max_switches));
      traj.samples.push_back(detail::make_sample(pb, t, z, state.sigma));
    }
  } catch (const Error& e) {
    traj.termination = Termination::error;
    traj.error_message = e.what();
  }

  traj.events = state.events;
  traj.t_end = t;
  traj.z_end = z;
  traj.sigma_end = state.sigma.indices();

  if (traj.termination != Termination::error)
    result.report = certify(pb, z, state.sigma, cfg.tol_kkt);
  return result;
}

/// CSV layout: t, z0..z{n-1}, f, geq0.., gineq0.., sigma — one row per
/// sample, 17 significant digits, semicolon-joined active set in the last
/// column.
inline void write_trajectory_csv(const Trajectory& traj, std::ostream& os) {
  if (traj.samples.empty()) return;
  const auto& first = traj.samples.front();
  os << "t";
  for (Eigen::Index i = 0; i < first.z.size(); ++i) os << ",z" << i;
  os << ",f";
  for (Eigen::Index i = 0; i < first.g_eq.size(); ++i) os << ",geq" << i;
  for (Eigen::Index i = 0; i < first.g_ineq.size(); ++i) os << ",gineq" << i;
  os << ",sigma\n";
  for (const Sample& s : traj.samples) {
    os << format_g17(s.t);
    for (Eigen::Index i = 0; i < s.z.size(); ++i)
      os << "," << format_g17(s.z[i]);
    os << "," << format_g17(s.f);
    for (Eigen::Index i = 0; i < s.g_eq.size(); ++i)
      os << "," << format_g17(s.g_eq[i]);
    for (Eigen::Index i = 0; i < s.g_ineq.size(); ++i)
      os << "," << format_g17(s.g_ineq[i]);
    os << ",";
    for (std::size_t i = 0; i < s.sigma.size(); ++i) {
      if (i) os << ";";
      os << s.sigma[i];
    }
    os << "\n";
  }
}

}  // namespace skkt
