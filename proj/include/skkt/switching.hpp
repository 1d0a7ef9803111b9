#pragma once

#include <ostream>
#include <vector>

#include <json.hpp>

#include "skkt/active_set.hpp"
#include "skkt/dynamics.hpp"
#include "skkt/errors.hpp"
#include "skkt/problem.hpp"
#include "skkt/types.hpp"

namespace skkt {

/// Strictness margin for the removal test: an index leaves the active set only
/// when the constraint value would move inward faster than this.
inline constexpr double kRemovalTol = 1e-10;

enum class SwitchKind { add, remove };

struct SwitchEvent {
  double t = 0.0;
  SwitchKind kind = SwitchKind::add;
  int index = -1;
  std::vector<int> sigma_after;
};

/// Mutable switching state threaded through an integration run.
struct SwitchState {
  ActiveSet sigma;
  double t_last_removal = -kInf;
  int addition_count = 0;
  int removal_count = 0;
  std::vector<SwitchEvent> events;
};

/// Addition rule: an index is numerically active but untracked, and the
/// current subsystem field does not move its constraint value inward
/// (directional derivative >= 0).  Runs to a fixed point: after each addition
/// the field changes, so candidates are re-scanned (ascending).  No dwell
/// condition applies to additions.  Returns true when at least one index was
/// added.
inline bool try_additions(const Problem& pb, double t, const Vector& z,
                          SwitchState& state, const GainConfig& gains,
                          double tol_active) {
  bool added_any = false;
  const ConstraintValues cv = eval_g(pb, z);
  const ActiveSet numerically_active = active_indices(cv, tol_active);

  bool have_jac = false;
  Matrix jac_ineq;
  for (;;) {
    std::vector<int> candidates;
    for (int i : numerically_active.indices())
      if (!state.sigma.contains(i)) candidates.push_back(i);
    if (candidates.empty()) return added_any;

    if (!have_jac) {
      jac_ineq = jac_g(pb, z).ineq;
      have_jac = true;
    }
    const Vector h = subsystem_field(pb, z, state.sigma, gains);

    bool fired = false;
    for (int i : candidates) {
      if (jac_ineq.row(i).dot(h) >= 0.0) {
        if (pb.m + state.sigma.size() + 1 > pb.n)
          throw StructuralError(
              "cannot add constraint " + std::to_string(i) +
              ": active rows would exceed the ambient dimension");
        state.sigma = state.sigma.with(i);
        state.events.push_back(
            {t, SwitchKind::add, i, state.sigma.indices()});
        ++state.addition_count;
        added_any = true;
        fired = true;
        break;
      }
    }
    if (!fired) return added_any;
  }
}

struct RemovalOutcome {
  bool removed = false;  ///< an index left the set during this invocation
  int index = -1;        ///< the removed index, if any
  bool pending = false;  ///< a removal condition held but was dwell-blocked
};

/// Removal rule: dropping index i must strictly decrease its constraint value
/// under the reduced subsystem's field (directional derivative < -margin), and
/// the dwell period since the last removal must have elapsed.  Indices are
/// scanned ascending and at most one removal fires per invocation.
inline RemovalOutcome try_removals(const Problem& pb, double t,
                                   const Vector& z, SwitchState& state,
                                   const GainConfig& gains, double dwell) {
  RemovalOutcome out;
  if (state.sigma.empty()) return out;

  const Matrix jac_ineq = jac_g(pb, z).ineq;
  const std::vector<int> current = state.sigma.indices();
  for (int i : current) {
    const Vector h_reduced =
        subsystem_field(pb, z, state.sigma.without(i), gains);
    if (jac_ineq.row(i).dot(h_reduced) < -kRemovalTol) {
      if (t > state.t_last_removal + dwell) {
        state.sigma = state.sigma.without(i);
        state.events.push_back(
            {t, SwitchKind::remove, i, state.sigma.indices()});
        ++state.removal_count;
        state.t_last_removal = t;
        out.removed = true;
        out.index = i;
        return out;
      }
      out.pending = true;
    }
  }
  return out;
}

struct DwellAudit {
  int count = 0;       ///< switches in the open interval (tau, t)
  double bound = 0.0;  ///< p + 2 (t - tau) / dwell
  bool ok = false;
};

/// Average dwell-time audit: the number of switches on (tau, t) may not
/// exceed p + 2 (t - tau) / dwell.
inline DwellAudit dwell_time_audit(const std::vector<SwitchEvent>& events,
                                   double tau, double t, int p, double dwell) {
  DwellAudit out;
  for (const SwitchEvent& e : events)
    if (e.t > tau && e.t < t) ++out.count;
  out.bound = static_cast<double>(p) + 2.0 * (t - tau) / dwell;
  out.ok = static_cast<double>(out.count) <= out.bound + 1e-12;
  return out;
}

inline nlohmann::ordered_json to_json(const SwitchEvent& e) {
  nlohmann::ordered_json j;
  j["t"] = e.t;
  j["kind"] = e.kind == SwitchKind::add ? "add" : "remove";
  j["index"] = e.index;
  j["sigma_after"] = e.sigma_after;
  return j;
}

/// One JSON object per line, in event order.
inline void write_events_jsonl(const std::vector<SwitchEvent>& events,
                               std::ostream& os) {
  for (const SwitchEvent& e : events) os << to_json(e).dump() << "\n";
}

}  // namespace skkt
