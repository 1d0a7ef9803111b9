#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "skkt/active_set.hpp"
#include "skkt/dynamics.hpp"
#include "skkt/errors.hpp"
#include "skkt/operators.hpp"
#include "skkt/problem.hpp"
#include "skkt/switching.hpp"
#include "skkt/types.hpp"

namespace skkt {

// ---------------------------------------------------------------------------
// First-order certification
// ---------------------------------------------------------------------------

struct MultiplierSet {
  Vector lambda;  ///< equality multipliers, length m
  Vector nu;      ///< inequality multipliers, length p (zero off the set)
};

/// Recovers stationarity multipliers at a candidate point by solving
/// B' mu = d for the selected rows; inequality multipliers outside the active
/// set are zero.  The result is meant to be validated through kkt_residual
/// rather than trusted: the algebra gives stationarity only at an actual
/// equilibrium of the subsystem.
inline MultiplierSet recover_multipliers(const Problem& pb, const Vector& z,
                                         const ActiveSet& as) {
  const ActiveAssembly asm_data = assemble_active(pb, z, as);
  const ActiveOperators ops = build_operators(asm_data);
  const Vector mu = ops.solve_bt(asm_data.d);
  MultiplierSet out;
  out.lambda = mu.head(pb.m);
  out.nu = Vector::Zero(pb.p);
  for (int r = 0; r < as.size(); ++r)
    out.nu[as.indices()[r]] = mu[pb.m + r];
  return out;
}

struct KktResidual {
  double grad_residual = 0.0;  ///< || grad f + J_eq' lambda + J_ineq' nu ||_inf
  double eq_residual = 0.0;    ///< || g_eq ||_inf
  double ineq_max = 0.0;       ///< max_i g_ineq_i (0 when p = 0)
  double nu_min = 0.0;         ///< min_i nu_i (0 when p = 0)
  double comp_residual = 0.0;  ///< || nu .* g_ineq ||_inf
};

/// First-order residuals at (z, lambda, nu), evaluated from the callbacks
/// directly (analytic Jacobians when present, finite differences otherwise).
inline KktResidual kkt_residual(const Problem& pb, const Vector& z,
                                const Vector& lambda, const Vector& nu) {
  detail::require_size(lambda, pb.m, "lambda");
  detail::require_size(nu, pb.p, "nu");
  const ConstraintValues cv = eval_g(pb, z);
  const ConstraintJacobians jg = jac_g(pb, z);

  Vector stat = eval_gradient(pb, z);
  if (pb.m > 0) stat += jg.eq.transpose() * lambda;
  if (pb.p > 0) stat += jg.ineq.transpose() * nu;

  KktResidual out;
  out.grad_residual = inf_norm(stat);
  out.eq_residual = inf_norm(cv.eq);
  out.ineq_max = pb.p > 0 ? cv.ineq.maxCoeff() : 0.0;
  out.nu_min = pb.p > 0 ? nu.minCoeff() : 0.0;
  out.comp_residual = pb.p > 0 ? inf_norm(nu.cwiseProduct(cv.ineq)) : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Second-order certification
// ---------------------------------------------------------------------------

struct SecondOrderOptions {
  double fd_step = 1e-5;  ///< central-difference step for the Hessian fallback
  bool allow_fd = true;   ///< permit differencing the Lagrangian gradient
};

namespace detail {

inline Vector lagrangian_gradient(const Problem& pb, const Vector& z,
                                  const Vector& lambda, const Vector& nu) {
  Vector g = eval_gradient(pb, z);
  const ConstraintJacobians jg = jac_g(pb, z);
  if (pb.m > 0) g += jg.eq.transpose() * lambda;
  if (pb.p > 0) g += jg.ineq.transpose() * nu;
  return g;
}

}  // namespace detail

/// Hessian of the Lagrangian at (z, lambda, nu): the analytic callback when
/// supplied, otherwise central finite differences of the Lagrangian gradient.
/// Always returns the symmetrized matrix.
inline Matrix lagrangian_hessian(const Problem& pb, const Vector& z,
                                 const Vector& lambda, const Vector& nu,
                                 const SecondOrderOptions& opts = {}) {
  if (pb.hess_lagrangian) {
    Matrix h = pb.hess_lagrangian(z, lambda, nu);
    detail::require_shape(h, pb.n, pb.n, "hess_lagrangian");
    detail::require_finite(h, "hess_lagrangian");
    return 0.5 * (h + h.transpose());
  }
  if (!opts.allow_fd)
    throw CapabilityError(
        "no analytic Hessian available and finite differencing is disabled");
  Matrix h(pb.n, pb.n);
  Vector zp = z, zm = z;
  for (int i = 0; i < pb.n; ++i) {
    zp[i] = z[i] + opts.fd_step;
    zm[i] = z[i] - opts.fd_step;
    h.col(i) = (detail::lagrangian_gradient(pb, zp, lambda, nu) -
                detail::lagrangian_gradient(pb, zm, lambda, nu)) /
               (2.0 * opts.fd_step);
    zp[i] = z[i];
    zm[i] = z[i];
  }
  return 0.5 * (h + h.transpose());
}

/// Smallest eigenvalue of the Lagrangian Hessian projected onto the
/// directions not spanned by the active constraint Jacobian.  Returns +inf
/// when every direction is constrained (no free subspace to test).
inline double second_order_check(const Problem& pb, const Vector& z,
                                 const Vector& lambda, const Vector& nu,
                                 const ActiveSet& as,
                                 const SecondOrderOptions& opts = {}) {
  const ActiveOperators ops = build_operators(pb, z, as);
  if (ops.annihilator.rows() == 0) return kInf;
  const Matrix h = lagrangian_hessian(pb, z, lambda, nu, opts);
  return sym_min_eig(ops.annihilator * h * ops.annihilator.transpose());
}

enum class Verdict { kkt_fail, kkt_pass, kkt_pass_second_order };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::kkt_fail: return "kkt_fail";
    case Verdict::kkt_pass: return "kkt_pass";
    case Verdict::kkt_pass_second_order: return "kkt_pass_second_order";
  }
  return "kkt_fail";
}

inline Verdict verdict_from_string(const std::string& s) {
  if (s == "kkt_fail") return Verdict::kkt_fail;
  if (s == "kkt_pass") return Verdict::kkt_pass;
  if (s == "kkt_pass_second_order") return Verdict::kkt_pass_second_order;
  throw FormatError("unknown verdict string: " + s);
}

/// First-order pass at tolerance tol_kkt; verified curvature upgrades the
/// verdict, a failed or absent curvature check does not downgrade it.
inline Verdict evaluate_verdict(const KktResidual& r, double tol_kkt,
                                double second_order_eigmin) {
  const bool first_order =
      r.grad_residual <= tol_kkt && r.eq_residual <= tol_kkt &&
      r.ineq_max <= tol_kkt && r.nu_min >= -tol_kkt &&
      r.comp_residual <= tol_kkt;
  if (!first_order) return Verdict::kkt_fail;
  return second_order_eigmin > 0.0 ? Verdict::kkt_pass_second_order
                                   : Verdict::kkt_pass;
}

struct KKTReport {
  Vector z_star;
  Vector lambda;
  Vector nu;
  std::vector<int> sigma;  ///< active set at the certified point
  KktResidual residuals;
  double second_order_eigmin = kInf;
  double tol_kkt = 1e-6;
  Verdict verdict = Verdict::kkt_fail;
};

/// Produces a full certificate at (z, active set): recovered multipliers,
/// first-order residuals, projected curvature, verdict.
inline KKTReport certify(const Problem& pb, const Vector& z,
                         const ActiveSet& as, double tol_kkt,
                         const SecondOrderOptions& opts = {}) {
  KKTReport rep;
  rep.z_star = z;
  rep.sigma = as.indices();
  const MultiplierSet mult = recover_multipliers(pb, z, as);
  rep.lambda = mult.lambda;
  rep.nu = mult.nu;
  rep.residuals = kkt_residual(pb, z, mult.lambda, mult.nu);
  rep.second_order_eigmin =
      second_order_check(pb, z, mult.lambda, mult.nu, as, opts);
  rep.tol_kkt = tol_kkt;
  rep.verdict = evaluate_verdict(rep.residuals, tol_kkt,
                                 rep.second_order_eigmin);
  return rep;
}

// ---------------------------------------------------------------------------
// Sampled regularity certificate
// ---------------------------------------------------------------------------

/// Sampling region for the regularity check: an axis-aligned box, either
/// sampled uniformly (seeded) or on a deterministic tensor grid.
struct SampleRegion {
  Vector lo, hi;
  int count = 1000;        ///< number of uniform draws when grid_points == 0
  std::uint64_t seed = 0;  ///< RNG seed for uniform sampling
  int grid_points = 0;     ///< per-dimension grid resolution (0 = random)
};

/// Sampled statistics of the constraint interaction matrix B = J A' for one
/// candidate subset of inequality indices (always together with all equality
/// rows).
struct SubsetRegularity {
  std::vector<int> subset;
  int samples_checked = 0;
  double min_sym_eig = kInf;     ///< min over samples of eigmin((B + B')/2)
  double beta1 = kInf;           ///< min generalized eig of (sym B, B B'/2)
  double beta2 = kInf;           ///< beta1/2 times min over samples of eigmin(B B')
  double phi = kInf;             ///< min over samples of concat_min_eig(A, G)
  double worst_condition = 1.0;  ///< max over samples of cond_2(B)
  bool pass = false;
};

struct RegularityReport {
  SampleRegion region;
  int samples_kept = 0;  ///< samples inside the inequality-feasible region
  std::vector<SubsetRegularity> subsets;

  bool all_pass() const {
    for (const auto& s : subsets)
      if (!s.pass) return false;
    return !subsets.empty();
  }
  double min_beta1() const {
    double v = kInf;
    for (const auto& s : subsets) v = std::min(v, s.beta1);
    return v;
  }
  double min_beta2() const {
    double v = kInf;
    for (const auto& s : subsets) v = std::min(v, s.beta2);
    return v;
  }
  double min_phi() const {
    double v = kInf;
    for (const auto& s : subsets) v = std::min(v, s.phi);
    return v;
  }
};

namespace detail {

inline std::vector<Vector> region_samples(const Problem& pb,
                                          const SampleRegion& region) {
  if (region.lo.size() != pb.n || region.hi.size() != pb.n)
    throw StructuralError("sampling box dimension must match the problem");
  for (int i = 0; i < pb.n; ++i)
    if (!(region.lo[i] <= region.hi[i]))
      throw StructuralError("sampling box has lo > hi");

  std::vector<Vector> pts;
  if (region.grid_points > 0) {
    if (region.grid_points < 2)
      throw StructuralError("grid sampling needs at least 2 points per axis");
    const int g = region.grid_points;
    std::vector<int> idx(pb.n, 0);
    Vector z(pb.n);
    for (;;) {
      for (int d = 0; d < pb.n; ++d)
        z[d] = region.lo[d] +
               idx[d] * (region.hi[d] - region.lo[d]) / (g - 1);
      pts.push_back(z);
      int d = pb.n - 1;
      while (d >= 0 && ++idx[d] == g) idx[d--] = 0;
      if (d < 0) break;
    }
  } else {
    if (region.count < 1)
      throw StructuralError("sample count must be at least 1");
    std::mt19937_64 rng(region.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Vector z(pb.n);
    for (int s = 0; s < region.count; ++s) {
      for (int d = 0; d < pb.n; ++d)
        z[d] = region.lo[d] + unit(rng) * (region.hi[d] - region.lo[d]);
      pts.push_back(z);
    }
  }
  return pts;
}

}  // namespace detail

/// Samples the box, keeps inequality-feasible points, and evaluates the
/// interaction-matrix statistics for every requested subset.  Degenerate
/// geometry is recorded (condition >= 1e12, pass = false) rather than thrown.
/// Throws SamplingError when no sample is feasible.
inline RegularityReport check_regularity(
    const Problem& pb, const SampleRegion& region,
    const std::vector<std::vector<int>>& subsets) {
  validate(pb);
  RegularityReport report;
  report.region = region;

  std::vector<Vector> kept;
  for (const Vector& z : detail::region_samples(pb, region)) {
    const ConstraintValues cv = eval_g(pb, z);
    if (pb.p == 0 || (cv.ineq.array() <= 0.0).all()) kept.push_back(z);
  }
  report.samples_kept = static_cast<int>(kept.size());
  if (kept.empty())
    throw SamplingError(
        "sampling box contains no inequality-feasible points");

  for (const std::vector<int>& subset : subsets) {
    const ActiveSet as{subset};
    if (pb.m + as.size() > pb.n)
      throw StructuralError("subset demands more active rows than dimensions");
    SubsetRegularity stat;
    stat.subset = subset;
    stat.samples_checked = report.samples_kept;

    double min_bbt_eig = kInf;
    for (const Vector& z : kept) {
      const ActiveAssembly asm_data = assemble_active(pb, z, as);
      const int k = asm_data.m + asm_data.a;
      const Matrix b = asm_data.jac * asm_data.a_mat.transpose();

      Matrix g_perp;
      bool have_annihilator = true;
      try {
        g_perp = annihilator(asm_data.jac);
      } catch (const RankError&) {
        have_annihilator = false;
      }
      if (have_annihilator)
        stat.phi = std::min(stat.phi,
                            concat_min_eig(asm_data.a_mat, g_perp));
      else
        stat.phi = 0.0;

      if (k == 0) continue;

      stat.min_sym_eig = std::min(stat.min_sym_eig, sym_min_eig(b));

      Eigen::SelfAdjointEigenSolver<Matrix> bbt(b * b.transpose());
      if (bbt.info() != Eigen::Success)
        throw NumericalError("regularity check: eigendecomposition failed");
      const double bbt_min = bbt.eigenvalues().minCoeff();
      const double bbt_max = bbt.eigenvalues().maxCoeff();
      min_bbt_eig = std::min(min_bbt_eig, bbt_min);
      if (bbt_min <= 0.0 || bbt_max <= 0.0) {
        stat.worst_condition = kInf;
        continue;
      }
      stat.worst_condition =
          std::max(stat.worst_condition, std::sqrt(bbt_max / bbt_min));

      Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> gen(
          0.5 * (b + b.transpose()), 0.5 * (b * b.transpose()));
      if (gen.info() != Eigen::Success)
        throw NumericalError(
            "regularity check: generalized eigendecomposition failed");
      stat.beta1 = std::min(stat.beta1, gen.eigenvalues().minCoeff());
    }
    if (std::isfinite(stat.beta1) && std::isfinite(min_bbt_eig))
      stat.beta2 = 0.5 * stat.beta1 * min_bbt_eig;
    stat.pass = stat.min_sym_eig > 0.0 && stat.worst_condition < 1e12;
    report.subsets.push_back(std::move(stat));
  }
  return report;
}

/// Candidate subsets worth auditing: the empty set, every singleton, and
/// every active set that actually occurred in an event log.
inline std::vector<std::vector<int>> default_subsets(
    int p, const std::vector<SwitchEvent>& events = {}) {
  std::vector<std::vector<int>> out;
  out.push_back({});
  for (int i = 0; i < p; ++i) out.push_back({i});
  for (const SwitchEvent& e : events) out.push_back(e.sigma_after);
  std::sort(out.begin(), out.end(),
            [](const std::vector<int>& a, const std::vector<int>& b) {
              if (a.size() != b.size()) return a.size() < b.size();
              return a < b;
            });
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Radius of the gradient-norm ball that bounds the asymptotic stationarity
/// error under the constant constraint offsets d:
///   kappa1 * ||d||^2 / (beta2 * phi * min(kappa1*beta1/2, kappa2)),
/// with beta1/beta2/phi the worst-case sampled statistics of the report.
/// Requires a passing report; returns 0 when both offset blocks vanish.
inline double iss_bound(const Problem& pb, const GainConfig& gains,
                        const RegularityReport& report) {
  validate(gains);
  if (!report.all_pass())
    throw CapabilityError(
        "iss_bound requires a passing regularity certificate");
  double d_sq = 0.0;
  if (pb.m > 0) d_sq += pb.d_eq.squaredNorm();
  if (pb.p > 0) d_sq += pb.d_ineq.squaredNorm();
  if (d_sq == 0.0) return 0.0;

  const double beta1 = report.min_beta1();
  const double beta2 = report.min_beta2();
  const double phi = report.min_phi();
  if (!std::isfinite(beta1) || !std::isfinite(beta2) || !std::isfinite(phi))
    throw CapabilityError(
        "iss_bound requires at least one non-empty subsystem statistic");
  const double denom =
      beta2 * phi * std::min(0.5 * gains.kappa1 * beta1, gains.kappa2);
  if (!(denom > 0.0))
    throw CapabilityError("iss_bound: sampled statistics are not positive");
  return gains.kappa1 * d_sq / denom;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::ordered_json maybe_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double parse_maybe_inf(const nlohmann::json& j, const char* field) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
  }
  throw FormatError(std::string("field '") + field +
                    "' must be a number or \"inf\"/\"-inf\"");
}

inline double number_field(const nlohmann::json& j, const char* name) {
  const nlohmann::json& f = json_field(j, name);
  if (!f.is_number())
    throw FormatError(std::string("field '") + name + "' must be a number");
  return f.get<double>();
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const KktResidual& r) {
  nlohmann::ordered_json j;
  j["grad_residual"] = r.grad_residual;
  j["eq_residual"] = r.eq_residual;
  j["ineq_max"] = r.ineq_max;
  j["nu_min"] = r.nu_min;
  j["comp_residual"] = r.comp_residual;
  return j;
}

inline KktResidual kkt_residual_from_json(const nlohmann::json& j) {
  KktResidual r;
  r.grad_residual = detail::number_field(j, "grad_residual");
  r.eq_residual = detail::number_field(j, "eq_residual");
  r.ineq_max = detail::number_field(j, "ineq_max");
  r.nu_min = detail::number_field(j, "nu_min");
  r.comp_residual = detail::number_field(j, "comp_residual");
  return r;
}

inline nlohmann::ordered_json to_json(const KKTReport& rep) {
  nlohmann::ordered_json j;
  j["z_star"] = detail::vector_to_json(rep.z_star);
  j["lambda"] = detail::vector_to_json(rep.lambda);
  j["nu"] = detail::vector_to_json(rep.nu);
  j["sigma"] = rep.sigma;
  j["residuals"] = to_json(rep.residuals);
  j["second_order_eigmin"] = detail::maybe_inf(rep.second_order_eigmin);
  j["tol_kkt"] = rep.tol_kkt;
  j["verdict"] = to_string(rep.verdict);
  return j;
}

inline KKTReport kkt_report_from_json(const nlohmann::json& j) {
  KKTReport rep;
  rep.z_star = detail::json_to_vector(detail::json_field(j, "z_star"), "z_star");
  rep.lambda = detail::json_to_vector(detail::json_field(j, "lambda"), "lambda");
  rep.nu = detail::json_to_vector(detail::json_field(j, "nu"), "nu");
  const nlohmann::json& sig = detail::json_field(j, "sigma");
  if (!sig.is_array()) throw FormatError("field 'sigma' must be an array");
  for (const auto& v : sig) {
    if (!v.is_number_integer())
      throw FormatError("field 'sigma' must contain integers");
    rep.sigma.push_back(v.get<int>());
  }
  rep.residuals = kkt_residual_from_json(detail::json_field(j, "residuals"));
  rep.second_order_eigmin = detail::parse_maybe_inf(
      detail::json_field(j, "second_order_eigmin"), "second_order_eigmin");
  rep.tol_kkt = detail::number_field(j, "tol_kkt");
  const nlohmann::json& v = detail::json_field(j, "verdict");
  if (!v.is_string()) throw FormatError("field 'verdict' must be a string");
  rep.verdict = verdict_from_string(v.get<std::string>());
  return rep;
}

inline nlohmann::ordered_json to_json(const SubsetRegularity& s) {
  nlohmann::ordered_json j;
  j["subset"] = s.subset;
  j["samples_checked"] = s.samples_checked;
  j["min_sym_eig"] = detail::maybe_inf(s.min_sym_eig);
  j["beta1"] = detail::maybe_inf(s.beta1);
  j["beta2"] = detail::maybe_inf(s.beta2);
  j["phi"] = detail::maybe_inf(s.phi);
  j["worst_condition"] = detail::maybe_inf(s.worst_condition);
  j["pass"] = s.pass;
  return j;
}

inline nlohmann::ordered_json to_json(const RegularityReport& rep) {
  nlohmann::ordered_json j;
  j["box_lo"] = detail::vector_to_json(rep.region.lo);
  j["box_hi"] = detail::vector_to_json(rep.region.hi);
  j["requested_samples"] = rep.region.count;
  j["grid_points"] = rep.region.grid_points;
  j["seed"] = rep.region.seed;
  j["samples_kept"] = rep.samples_kept;
  nlohmann::ordered_json subsets = nlohmann::ordered_json::array();
  for (const auto& s : rep.subsets) subsets.push_back(to_json(s));
  j["subsets"] = std::move(subsets);
  j["all_pass"] = rep.all_pass();
  return j;
}

}  // namespace skkt
