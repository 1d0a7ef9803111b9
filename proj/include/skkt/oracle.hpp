#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "skkt/active_set.hpp"
#include "skkt/dynamics.hpp"
#include "skkt/errors.hpp"
#include "skkt/problem.hpp"
#include "skkt/types.hpp"

namespace skkt {

struct OracleSolution {
  Vector z;
  Vector lambda;  ///< equality multipliers
  Vector nu;      ///< inequality multipliers, length p
  ActiveSet active;
  double objective = 0.0;
};

/// Reference QP solver by exhaustive enumeration of inequality subsets.  For
/// each subset W the equality-constrained stationarity system
///   [ L  B_eq'  B_W' ] [ z  ]   [ -K  ]
///   [ B_eq  0    0   ] [ lam] = [ -c_eq ]
///   [ B_W   0    0   ] [ mu ]   [ -c_W ]
/// is solved; candidates must be primal feasible and have mu >= 0 on W.  The
/// least objective wins, ties going to the lexicographically smallest subset.
/// Intended for small instances (p <= 20).
inline OracleSolution qp_enumerate(const QpData& qp) {
  validate(qp);
  const int n = static_cast<int>(qp.l.rows());
  const int m = static_cast<int>(qp.b_eq.rows());
  const int p = static_cast<int>(qp.b_ineq.rows());
  if (p > 20)
    throw CapabilityError("qp_enumerate enumerates 2^p subsets; p <= 20 only");

  constexpr double kFeasTol = 1e-9;
  constexpr double kDualTol = 1e-10;

  bool have_best = false;
  OracleSolution best;

  auto lex_less = [](const std::vector<int>& a, const std::vector<int>& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(),
                                        b.end());
  };

  for (std::uint32_t mask = 0; mask < (1u << p); ++mask) {
    std::vector<int> w;
    for (int i = 0; i < p; ++i)
      if (mask & (1u << i)) w.push_back(i);
    const int a = static_cast<int>(w.size());
    const int dim = n + m + a;

    Matrix kkt = Matrix::Zero(dim, dim);
    Vector rhs(dim);
    kkt.topLeftCorner(n, n) = qp.l;
    rhs.head(n) = -qp.k;
    if (m > 0) {
      kkt.block(0, n, n, m) = qp.b_eq.transpose();
      kkt.block(n, 0, m, n) = qp.b_eq;
      rhs.segment(n, m) = -qp.c_eq;
    }
    for (int r = 0; r < a; ++r) {
      kkt.block(0, n + m + r, n, 1) = qp.b_ineq.row(w[r]).transpose();
      kkt.block(n + m + r, 0, 1, n) = qp.b_ineq.row(w[r]);
      rhs[n + m + r] = -qp.c_ineq[w[r]];
    }

    Eigen::FullPivLU<Matrix> lu(kkt);
    if (!lu.isInvertible()) continue;
    const Vector sol = lu.solve(rhs);

    const Vector z = sol.head(n);
    bool feasible = true;
    if (p > 0) {
      const Vector gi = qp.b_ineq * z + qp.c_ineq;
      if (gi.maxCoeff() > kFeasTol) feasible = false;
    }
    for (int r = 0; r < a && feasible; ++r)
      if (sol[n + m + r] < -kDualTol) feasible = false;
    if (!feasible) continue;

    const double obj = 0.5 * z.dot(qp.l * z) + qp.k.dot(z);
    const double tie_tol = 1e-9 * (1.0 + std::abs(obj));
    const bool better =
        !have_best || obj < best.objective - tie_tol ||
        (std::abs(obj - best.objective) <= tie_tol &&
         lex_less(w, best.active.indices()));
    if (!better) continue;

    best.z = z;
    best.lambda = sol.segment(n, m);
    best.nu = Vector::Zero(p);
    for (int r = 0; r < a; ++r) best.nu[w[r]] = sol[n + m + r];
    best.active = ActiveSet(w);
    best.objective = obj;
    have_best = true;
  }

  if (!have_best)
    throw InfeasibleProblem(
        "no inequality subset yields a primal-dual feasible candidate");
  return best;
}

struct FlowConsistency {
  double deviation = 0.0;  ///< || fd-rate + kappa1 * g ||_inf
  double threshold = 0.0;  ///< 1e-5 * (1 + ||g||_inf)
  bool ok = false;
};

/// Finite-difference audit of the constraint-restoration property: the
/// selected constraint values, differentiated along the subsystem field with
/// a central difference of width tau, must match -kappa1 * g.
inline FlowConsistency directional_derivative_check(const Problem& pb,
                                                    const Vector& z,
                                                    const ActiveSet& as,
                                                    const GainConfig& gains,
                                                    double tau = 1e-6) {
  const ActiveAssembly asm0 = assemble_active(pb, z, as);
  const Vector h = subsystem_field(pb, z, as, gains);
  const Vector g_plus = assemble_active(pb, z + tau * h, as).g;
  const Vector g_minus = assemble_active(pb, z - tau * h, as).g;
  const Vector fd_rate = (g_plus - g_minus) / (2.0 * tau);

  FlowConsistency out;
  out.deviation = inf_norm(fd_rate + gains.kappa1 * asm0.g);
  out.threshold = 1e-5 * (1.0 + inf_norm(asm0.g));
  out.ok = out.deviation <= out.threshold;
  return out;
}

struct RandomQp {
  QpData qp;
  Vector interior_start;  ///< strictly inequality-feasible witness point
};

/// Draws a small strictly convex QP with a guaranteed interior point:
/// L = M'M + 0.1 I for Gaussian M, constraint offsets are backed off from a
/// Gaussian witness so that B_ineq w + c_ineq <= -0.1.  With with_equality,
/// one equality row (not through the witness) is added.
inline RandomQp random_feasible_qp(std::mt19937_64& rng, int n, int p,
                                   bool with_equality = false) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> slack(0.1, 1.1);

  RandomQp out;
  Matrix mfac(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) mfac(i, j) = gauss(rng);
  out.qp.l = mfac.transpose() * mfac + 0.1 * Matrix::Identity(n, n);
  out.qp.k = Vector(n);
  for (int i = 0; i < n; ++i) out.qp.k[i] = 2.0 * gauss(rng);

  Vector w(n);
  for (int i = 0; i < n; ++i) w[i] = gauss(rng);
  out.interior_start = w;

  out.qp.b_ineq = Matrix(p, n);
  out.qp.c_ineq = Vector(p);
  for (int r = 0; r < p; ++r) {
    for (int j = 0; j < n; ++j) out.qp.b_ineq(r, j) = gauss(rng);
    out.qp.c_ineq[r] = -out.qp.b_ineq.row(r).dot(w) - slack(rng);
  }

  if (with_equality) {
    out.qp.b_eq = Matrix(1, n);
    for (int j = 0; j < n; ++j) out.qp.b_eq(0, j) = gauss(rng);
    std::uniform_real_distribution<double> offset(-0.5, 0.5);
    out.qp.c_eq = Vector::Constant(1, -out.qp.b_eq.row(0).dot(w) + offset(rng));
  } else {
    out.qp.b_eq = Matrix(0, n);
    out.qp.c_eq = Vector(0);
  }
  return out;
}

}  // namespace skkt
