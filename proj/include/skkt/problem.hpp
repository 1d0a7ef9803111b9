#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "skkt/errors.hpp"
#include "skkt/types.hpp"

namespace skkt {

// ---------------------------------------------------------------------------
// Problem description
// ---------------------------------------------------------------------------
//
// A program over z in R^n:
//
//   minimize    f(z)
//   subject to  g_eq(z)   = A_eq(z)   * grad f(z) + d_eq   = 0   (m rows)
//               g_ineq(z) = A_ineq(z) * grad f(z) + d_ineq <= 0  (p rows)
//
// Constraints are supplied through the coefficient maps A_eq / A_ineq and the
// constant offsets d_eq / d_ineq; the constraint values themselves are always
// derived from the gradient.  Jacobian and Hessian callbacks are optional —
// finite-difference fallbacks are used when they are absent.

struct Problem {
  int n = 0;  ///< number of decision variables
  int m = 0;  ///< number of equality constraints
  int p = 0;  ///< number of inequality constraints

  std::function<double(const Vector&)> objective;
  std::function<Vector(const Vector&)> gradient;
  std::function<Matrix(const Vector&)> a_eq;    ///< m-by-n coefficient map
  std::function<Matrix(const Vector&)> a_ineq;  ///< p-by-n coefficient map
  Vector d_eq;
  Vector d_ineq;

  /// Optional analytic Jacobian of g_eq (m-by-n).
  std::function<Matrix(const Vector&)> jac_g_eq;
  /// Optional analytic Jacobian of g_ineq (p-by-n).
  std::function<Matrix(const Vector&)> jac_g_ineq;
  /// Optional analytic Hessian of f + lambda' g_eq + nu' g_ineq (n-by-n).
  std::function<Matrix(const Vector&, const Vector&, const Vector&)>
      hess_lagrangian;
};

/// Checks the structural invariants of a problem description.
/// Throws InvalidProblem on violation.
inline void validate(const Problem& pb) {
  if (pb.n < 1) throw InvalidProblem("problem dimension n must be >= 1");
  if (pb.m < 0 || pb.p < 0)
    throw InvalidProblem("constraint counts must be non-negative");
  if (pb.m > pb.n)
    throw InvalidProblem(
        "more equality constraints than variables (m > n) is not supported");
  if (!pb.objective) throw InvalidProblem("objective callback is required");
  if (!pb.gradient) throw InvalidProblem("gradient callback is required");
  if (pb.m > 0 && !pb.a_eq)
    throw InvalidProblem("a_eq callback is required when m > 0");
  if (pb.p > 0 && !pb.a_ineq)
    throw InvalidProblem("a_ineq callback is required when p > 0");
  if (pb.d_eq.size() != pb.m)
    throw InvalidProblem("d_eq length must equal m");
  if (pb.d_ineq.size() != pb.p)
    throw InvalidProblem("d_ineq length must equal p");
}

namespace detail {

inline void require_size(const Vector& v, Eigen::Index size, const char* what) {
  if (v.size() != size) {
    std::ostringstream os;
    os << what << " has length " << v.size() << ", expected " << size;
    throw EvaluationError(os.str());
  }
}

inline void require_shape(const Matrix& m, Eigen::Index rows,
                          Eigen::Index cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream os;
    os << what << " has shape " << m.rows() << "x" << m.cols() << ", expected "
       << rows << "x" << cols;
    throw EvaluationError(os.str());
  }
}

inline void require_finite(const Vector& v, const char* what) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      std::ostringstream os;
      os << what << " returned a non-finite value at component " << i;
      throw EvaluationError(os.str(), static_cast<int>(i));
    }
  }
}

inline void require_finite(const Matrix& m, const char* what) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (!std::isfinite(m(i, j))) {
        std::ostringstream os;
        os << what << " returned a non-finite value at entry (" << i << ", "
           << j << ")";
        throw EvaluationError(os.str(), static_cast<int>(i));
      }
    }
  }
}

}  // namespace detail

/// Evaluates the objective gradient with shape and finiteness checks.
inline Vector eval_gradient(const Problem& pb, const Vector& z) {
  detail::require_size(z, pb.n, "evaluation point");
  Vector grad = pb.gradient(z);
  detail::require_size(grad, pb.n, "gradient");
  detail::require_finite(grad, "gradient");
  return grad;
}

struct ConstraintValues {
  Vector eq;    ///< g_eq(z), length m
  Vector ineq;  ///< g_ineq(z), length p
};

/// Evaluates both constraint blocks at z.
inline ConstraintValues eval_g(const Problem& pb, const Vector& z) {
  Vector grad = eval_gradient(pb, z);
  ConstraintValues out;
  if (pb.m > 0) {
    Matrix a = pb.a_eq(z);
    detail::require_shape(a, pb.m, pb.n, "a_eq");
    detail::require_finite(a, "a_eq");
    out.eq = a * grad + pb.d_eq;
  } else {
    out.eq = Vector(0);
  }
  if (pb.p > 0) {
    Matrix a = pb.a_ineq(z);
    detail::require_shape(a, pb.p, pb.n, "a_ineq");
    detail::require_finite(a, "a_ineq");
    out.ineq = a * grad + pb.d_ineq;
  } else {
    out.ineq = Vector(0);
  }
  return out;
}

struct ConstraintJacobians {
  Matrix eq;    ///< d g_eq / d z, m-by-n
  Matrix ineq;  ///< d g_ineq / d z, p-by-n
};

/// Constraint Jacobians: analytic callbacks when supplied, otherwise central
/// finite differences with per-coordinate step max(1e-6, 1e-7*|z_i|).
inline ConstraintJacobians jac_g(const Problem& pb, const Vector& z) {
  detail::require_size(z, pb.n, "evaluation point");
  ConstraintJacobians out;
  out.eq = Matrix(pb.m, pb.n);
  out.ineq = Matrix(pb.p, pb.n);

  const bool fd_eq = pb.m > 0 && !pb.jac_g_eq;
  const bool fd_ineq = pb.p > 0 && !pb.jac_g_ineq;
  if (fd_eq || fd_ineq) {
    Vector zp = z, zm = z;
    for (int i = 0; i < pb.n; ++i) {
      const double h = std::max(1e-6, 1e-7 * std::abs(z[i]));
      zp[i] = z[i] + h;
      zm[i] = z[i] - h;
      const ConstraintValues gp = eval_g(pb, zp);
      const ConstraintValues gm = eval_g(pb, zm);
      if (fd_eq) out.eq.col(i) = (gp.eq - gm.eq) / (2.0 * h);
      if (fd_ineq) out.ineq.col(i) = (gp.ineq - gm.ineq) / (2.0 * h);
      zp[i] = z[i];
      zm[i] = z[i];
    }
  }
  if (pb.m > 0 && pb.jac_g_eq) {
    out.eq = pb.jac_g_eq(z);
    detail::require_shape(out.eq, pb.m, pb.n, "jac_g_eq");
    detail::require_finite(out.eq, "jac_g_eq");
  }
  if (pb.p > 0 && pb.jac_g_ineq) {
    out.ineq = pb.jac_g_ineq(z);
    detail::require_shape(out.ineq, pb.p, pb.n, "jac_g_ineq");
    detail::require_finite(out.ineq, "jac_g_ineq");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Quadratic programs
// ---------------------------------------------------------------------------

/// Conventional quadratic program
///   minimize 1/2 z'Lz + K'z  s.t.  B_eq z + c_eq = 0,  B_ineq z + c_ineq <= 0
struct QpData {
  Matrix l;       ///< n-by-n, symmetric positive definite
  Vector k;       ///< length n
  Matrix b_eq;    ///< m-by-n (may have zero rows)
  Vector c_eq;    ///< length m
  Matrix b_ineq;  ///< p-by-n (may have zero rows)
  Vector c_ineq;  ///< length p
};

/// Checks QpData invariants: square symmetric L (to 1e-12, relative to its
/// largest entry), strictly positive smallest eigenvalue, consistent shapes.
inline void validate(const QpData& qp) {
  const Eigen::Index n = qp.l.rows();
  if (n < 1 || qp.l.cols() != n)
    throw InvalidProblem("L must be square and non-empty");
  const double scale = std::max(1.0, qp.l.cwiseAbs().maxCoeff());
  if ((qp.l - qp.l.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw InvalidProblem("L must be symmetric (tolerance 1e-12)");
  Eigen::SelfAdjointEigenSolver<Matrix> es(qp.l);
  if (es.info() != Eigen::Success)
    throw NumericalError("eigendecomposition of L failed");
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw InvalidProblem("L must be positive definite");
  if (qp.k.size() != n) throw InvalidProblem("K length must match L");
  if (qp.b_eq.rows() > 0 && qp.b_eq.cols() != n)
    throw InvalidProblem("B_eq column count must match L");
  if (qp.c_eq.size() != qp.b_eq.rows())
    throw InvalidProblem("c_eq length must match B_eq rows");
  if (qp.b_ineq.rows() > 0 && qp.b_ineq.cols() != n)
    throw InvalidProblem("B_ineq column count must match L");
  if (qp.c_ineq.size() != qp.b_ineq.rows())
    throw InvalidProblem("c_ineq length must match B_ineq rows");
}

/// Rewrites a conventional QP in gradient-constraint form.  With
/// A = B L^{-1} and d = c - B L^{-1} K the identity
/// A * grad f(z) + d = B z + c holds for every z, so both forms describe the
/// same feasible set and the same optimizer.
inline Problem qp_transform(const QpData& qp) {
  validate(qp);
  const int n = static_cast<int>(qp.l.rows());
  const int m = static_cast<int>(qp.b_eq.rows());
  const int p = static_cast<int>(qp.b_ineq.rows());

  Eigen::LLT<Matrix> llt(qp.l);
  if (llt.info() != Eigen::Success)
    throw NumericalError("Cholesky factorization of L failed");

  const Matrix a_eq_const =
      m > 0 ? Matrix(llt.solve(qp.b_eq.transpose()).transpose()) : Matrix(0, n);
  const Matrix a_ineq_const =
      p > 0 ? Matrix(llt.solve(qp.b_ineq.transpose()).transpose())
            : Matrix(0, n);

  Problem pb;
  pb.n = n;
  pb.m = m;
  pb.p = p;
  pb.objective = [l = qp.l, k = qp.k](const Vector& z) {
    return 0.5 * z.dot(l * z) + k.dot(z);
  };
  pb.gradient = [l = qp.l, k = qp.k](const Vector& z) -> Vector {
    return l * z + k;
  };
  pb.a_eq = [a_eq_const](const Vector&) { return a_eq_const; };
  pb.a_ineq = [a_ineq_const](const Vector&) { return a_ineq_const; };
  pb.d_eq = m > 0 ? Vector(qp.c_eq - a_eq_const * qp.k) : Vector(0);
  pb.d_ineq = p > 0 ? Vector(qp.c_ineq - a_ineq_const * qp.k) : Vector(0);
  pb.jac_g_eq = [b = qp.b_eq](const Vector&) { return b; };
  pb.jac_g_ineq = [b = qp.b_ineq](const Vector&) { return b; };
  pb.hess_lagrangian = [l = qp.l](const Vector&, const Vector&,
                                  const Vector&) { return l; };
  return pb;
}

namespace detail {

inline Matrix json_to_matrix(const nlohmann::json& j, int cols_hint,
                             const std::string& field) {
  if (!j.is_array())
    throw FormatError("field '" + field + "' must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return Matrix(0, cols_hint);
  Eigen::Index cols = -1;
  Matrix out;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array())
      throw FormatError("field '" + field + "', row " + std::to_string(r) +
                        ": expected an array");
    if (cols < 0) {
      cols = static_cast<Eigen::Index>(row.size());
      out.resize(rows, cols);
    }
    if (static_cast<Eigen::Index>(row.size()) != cols)
      throw FormatError("field '" + field + "', row " + std::to_string(r) +
                        ": ragged row length");
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number())
        throw FormatError("field '" + field + "', entry (" +
                          std::to_string(r) + ", " + std::to_string(c) +
                          "): expected a number");
      out(r, c) = v.get<double>();
    }
  }
  return out;
}

inline Vector json_to_vector(const nlohmann::json& j, const std::string& field) {
  if (!j.is_array())
    throw FormatError("field '" + field + "' must be an array");
  Vector out(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const auto& v = j[static_cast<std::size_t>(i)];
    if (!v.is_number())
      throw FormatError("field '" + field + "', entry " + std::to_string(i) +
                        ": expected a number");
    out[i] = v.get<double>();
  }
  return out;
}

inline nlohmann::ordered_json matrix_to_json(const Matrix& m) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline nlohmann::ordered_json vector_to_json(const Vector& v) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

inline const nlohmann::json& json_field(const nlohmann::json& j,
                                        const char* name) {
  auto it = j.find(name);
  if (it == j.end())
    throw FormatError(std::string("missing field '") + name + "'");
  return *it;
}

}  // namespace detail

/// Parses a QP from JSON held in memory.  Keys: L (array of rows), K, B_eq,
/// c_eq, B_ineq, c_ineq.  Empty arrays denote absent constraint blocks.
inline QpData qp_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("QP document must be a JSON object");
  QpData qp;
  qp.l = detail::json_to_matrix(detail::json_field(j, "L"), 0, "L");
  const int n = static_cast<int>(qp.l.rows());
  qp.k = detail::json_to_vector(detail::json_field(j, "K"), "K");
  qp.b_eq = detail::json_to_matrix(detail::json_field(j, "B_eq"), n, "B_eq");
  qp.c_eq = detail::json_to_vector(detail::json_field(j, "c_eq"), "c_eq");
  qp.b_ineq =
      detail::json_to_matrix(detail::json_field(j, "B_ineq"), n, "B_ineq");
  qp.c_ineq = detail::json_to_vector(detail::json_field(j, "c_ineq"), "c_ineq");
  validate(qp);
  return qp;
}

inline nlohmann::ordered_json qp_to_json(const QpData& qp) {
  nlohmann::ordered_json j;
  j["L"] = detail::matrix_to_json(qp.l);
  j["K"] = detail::vector_to_json(qp.k);
  j["B_eq"] = detail::matrix_to_json(qp.b_eq);
  j["c_eq"] = detail::vector_to_json(qp.c_eq);
  j["B_ineq"] = detail::matrix_to_json(qp.b_ineq);
  j["c_ineq"] = detail::vector_to_json(qp.c_ineq);
  return j;
}

/// Loads a QP description from a JSON file.  Throws FormatError on parse or
/// schema problems and InvalidProblem on bad matrix data.
inline QpData load_qp_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open QP file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("cannot parse QP file " + path + ": " + e.what());
  }
  return qp_from_json(j);
}

/// Writes a QP description to a JSON file (round-trip exact for doubles).
inline void save_qp_file(const std::string& path, const QpData& qp) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open file for writing: " + path);
  out << qp_to_json(qp).dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Built-in instances
// ---------------------------------------------------------------------------

/// Two-variable QP with two inequality constraints whose optimizer sits at the
/// constraint corner (2/3, 4/3); the unconstrained minimizer (10, 8) is
/// infeasible, so the flow must engage both constraints.
inline QpData qp_paper_data() {
  QpData qp;
  qp.l = (Matrix(2, 2) << 1.0, -1.0, -1.0, 2.0).finished();
  qp.k = (Vector(2) << -2.0, -6.0).finished();
  qp.b_eq = Matrix(0, 2);
  qp.c_eq = Vector(0);
  qp.b_ineq = (Matrix(2, 2) << 1.0, 1.0, -1.0, 2.0).finished();
  qp.c_ineq = (Vector(2) << -2.0, -2.0).finished();
  return qp;
}

/// Rosenbrock objective with one inequality constraint.  The coefficient row
/// is chosen so that the constraint value collapses to the affine function
/// -2 z1 + z2 + 3/4, i.e. a half-plane cutting through the curved valley.
inline Problem rosenbrock_problem() {
  Problem pb;
  pb.n = 2;
  pb.m = 0;
  pb.p = 1;
  pb.objective = [](const Vector& z) {
    const double u = z[1] - z[0] * z[0];
    const double v = 1.0 - z[0];
    return 100.0 * u * u + v * v;
  };
  pb.gradient = [](const Vector& z) -> Vector {
    const double u = z[1] - z[0] * z[0];
    Vector g(2);
    g[0] = -400.0 * z[0] * u - 2.0 * (1.0 - z[0]);
    g[1] = 200.0 * u;
    return g;
  };
  pb.a_ineq = [](const Vector& z) -> Matrix {
    Matrix a(1, 2);
    a(0, 0) = -0.5 + 0.5 * z[0];
    a(0, 1) = z[0] * z[0] - z[0] + 0.005;
    return a;
  };
  pb.d_ineq = (Vector(1) << -0.25).finished();
  pb.d_eq = Vector(0);
  pb.jac_g_ineq = [](const Vector&) -> Matrix {
    return (Matrix(1, 2) << -2.0, 1.0).finished();
  };
  pb.hess_lagrangian = [](const Vector& z, const Vector&,
                          const Vector&) -> Matrix {
    Matrix h(2, 2);
    h(0, 0) = 1200.0 * z[0] * z[0] - 400.0 * z[1] + 2.0;
    h(0, 1) = -400.0 * z[0];
    h(1, 0) = h(0, 1);
    h(1, 1) = 200.0;
    return h;
  };
  return pb;
}

// ---------------------------------------------------------------------------
// Two-zone supply network steady state ("HVAC")
// ---------------------------------------------------------------------------
//
// Decision vector z = [T1; T2; w] with zone-1 temperatures T1 (n1), zone-2
// temperatures T2 (n2), and supply mass flows w (n1).  The equality block is
// the steady thermal balance; the inequality block keeps T1 at least
// eps_margin below the supply temperature.

struct HvacParams {
  int n1 = 1;  ///< number of actively supplied zones
  int n2 = 1;  ///< number of passive zones

  Vector c1, c2;        ///< thermal capacitances (model data; not in the program)
  Matrix e11, e12, e22; ///< inter-zone conductance blocks
  Vector r1_inv, r2_inv;///< ambient coupling conductances (diagonals)
  Vector a_diag;        ///< supply coupling coefficients (n1)
  Vector t_supply;      ///< supply temperature (n1)
  Vector t_ambient;     ///< ambient temperature per zone, length n1+n2
  Vector q_load;        ///< zone-1 heat loads (n1)
  Vector t1_star, t2_star;  ///< temperature targets
  Vector l1, l2, lm;    ///< diagonal cost weights for T1, T2, w
  double eps_margin = 1.0;
};

/// Parameters of the worked two-zone scalar instance.
inline HvacParams hvac_paper_params() {
  HvacParams pr;
  pr.n1 = 1;
  pr.n2 = 1;
  pr.c1 = Vector::Constant(1, 1.0);
  pr.c2 = Vector::Constant(1, 1.0);
  pr.e11 = Matrix::Constant(1, 1, 0.5);
  pr.e12 = Matrix::Constant(1, 1, -0.5);
  pr.e22 = Matrix::Constant(1, 1, 0.5);
  pr.r1_inv = Vector::Constant(1, 0.5);
  pr.r2_inv = Vector::Constant(1, 0.5);
  pr.a_diag = Vector::Constant(1, 1.0);
  pr.t_supply = Vector::Constant(1, 30.0);
  pr.t_ambient = Vector::Constant(2, 10.0);
  pr.q_load = Vector::Constant(1, 0.0);
  pr.t1_star = Vector::Constant(1, 23.0);
  pr.t2_star = Vector::Constant(1, 23.0);
  pr.l1 = Vector::Constant(1, 1.0);
  pr.l2 = Vector::Constant(1, 1.0);
  pr.lm = Vector::Constant(1, 0.1);
  pr.eps_margin = 1.0;
  return pr;
}

inline void validate(const HvacParams& pr) {
  const int n1 = pr.n1, n2 = pr.n2;
  if (n1 < 1 || n2 < 1)
    throw InvalidProblem("hvac: block sizes must be positive");
  auto want_vec = [](const Vector& v, int len, const char* what) {
    if (v.size() != len)
      throw InvalidProblem(std::string("hvac: ") + what + " has wrong length");
  };
  want_vec(pr.c1, n1, "c1");
  want_vec(pr.c2, n2, "c2");
  want_vec(pr.r1_inv, n1, "r1_inv");
  want_vec(pr.r2_inv, n2, "r2_inv");
  want_vec(pr.a_diag, n1, "a_diag");
  want_vec(pr.t_supply, n1, "t_supply");
  want_vec(pr.t_ambient, n1 + n2, "t_ambient");
  want_vec(pr.q_load, n1, "q_load");
  want_vec(pr.t1_star, n1, "t1_star");
  want_vec(pr.t2_star, n2, "t2_star");
  want_vec(pr.l1, n1, "l1");
  want_vec(pr.l2, n2, "l2");
  want_vec(pr.lm, n1, "lm");
  if (pr.e11.rows() != n1 || pr.e11.cols() != n1 || pr.e12.rows() != n1 ||
      pr.e12.cols() != n2 || pr.e22.rows() != n2 || pr.e22.cols() != n2)
    throw InvalidProblem("hvac: conductance block shapes are inconsistent");

  Matrix e(n1 + n2, n1 + n2);
  e.topLeftCorner(n1, n1) = pr.e11;
  e.topRightCorner(n1, n2) = pr.e12;
  e.bottomLeftCorner(n2, n1) = pr.e12.transpose();
  e.bottomRightCorner(n2, n2) = pr.e22;
  if ((pr.e11 - pr.e11.transpose()).cwiseAbs().maxCoeff() > 1e-10 ||
      (pr.e22 - pr.e22.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw InvalidProblem("hvac: conductance matrix must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(e);
  if (es.info() != Eigen::Success)
    throw NumericalError("hvac: conductance eigendecomposition failed");
  if (es.eigenvalues().minCoeff() < -1e-10)
    throw InvalidProblem(
        "hvac: conductance matrix must be positive semidefinite (tol 1e-10)");

  auto want_pos = [](const Vector& v, const char* what) {
    if (v.size() > 0 && v.minCoeff() <= 0.0)
      throw InvalidProblem(std::string("hvac: ") + what +
                           " must be strictly positive");
  };
  want_pos(pr.c1, "c1");
  want_pos(pr.c2, "c2");
  want_pos(pr.r1_inv, "r1_inv");
  want_pos(pr.r2_inv, "r2_inv");
  want_pos(pr.a_diag, "a_diag");
  want_pos(pr.l1, "l1");
  want_pos(pr.l2, "l2");
  want_pos(pr.lm, "lm");
  if (pr.eps_margin <= 0.0)
    throw InvalidProblem("hvac: eps_margin must be strictly positive");
  if (((pr.t_supply - pr.t1_star).array() <= 0.0).any())
    throw InvalidProblem(
        "hvac: supply temperature must exceed the zone-1 target");
}

/// Builds the steady-state program: n = 2*n1 + n2 variables, m = n1 + n2
/// thermal-balance equalities, p = n1 supply-margin inequalities.
inline Problem hvac_problem(const HvacParams& pr) {
  validate(pr);
  const int n1 = pr.n1, n2 = pr.n2;
  const int n = 2 * n1 + n2;
  const int m = n1 + n2;

  Problem pb;
  pb.n = n;
  pb.m = m;
  pb.p = n1;

  const Vector l1 = pr.l1, l2 = pr.l2, lm = pr.lm;
  const Vector t1s = pr.t1_star, t2s = pr.t2_star;

  pb.objective = [=](const Vector& z) {
    const Vector t1 = z.head(n1);
    const Vector t2 = z.segment(n1, n2);
    const Vector w = z.tail(n1);
    return 0.5 * ((t1 - t1s).cwiseProduct(l1).dot(t1 - t1s) +
                  (t2 - t2s).cwiseProduct(l2).dot(t2 - t2s) +
                  w.cwiseProduct(lm).dot(w));
  };
  pb.gradient = [=](const Vector& z) -> Vector {
    Vector g(n);
    g.head(n1) = l1.cwiseProduct(z.head(n1) - t1s);
    g.segment(n1, n2) = l2.cwiseProduct(z.segment(n1, n2) - t2s);
    g.tail(n1) = lm.cwiseProduct(z.tail(n1));
    return g;
  };

  // Coefficient map of the thermal balance, expressed against the gradient.
  // With row scaling by the inverse cost weights, A_eq * grad f + d_eq
  // reproduces the balance residual exactly (the bilinear supply term
  // regroups because diag(w) t1_star == diag(t1_star) w).
  pb.a_eq = [=](const Vector& z) -> Matrix {
    const Vector w = z.tail(n1);
    Matrix a = Matrix::Zero(m, n);
    Matrix top_left = -pr.e11;
    top_left.diagonal() -= pr.r1_inv + pr.a_diag.cwiseProduct(w);
    a.topLeftCorner(n1, n1) = top_left * l1.cwiseInverse().asDiagonal();
    a.block(0, n1, n1, n2) = -pr.e12 * l2.cwiseInverse().asDiagonal();
    a.topRightCorner(n1, n1) =
        (pr.a_diag.cwiseProduct(pr.t_supply - t1s).cwiseQuotient(lm))
            .asDiagonal();
    a.block(n1, 0, n2, n1) = -pr.e12.transpose() * l1.cwiseInverse().asDiagonal();
    Matrix low_mid = -pr.e22;
    low_mid.diagonal() -= pr.r2_inv;
    a.block(n1, n1, n2, n2) = low_mid * l2.cwiseInverse().asDiagonal();
    return a;
  };
  {
    Vector d(m);
    Matrix e11r = pr.e11;
    e11r.diagonal() += pr.r1_inv;
    Matrix e22r = pr.e22;
    e22r.diagonal() += pr.r2_inv;
    d.head(n1) = -e11r * t1s - pr.e12 * t2s +
                 pr.r1_inv.cwiseProduct(pr.t_ambient.head(n1)) + pr.q_load;
    d.tail(n2) = -pr.e12.transpose() * t1s - e22r * t2s +
                 pr.r2_inv.cwiseProduct(pr.t_ambient.tail(n2));
    pb.d_eq = d;
  }

  pb.a_ineq = [=](const Vector&) -> Matrix {
    Matrix a = Matrix::Zero(n1, n);
    a.topLeftCorner(n1, n1) = l1.cwiseInverse().asDiagonal();
    return a;
  };
  pb.d_ineq = t1s - pr.t_supply + Vector::Constant(n1, pr.eps_margin);

  pb.jac_g_eq = [=](const Vector& z) -> Matrix {
    const Vector t1 = z.head(n1);
    const Vector w = z.tail(n1);
    Matrix j = Matrix::Zero(m, n);
    Matrix top_left = -pr.e11;
    top_left.diagonal() -= pr.r1_inv + pr.a_diag.cwiseProduct(w);
    j.topLeftCorner(n1, n1) = top_left;
    j.block(0, n1, n1, n2) = -pr.e12;
    j.topRightCorner(n1, n1) =
        pr.a_diag.cwiseProduct(pr.t_supply - t1).asDiagonal();
    j.block(n1, 0, n2, n1) = -pr.e12.transpose();
    Matrix low_mid = -pr.e22;
    low_mid.diagonal() -= pr.r2_inv;
    j.block(n1, n1, n2, n2) = low_mid;
    return j;
  };
  pb.jac_g_ineq = [=](const Vector&) -> Matrix {
    Matrix j = Matrix::Zero(n1, n);
    j.topLeftCorner(n1, n1) = Matrix::Identity(n1, n1);
    return j;
  };
  pb.hess_lagrangian = [=](const Vector&, const Vector& lambda,
                           const Vector&) -> Matrix {
    Matrix h = Matrix::Zero(n, n);
    h.topLeftCorner(n1, n1) = Matrix(l1.asDiagonal());
    h.block(n1, n1, n2, n2) = Matrix(l2.asDiagonal());
    h.bottomRightCorner(n1, n1) = Matrix(lm.asDiagonal());
    const Vector cross = -pr.a_diag.cwiseProduct(lambda.head(n1));
    h.topRightCorner(n1, n1) = Matrix(cross.asDiagonal());
    h.bottomLeftCorner(n1, n1) = Matrix(cross.asDiagonal());
    return h;
  };
  return pb;
}

struct GainConditionResult {
  bool holds = false;
  double margin = 0.0;  ///< smallest eigenvalue of the condition matrix
};

/// Verifies the weight condition under which the restricted descent flow of
/// the two-zone program is contracting: the matrix
///   L1 + E12 S^{-1} L2 S^{-1} E12' - (1/(2 eps^2)) Y A^{-1} Lm A^{-1} Y,
/// with S = E22 + R2^{-1} and Y = E11 + R1^{-1} - E12 S E12', must be
/// positive definite.
inline GainConditionResult hvac_gain_condition(const HvacParams& pr) {
  validate(pr);
  const int n1 = pr.n1, n2 = pr.n2;
  Matrix s = pr.e22;
  s.diagonal() += pr.r2_inv;
  Eigen::FullPivLU<Matrix> lu(s);
  if (!lu.isInvertible())
    throw NumericalError("hvac gain condition: E22 + R2^{-1} is singular");
  const Matrix s_inv = lu.inverse();

  Matrix y = pr.e11;
  y.diagonal() += pr.r1_inv;
  y -= pr.e12 * s * pr.e12.transpose();

  const Matrix a_inv = Matrix(pr.a_diag.cwiseInverse().asDiagonal());
  Matrix cond = Matrix(pr.l1.asDiagonal());
  cond += pr.e12 * s_inv * Matrix(pr.l2.asDiagonal()) * s_inv *
          pr.e12.transpose();
  cond -= (0.5 / (pr.eps_margin * pr.eps_margin)) * y * a_inv *
          Matrix(pr.lm.asDiagonal()) * a_inv * y;

  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (cond + cond.transpose()));
  if (es.info() != Eigen::Success)
    throw NumericalError("hvac gain condition: eigendecomposition failed");
  GainConditionResult out;
  out.margin = es.eigenvalues().minCoeff();
  out.holds = out.margin > 0.0;
  (void)n1;
  (void)n2;
  return out;
}

// ---------------------------------------------------------------------------
// Built-in registry
// ---------------------------------------------------------------------------

struct BuiltinInstance {
  std::string name;
  Problem problem;
  Vector default_start;
  Vector box_lo, box_hi;  ///< default sampling box for regularity checks
};

inline const std::vector<std::string>& builtin_names() {
  static const std::vector<std::string> names = {"qp-paper", "rosenbrock",
                                                 "hvac-paper"};
  return names;
}

inline BuiltinInstance make_builtin(const std::string& name) {
  BuiltinInstance bi;
  bi.name = name;
  if (name == "qp-paper") {
    bi.problem = qp_transform(qp_paper_data());
    bi.default_start = (Vector(2) << -0.25, 0.0).finished();
    bi.box_lo = (Vector(2) << -3.0, -3.0).finished();
    bi.box_hi = (Vector(2) << 3.0, 3.0).finished();
  } else if (name == "rosenbrock") {
    bi.problem = rosenbrock_problem();
    bi.default_start = (Vector(2) << 1.0, -1.0).finished();
    bi.box_lo = (Vector(2) << -2.0, -2.0).finished();
    bi.box_hi = (Vector(2) << 2.0, 2.0).finished();
  } else if (name == "hvac-paper") {
    bi.problem = hvac_problem(hvac_paper_params());
    bi.default_start = (Vector(3) << 23.0, 23.0, 1.0).finished();
    bi.box_lo = (Vector(3) << 15.0, 5.0, 0.0).finished();
    bi.box_hi = (Vector(3) << 29.0, 30.0, 5.0).finished();
  } else {
    throw InvalidProblem("unknown builtin problem: " + name);
  }
  return bi;
}

}  // namespace skkt
