#pragma once

#include <sstream>

#include "skkt/active_set.hpp"
#include "skkt/errors.hpp"
#include "skkt/problem.hpp"
#include "skkt/types.hpp"

namespace skkt {

/// Smallest eigenvalue of the symmetric part (M + M')/2.
/// Returns +inf for an empty matrix.
inline double sym_min_eig(const Matrix& m) {
  if (m.rows() != m.cols())
    throw StructuralError("sym_min_eig requires a square matrix");
  if (m.rows() == 0) return kInf;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
  if (es.info() != Eigen::Success)
    throw NumericalError("symmetric eigendecomposition failed");
  return es.eigenvalues().minCoeff();
}

/// Smallest eigenvalue of S'S where S stacks the rows of `a_mat` above the
/// rows of `g_perp`; both must have the same column count.
inline double concat_min_eig(const Matrix& a_mat, const Matrix& g_perp) {
  if (a_mat.cols() != g_perp.cols() && a_mat.rows() > 0 && g_perp.rows() > 0)
    throw StructuralError("concat_min_eig: column counts differ");
  const Eigen::Index n = a_mat.rows() > 0 ? a_mat.cols() : g_perp.cols();
  Matrix s(a_mat.rows() + g_perp.rows(), n);
  if (a_mat.rows() > 0) s.topRows(a_mat.rows()) = a_mat;
  if (g_perp.rows() > 0) s.bottomRows(g_perp.rows()) = g_perp;
  if (s.rows() == 0) return kInf;
  Eigen::SelfAdjointEigenSolver<Matrix> es(s.transpose() * s);
  if (es.info() != Eigen::Success)
    throw NumericalError("symmetric eigendecomposition failed");
  return es.eigenvalues().minCoeff();
}

/// Orthonormal basis of the orthogonal complement of the row space of `j`,
/// returned as an (n-k)-by-n matrix G with G j' = 0 and G G' = I.  Built from
/// a deterministic Householder QR of j' (fixed pivoting for fixed input), so
/// repeated calls on identical data give identical bases.
/// Throws RankError when j does not have full row rank.
inline Matrix annihilator(const Matrix& j) {
  const Eigen::Index k = j.rows();
  const Eigen::Index n = j.cols();
  if (k > n)
    throw RankError("annihilator: more rows than columns cannot be full rank");
  if (k == 0) return Matrix::Identity(n, n);

  Eigen::ColPivHouseholderQR<Matrix> qr(j.transpose());
  // Rank check against the largest diagonal of R (proportional to the largest
  // singular value up to modest factors).
  const Matrix& r = qr.matrixR();
  const double r_max = std::abs(r(0, 0));
  const double r_min = std::abs(r(k - 1, k - 1));
  if (r_max == 0.0 || r_min < 1e-10 * r_max)
    throw RankError("annihilator: matrix is rank deficient");

  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  return q.rightCols(n - k).transpose();
}

/// Operators attached to a point/active-set pair.
struct ActiveOperators {
  Matrix b_matrix;     ///< (m+a)-by-(m+a) product jac * a_mat'
  Matrix annihilator;  ///< (n-m-a)-by-n orthonormal complement of jac rows
  Matrix j_matrix;     ///< stacked constraint Jacobian
  Matrix a_matrix;     ///< stacked coefficient rows
  Eigen::PartialPivLU<Matrix> b_lu;  ///< factorization backing the solves

  /// x = b_matrix^{-1} rhs via the cached factorization.
  Vector solve_b(const Vector& rhs) const {
    if (b_matrix.rows() == 0) return Vector(0);
    return b_lu.solve(rhs);
  }
  /// x = b_matrix^{-T} rhs via the cached factorization.
  Vector solve_bt(const Vector& rhs) const {
    if (b_matrix.rows() == 0) return Vector(0);
    return b_lu.transpose().solve(rhs);
  }
};

/// Builds the operators from an existing assembly.  Checks that the stacked
/// Jacobian has full row rank (smallest singular value >= 1e-10 times the
/// largest) and that b_matrix is invertible with condition below 1e12.
inline ActiveOperators build_operators(const ActiveAssembly& as) {
  const int k = as.m + as.a;
  if (k > as.n)
    throw StructuralError(
        "active rows exceed the ambient dimension (m + a > n)");

  ActiveOperators out;
  out.j_matrix = as.jac;
  out.a_matrix = as.a_mat;

  if (k > 0) {
    Eigen::JacobiSVD<Matrix> svd(as.jac);
    const double s_max = svd.singularValues()[0];
    const double s_min = svd.singularValues()[svd.singularValues().size() - 1];
    if (s_max == 0.0 || s_min < 1e-10 * s_max) {
      std::ostringstream os;
      os << "stacked constraint Jacobian is rank deficient (singular values "
         << s_min << " .. " << s_max << ")";
      throw RankError(os.str());
    }
  }
  out.annihilator = annihilator(as.jac);

  out.b_matrix = as.jac * as.a_mat.transpose();
  if (k > 0) {
    Eigen::JacobiSVD<Matrix> svd(out.b_matrix);
    const double s_max = svd.singularValues()[0];
    const double s_min = svd.singularValues()[svd.singularValues().size() - 1];
    if (s_min <= 0.0 || s_max / s_min > 1e12) {
      std::ostringstream os;
      os << "constraint interaction matrix is singular or ill conditioned "
            "(condition estimate "
         << (s_min > 0.0 ? s_max / s_min : kInf) << ")";
      throw NumericalError(os.str());
    }
    out.b_lu = Eigen::PartialPivLU<Matrix>(out.b_matrix);
  }
  return out;
}

inline ActiveOperators build_operators(const Problem& pb, const Vector& z,
                                       const ActiveSet& as) {
  return build_operators(assemble_active(pb, z, as));
}

}  // namespace skkt
