#pragma once

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

#include "skkt/errors.hpp"
#include "skkt/problem.hpp"
#include "skkt/types.hpp"

namespace skkt {

/// An ordered set of inequality-constraint indices (0-based, strictly
/// ascending).  Immutable value type: with()/without() return modified copies.
class ActiveSet {
 public:
  ActiveSet() = default;

  explicit ActiveSet(std::vector<int> indices) : indices_(std::move(indices)) {
    for (std::size_t i = 0; i < indices_.size(); ++i) {
      if (indices_[i] < 0)
        throw StructuralError("active set indices must be non-negative");
      if (i > 0 && indices_[i] <= indices_[i - 1])
        throw StructuralError(
            "active set indices must be strictly ascending with no duplicates");
    }
  }

  int size() const { return static_cast<int>(indices_.size()); }
  bool empty() const { return indices_.empty(); }

  bool contains(int i) const {
    return std::binary_search(indices_.begin(), indices_.end(), i);
  }

  /// Returns a copy with index i inserted.  i must not already be present.
  ActiveSet with(int i) const {
    if (contains(i))
      throw StructuralError("index already in the active set: " +
                            std::to_string(i));
    std::vector<int> next = indices_;
    next.insert(std::upper_bound(next.begin(), next.end(), i), i);
    ActiveSet out;
    out.indices_ = std::move(next);
    return out;
  }

  /// Returns a copy with index i removed.  i must be present.
  ActiveSet without(int i) const {
    auto it = std::lower_bound(indices_.begin(), indices_.end(), i);
    if (it == indices_.end() || *it != i)
      throw StructuralError("index not in the active set: " +
                            std::to_string(i));
    std::vector<int> next = indices_;
    next.erase(next.begin() + (it - indices_.begin()));
    ActiveSet out;
    out.indices_ = std::move(next);
    return out;
  }

  const std::vector<int>& indices() const { return indices_; }

  bool operator==(const ActiveSet& other) const = default;

  std::string to_string() const {
    std::ostringstream os;
    os << '{';
    for (std::size_t i = 0; i < indices_.size(); ++i) {
      if (i) os << ',';
      os << indices_[i];
    }
    os << '}';
    return os.str();
  }

 private:
  std::vector<int> indices_;
};

/// Indices whose inequality constraint is numerically active at z:
/// |g_ineq_i(z)| <= tol.
inline ActiveSet active_indices(const Problem& pb, const Vector& z,
                                double tol) {
  const ConstraintValues cv = eval_g(pb, z);
  std::vector<int> idx;
  for (int i = 0; i < pb.p; ++i)
    if (std::abs(cv.ineq[i]) <= tol) idx.push_back(i);
  return ActiveSet(std::move(idx));
}

/// Variant that reuses an existing constraint evaluation.
inline ActiveSet active_indices(const ConstraintValues& cv, double tol) {
  std::vector<int> idx;
  for (int i = 0; i < cv.ineq.size(); ++i)
    if (std::abs(cv.ineq[i]) <= tol) idx.push_back(i);
  return ActiveSet(std::move(idx));
}

/// Row-selection matrix E of shape |A|-by-p with E(r, A[r]) = 1.
/// Satisfies E E' = I and E v = v restricted to the selected indices.
inline Matrix indicator_matrix(const ActiveSet& as, int p) {
  const int a = as.size();
  if (a > 0 && as.indices().back() >= p)
    throw StructuralError("active set index out of range for p = " +
                          std::to_string(p));
  Matrix e = Matrix::Zero(a, p);
  for (int r = 0; r < a; ++r) e(r, as.indices()[r]) = 1.0;
  return e;
}

/// Stacked data of the equality block plus the selected inequality rows,
/// equality rows first, selected inequality rows after in ascending index
/// order.  g = a * grad + d holds by construction.
struct ActiveAssembly {
  int n = 0;  ///< ambient dimension
  int m = 0;  ///< number of equality rows
  int a = 0;  ///< number of selected inequality rows
  Vector grad;  ///< objective gradient at the assembly point
  Matrix a_mat; ///< stacked coefficient rows, (m+a)-by-n
  Vector d;     ///< stacked offsets, length m+a
  Vector g;     ///< stacked constraint values, length m+a
  Matrix jac;   ///< stacked constraint Jacobian, (m+a)-by-n
};

inline ActiveAssembly assemble_active(const Problem& pb, const Vector& z,
                                      const ActiveSet& as) {
  if (as.size() > 0 && as.indices().back() >= pb.p)
    throw StructuralError("active set index out of range for this problem");

  ActiveAssembly out;
  out.n = pb.n;
  out.m = pb.m;
  out.a = as.size();
  out.grad = eval_gradient(pb, z);

  const int k = out.m + out.a;
  out.a_mat = Matrix(k, pb.n);
  out.d = Vector(k);

  if (pb.m > 0) {
    Matrix ae = pb.a_eq(z);
    detail::require_shape(ae, pb.m, pb.n, "a_eq");
    detail::require_finite(ae, "a_eq");
    out.a_mat.topRows(pb.m) = ae;
    out.d.head(pb.m) = pb.d_eq;
  }
  if (out.a > 0) {
    Matrix ai = pb.a_ineq(z);
    detail::require_shape(ai, pb.p, pb.n, "a_ineq");
    detail::require_finite(ai, "a_ineq");
    for (int r = 0; r < out.a; ++r) {
      const int i = as.indices()[r];
      out.a_mat.row(pb.m + r) = ai.row(i);
      out.d[pb.m + r] = pb.d_ineq[i];
    }
  }
  out.g = out.a_mat * out.grad + out.d;

  const ConstraintJacobians jg = jac_g(pb, z);
  out.jac = Matrix(k, pb.n);
  if (pb.m > 0) out.jac.topRows(pb.m) = jg.eq;
  for (int r = 0; r < out.a; ++r)
    out.jac.row(pb.m + r) = jg.ineq.row(as.indices()[r]);
  return out;
}

}  // namespace skkt
