#pragma once

#include "skkt/active_set.hpp"
#include "skkt/errors.hpp"
#include "skkt/operators.hpp"
#include "skkt/problem.hpp"
#include "skkt/types.hpp"

namespace skkt {

struct GainConfig {
  double kappa1 = 1.0;  ///< constraint-restoration gain
  double kappa2 = 1.0;  ///< restricted-descent gain
};

inline void validate(const GainConfig& gains) {
  if (!(gains.kappa1 > 0.0) || !(gains.kappa2 > 0.0))
    throw InvalidProblem("gains must be strictly positive");
}

/// Vector field assembled from precomputed operators:
///   h = -kappa1 * A' B^{-1} g  -  kappa2 * G' G grad,
/// i.e. exponential restoration of the selected constraint block plus descent
/// along the directions the constraint Jacobian cannot see.
inline Vector field_from_operators(const ActiveOperators& ops, const Vector& g,
                                   const Vector& grad,
                                   const GainConfig& gains) {
  const Eigen::Index n = grad.size();
  Vector h = Vector::Zero(n);
  if (ops.b_matrix.rows() > 0)
    h.noalias() -= gains.kappa1 * (ops.a_matrix.transpose() * ops.solve_b(g));
  if (ops.annihilator.rows() > 0)
    h.noalias() -=
        gains.kappa2 * (ops.annihilator.transpose() * (ops.annihilator * grad));
  return h;
}

/// Vector field of the subsystem selected by the active set.
inline Vector subsystem_field(const Problem& pb, const Vector& z,
                              const ActiveSet& as, const GainConfig& gains) {
  validate(gains);
  const ActiveAssembly asm_data = assemble_active(pb, z, as);
  const ActiveOperators ops = build_operators(asm_data);
  return field_from_operators(ops, asm_data.g, asm_data.grad, gains);
}

/// Time derivative of the stacked constraint block along the subsystem field:
/// J h.  Identically equal to -kappa1 * g when the operators are consistent,
/// which is what makes the constraint values decay exponentially.
inline Vector constraint_rate(const Problem& pb, const Vector& z,
                              const ActiveSet& as, const GainConfig& gains) {
  validate(gains);
  const ActiveAssembly asm_data = assemble_active(pb, z, as);
  const ActiveOperators ops = build_operators(asm_data);
  const Vector h = field_from_operators(ops, asm_data.g, asm_data.grad, gains);
  return asm_data.jac * h;
}

}  // namespace skkt
