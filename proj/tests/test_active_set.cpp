#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "support.hpp"

using namespace skkt;
using test_support::random_vector;

namespace {

// Two-variable QP with three inequality rows, placed so that rows 0 and 2
// bind at the probe point (1, 2) while row 1 stays strictly feasible.
Problem three_constraint_problem() {
  QpData qp;
  qp.l = Matrix::Identity(2, 2);
  qp.k = Vector::Zero(2);
  qp.b_eq = Matrix(0, 2);
  qp.c_eq = Vector(0);
  qp.b_ineq = (Matrix(3, 2) << 1.0, 0.0,
                               0.0, 1.0,
                               1.0, 1.0).finished();
  qp.c_ineq = (Vector(3) << -1.0, -3.0, -3.0).finished();
  return qp_transform(qp);
}

}  // namespace

TEST_CASE("active set container enforces its invariants", "[active_set]") {
  REQUIRE_NOTHROW(ActiveSet({0, 2, 5}));
  REQUIRE_THROWS_AS(ActiveSet({0, 0}), StructuralError);
  REQUIRE_THROWS_AS(ActiveSet({2, 1}), StructuralError);
  REQUIRE_THROWS_AS(ActiveSet({-1}), StructuralError);

  const ActiveSet as({0, 2});
  REQUIRE(as.size() == 2);
  REQUIRE(as.contains(0));
  REQUIRE_FALSE(as.contains(1));
  REQUIRE(as.to_string() == "{0,2}");
  REQUIRE(ActiveSet().to_string() == "{}");

  const ActiveSet grown = as.with(1);
  REQUIRE(grown.indices() == std::vector<int>{0, 1, 2});
  REQUIRE(as.indices() == std::vector<int>{0, 2});  // original untouched
  REQUIRE_THROWS_AS(as.with(2), StructuralError);   // already present

  const ActiveSet shrunk = grown.without(1);
  REQUIRE(shrunk.indices() == as.indices());
  REQUIRE_THROWS_AS(as.without(1), StructuralError);  // not present
}

TEST_CASE("numerically active indices", "[active_set]") {
  SECTION("interior point of the Rosenbrock domain is unconstrained") {
    const Problem pb = rosenbrock_problem();
    const Vector z = (Vector(2) << 1.0, -1.0).finished();
    REQUIRE(active_indices(pb, z, 1e-9).empty());
  }
  SECTION("two of three constraints bind") {
    const Problem pb = three_constraint_problem();
    const Vector z = (Vector(2) << 1.0, 2.0).finished();
    // rows: z1 - 1 = 0, z2 - 3 = -1, z1 + z2 - 3 = 0
    REQUIRE(active_indices(pb, z, 1e-9).indices() == std::vector<int>{0, 2});
  }
  SECTION("point on the Rosenbrock constraint line") {
    const Problem pb = rosenbrock_problem();
    const Vector z = (Vector(2) << 0.0, -0.75).finished();
    REQUIRE(active_indices(pb, z, 1e-8).indices() == std::vector<int>{0});
  }
  SECTION("monotone in the tolerance") {
    const Problem pb = three_constraint_problem();
    const Vector z = (Vector(2) << 1.0, 2.0 + 1e-7).finished();
    const auto tight = active_indices(pb, z, 1e-9).indices();
    const auto loose = active_indices(pb, z, 1e-3).indices();
    REQUIRE(std::includes(loose.begin(), loose.end(), tight.begin(),
                          tight.end()));
    REQUIRE(tight == std::vector<int>{0});      // row 2 sits at 1e-7
    REQUIRE(loose == std::vector<int>{0, 2});   // picked up by the wide tol
  }
}

TEST_CASE("indicator matrices select active components", "[active_set]") {
  SECTION("explicit two-of-three pattern") {
    const Matrix e = indicator_matrix(ActiveSet({0, 2}), 3);
    Matrix want(2, 3);
    want << 1, 0, 0, 0, 0, 1;
    REQUIRE((e - want).cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("empty set gives a 0-row matrix") {
    const Matrix e = indicator_matrix(ActiveSet(), 4);
    REQUIRE(e.rows() == 0);
    REQUIRE(e.cols() == 4);
  }
  SECTION("selection and row-orthonormality on random data") {
    std::mt19937_64 rng(50551);
    const ActiveSet as({1, 3, 4});
    const Matrix e = indicator_matrix(as, 6);
    REQUIRE((e * e.transpose() - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff()
            == 0.0);
    for (int k = 0; k < 10; ++k) {
      const Vector v = random_vector(rng, 6, -2.0, 2.0);
      const Vector sel = e * v;
      for (int r = 0; r < as.size(); ++r)
        REQUIRE(sel[r] == v[as.indices()[r]]);
    }
  }
  SECTION("indices out of range are rejected") {
    REQUIRE_THROWS_AS(indicator_matrix(ActiveSet({0, 3}), 3), StructuralError);
  }
}

TEST_CASE("active-row assembly", "[active_set]") {
  SECTION("no constraints, nothing assembled") {
    const Problem pb = rosenbrock_problem();
    const Vector z = (Vector(2) << 1.0, -1.0).finished();
    const ActiveAssembly a = assemble_active(pb, z, ActiveSet());
    REQUIRE(a.g.size() == 0);
    REQUIRE(a.a_mat.rows() == 0);
    REQUIRE(a.jac.rows() == 0);
    REQUIRE(a.a_mat.cols() == 2);
  }
  SECTION("QP with both inequalities active reproduces the recast blocks") {
    const Problem pb = qp_transform(qp_paper_data());
    const Vector z = (Vector(2) << 0.1, -0.3).finished();
    const ActiveAssembly a = assemble_active(pb, z, ActiveSet({0, 1}));
    Matrix want_a(2, 2);            // B_ineq L^{-1} with L^{-1}=[[2,1],[1,1]]
    want_a << 3.0, 2.0, 0.0, 1.0;
    REQUIRE((a.a_mat - want_a).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE(a.d[0] == Catch::Approx(16.0).margin(1e-12));
    REQUIRE(a.d[1] == Catch::Approx(4.0).margin(1e-12));
  }
  SECTION("Rosenbrock selected row equals the line constraint") {
    const Problem pb = rosenbrock_problem();
    std::mt19937_64 rng(60661);
    for (int k = 0; k < 10; ++k) {
      const Vector z = random_vector(rng, 2, -2.0, 2.0);
      const ActiveAssembly a = assemble_active(pb, z, ActiveSet({0}));
      REQUIRE(a.g.size() == 1);
      REQUIRE(a.g[0] ==
              Catch::Approx(-2.0 * z[0] + z[1] + 0.75).margin(1e-9));
    }
  }
  SECTION("stacked values equal [g_eq; selected g_ineq] exactly") {
    const Problem pb = hvac_problem(hvac_paper_params());
    const Vector z = (Vector(3) << 22.0, 14.0, 1.5).finished();
    const ConstraintValues cv = eval_g(pb, z);
    const ActiveAssembly a = assemble_active(pb, z, ActiveSet({0}));
    REQUIRE(a.g.size() == 3);
    REQUIRE(a.g[0] == cv.eq[0]);
    REQUIRE(a.g[1] == cv.eq[1]);
    REQUIRE(a.g[2] == cv.ineq[0]);
    // g = A grad f + d holds by construction.
    REQUIRE(inf_norm(a.g - (a.a_mat * a.grad + a.d)) < 1e-12);
  }
  SECTION("selected index beyond p is rejected") {
    const Problem pb = rosenbrock_problem();
    REQUIRE_THROWS_AS(
        assemble_active(pb, Vector::Zero(2), ActiveSet({1})),
        StructuralError);
  }
}
