#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "support.hpp"

using namespace skkt;
using test_support::random_box_point;
using test_support::random_vector;

TEST_CASE("problem validation rejects malformed definitions", "[problem]") {
  Problem pb = rosenbrock_problem();
  SECTION("valid built-in passes") { REQUIRE_NOTHROW(validate(pb)); }
  SECTION("non-positive dimension") {
    pb.n = 0;
    REQUIRE_THROWS_AS(validate(pb), InvalidProblem);
  }
  SECTION("more equalities than variables") {
    pb.m = 3;  // n = 2
    REQUIRE_THROWS_AS(validate(pb), InvalidProblem);
  }
  SECTION("negative constraint count") {
    pb.p = -1;
    REQUIRE_THROWS_AS(validate(pb), InvalidProblem);
  }
  SECTION("missing callback") {
    pb.gradient = nullptr;
    REQUIRE_THROWS_AS(validate(pb), InvalidProblem);
  }
  SECTION("offset length mismatch") {
    pb.d_ineq = Vector::Zero(3);  // p = 1
    REQUIRE_THROWS_AS(validate(pb), InvalidProblem);
  }
}

TEST_CASE("constraint evaluation follows the gradient form", "[problem]") {
  SECTION("Rosenbrock at the minimiser: zero gradient exposes the offset") {
    const Problem pb = rosenbrock_problem();
    const Vector z = (Vector(2) << 1.0, 1.0).finished();
    const ConstraintValues cv = eval_g(pb, z);
    REQUIRE(cv.eq.size() == 0);
    REQUIRE(cv.ineq.size() == 1);
    REQUIRE(cv.ineq[0] == Catch::Approx(-0.25).margin(1e-12));
  }
  SECTION("QP at its unconstrained minimiser: g equals the offset") {
    const QpData qp = qp_paper_data();
    const Problem pb = qp_transform(qp);
    // grad f = L z + K vanishes at -L^{-1} K = (10, 8).
    const Vector z = (Vector(2) << 10.0, 8.0).finished();
    REQUIRE(inf_norm(eval_gradient(pb, z)) < 1e-12);
    const ConstraintValues cv = eval_g(pb, z);
    REQUIRE(cv.ineq[0] == Catch::Approx(16.0).margin(1e-10));
    REQUIRE(cv.ineq[1] == Catch::Approx(4.0).margin(1e-10));
  }
  SECTION("QP at the constrained optimum: both inequalities bind") {
    const Problem pb = qp_transform(qp_paper_data());
    const Vector z = (Vector(2) << 0.667, 1.333).finished();
    const ConstraintValues cv = eval_g(pb, z);
    REQUIRE(std::abs(cv.ineq[0]) < 1e-2);
    REQUIRE(std::abs(cv.ineq[1]) < 1e-2);
    const Vector z_exact = (Vector(2) << 2.0 / 3.0, 4.0 / 3.0).finished();
    REQUIRE(inf_norm(eval_g(pb, z_exact).ineq) < 1e-12);
  }
  SECTION("non-finite callback output raises EvaluationError with index") {
    Problem pb = rosenbrock_problem();
    pb.gradient = [](const Vector& z) -> Vector {
      Vector g(2);
      g << std::nan(""), z[0];
      return g;
    };
    REQUIRE_THROWS_AS(eval_g(pb, Vector::Zero(2)), EvaluationError);
    try {
      eval_g(pb, Vector::Zero(2));
    } catch (const EvaluationError& e) {
      REQUIRE(e.component() == 0);
    }
  }
}

TEST_CASE("constraint Jacobians: analytic paths and FD fallback", "[problem]") {
  std::mt19937_64 rng(7101);
  SECTION("Rosenbrock Jacobian is the constant row (-2, 1)") {
    const Problem pb = rosenbrock_problem();
    for (int k = 0; k < 5; ++k) {
      const Vector z = random_vector(rng, 2, -2.0, 2.0);
      const Matrix j = jac_g(pb, z).ineq;
      REQUIRE(j.rows() == 1);
      REQUIRE(j(0, 0) == Catch::Approx(-2.0).margin(1e-12));
      REQUIRE(j(0, 1) == Catch::Approx(1.0).margin(1e-12));
    }
  }
  SECTION("QP Jacobians equal the raw constraint rows") {
    const QpData qp = qp_paper_data();
    const Problem pb = qp_transform(qp);
    const Vector z = random_vector(rng, 2, -3.0, 3.0);
    const ConstraintJacobians j = jac_g(pb, z);
    REQUIRE((j.ineq - qp.b_ineq).cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("finite differences match analytic Jacobians to 1e-4 relative") {
    const Problem analytic = hvac_problem(hvac_paper_params());
    Problem fd = analytic;
    fd.jac_g_eq = nullptr;
    fd.jac_g_ineq = nullptr;
    const Vector lo = (Vector(3) << 16.0, 6.0, 0.1).finished();
    const Vector hi = (Vector(3) << 28.0, 29.0, 4.9).finished();
    for (int k = 0; k < 5; ++k) {
      const Vector z = random_box_point(rng, lo, hi);
      const ConstraintJacobians ja = jac_g(analytic, z);
      const ConstraintJacobians jf = jac_g(fd, z);
      const double scale = 1.0 + ja.eq.cwiseAbs().maxCoeff();
      REQUIRE((ja.eq - jf.eq).cwiseAbs().maxCoeff() / scale < 1e-4);
      REQUIRE((ja.ineq - jf.ineq).cwiseAbs().maxCoeff() < 1e-4);
    }
  }
}

TEST_CASE("QP recasting reproduces the affine constraints", "[problem]") {
  SECTION("paper instance offsets") {
    const Problem pb = qp_transform(qp_paper_data());
    REQUIRE(pb.d_ineq[0] == Catch::Approx(16.0).margin(1e-12));
    REQUIRE(pb.d_ineq[1] == Catch::Approx(4.0).margin(1e-12));
  }
  SECTION("identity cost leaves the data unchanged") {
    QpData qp;
    qp.l = Matrix::Identity(2, 2);
    qp.k = Vector::Zero(2);
    qp.b_eq = Matrix(0, 2);
    qp.c_eq = Vector(0);
    qp.b_ineq = (Matrix(1, 2) << 3.0, -1.0).finished();
    qp.c_ineq = Vector::Constant(1, 0.5);
    const Problem pb = qp_transform(qp);
    const Vector z = (Vector(2) << 0.3, -0.4).finished();
    REQUIRE((pb.a_ineq(z) - qp.b_ineq).cwiseAbs().maxCoeff() < 1e-14);
    REQUIRE(std::abs(pb.d_ineq[0] - 0.5) < 1e-14);
  }
  SECTION("pointwise recast identity on random points") {
    const QpData qp = qp_paper_data();
    const Problem pb = qp_transform(qp);
    std::mt19937_64 rng(20111);
    for (int k = 0; k < 20; ++k) {
      const Vector z = random_vector(rng, 2, -5.0, 5.0);
      const Vector direct = qp.b_ineq * z + qp.c_ineq;
      REQUIRE(inf_norm(eval_g(pb, z).ineq - direct) < 1e-10);
    }
  }
  SECTION("indefinite or asymmetric cost is rejected") {
    QpData qp = qp_paper_data();
    qp.l(0, 1) = 0.5;  // breaks symmetry
    REQUIRE_THROWS_AS(qp_transform(qp), InvalidProblem);
    qp = qp_paper_data();
    qp.l = (Matrix(2, 2) << 1.0, 0.0, 0.0, -1.0).finished();
    REQUIRE_THROWS_AS(qp_transform(qp), InvalidProblem);
  }
}

TEST_CASE("Rosenbrock built-in matches its closed form", "[problem]") {
  const Problem pb = rosenbrock_problem();
  REQUIRE(pb.n == 2);
  REQUIRE(pb.m == 0);
  REQUIRE(pb.p == 1);
  SECTION("boundary and feasible probes") {
    const Vector on_line = (Vector(2) << 0.0, -0.75).finished();
    REQUIRE(std::abs(eval_g(pb, on_line).ineq[0]) < 1e-12);
    const Vector start = (Vector(2) << 1.0, -1.0).finished();
    REQUIRE(eval_g(pb, start).ineq[0] == Catch::Approx(-2.25).margin(1e-12));
  }
  SECTION("gradient-form value equals -2 z1 + z2 + 3/4 on a random cloud") {
    std::mt19937_64 rng(30311);
    for (int k = 0; k < 50; ++k) {
      const Vector z = random_vector(rng, 2, -2.0, 2.0);
      const double direct = -2.0 * z[0] + z[1] + 0.75;
      REQUIRE(std::abs(eval_g(pb, z).ineq[0] - direct) < 1e-9);
    }
  }
  SECTION("objective and gradient are the classic banana function") {
    const Vector z = (Vector(2) << -1.2, 1.0).finished();
    const double f = 100.0 * std::pow(z[1] - z[0] * z[0], 2) +
                     std::pow(1.0 - z[0], 2);
    REQUIRE(pb.objective(z) == Catch::Approx(f).epsilon(1e-14));
    REQUIRE(inf_norm(eval_gradient(pb, (Vector(2) << 1.0, 1.0).finished())) <
            1e-14);
  }
}

namespace {

// Independent steady-state thermal balance: conduction to coupled zones and
// ambient, supply-air heating, and external load, written directly from the
// parameter blocks.
Vector thermal_balance(const HvacParams& pr, const Vector& z) {
  const int n1 = pr.n1, n2 = pr.n2;
  const Vector t1 = z.head(n1);
  const Vector t2 = z.segment(n1, n2);
  const Vector w = z.tail(n1);
  Vector r(n1 + n2);
  r.head(n1) = -(pr.e11 * t1) - pr.r1_inv.cwiseProduct(t1) - pr.e12 * t2 +
               pr.a_diag.cwiseProduct(w).cwiseProduct(pr.t_supply - t1) +
               pr.r1_inv.cwiseProduct(pr.t_ambient.head(n1)) + pr.q_load;
  r.tail(n2) = -(pr.e12.transpose() * t1) - pr.e22 * t2 -
               pr.r2_inv.cwiseProduct(t2) +
               pr.r2_inv.cwiseProduct(pr.t_ambient.tail(n2));
  return r;
}

}  // namespace

TEST_CASE("HVAC built-in encodes the thermal steady state", "[problem]") {
  const HvacParams pr = hvac_paper_params();
  const Problem pb = hvac_problem(pr);
  REQUIRE(pb.n == 3);
  REQUIRE(pb.m == 2);
  REQUIRE(pb.p == 1);
  SECTION("published optimum nearly balances the network") {
    const Vector z = (Vector(3) << 25.45, 17.73, 2.55).finished();
    REQUIRE(inf_norm(eval_g(pb, z).eq) < 5e-2);
  }
  SECTION("supply-margin boundary") {
    const Vector z = (Vector(3) << 29.0, 20.0, 1.0).finished();  // T1 = Ts - eps
    REQUIRE(std::abs(eval_g(pb, z).ineq[0]) < 1e-12);
  }
  SECTION("equality rows equal the balance residual at random states") {
    std::mt19937_64 rng(40441);
    const Vector lo = (Vector(3) << 15.0, 5.0, 0.0).finished();
    const Vector hi = (Vector(3) << 29.0, 30.0, 5.0).finished();
    for (int k = 0; k < 10; ++k) {
      const Vector z = random_box_point(rng, lo, hi);
      REQUIRE(inf_norm(eval_g(pb, z).eq - thermal_balance(pr, z)) < 1e-9);
    }
  }
  SECTION("parameter validation") {
    HvacParams bad = pr;
    bad.eps_margin = 0.0;
    REQUIRE_THROWS_AS(hvac_problem(bad), InvalidProblem);
    bad = pr;
    bad.t_supply = Vector::Constant(1, 22.0);  // below the target 23
    REQUIRE_THROWS_AS(hvac_problem(bad), InvalidProblem);
    bad = pr;
    bad.e12 = Matrix::Constant(1, 1, 10.0);  // conductance matrix indefinite
    REQUIRE_THROWS_AS(hvac_problem(bad), InvalidProblem);
    bad = pr;
    bad.lm = Vector::Constant(1, 0.0);
    REQUIRE_THROWS_AS(hvac_problem(bad), InvalidProblem);
  }
}

TEST_CASE("HVAC weight condition", "[problem]") {
  SECTION("paper weights satisfy it with the hand-computed margin") {
    const GainConditionResult r = hvac_gain_condition(hvac_paper_params());
    REQUIRE(r.holds);
    // Scalar arithmetic: 1 + 0.25 - 0.5 * 0.75 * 0.1 * 0.75 = 1.221875.
    REQUIRE(r.margin == Catch::Approx(1.221875).margin(1e-12));
  }
  SECTION("vanishing flow weight removes the negative term") {
    HvacParams pr = hvac_paper_params();
    pr.lm = Vector::Constant(1, 1e-12);
    const GainConditionResult r = hvac_gain_condition(pr);
    REQUIRE(r.holds);
    REQUIRE(r.margin == Catch::Approx(1.25).margin(1e-9));
  }
  SECTION("heavy flow weight defeats the condition") {
    HvacParams pr = hvac_paper_params();
    pr.lm = Vector::Constant(1, 100.0);
    const GainConditionResult r = hvac_gain_condition(pr);
    REQUIRE_FALSE(r.holds);
    REQUIRE(r.margin < 0.0);
  }
}

TEST_CASE("QP file I/O", "[problem]") {
  SECTION("bundled instance matches the built-in data") {
    const QpData qp =
        load_qp_file((test_support::data_dir() / "paper_qp.json").string());
    const QpData ref = qp_paper_data();
    REQUIRE((qp.l - ref.l).cwiseAbs().maxCoeff() < 1e-15);
    REQUIRE((qp.k - ref.k).cwiseAbs().maxCoeff() < 1e-15);
    REQUIRE((qp.b_ineq - ref.b_ineq).cwiseAbs().maxCoeff() < 1e-15);
    REQUIRE((qp.c_ineq - ref.c_ineq).cwiseAbs().maxCoeff() < 1e-15);
    REQUIRE(qp.b_eq.rows() == 0);
  }
  SECTION("round trip is exact") {
    test_support::TempDir dir;
    const std::string path = (dir.path() / "roundtrip.json").string();
    QpData qp = qp_paper_data();
    qp.k[0] = -2.0000000000000004;  // exercise shortest-round-trip printing
    save_qp_file(path, qp);
    const QpData back = load_qp_file(path);
    REQUIRE((back.l - qp.l).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(back.k[0] == qp.k[0]);
    REQUIRE((back.c_ineq - qp.c_ineq).cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("validation and parse failures") {
    test_support::TempDir dir;
    const auto write = [&](const char* name, const char* text) {
      std::ofstream os(dir.path() / name);
      os << text;
      return (dir.path() / name).string();
    };
    const std::string asym = write("asym.json",
        R"({"L":[[1.0,0.5],[0.0,1.0]],"K":[0.0,0.0],"B_eq":[],"c_eq":[],
            "B_ineq":[],"c_ineq":[]})");
    REQUIRE_THROWS_AS(load_qp_file(asym), InvalidProblem);
    const std::string truncated = write("trunc.json", R"({"L":[[1.0,0.0)");
    REQUIRE_THROWS_AS(load_qp_file(truncated), FormatError);
    const std::string missing = write("missing.json",
        R"({"L":[[1.0]],"K":[0.0],"B_eq":[],"c_eq":[],"B_ineq":[]})");
    REQUIRE_THROWS_AS(load_qp_file(missing), FormatError);
    const std::string ragged = write("ragged.json",
        R"({"L":[[1.0,0.0],[0.0]],"K":[0.0,0.0],"B_eq":[],"c_eq":[],
            "B_ineq":[],"c_ineq":[]})");
    REQUIRE_THROWS_AS(load_qp_file(ragged), FormatError);
    REQUIRE_THROWS_AS(load_qp_file((dir.path() / "absent.json").string()),
                      FormatError);
  }
}

TEST_CASE("built-in registry", "[problem]") {
  for (const std::string& name : builtin_names()) {
    const BuiltinInstance inst = make_builtin(name);
    REQUIRE(inst.name == name);
    REQUIRE(inst.default_start.size() == inst.problem.n);
    REQUIRE(inst.box_lo.size() == inst.problem.n);
    REQUIRE((inst.box_hi - inst.box_lo).minCoeff() > 0.0);
    REQUIRE_NOTHROW(validate(inst.problem));
    // Default starts respect the inequality constraints.
    const ConstraintValues cv = eval_g(inst.problem, inst.default_start);
    if (cv.ineq.size() > 0) REQUIRE(cv.ineq.maxCoeff() <= 1e-9);
  }
  REQUIRE_THROWS_AS(make_builtin("unknown-name"), InvalidProblem);
}
