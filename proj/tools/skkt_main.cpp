// Command-line front end for the switched KKT-seeking solver.
//
// Subcommands:
//   solve   integrate the dynamics from z0 and certify the terminal point;
//           writes trajectory.csv, events.jsonl, report.json
//   check   sample the constraint-interaction regularity statistics over a
//           box and report per-subset pass/fail; writes assumption_report.json
//   verify  recompute the KKT residuals stored in a report.json and compare
//
// Exit codes: 0 success, 1 certification/check failure, 2 input error,
// 3 numerical failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "skkt/skkt.hpp"

namespace {

using skkt::Matrix;
using skkt::Vector;

Vector parse_csv_doubles(const std::string& text, const std::string& what) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(tok, &pos);
      if (pos != tok.size())
        throw skkt::FormatError(what + ": trailing characters in '" + tok +
                                "'");
      vals.push_back(v);
    } catch (const skkt::FormatError&) {
      throw;
    } catch (const std::exception&) {
      throw skkt::FormatError(what + ": cannot parse '" + tok +
                              "' as a number");
    }
  }
  if (vals.empty()) throw skkt::FormatError(what + ": empty list");
  Vector out(static_cast<int>(vals.size()));
  for (std::size_t i = 0; i < vals.size(); ++i)
    out[static_cast<int>(i)] = vals[i];
  return out;
}

std::uint64_t sampler_seed_from_env() {
  const char* raw = std::getenv("SWITCHED_KKT_SEED");
  if (raw == nullptr || *raw == '\0') return 0;
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(raw, &pos);
    if (pos != std::string(raw).size())
      throw skkt::FormatError(
          "SWITCHED_KKT_SEED: trailing characters in value");
    return static_cast<std::uint64_t>(v);
  } catch (const skkt::FormatError&) {
    throw;
  } catch (const std::exception&) {
    throw skkt::FormatError(std::string("SWITCHED_KKT_SEED: cannot parse '") +
                            raw + "' as an unsigned integer");
  }
}

struct SelectedProblem {
  skkt::Problem problem;
  nlohmann::ordered_json selector;  // {"builtin": name} or {"qp": {...}}
  std::optional<Vector> default_start;
  Vector box_lo, box_hi;  // default sampling box
};

SelectedProblem select_problem(const std::string& builtin,
                               const std::string& qp_path) {
  if (builtin.empty() == qp_path.empty())
    throw skkt::InvalidProblem(
        "exactly one of --builtin and --qp must be given");
  SelectedProblem out;
  if (!builtin.empty()) {
    skkt::BuiltinInstance inst = skkt::make_builtin(builtin);
    out.problem = std::move(inst.problem);
    out.selector["builtin"] = inst.name;
    out.default_start = inst.default_start;
    out.box_lo = inst.box_lo;
    out.box_hi = inst.box_hi;
  } else {
    const skkt::QpData qp = skkt::load_qp_file(qp_path);
    out.problem = skkt::qp_transform(qp);
    out.selector["qp"] = skkt::qp_to_json(qp);
    out.box_lo = Vector::Constant(out.problem.n, -5.0);
    out.box_hi = Vector::Constant(out.problem.n, 5.0);
  }
  return out;
}

skkt::Problem problem_from_selector(const nlohmann::json& selector) {
  if (!selector.is_object())
    throw skkt::FormatError("field 'problem' must be an object");
  if (selector.contains("builtin")) {
    const auto& name = selector["builtin"];
    if (!name.is_string())
      throw skkt::FormatError("field 'problem.builtin' must be a string");
    return skkt::make_builtin(name.get<std::string>()).problem;
  }
  if (selector.contains("qp"))
    return skkt::qp_transform(skkt::qp_from_json(selector["qp"]));
  throw skkt::FormatError("field 'problem' needs a 'builtin' or 'qp' key");
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os)
    throw skkt::FormatError("cannot open output file: " + path.string());
  return os;
}

std::string join(const Vector& v) {
  std::string s = "[";
  for (int i = 0; i < v.size(); ++i) {
    if (i > 0) s += ", ";
    s += skkt::format_g17(v[i]);
  }
  return s + "]";
}

struct CommonArgs {
  std::string builtin;
  std::string qp_path;
  std::string out_dir = ".";
  double kappa1 = 1.0;
  double kappa2 = 1.0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--builtin", args.builtin,
                  "Built-in problem: qp-paper | rosenbrock | hvac-paper");
  cmd->add_option("--qp", args.qp_path, "Path to a QP description (JSON)");
  cmd->add_option("--out", args.out_dir, "Output directory")
      ->capture_default_str();
  cmd->add_option("--kappa1", args.kappa1, "Constraint-restoration gain")
      ->capture_default_str();
  cmd->add_option("--kappa2", args.kappa2, "Tangential descent gain")
      ->capture_default_str();
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

int run_solve(const CommonArgs& common, const std::string& z0_text,
              double dwell, double step, double tmax, double tol_kkt) {
  const SelectedProblem sel = select_problem(common.builtin, common.qp_path);

  Vector z0;
  if (!z0_text.empty()) {
    z0 = parse_csv_doubles(z0_text, "--z0");
  } else if (sel.default_start) {
    z0 = *sel.default_start;
  } else {
    throw skkt::InvalidProblem("--z0 is required with --qp");
  }
  if (z0.size() != sel.problem.n)
    throw skkt::InvalidProblem("--z0 has " + std::to_string(z0.size()) +
                               " entries; problem dimension is " +
                               std::to_string(sel.problem.n));

  skkt::SolverConfig cfg;
  cfg.gains.kappa1 = common.kappa1;
  cfg.gains.kappa2 = common.kappa2;
  cfg.dwell = dwell;
  cfg.step = step;
  cfg.t_max = tmax;
  cfg.tol_kkt = tol_kkt;

  const skkt::SolveResult res = skkt::solve(sel.problem, z0, cfg);
  const skkt::Trajectory& traj = res.trajectory;

  const std::filesystem::path dir(common.out_dir);
  std::filesystem::create_directories(dir);
  {
    std::ofstream os = open_output(dir / "trajectory.csv");
    skkt::write_trajectory_csv(traj, os);
  }
  {
    std::ofstream os = open_output(dir / "events.jsonl");
    skkt::write_events_jsonl(traj.events, os);
  }

  nlohmann::ordered_json j;
  j["problem"] = sel.selector;
  j["z0"] = skkt::detail::vector_to_json(z0);
  j["config"] = {{"kappa1", cfg.gains.kappa1}, {"kappa2", cfg.gains.kappa2},
                 {"dwell", cfg.dwell},         {"step", cfg.step},
                 {"tmax", cfg.t_max},          {"tol_kkt", cfg.tol_kkt}};
  j["termination"] = skkt::to_string(traj.termination);
  if (traj.termination == skkt::Termination::error)
    j["error_message"] = traj.error_message;
  j["t_end"] = traj.t_end;
  if (res.report) j["report"] = skkt::to_json(*res.report);
  {
    std::ofstream os = open_output(dir / "report.json");
    os << j.dump(2) << "\n";
  }

  std::cout << "termination : " << skkt::to_string(traj.termination)
            << " at t = " << skkt::format_g17(traj.t_end) << "\n";
  std::cout << "z_end       : " << join(traj.z_end) << "\n";
  std::cout << "sigma_end   : " << skkt::ActiveSet(traj.sigma_end).to_string()
            << "\n";
  if (traj.termination == skkt::Termination::error) {
    std::cerr << "error: " << traj.error_message << "\n";
    return 3;
  }
  const skkt::KKTReport& rep = *res.report;
  std::cout << "verdict     : " << skkt::to_string(rep.verdict) << "\n";
  std::cout << "residuals   : grad " << rep.residuals.grad_residual << " | eq "
            << rep.residuals.eq_residual << " | ineq_max "
            << rep.residuals.ineq_max << " | nu_min " << rep.residuals.nu_min
            << " | comp " << rep.residuals.comp_residual << "\n";
  std::cout << "proj. curvature eigmin : " << rep.second_order_eigmin << "\n";
  const bool pass = rep.verdict != skkt::Verdict::kkt_fail;
  return pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

std::vector<std::vector<int>> enumerate_subsets(int p, int max_size) {
  if (p > 16)
    throw skkt::CapabilityError(
        "subset enumeration is limited to 16 inequality constraints");
  std::vector<std::vector<int>> out;
  for (std::uint32_t mask = 0; mask < (1u << p); ++mask) {
    std::vector<int> w;
    for (int i = 0; i < p; ++i)
      if (mask & (1u << i)) w.push_back(i);
    if (static_cast<int>(w.size()) <= max_size) out.push_back(std::move(w));
  }
  std::sort(out.begin(), out.end(),
            [](const std::vector<int>& a, const std::vector<int>& b) {
              if (a.size() != b.size()) return a.size() < b.size();
              return a < b;
            });
  return out;
}

int run_check(const CommonArgs& common, const std::string& box_text,
              int samples, int grid) {
  const SelectedProblem sel = select_problem(common.builtin, common.qp_path);
  const skkt::Problem& pb = sel.problem;

  skkt::SampleRegion region;
  if (!box_text.empty()) {
    const Vector flat = parse_csv_doubles(box_text, "--box");
    if (flat.size() != 2 * pb.n)
      throw skkt::FormatError("--box needs lo,hi pairs for each of " +
                              std::to_string(pb.n) + " dimensions");
    region.lo = Vector(pb.n);
    region.hi = Vector(pb.n);
    for (int i = 0; i < pb.n; ++i) {
      region.lo[i] = flat[2 * i];
      region.hi[i] = flat[2 * i + 1];
      if (!(region.lo[i] <= region.hi[i]))
        throw skkt::FormatError("--box: lower bound exceeds upper bound in "
                                "dimension " +
                                std::to_string(i));
    }
  } else {
    region.lo = sel.box_lo;
    region.hi = sel.box_hi;
  }
  region.count = samples;
  region.grid_points = grid;
  region.seed = sampler_seed_from_env();

  skkt::GainConfig gains{common.kappa1, common.kappa2};
  skkt::validate(gains);

  const auto subsets = enumerate_subsets(pb.p, pb.n - pb.m);
  const skkt::RegularityReport rep = skkt::check_regularity(pb, region,
                                                            subsets);

  nlohmann::ordered_json j = skkt::to_json(rep);
  j["iss_radius"] = nullptr;
  if (rep.all_pass()) {
    try {
      j["iss_radius"] = skkt::iss_bound(pb, gains, rep);
    } catch (const skkt::CapabilityError&) {
      // leave null: statistics do not support a finite bound
    }
  }
  const std::filesystem::path dir(common.out_dir);
  std::filesystem::create_directories(dir);
  {
    std::ofstream os = open_output(dir / "assumption_report.json");
    os << j.dump(2) << "\n";
  }

  std::cout << "samples kept: " << rep.samples_kept << "\n";
  std::cout << "subset           min_sym_eig      beta1        beta2        "
               "phi          cond         pass\n";
  for (const auto& s : rep.subsets) {
    std::ostringstream row;
    row << skkt::ActiveSet(s.subset).to_string();
    std::string tag = row.str();
    tag.resize(16, ' ');
    std::cout << tag;
    auto cell = [](double v) {
      std::ostringstream c;
      c.precision(5);
      c << v;
      std::string s2 = c.str();
      s2.resize(13, ' ');
      return s2;
    };
    std::cout << cell(s.min_sym_eig) << cell(s.beta1) << cell(s.beta2)
              << cell(s.phi) << cell(s.worst_condition)
              << (s.pass ? "yes" : "NO") << "\n";
  }
  std::cout << (rep.all_pass() ? "all subsets pass" : "some subsets fail")
            << "\n";
  return rep.all_pass() ? 0 : 1;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

int run_verify(const std::string& report_path) {
  std::ifstream is(report_path);
  if (!is) throw skkt::FormatError("cannot open report: " + report_path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw skkt::FormatError(std::string("report is not valid JSON: ") +
                            e.what());
  }
  if (!j.is_object() || !j.contains("problem"))
    throw skkt::FormatError("report is missing the 'problem' field");
  const skkt::Problem pb = problem_from_selector(j["problem"]);
  if (!j.contains("report"))
    throw skkt::FormatError("report is missing the 'report' field");
  const skkt::KKTReport rep = skkt::kkt_report_from_json(j["report"]);

  if (rep.z_star.size() != pb.n || rep.lambda.size() != pb.m ||
      rep.nu.size() != pb.p)
    throw skkt::FormatError(
        "stored multipliers/point do not match the problem dimensions");

  const skkt::KktResidual rec =
      skkt::kkt_residual(pb, rep.z_star, rep.lambda, rep.nu);

  constexpr double kTol = 1e-9;
  struct Row {
    const char* name;
    double stored;
    double recomputed;
  };
  const Row rows[] = {
      {"grad_residual", rep.residuals.grad_residual, rec.grad_residual},
      {"eq_residual", rep.residuals.eq_residual, rec.eq_residual},
      {"ineq_max", rep.residuals.ineq_max, rec.ineq_max},
      {"nu_min", rep.residuals.nu_min, rec.nu_min},
      {"comp_residual", rep.residuals.comp_residual, rec.comp_residual},
  };
  bool ok = true;
  for (const Row& r : rows) {
    const bool match = std::abs(r.stored - r.recomputed) <= kTol;
    std::cout << r.name << ": stored " << skkt::format_g17(r.stored)
              << " recomputed " << skkt::format_g17(r.recomputed)
              << (match ? "" : "  MISMATCH") << "\n";
    ok = ok && match;
  }
  std::cout << (ok ? "report verified" : "report does not match") << "\n";
  return ok ? 0 : 1;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"Switched-dynamics KKT solver"};
  app.require_subcommand(1);

  CommonArgs solve_args;
  std::string z0_text;
  double dwell = 0.1, step = 1e-3, tmax = 50.0, tol_kkt = 1e-6;
  CLI::App* solve_cmd =
      app.add_subcommand("solve", "Integrate the dynamics and certify");
  add_common(solve_cmd, solve_args);
  solve_cmd->add_option("--z0", z0_text,
                        "Initial point, comma separated (defaults to the "
                        "built-in start)");
  solve_cmd->add_option("--dwell", dwell, "Removal dwell time")
      ->capture_default_str();
  solve_cmd->add_option("--step", step, "Integration step")
      ->capture_default_str();
  solve_cmd->add_option("--tmax", tmax, "Time horizon")->capture_default_str();
  solve_cmd->add_option("--tol-kkt", tol_kkt, "KKT residual tolerance")
      ->capture_default_str();

  CommonArgs check_args;
  std::string box_text;
  int samples = 1000, grid = 0;
  CLI::App* check_cmd =
      app.add_subcommand("check", "Sample interaction-matrix regularity");
  add_common(check_cmd, check_args);
  check_cmd->add_option("--box", box_text,
                        "Sampling box lo0,hi0,lo1,hi1,... (defaults to the "
                        "built-in box, or [-5,5]^n for QP files)");
  check_cmd->add_option("--samples", samples, "Number of random samples")
      ->capture_default_str();
  check_cmd->add_option(
      "--grid", grid,
      "Use a tensor grid with this many points per dimension instead of "
      "random samples");

  std::string report_path;
  CLI::App* verify_cmd = app.add_subcommand(
      "verify", "Recompute the residuals stored in a report.json");
  verify_cmd->add_option("report", report_path, "Path to report.json")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (solve_cmd->parsed())
    return run_solve(solve_args, z0_text, dwell, step, tmax, tol_kkt);
  if (check_cmd->parsed()) return run_check(check_args, box_text, samples, grid);
  return run_verify(report_path);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const skkt::InfeasibleStart& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const skkt::SamplingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const skkt::CapabilityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const skkt::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const skkt::InvalidProblem& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const skkt::InfeasibleProblem& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const skkt::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
