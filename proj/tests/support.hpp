#pragma once

// Shared helpers for the test suite: paths baked in by the build, random
// fixtures, the projector-identity residual, and whole-trajectory invariant
// checks reused by the unit and acceptance suites.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "skkt/skkt.hpp"

namespace test_support {

using skkt::Matrix;
using skkt::Vector;

inline std::filesystem::path data_dir() {
  return std::filesystem::path(SKKT_DATA_DIR);
}

inline std::string cli_path() { return SKKT_CLI_PATH; }

inline double inf_norm_matrix(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline Vector random_vector(std::mt19937_64& rng, int n, double lo,
                            double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

inline Vector random_box_point(std::mt19937_64& rng, const Vector& lo,
                               const Vector& hi) {
  Vector v(lo.size());
  for (int i = 0; i < lo.size(); ++i) {
    std::uniform_real_distribution<double> u(lo[i], hi[i]);
    v[i] = u(rng);
  }
  return v;
}

inline Matrix random_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = gauss(rng);
  return m;
}

/// Random orthogonal matrix (QR of a Gaussian matrix).
inline Matrix random_orthogonal(std::mt19937_64& rng, int n) {
  const Matrix a = random_matrix(rng, n, n);
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  return q;
}

/// Max-abs residual of G'G + J'(JJ')^{-1}J - I, the basis-independent
/// characterization of the orthogonal-complement projector.
inline double projector_residual(const Matrix& g, const Matrix& j) {
  const int n = static_cast<int>(j.cols());
  Matrix proj = Matrix::Zero(n, n);
  if (j.rows() > 0) {
    const Matrix jjt = j * j.transpose();
    proj = j.transpose() * jjt.ldlt().solve(j);
  }
  Matrix total = proj;
  if (g.rows() > 0) total += g.transpose() * g;
  return (total - Matrix::Identity(n, n)).cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// Whole-trajectory invariant checks
// ---------------------------------------------------------------------------

struct TrajectoryCheck {
  bool times_strictly_increasing = true;
  double worst_invariance = -skkt::kInf;  ///< max over samples of max_i g_ineq,i
  double worst_f_increase = 0.0;  ///< on the ||g_A|| < 1e-7 subsequence
  double worst_decay_excess = 0.0;  ///< ||g_eq(t)|| - ||g_eq(0)||e^{-k1 t}
  bool dwell_ok = true;
  bool removals_spaced = true;
  double f_max = -skkt::kInf;
};

inline double sample_active_norm(const skkt::Sample& s) {
  double v = 0.0;
  for (int i = 0; i < s.g_eq.size(); ++i) v = std::max(v, std::abs(s.g_eq[i]));
  for (int idx : s.sigma) v = std::max(v, std::abs(s.g_ineq[idx]));
  return v;
}

inline TrajectoryCheck check_trajectory(const skkt::Trajectory& traj,
                                        const skkt::SolverConfig& cfg,
                                        int p) {
  TrajectoryCheck out;
  double prev_t = -skkt::kInf;
  double prev_included_f = skkt::kInf;
  bool have_included = false;
  const double g0 = traj.samples.empty()
                        ? 0.0
                        : skkt::inf_norm(traj.samples.front().g_eq);
  for (const skkt::Sample& s : traj.samples) {
    if (!(s.t > prev_t)) out.times_strictly_increasing = false;
    prev_t = s.t;
    if (s.g_ineq.size() > 0)
      out.worst_invariance = std::max(out.worst_invariance, s.g_ineq.maxCoeff());
    out.f_max = std::max(out.f_max, s.f);
    if (sample_active_norm(s) < 1e-7) {
      if (have_included)
        out.worst_f_increase = std::max(out.worst_f_increase,
                                        s.f - prev_included_f);
      prev_included_f = s.f;
      have_included = true;
    }
    if (s.g_eq.size() > 0) {
      const double envelope = g0 * std::exp(-cfg.gains.kappa1 * s.t);
      out.worst_decay_excess = std::max(out.worst_decay_excess,
                                        skkt::inf_norm(s.g_eq) - envelope);
    }
  }
  // Dwell audit over the full horizon and over every inter-event window.
  const double t_end = traj.samples.empty() ? 0.0 : traj.samples.back().t;
  auto audit = [&](double lo, double hi) {
    const skkt::DwellAudit a =
        skkt::dwell_time_audit(traj.events, lo, hi, p, cfg.dwell);
    if (!a.ok) out.dwell_ok = false;
  };
  audit(0.0, t_end);
  for (std::size_t i = 0; i < traj.events.size(); ++i)
    for (std::size_t j = i; j < traj.events.size(); ++j)
      audit(traj.events[i].t - 1e-9, traj.events[j].t + 1e-9);
  double last_removal = -skkt::kInf;
  for (const skkt::SwitchEvent& e : traj.events) {
    if (e.kind != skkt::SwitchKind::remove) continue;
    if (!(e.t - last_removal > cfg.dwell)) out.removals_spaced = false;
    last_removal = e.t;
  }
  return out;
}

// ---------------------------------------------------------------------------
// CLI process helpers
// ---------------------------------------------------------------------------

class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    std::ostringstream name;
    name << "skkt_test_" << std::hex << rng();
    path_ = std::filesystem::temp_directory_path() / name.str();
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

/// Runs the built CLI with the given argument string inside `dir`, capturing
/// stdout/stderr.  `env_prefix` may carry VAR=value assignments.
inline CliResult run_cli(const std::string& args,
                         const std::filesystem::path& dir,
                         const std::string& env_prefix = "") {
  const std::filesystem::path out_file = dir / "_stdout.txt";
  const std::filesystem::path err_file = dir / "_stderr.txt";
  std::ostringstream cmd;
  cmd << "cd " << dir << " && " << env_prefix << (env_prefix.empty() ? "" : " ")
      << cli_path() << " " << args << " > " << out_file << " 2> " << err_file;
  const int status = std::system(cmd.str().c_str());
  CliResult res;
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream is(p);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
  };
  res.out = slurp(out_file);
  res.err = slurp(err_file);
  return res;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream is(p);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace test_support
