// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dsm/dsm.hpp"
#include "eigen_oracle.hpp"

using namespace dsm;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Matrix rank_deficient_spd(std::size_t n, std::size_t rank, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Matrix b(n, rank);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < rank; ++j) b(i, j) = g(rng);
  return b * b.transpose();
}

void exponential_law(Outcome& o) {
  const auto t0 = Clock::now();
  const auto p = gen_wellposed_cubic(10, 0.1, 42).problem;
  FlowConfig cfg;
  cfg.rel_tol = 1e-8;
  cfg.t_max = 20.0;
  const auto r = integrate(p, cfg);
  const auto d = decay_report(r);
  const double secs = seconds_since(t0);
  o.detail << "deviation " << d.decay_deviation << ", rate " << d.fitted_rate << ", t_end " << r.t_final() << ", "
           << secs << " s";
  o.require(d.decay_deviation <= 1e-6, "deviation <= 1e-6");
  o.require(std::abs(d.fitted_rate + 1.0) <= 1e-5, "|rate + 1| <= 1e-5");
  o.require(secs < 5.0, "runtime < 5 s");
}

void error_estimate(Outcome& o) {
  const auto t0 = Clock::now();
  const auto p = gen_wellposed_cubic(10, 0.1, 42).problem;
  const auto r = integrate(p);
  const double m1 = estimate_m1(p, ball_samples(p.u0(), p.radius(), 200, 42)).at("m1");
  const bool converged = r.status == FlowStatus::ResidualConverged;
  const bool ok = converged && error_bound_check(r, m1);
  const double secs = seconds_since(t0);
  o.detail << "m1 " << m1 << ", p0 " << r.p0 << ", status " << to_string(r.status) << ", " << secs << " s";
  o.require(converged, "flow converged");
  o.require(ok, "error bound holds at every recorded point");
  o.require(secs < 10.0, "runtime < 10 s");
}

void ball_confinement(Outcome& o) {
  std::size_t trusted = 0, left = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto p = gen_wellposed_cubic(10, 0.1, seed).problem;
    const double m1 = estimate_m1(p, ball_samples(p.u0(), p.radius(), 200, seed)).at("m1");
    if (!check_trust_condition(p, m1).passed) continue;
    ++trusted;
    if (integrate(p).left_ball) ++left;
  }
  o.detail << trusted << "/20 problems pass the trust check, " << left << " left the ball";
  o.require(left == 0, "no LeftBall");
  o.require(trusted > 0, "at least one problem certified");
}

void oracle_agreement(Outcome& o) {
  double worst = 0.0;
  std::string worst_name;
  std::size_t count = 0;
  auto check = [&](const DsmProblem& p) {
    const auto s = solve_wellposed(p, {}, {16, 42, false});
    const auto ref = newton_oracle(p, p.u0());
    const double err = distance(s.v, ref.solution);
    ++count;
    if (err > worst || !std::isfinite(err)) {
      worst = err;
      worst_name = p.name() + " dim " + std::to_string(p.dim());
    }
  };
  for (std::size_t dim = 1; dim <= 50; ++dim) check(gen_wellposed_cubic(dim, 0.1, 42).problem);
  for (std::size_t dim = 2; dim <= 50; dim += 2) check(gen_sector_nonsymmetric(dim).problem);
  for (std::size_t dim = 1; dim <= 12; ++dim) check(gen_illconditioned(dim).problem);
  o.detail << count << " problems, worst " << worst << " (" << worst_name << ")";
  o.require(worst <= 1e-7, "max distance <= 1e-7");
}

void norm_bound(Outcome& o) {
  const auto gp = gen_singular_monotone(5, 3, 0.0, 42);
  const Vector b = -1.0 * gp.problem.g()(Vector(5));
  const Vector xmin = pseudoinverse_min_norm(gp.problem.L(), b);
  const auto r = solve_continuation(gp.problem, EpsSchedule{});
  double excess = -INFINITY;
  for (const auto& rec : r.records) excess = std::max(excess, rec.norm_v - norm(xmin));
  o.detail << r.records.size() << " eps values, max(||v_eps|| - ||L+ b||) = " << excess;
  o.require(r.records.size() == 20, "full default schedule");
  o.require(excess <= 1e-8, "every norm within 1e-8 of the bound");
}

void minimal_norm_limit(Outcome& o) {
  const auto gp = gen_singular_monotone(5, 3, 0.0, 42);
  const Vector b = -1.0 * gp.problem.g()(Vector(5));
  const Vector xmin = pseudoinverse_min_norm(gp.problem.L(), b);
  const EpsSchedule to_floor{1.0, 0.5, 40, 1e-8};
  const auto r = solve_continuation(gp.problem, to_floor);
  const double limit_error = distance(r.v_limit, xmin);
  const double indep_error = distance(r.v_limit, dsm_test::min_norm_solve(gp.problem.L().matrix(), b));

  const auto diag = gen_diag_singular().problem;
  const auto rd = solve_continuation(diag, EpsSchedule{});
  double worst = 0.0;
  for (const auto& rec : rd.records)
    worst = std::max(worst, std::abs(distance(rec.v, Vector{1, 0}) - rec.eps / (1.0 + rec.eps)));
  o.detail << "last eps " << r.records.back().eps << ", limit error " << limit_error << " (independent " << indep_error
           << "), diag closed-form mismatch " << worst;
  o.require(r.records.back().eps == 1e-8, "schedule reaches eps floor 1e-8");
  o.require(limit_error <= 1e-5 && indep_error <= 1e-5, "limit within 1e-5");
  o.require(worst <= 1e-9, "diag case within 1e-9");
}

void resolvent_bound(Outcome& o) {
  double worst = -INFINITY;
  bool library_ok = true;
  double max_disagreement = 0.0;
  for (std::size_t dim = 1; dim <= 10; ++dim) {
    const Matrix h = dsm_test::hilbert(dim);
    const DsmProblem p(DenseOperator(h, {true, true}), nonlinear::zero(dim), Vector(dim), 1.0);
    std::vector<double> grid;
    for (int k = 0; k <= 6; ++k) grid.push_back(std::pow(10.0, -k));
    const auto cert = check_resolvent_bound(p, grid);
    library_ok = library_ok && cert.passed;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double eps = grid[k];
      Eigen::MatrixXd shifted = dsm_test::to_eigen(h);
      shifted.diagonal().array() += eps;
      const Eigen::JacobiSVD<Eigen::MatrixXd> svd(shifted);
      const double resolvent = 1.0 / svd.singularValues().minCoeff();
      worst = std::max(worst, resolvent - 1.0 / eps);
      max_disagreement = std::max(max_disagreement, std::abs(cert.at("norm_" + std::to_string(k)) - resolvent) / resolvent);
    }
  }
  o.detail << "max(||(L+eps)^-1|| - 1/eps) = " << worst << ", library vs reference rel. diff " << max_disagreement;
  o.require(worst <= 1e-9, "bound + 1e-9 in every case");
  o.require(library_ok, "library certificate passes");
}

void solution_set_geometry(Outcome& o) {
  std::size_t passed = 0, trials = 0;
  std::size_t members = 0, member_trials = 0, refuted = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const Matrix l = rank_deficient_spd(5, 3, seed);
    const Vector b = l * Vector{1, -1, 0.5, 2, 0};
    const auto rep = convexity_closedness_suite(DenseOperator(l), b, 100, seed);
    trials += rep.trials;
    passed += rep.passed;
  }

  const Matrix l = rank_deficient_spd(5, 3, 11);
  const Vector b = l * Vector{0.3, 1, -2, 0.5, 1};
  const DenseOperator op(l);
  const Vector xstar = pseudoinverse_min_norm(op, b);
  const Matrix ns = nullspace_basis(op);
  const DsmProblem p(op, nonlinear::constant(-b), Vector(5), 1.0);
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> g;
  for (int k = 0; k < 20; ++k) {
    Vector a(ns.cols());
    for (auto& x : a) x = 2.0 * g(rng);
    const Vector w = xstar + ns * a;
    ++member_trials;
    if (membership_probe(p, w, default_probe_samples(p, w, 200, 42 + k)).member) ++members;

    // step off the solution set along the range of L, distance >= 0.1
    Vector d(5);
    for (auto& x : d) x = g(rng);
    for (std::size_t j = 0; j < ns.cols(); ++j) d.axpy(-inner(ns.column(j), d), ns.column(j));
    d *= (0.1 + 0.5 * std::abs(g(rng))) / norm(d);
    const Vector z = w + d;
    if (!membership_probe(p, z, default_probe_samples(p, z, 200, 99 + k)).member) ++refuted;
  }
  o.detail << "convexity " << passed << "/" << trials << ", exact solutions accepted " << members << "/"
           << member_trials << ", non-solutions refuted " << refuted << "/20";
  o.require(passed == trials, "all convexity trials");
  o.require(members == member_trials, "membership true on solutions");
  o.require(refuted == 20, "membership false on non-solutions");
}

void jacobian_consistency(Outcome& o) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  Matrix bmat(6, 6);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) bmat(i, j) = g(rng);
  const auto sing = gen_singular_monotone(6, 3, 0.5, 42);
  const Vector c{0.5, -1, 0.25, 2, 0, 1};
  struct Case {
    std::string name;
    NonlinearMap map;
  };
  std::vector<Case> cases{{"zero", nonlinear::zero(6)},
                          {"constant", nonlinear::constant(c)},
                          {"cubic", nonlinear::cubic(0.1, c)},
                          {"affine", nonlinear::affine(bmat, c)},
                          {"range_cubic", sing.problem.g()}};
  double worst = 0.0;
  std::string worst_name;
  for (const auto& cs : cases) {
    for (const auto& u : ball_samples(Vector(6), 2.0, 10, 13)) {
      const double e = fd_jacobian_check(cs.map, u);
      if (e > worst || !std::isfinite(e)) {
        worst = e;
        worst_name = cs.name;
      }
    }
  }
  o.detail << cases.size() << " nonlinearities x 10 points, worst " << worst << " (" << worst_name << ")";
  o.require(worst <= 1e-6, "relative discrepancy <= 1e-6");
}

void noisy_stopping(Outcome& o) {
  const Matrix l{{3, 1, 0}, {1, 2, 0.5}, {0, 0.5, 1.5}};
  const Vector exact{1, -2, 0.5};
  const Vector dir = Vector{0.6, 0.0, -0.8};
  double prev_t = -1.0;
  bool increasing = true, in_band = true;
  for (double delta : {1e-2, 1e-3, 1e-4}) {
    const Vector noisy = -1.0 * (exact + delta * dir);
    const DsmProblem p(DenseOperator(l), nonlinear::constant(noisy), Vector(3), 10.0);
    const auto s = stop_time_noisy(p, delta);
    const bool band = s.residual >= delta && s.residual <= 1.5 * delta * (1 + 1e-6);
    in_band = in_band && band;
    increasing = increasing && s.t_delta > prev_t;
    prev_t = s.t_delta;
    o.detail << "delta " << delta << ": residual/delta " << s.residual / delta << ", t " << s.t_delta << "; ";
  }
  o.require(in_band, "residual in [delta, 1.5 delta (1 + 1e-6)]");
  o.require(increasing, "t_delta increases as delta decreases");
}

} // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"exponential residual law", exponential_law},
      {"trajectory error estimate", error_estimate},
      {"ball confinement", ball_confinement},
      {"solver/Newton agreement", oracle_agreement},
      {"regularized norm bound", norm_bound},
      {"minimal-norm limit", minimal_norm_limit},
      {"resolvent bound", resolvent_bound},
      {"solution set convex and closed", solution_set_geometry},
      {"Jacobian consistency", jacobian_consistency},
      {"noisy stopping", noisy_stopping},
  };
  const auto t0 = Clock::now();
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto start = Clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    if (!o.pass) ++failures;
    std::printf("criterion %-2zu %-31s %s  (%.2f s) %s\n", i + 1, criteria[i].first.c_str(), o.pass ? "PASS" : "FAIL",
                seconds_since(start), o.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed, %.2f s total\n", failures, criteria.size(), seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
