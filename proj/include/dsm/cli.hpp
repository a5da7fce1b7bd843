#pragma once

// Subcommands of the dsm tool. Each command runs over one or more problem
// sources; with several sources the outputs of source i go to
// <out>/<i>_<name>/ and `jobs` worker threads share the list.
//
// Exit codes:
//   0  success
//   1  error (bad input, singular operator, flow failure, failed audit)
//   2  certificate failure (solve still runs and marks the result exploratory)
//   3  continuation refused: monotonicity certificate of g failed
// In batch mode the first nonzero code in source order is returned.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dsm/errors.hpp"
#include "dsm/flow.hpp"
#include "dsm/model.hpp"
#include "dsm/oracles.hpp"
#include "dsm/problems.hpp"
#include "dsm/regularization.hpp"

namespace dsm::cli {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int error = 1;
inline constexpr int certificate = 2;
inline constexpr int not_monotone = 3;
} // namespace exit_code

struct RunConfig {
  std::string command;
  std::vector<std::string> builtins;
  std::vector<std::string> problems;
  std::size_t dim = 10;
  std::uint64_t seed = 42;
  double scale = 0.1;
  std::size_t rank = 0;  // 0: builtin default
  EpsSchedule schedule;
  FlowConfig flow;
  std::string out = ".";
  unsigned jobs = 1;
  bool rel_tol_given = false;  // decay-audit starts at 1e-6 unless rel-tol is set

  void validate() const {
    static const std::set<std::string> commands{"solve", "continue", "certify", "oracle-check", "decay-audit"};
    if (commands.count(command) == 0) throw InvalidArgument("unknown command '" + command + "'");
    if (builtins.empty() && problems.empty()) throw InvalidArgument("no problem given (--builtin or --problem)");
    if (dim == 0) throw InvalidArgument("--dim must be positive");
    if (jobs == 0) throw InvalidArgument("--jobs must be positive");
    if (!(scale >= 0.0)) throw InvalidArgument("--scale must be nonnegative");
    schedule.validate();
    flow.validate();
  }
};

/// Applies a JSON config object whose keys are the long flag names without
/// the leading dashes ("dim", "eps-ratio", "rel-tol", ...).
inline void apply_config(RunConfig& cfg, const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("config: expected a JSON object");
  static const std::set<std::string> known{"builtin", "problem", "dim",       "seed",      "scale",  "rank",
                                           "eps0",    "eps-ratio", "eps-count", "eps-floor", "t-max",  "rel-tol",
                                           "abs-tol", "p-stop",  "out",       "jobs"};
  for (const auto& [key, value] : j.items())
    if (known.count(key) == 0) throw ParseError("config: unknown key '" + key + "'");
  auto strings = [](const nlohmann::json& v) {
    std::vector<std::string> out;
    if (v.is_array())
      for (const auto& s : v) out.push_back(s.get<std::string>());
    else
      out.push_back(v.get<std::string>());
    return out;
  };
  try {
    if (j.contains("builtin")) cfg.builtins = strings(j["builtin"]);
    if (j.contains("problem")) cfg.problems = strings(j["problem"]);
    if (j.contains("dim")) cfg.dim = j["dim"].get<std::size_t>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("scale")) cfg.scale = j["scale"].get<double>();
    if (j.contains("rank")) cfg.rank = j["rank"].get<std::size_t>();
    if (j.contains("eps0")) cfg.schedule.eps0 = j["eps0"].get<double>();
    if (j.contains("eps-ratio")) cfg.schedule.ratio = j["eps-ratio"].get<double>();
    if (j.contains("eps-count")) cfg.schedule.count = j["eps-count"].get<std::size_t>();
    if (j.contains("eps-floor")) cfg.schedule.floor = j["eps-floor"].get<double>();
    if (j.contains("t-max")) cfg.flow.t_max = j["t-max"].get<double>();
    if (j.contains("rel-tol")) {
      cfg.flow.rel_tol = j["rel-tol"].get<double>();
      cfg.rel_tol_given = true;
    }
    if (j.contains("abs-tol")) cfg.flow.abs_tol = j["abs-tol"].get<double>();
    if (j.contains("p-stop")) cfg.flow.p_stop = j["p-stop"].get<double>();
    if (j.contains("out")) cfg.out = j["out"].get<std::string>();
    if (j.contains("jobs")) cfg.jobs = j["jobs"].get<unsigned>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
}

struct ProblemSource {
  DsmProblem problem;
  std::set<Hypothesis> tags;
  std::optional<KnownSolution> known;
  std::vector<Certificate> certificates;
  bool verified = true;
  std::string mismatch;
};

namespace detail {

struct SourceRef {
  bool builtin = true;
  std::string name;  // builtin name or path
};

inline std::vector<SourceRef> source_refs(const RunConfig& cfg) {
  std::vector<SourceRef> refs;
  for (const auto& b : cfg.builtins) refs.push_back({true, b});
  for (const auto& p : cfg.problems) refs.push_back({false, p});
  return refs;
}

inline ProblemSource resolve(const SourceRef& ref, const RunConfig& cfg, bool strict) {
  if (ref.builtin) {
    auto gp = make_builtin(ref.name, cfg.dim, cfg.seed, cfg.scale, cfg.rank);
    return {gp.problem, gp.spec.tags, gp.known, gp.certificates, true, {}};
  }
  auto lp = load_problem(ref.name, strict);
  return {lp.problem, lp.spec.tags, lp.known, lp.certificates, lp.verified, lp.mismatch};
}

inline std::string label(const SourceRef& ref) {
  if (ref.builtin) return ref.name;
  return std::filesystem::path(ref.name).stem().string();
}

template <class E>
bool is_a(const std::exception& e) {
  return dynamic_cast<const E*>(&e) != nullptr;
}

/// Error message prefixed with the error class.
inline std::string describe(const std::exception& e) {
  std::string kind = "error";
  if (is_a<SingularOperator>(e)) kind = "SingularOperator";
  else if (is_a<SingularLinearization>(e)) kind = "SingularLinearization";
  else if (is_a<ParseError>(e)) kind = "ParseError";
  else if (is_a<CertificateMismatch>(e)) kind = "CertificateMismatch";
  else if (is_a<NotMonotone>(e)) kind = "NotMonotone";
  else if (is_a<NonPsdOperator>(e)) kind = "NonPsdOperator";
  else if (is_a<InnerSolveFailed>(e)) kind = "InnerSolveFailed";
  else if (is_a<MaxIterations>(e)) kind = "MaxIterations";
  else if (is_a<InvalidArgument>(e)) kind = "InvalidArgument";
  else if (is_a<DimensionMismatch>(e)) kind = "DimensionMismatch";
  return kind + ": " + e.what();
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error(path.string() + ": cannot open for writing");
  out << j.dump(2) << '\n';
}

inline nlohmann::json certificates_json(const std::vector<Certificate>& tagged,
                                        const std::vector<Certificate>& other = {}) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : tagged) {
    auto j = to_json(c);
    j["tagged"] = true;
    arr.push_back(j);
  }
  for (const auto& c : other) {
    auto j = to_json(c);
    j["tagged"] = false;
    arr.push_back(j);
  }
  return arr;
}

inline nlohmann::json number(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(); }

inline nlohmann::json flow_config_json(const FlowConfig& f) {
  return {{"t_max", f.t_max},   {"rel_tol", f.rel_tol},           {"abs_tol", f.abs_tol},
          {"p_stop", f.p_stop}, {"sample_stride", f.sample_stride}, {"max_steps", f.max_steps}};
}

inline nlohmann::json problem_header(const std::string& command, const ProblemSource& src) {
  nlohmann::json tags = nlohmann::json::array();
  for (Hypothesis h : src.tags) tags.push_back(to_string(h));
  return {{"command", command},
          {"problem", src.problem.name()},
          {"dim", src.problem.dim()},
          {"epsilon", src.problem.epsilon()},
          {"radius", src.problem.radius()},
          {"tags", tags}};
}

using Job = std::function<int(const ProblemSource&, const std::filesystem::path&, const RunConfig&, std::ostream&)>;

inline int run_batch(const RunConfig& cfg, std::ostream& log, bool strict, const Job& job) {
  cfg.validate();
  const auto refs = source_refs(cfg);
  std::vector<int> codes(refs.size(), exit_code::error);
  std::vector<std::string> logs(refs.size());
  auto run_one = [&](std::size_t i) {
    std::ostringstream os;
    try {
      std::filesystem::path dir(cfg.out);
      if (refs.size() > 1) dir /= std::to_string(i) + "_" + label(refs[i]);
      std::filesystem::create_directories(dir);
      const auto src = resolve(refs[i], cfg, strict);
      codes[i] = job(src, dir, cfg, os);
    } catch (const std::exception& e) {
      os << label(refs[i]) << ": " << describe(e) << '\n';
      codes[i] = exit_code::error;
    }
    logs[i] = os.str();
  };
  const unsigned workers = std::min<std::size_t>(cfg.jobs, refs.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < refs.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < refs.size(); i = next++) run_one(i);
      });
    for (auto& t : pool) t.join();
  }
  for (const auto& s : logs) log << s;
  for (int c : codes)
    if (c != exit_code::ok) return c;
  return exit_code::ok;
}

inline int solve_one(const ProblemSource& src, const std::filesystem::path& dir, const RunConfig& cfg,
                     std::ostream& log) {
  const DsmProblem& p = src.problem;
  p.shifted_lu();
  const auto s = solve_wellposed(p, cfg.flow, {64, cfg.seed, true});
  const auto decay = decay_report(s.flow);
  bool certs_ok = src.verified && s.trust_passed;
  for (const auto& c : src.certificates) certs_ok = certs_ok && c.passed;
  for (const auto& c : s.certificates) certs_ok = certs_ok && c.passed;

  {
    std::ofstream csv(dir / "trajectory.csv");
    write_trajectory_csv(csv, s.flow);
  }
  auto report = problem_header("solve", src);
  report["status"] = to_string(s.flow.status);
  report["converged"] = s.converged();
  report["exploratory"] = !certs_ok;
  if (!src.mismatch.empty()) report["mismatch"] = src.mismatch;
  report["v"] = s.v.values();
  report["residual_F"] = s.residual;
  report["p0"] = s.flow.p0;
  report["p_final"] = s.flow.p_final();
  report["t_final"] = s.flow.t_final();
  report["decay_deviation"] = s.flow.decay_deviation;
  report["fitted_rate"] = decay.fitted_rate;
  report["left_ball"] = s.flow.left_ball;
  report["m1"] = number(s.m1);
  report["trust_passed"] = s.trust_passed;
  report["accepted_steps"] = s.flow.accepted_steps;
  report["rejected_steps"] = s.flow.rejected_steps;
  report["rhs_evaluations"] = s.flow.rhs_evaluations;
  report["trajectory_points"] = s.flow.trajectory.size();
  report["flow_config"] = flow_config_json(cfg.flow);
  write_json(dir / "report.json", report);
  write_json(dir / "certificates.json", certificates_json(src.certificates, s.certificates));

  if (!s.converged()) {
    log << p.name() << ": flow ended with " << to_string(s.flow.status) << " at t = " << s.flow.t_final()
        << ", p = " << s.flow.p_final() << '\n';
    return exit_code::error;
  }
  if (!certs_ok) {
    log << p.name() << ": certificate failure, result is exploratory"
        << (src.mismatch.empty() ? "" : " (" + src.mismatch + ")") << '\n';
    return exit_code::certificate;
  }
  return exit_code::ok;
}

inline nlohmann::json schedule_json(const EpsSchedule& s) {
  return {{"eps0", s.eps0}, {"ratio", s.ratio}, {"count", s.count}, {"floor", s.floor},
          {"values", s.values()}, {"truncated", s.truncated()}};
}

inline void write_continuation(const ProblemSource& src, const std::filesystem::path& dir, const RunConfig& cfg,
                               const ContinuationResult& r, const std::string& status) {
  {
    std::ofstream csv(dir / "continuation.csv");
    write_continuation_csv(csv, r);
  }
  std::optional<Vector> oracle;
  if (src.known) oracle = src.known->min_norm;
  auto report = problem_header("continue", src);
  report["status"] = status;
  report["schedule"] = schedule_json(cfg.schedule);
  if (cfg.schedule.truncated())
    report["schedule_note"] = "schedule truncated at eps floor " + std::to_string(cfg.schedule.floor);
  report["continuation"] =
      r.records.empty() ? nlohmann::json() : to_json(r, minimal_norm_diagnostics(r, oracle));
  write_json(dir / "report.json", report);
  write_json(dir / "certificates.json", certificates_json(src.certificates, r.certificates));
}

inline int continue_one(const ProblemSource& src, const std::filesystem::path& dir, const RunConfig& cfg,
                        std::ostream& log) {
  try {
    const auto r = solve_continuation(src.problem, cfg.schedule, cfg.flow, {16, cfg.seed, 32, 1e12});
    write_continuation(src, dir, cfg, r, "completed");
    if (!r.norms_monotone_ok) log << src.problem.name() << ": warning: norms of v_eps not bounded by the last norm\n";
    return exit_code::ok;
  } catch (const NotMonotone& e) {
    write_json(dir / "certificates.json", certificates_json(src.certificates));
    log << src.problem.name() << ": " << describe(e) << '\n';
    return exit_code::not_monotone;
  } catch (const NonPsdOperator& e) {
    log << src.problem.name() << ": " << describe(e) << '\n';
    return exit_code::certificate;
  } catch (const ContinuationFailed& e) {
    write_continuation(src, dir, cfg, e.partial(), "inner_solve_failed");
    log << src.problem.name() << ": " << describe(e) << '\n';
    return exit_code::error;
  }
}

inline int certify_one(const ProblemSource& src, const std::filesystem::path& dir, const RunConfig& cfg,
                       std::ostream& log) {
  const DsmProblem& p = src.problem;
  std::vector<Certificate> extra;
  const bool has_invertible =
      std::any_of(src.certificates.begin(), src.certificates.end(),
                  [](const Certificate& c) { return c.subject == "shifted_operator"; });
  if (!has_invertible) extra.push_back(check_invertible(p));
  if (p.shifted_invertible() && src.tags.count(Hypothesis::TrustCondition) == 0) {
    try {
      extra.push_back(trust_certificate(p, 64, cfg.seed));
    } catch (const SingularLinearization& e) {
      Certificate c{CertificateKind::TrustCondition, "start"};
      c.note = e.what();
      extra.push_back(c);
    }
  }
  if (src.tags.count(Hypothesis::MonotoneG) == 0)
    extra.push_back(monotonicity_certificate(p.g(), ball_samples(p.u0(), p.radius(), 32, cfg.seed)));
  double fd = 0.0;
  for (const auto& u : ball_samples(p.u0(), p.radius(), 10, cfg.seed)) fd = std::max(fd, fd_jacobian_check(p.g(), u));

  bool tagged_ok = src.verified;
  for (const auto& c : src.certificates) tagged_ok = tagged_ok && c.passed;
  auto report = problem_header("certify", src);
  report["tagged_ok"] = tagged_ok;
  if (!src.mismatch.empty()) report["mismatch"] = src.mismatch;
  report["jacobian_check"] = {{"max_relative_error", fd}, {"points", 10}, {"passed", fd <= 1e-6}};
  write_json(dir / "report.json", report);
  write_json(dir / "certificates.json", certificates_json(src.certificates, extra));
  if (!tagged_ok) {
    log << p.name() << ": tagged certificates fail" << (src.mismatch.empty() ? "" : " (" + src.mismatch + ")")
        << '\n';
    return exit_code::certificate;
  }
  return exit_code::ok;
}

inline int oracle_one(const ProblemSource& src, const std::filesystem::path& dir, const RunConfig& cfg,
                      std::ostream& log) {
  const DsmProblem& p = src.problem;
  auto report = problem_header("oracle-check", src);
  nlohmann::json checks = nlohmann::json::array();
  bool ok = true;
  auto add = [&](const std::string& name, bool passed, nlohmann::json detail) {
    detail["check"] = name;
    detail["passed"] = passed;
    checks.push_back(detail);
    ok = ok && passed;
  };
  if (p.shifted_invertible()) {
    const auto s = solve_wellposed(p, cfg.flow, {64, cfg.seed, true});
    const auto n = newton_oracle(p, p.u0());
    const double diff = distance(s.v, n.solution);
    add("flow_vs_newton", s.converged() && diff <= 1e-7,
        {{"difference", diff}, {"flow_status", to_string(s.flow.status)}, {"newton", to_json(n)}});
  }
  if (src.known) {
    const DsmProblem p0 = p.with_epsilon(0.0);
    const Vector& v = src.known->min_norm;
    const double res = norm(full_residual(p0, v));
    add("known_solution_residual", res <= 1e-10, {{"residual", res}});
    if (p.g().name() == "constant") {
      const Vector b = -p.g()(Vector(p.dim()));
      try {
        const Vector x = pseudoinverse_min_norm(p.L(), b);
        add("pseudoinverse", distance(x, v) <= 1e-8, {{"difference", distance(x, v)}});
      } catch (const Error& e) {
        add("pseudoinverse", false, {{"error", describe(e)}});
      }
    }
    const auto probe = membership_probe(p0, v, default_probe_samples(p0, v, 200, cfg.seed));
    add("membership", probe.member, {{"margin", probe.margin}, {"samples", probe.samples}});
  }
  if (checks.empty()) {
    log << p.name() << ": no oracle applies (L + eps I singular and no known solution)\n";
    return exit_code::error;
  }
  report["checks"] = checks;
  report["passed"] = ok;
  write_json(dir / "report.json", report);
  if (!ok) {
    log << p.name() << ": oracle disagreement\n";
    return exit_code::certificate;
  }
  return exit_code::ok;
}

inline constexpr double default_audit_tol = 1e-6;

/// Tolerance levels rel_tol, rel_tol / 100, rel_tol / 1e4 (abs_tol = level / 100).
inline std::vector<double> audit_levels(double rel_tol) { return {rel_tol, rel_tol * 1e-2, rel_tol * 1e-4}; }

inline int audit_one(const ProblemSource& src, const std::filesystem::path& dir, const RunConfig& cfg,
                     std::ostream& log) {
  const DsmProblem& p = src.problem;
  p.shifted_lu();
  nlohmann::json levels = nlohmann::json::array();
  bool ok = true;
  double prev = std::numeric_limits<double>::infinity();
  FlowResult last;
  for (double tol : audit_levels(cfg.rel_tol_given ? cfg.flow.rel_tol : default_audit_tol)) {
    FlowConfig fc = cfg.flow;
    fc.rel_tol = tol;
    fc.abs_tol = tol * 1e-2;
    last = integrate(p, fc);
    const bool flow_ok = last.status == FlowStatus::ResidualConverged || last.status == FlowStatus::TMaxReached;
    const double dev = last.decay_deviation;
    const bool within = dev <= 100.0 * tol;
    const bool shrinks = dev < prev || (dev == 0.0 && prev == 0.0);
    levels.push_back({{"rel_tol", tol},
                      {"decay_deviation", dev},
                      {"fitted_rate", decay_report(last).fitted_rate},
                      {"status", to_string(last.status)},
                      {"within_threshold", within},
                      {"shrinks", shrinks},
                      {"accepted_steps", last.accepted_steps}});
    if (!flow_ok) {
      log << p.name() << ": flow failure at rel_tol " << tol << ": " << to_string(last.status) << '\n';
      ok = false;
    }
    if (!within || !shrinks) ok = false;
    prev = dev;
  }
  {
    std::ofstream csv(dir / "trajectory.csv");
    write_trajectory_csv(csv, last);
  }
  auto report = problem_header("decay-audit", src);
  report["levels"] = levels;
  report["passed"] = ok;
  write_json(dir / "report.json", report);
  if (!ok) {
    log << p.name() << ": decay audit failed\n";
    return exit_code::error;
  }
  return exit_code::ok;
}

} // namespace detail

inline int cmd_solve(const RunConfig& cfg, std::ostream& log) {
  return detail::run_batch(cfg, log, false, detail::solve_one);
}
inline int cmd_continue(const RunConfig& cfg, std::ostream& log) {
  return detail::run_batch(cfg, log, true, detail::continue_one);
}
inline int cmd_certify(const RunConfig& cfg, std::ostream& log) {
  return detail::run_batch(cfg, log, false, detail::certify_one);
}
inline int cmd_oracle_check(const RunConfig& cfg, std::ostream& log) {
  return detail::run_batch(cfg, log, true, detail::oracle_one);
}
inline int cmd_decay_audit(const RunConfig& cfg, std::ostream& log) {
  return detail::run_batch(cfg, log, true, detail::audit_one);
}

/// Dispatches on cfg.command. Invalid configurations exit with 1.
inline int run(const RunConfig& cfg, std::ostream& log) {
  try {
    cfg.validate();
  } catch (const Error& e) {
    log << detail::describe(e) << '\n';
    return exit_code::error;
  }
  if (cfg.command == "solve") return cmd_solve(cfg, log);
  if (cfg.command == "continue") return cmd_continue(cfg, log);
  if (cfg.command == "certify") return cmd_certify(cfg, log);
  if (cfg.command == "oracle-check") return cmd_oracle_check(cfg, log);
  return cmd_decay_audit(cfg, log);
}

} // namespace dsm::cli
