#pragma once

// Solvers built on the flow: the direct solve for an invertible L + eps I, the
// eps-continuation toward the minimal-norm solution for a self-adjoint PSD L
// and monotone g, and a discrepancy-type stopping rule for noisy data.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dsm/errors.hpp"
#include "dsm/flow.hpp"
#include "dsm/linalg.hpp"
#include "dsm/model.hpp"

namespace dsm {

struct SolveOptions {
  std::size_t m1_samples = 64;
  std::uint64_t seed = 42;
  bool check_trust = true;
};

struct WellposedSolution {
  Vector v;
  FlowResult flow;
  std::vector<Certificate> certificates;
  double m1 = std::numeric_limits<double>::quiet_NaN();
  bool trust_passed = false;
  double residual = 0.0;  // ||L v + eps v + g(v)||

  bool converged() const { return flow.status == FlowStatus::ResidualConverged; }
};

/// Runs the flow for an invertible L + eps I. The invertibility and trust
/// certificates are attached; a failed trust condition is recorded and the
/// run proceeds. Throws SingularOperator when L + eps I is singular.
inline WellposedSolution solve_wellposed(const DsmProblem& p, const FlowConfig& cfg = {},
                                         const SolveOptions& opts = {}) {
  WellposedSolution s;
  auto inv = check_invertible(p);
  s.certificates.push_back(inv);
  p.shifted_lu();
  if (opts.check_trust && opts.m1_samples > 0) {
    const auto m1c = estimate_m1(p, ball_samples(p.u0(), p.radius(), opts.m1_samples, opts.seed));
    s.m1 = m1c.at("m1");
    s.certificates.push_back(m1c);
    auto trust = check_trust_condition(p, s.m1);
    s.trust_passed = trust.passed;
    s.certificates.push_back(std::move(trust));
  }
  s.flow = integrate(p, cfg);
  s.v = s.flow.u_final;
  s.residual = norm(full_residual(p, s.v));
  return s;
}

struct EpsSchedule {
  double eps0 = 1.0;
  double ratio = 0.5;
  std::size_t count = 20;
  double floor = 1e-8;

  void validate() const {
    if (!(floor > 0.0) || !(eps0 > floor)) throw InvalidArgument("EpsSchedule: need eps0 > floor > 0");
    if (!(ratio > 0.0 && ratio < 1.0)) throw InvalidArgument("EpsSchedule: ratio must lie in (0, 1)");
    if (count == 0) throw InvalidArgument("EpsSchedule: count must be positive");
  }

  /// eps0 ratio^k for k < count. A value that would fall below the floor (or
  /// lands on it up to rounding) is replaced by the floor and ends the schedule.
  std::vector<double> values() const {
    validate();
    std::vector<double> out;
    double e = eps0;
    for (std::size_t k = 0; k < count; ++k, e *= ratio) {
      if (e <= floor * (1.0 + 1e-9)) {
        out.push_back(floor);
        break;
      }
      out.push_back(e);
    }
    return out;
  }

  /// True when the floor cut the geometric sequence short.
  bool truncated() const {
    const auto v = values();
    return v.size() < count || (v.back() == floor && eps0 * std::pow(ratio, static_cast<double>(count - 1)) < floor);
  }
};

struct ContinuationRecord {
  double eps = 0.0;
  Vector v;
  double norm_v = 0.0;
  double residual_full = 0.0;  // ||L v + g(v)||
  double residual_eps = 0.0;   // ||L v + eps v + g(v)||
  FlowStatus inner_status = FlowStatus::TMaxReached;
  std::size_t inner_steps = 0;
  double m1 = std::numeric_limits<double>::quiet_NaN();
  bool trust_passed = false;
  double increment = std::numeric_limits<double>::quiet_NaN();  // ||v_k - v_{k-1}||
};

struct ContinuationResult {
  std::vector<ContinuationRecord> records;
  Vector v_limit;
  std::optional<Vector> v_extrapolated;
  bool norms_monotone_ok = false;
  std::vector<double> cauchy_rate;
  std::vector<Certificate> certificates;
  bool schedule_truncated = false;  // eps-floor cut the schedule
  bool condition_limited = false;   // the condition guard dropped the smallest eps values
  std::string note;
};

/// Inner solve failure during continuation; carries the records completed so far.
class ContinuationFailed : public InnerSolveFailed {
public:
  ContinuationFailed(const std::string& what, std::size_t step, ContinuationResult partial)
    : InnerSolveFailed(what, step), partial_(std::move(partial)) {}

  const ContinuationResult& partial() const noexcept { return partial_; }

private:
  ContinuationResult partial_;
};

struct ContinuationOptions {
  std::size_t m1_samples = 16;
  std::uint64_t seed = 42;
  std::size_t monotone_samples = 32;
  double max_condition = 1e12;
};

namespace detail {

// Level below which the preconditioned residual is dominated by rounding in
// the solve with L + eps I.
inline double attainable_residual(double condition, const Vector& u) {
  return 10.0 * std::numeric_limits<double>::epsilon() * condition * (1.0 + norm(u));
}

inline void finish_continuation(ContinuationResult& r) {
  if (r.records.empty()) return;
  const auto& last = r.records.back();
  r.v_limit = last.v;
  double max_norm = 0.0;
  for (const auto& rec : r.records) max_norm = std::max(max_norm, rec.norm_v);
  r.norms_monotone_ok = max_norm <= last.norm_v + 1e-6 * (1.0 + last.norm_v);
  r.cauchy_rate.clear();
  for (std::size_t k = 1; k < r.records.size(); ++k) r.cauchy_rate.push_back(r.records[k].increment);
  if (r.records.size() >= 2) {
    // v_eps ~ v + eps a: eliminate the linear term from the last two iterates.
    const auto& prev = r.records[r.records.size() - 2];
    const double d = prev.eps - last.eps;
    Vector x = last.v;
    x *= prev.eps / d;
    x.axpy(-last.eps / d, prev.v);
    r.v_extrapolated = std::move(x);
  }
}

} // namespace detail

/// eps-continuation: solves L v + eps_k v + g(v) = 0 along the schedule, each
/// inner flow warm-started from the previous iterate. Requires a self-adjoint
/// PSD L (NonPsdOperator otherwise) and a passing monotonicity certificate for
/// g on the ball around pbase.u0() (NotMonotone otherwise). Values of eps for
/// which cond(L + eps I) exceeds opts.max_condition are dropped.
inline ContinuationResult solve_continuation(const DsmProblem& pbase, const EpsSchedule& sched = {},
                                             const FlowConfig& cfg = {}, const ContinuationOptions& opts = {}) {
  cfg.validate();
  ContinuationResult r;

  const Matrix& lm = pbase.L().matrix();
  if (!numerically_symmetric(lm)) throw NonPsdOperator("solve_continuation: L is not self-adjoint");
  const auto eig = symmetric_eigen_unchecked(lm);
  const double lnorm = std::max(std::abs(eig.min()), std::abs(eig.max()));
  if (eig.min() < -tolerances::psd * lnorm)
    throw NonPsdOperator("solve_continuation: L has eigenvalue " + std::to_string(eig.min()) + " < 0");
  Certificate psd{CertificateKind::ResolventBound, "L"};
  psd.passed = true;
  psd.quantities["lambda_min"] = eig.min();
  psd.quantities["lambda_max"] = eig.max();
  psd.note = "self-adjoint PSD";
  r.certificates.push_back(psd);

  auto mono = monotonicity_certificate(pbase.g(), ball_samples(pbase.u0(), pbase.radius(), opts.monotone_samples,
                                                               opts.seed));
  r.certificates.push_back(mono);
  if (!mono.passed) throw NotMonotone("solve_continuation: monotonicity certificate of g failed");

  const auto eps_values = sched.values();
  r.schedule_truncated = sched.truncated();
  const double lmin = std::max(eig.min(), 0.0);
  const double lmax = std::max(eig.max(), 0.0);

  Vector warm = pbase.u0();
  for (std::size_t k = 0; k < eps_values.size(); ++k) {
    const double eps = eps_values[k];
    const double cond = (lmax + eps) / (lmin + eps);
    if (cond > opts.max_condition) {
      r.condition_limited = true;
      r.note = "condition guard stopped the schedule at eps = " + std::to_string(eps);
      break;
    }
    const DsmProblem pk = pbase.with_epsilon(eps).with_start(warm);

    ContinuationRecord rec;
    rec.eps = eps;
    try {
      const auto m1c = estimate_m1(pk, ball_samples(pk.u0(), pk.radius(), opts.m1_samples, opts.seed + k));
      rec.m1 = m1c.at("m1");
      rec.trust_passed = check_trust_condition(pk, rec.m1).passed;
      const auto flow = integrate(pk, cfg);
      rec.inner_status = flow.status;
      rec.inner_steps = flow.accepted_steps;
      // A flow that stalls at the rounding level of the solve with L + eps I
      // has converged as far as double precision allows.
      const bool at_floor = flow.status == FlowStatus::TMaxReached &&
                            flow.p_final() <= detail::attainable_residual(cond, flow.u_final);
      if (flow.status != FlowStatus::ResidualConverged && !at_floor) {
        detail::finish_continuation(r);
        throw ContinuationFailed("solve_continuation: inner flow at eps = " + std::to_string(eps) + " ended with " +
                                     to_string(flow.status),
                                 k, r);
      }
      rec.v = flow.u_final;
    } catch (const ContinuationFailed&) {
      throw;
    } catch (const Error& e) {
      detail::finish_continuation(r);
      throw ContinuationFailed(std::string("solve_continuation: inner solve at eps = ") + std::to_string(eps) +
                                   " failed: " + e.what(),
                               k, r);
    }
    rec.norm_v = norm(rec.v);
    rec.residual_full = norm(full_residual(pbase.with_epsilon(0.0), rec.v));
    rec.residual_eps = norm(full_residual(pk, rec.v));
    if (!r.records.empty()) rec.increment = distance(rec.v, r.records.back().v);
    warm = rec.v;
    r.records.push_back(std::move(rec));
  }
  if (r.records.empty()) throw InnerSolveFailed("solve_continuation: no eps value passed the condition guard", 0);
  detail::finish_continuation(r);
  return r;
}

struct MinimalNormReport {
  bool has_oracle = false;
  bool norm_bound_ok = true;            // every ||v_eps|| <= ||oracle|| + 1e-8
  double max_norm_excess = -std::numeric_limits<double>::infinity();
  double limit_error = std::numeric_limits<double>::quiet_NaN();  // ||v_limit - oracle||
  std::vector<double> errors;           // ||v_eps_k - oracle||
  double error_rate = std::numeric_limits<double>::quiet_NaN();   // slope of log error vs log eps
  std::vector<double> increments;
};

inline MinimalNormReport minimal_norm_diagnostics(const ContinuationResult& r,
                                                  const std::optional<Vector>& oracle_v = std::nullopt) {
  if (r.records.empty()) throw InvalidArgument("minimal_norm_diagnostics: no records");
  MinimalNormReport rep;
  rep.increments = r.cauchy_rate;
  if (!oracle_v) return rep;
  rep.has_oracle = true;
  const double bound = norm(*oracle_v);
  for (const auto& rec : r.records) {
    rep.max_norm_excess = std::max(rep.max_norm_excess, rec.norm_v - bound);
    if (rec.norm_v > bound + 1e-8) rep.norm_bound_ok = false;
    rep.errors.push_back(distance(rec.v, *oracle_v));
  }
  rep.limit_error = distance(r.v_limit, *oracle_v);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t m = 0;
  for (std::size_t k = 0; k < r.records.size(); ++k) {
    if (!(rep.errors[k] > 0.0)) continue;
    const double x = std::log(r.records[k].eps), y = std::log(rep.errors[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  const double denom = static_cast<double>(m) * sxx - sx * sx;
  if (m >= 2 && denom > 0.0) rep.error_rate = (static_cast<double>(m) * sxy - sx * sy) / denom;
  return rep;
}

struct NoisyStop {
  double t_delta = 0.0;
  Vector u;
  double residual = 0.0;  // ||F(u(t_delta))||
  std::size_t bisections = 0;
};

/// Discrepancy stopping: the first t with ||F(u(t))|| <= C delta. The
/// crossing is located on the recorded trajectory and then refined by
/// bisection, re-integrating from the last recorded point above the level.
/// Throws TMaxReached when the level is not met within cfg.t_max.
inline NoisyStop stop_time_noisy(const DsmProblem& p, double delta, const FlowConfig& cfg = {}, double C = 1.5) {
  if (!(delta > 0.0)) throw InvalidArgument("stop_time_noisy: delta must be positive");
  if (!(C > 1.0)) throw InvalidArgument("stop_time_noisy: C must exceed 1");
  const double level = C * delta;
  NoisyStop out;
  const double f0 = norm(full_residual(p, p.u0()));
  if (f0 <= level) {
    out.u = p.u0();
    out.residual = f0;
    return out;
  }
  FlowConfig run = cfg;
  run.p_stop = std::numeric_limits<double>::min();
  run.p_floor = 0.0;
  const auto flow = integrate(p, run);
  std::size_t hit = 0;
  for (std::size_t i = 1; i < flow.trajectory.size(); ++i)
    if (flow.trajectory[i].residual_F <= level) {
      hit = i;
      break;
    }
  if (hit == 0)
    throw TMaxReached("stop_time_noisy: ||F(u(t))|| stayed above " + std::to_string(level) + " up to t = " +
                      std::to_string(flow.t_final()));

  const auto& base = flow.trajectory[hit - 1];
  const DsmProblem from = p.with_start(base.u);
  auto advance = [&](double tau) {
    FlowConfig seg = run;
    seg.t_max = tau;
    seg.sample_stride = tau;
    seg.h_max = std::min(tau, cfg.effective_h_max());
    return integrate(from, seg).trajectory.back();
  };
  // Bisection on the residual, which is decreasing in t along the flow.
  double lo = 0.0, hi = flow.trajectory[hit].t - base.t;
  TrajectoryPoint best = flow.trajectory[hit];
  for (int it = 0; it < 60; ++it) {
    if (best.residual_F >= level * (1.0 - 1e-7)) break;
    const double mid = 0.5 * (lo + hi);
    const auto pt = advance(mid);
    ++out.bisections;
    if (pt.residual_F <= level) {
      hi = mid;
      best = pt;
      best.t = base.t + mid;
    } else {
      lo = mid;
    }
    if (hi - lo <= 1e-13 * std::max(1.0, base.t)) break;
  }
  out.t_delta = best.t;
  out.u = best.u;
  out.residual = best.residual_F;
  return out;
}

/// CSV with header `eps,norm_v,residual_full,increment,inner_steps`, 17 significant digits.
inline void write_continuation_csv(std::ostream& out, const ContinuationResult& r) {
  out << "eps,norm_v,residual_full,increment,inner_steps\n" << std::setprecision(17);
  for (const auto& rec : r.records) {
    out << rec.eps << ',' << rec.norm_v << ',' << rec.residual_full << ',';
    if (std::isfinite(rec.increment)) out << rec.increment;
    out << ',' << rec.inner_steps << '\n';
  }
}

namespace detail {
inline nlohmann::json finite_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(); }
} // namespace detail

inline nlohmann::json to_json(const ContinuationResult& r, const std::optional<MinimalNormReport>& diag = std::nullopt) {
  nlohmann::json j;
  j["v_limit"] = r.v_limit.values();
  j["v_extrapolated"] = r.v_extrapolated ? nlohmann::json(r.v_extrapolated->values()) : nlohmann::json();
  j["norms_monotone_ok"] = r.norms_monotone_ok;
  j["schedule_truncated"] = r.schedule_truncated;
  j["condition_limited"] = r.condition_limited;
  j["note"] = r.note;
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& rec : r.records)
    recs.push_back({{"eps", rec.eps},
                    {"norm_v", rec.norm_v},
                    {"residual_full", rec.residual_full},
                    {"residual_eps", rec.residual_eps},
                    {"inner_status", to_string(rec.inner_status)},
                    {"inner_steps", rec.inner_steps},
                    {"m1", detail::finite_or_null(rec.m1)},
                    {"trust_passed", rec.trust_passed},
                    {"increment", detail::finite_or_null(rec.increment)}});
  j["records"] = recs;
  nlohmann::json certs = nlohmann::json::array();
  for (const auto& c : r.certificates) certs.push_back(to_json(c));
  j["certificates"] = certs;
  if (diag) {
    nlohmann::json d;
    d["has_oracle"] = diag->has_oracle;
    d["increments"] = diag->increments;
    if (diag->has_oracle) {
      d["norm_bound_ok"] = diag->norm_bound_ok;
      d["max_norm_excess"] = diag->max_norm_excess;
      d["limit_error"] = diag->limit_error;
      d["errors"] = diag->errors;
      d["error_rate"] = detail::finite_or_null(diag->error_rate);
    }
    j["minimal_norm"] = d;
  }
  return j;
}

} // namespace dsm
