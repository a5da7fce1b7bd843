#pragma once

// Integration of the DSM Cauchy problem
//
//   du/dt = phi(u) = -[I + (L + eps)^-1 g'(u)]^-1 [u + (L + eps)^-1 g(u)],  u(0) = u0,
//
// along which p(t) = ||u + (L + eps)^-1 g(u)|| obeys p(t) = p(0) exp(-t)
// exactly. Any deviation from that law observed on the computed trajectory is
// integrator error, which makes the law the central self-check of this module.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "dsm/errors.hpp"
#include "dsm/linalg.hpp"
#include "dsm/model.hpp"

namespace dsm {

struct FlowConfig {
  double t_max = 30.0;
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double p_stop = 1e-10;        // relative to p(0)
  double p_floor = 1e-14;       // absolute floor on the stopping level
  std::size_t max_steps = 1'000'000;
  double sample_stride = 0.1;   // trajectory is recorded at multiples of this time
  double h_max = 0.0;           // 0 means "equal to sample_stride"
  double h_init = 0.0;          // 0 means automatic
  bool stop_on_leave_ball = false;

  void validate() const {
    if (!(t_max > 0.0)) throw InvalidArgument("FlowConfig: t_max must be positive");
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw InvalidArgument("FlowConfig: tolerances must be positive");
    if (!(p_stop > 0.0) || !(p_floor >= 0.0)) throw InvalidArgument("FlowConfig: bad stopping thresholds");
    if (!(sample_stride > 0.0)) throw InvalidArgument("FlowConfig: sample_stride must be positive");
    if (h_max < 0.0 || h_init < 0.0) throw InvalidArgument("FlowConfig: step bounds must be nonnegative");
    if (max_steps == 0) throw InvalidArgument("FlowConfig: max_steps must be positive");
  }
  double effective_h_max() const { return h_max > 0.0 ? h_max : sample_stride; }
};

struct TrajectoryPoint {
  double t = 0.0;
  Vector u;
  double p = 0.0;           // ||u + (L + eps)^-1 g(u)||
  double residual_F = 0.0;  // ||L u + eps u + g(u)||
  double step = 0.0;        // accepted step that produced this point
};

enum class FlowStatus { ResidualConverged, TMaxReached, StepFailure, LeftBall };

inline const char* to_string(FlowStatus s) {
  switch (s) {
    case FlowStatus::ResidualConverged: return "ResidualConverged";
    case FlowStatus::TMaxReached: return "TMaxReached";
    case FlowStatus::StepFailure: return "StepFailure";
    case FlowStatus::LeftBall: return "LeftBall";
  }
  return "?";
}

struct FlowResult {
  std::vector<TrajectoryPoint> trajectory;
  Vector u_final;
  FlowStatus status = FlowStatus::TMaxReached;
  double p0 = 0.0;
  double decay_deviation = 0.0;  // max_t |p(t) - p0 exp(-t)| / p0 over recorded points
  bool left_ball = false;        // ||u(t) - u0|| > R at some accepted step
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
  std::size_t rhs_evaluations = 0;

  double t_final() const { return trajectory.empty() ? 0.0 : trajectory.back().t; }
  double p_final() const { return trajectory.empty() ? 0.0 : trajectory.back().p; }
};

namespace detail {

struct FlowEval {
  Vector f;    // preconditioned residual
  Vector phi;  // velocity
};

inline FlowEval evaluate_flow(const DsmProblem& p, const Vector& u) {
  FlowEval e;
  e.f = preconditioned_residual(p, u);
  if (std::all_of(e.f.begin(), e.f.end(), [](double x) { return x == 0.0; })) {
    e.phi = Vector(u.size());
    return e;
  }
  const Matrix j = linearized_operator(p, u);
  try {
    e.phi = LuFactorization(j, tolerances::singular_linearization).solve(e.f);
  } catch (const SingularOperator& err) {
    throw SingularLinearization(std::string("DSM velocity undefined: ") + err.what());
  }
  e.phi *= -1.0;
  return e;
}

} // namespace detail

/// Newton-type DSM velocity -[I + (L+eps)^-1 g'(u)]^-1 [u + (L+eps)^-1 g(u)],
/// computed by one LU solve with the linearization.
inline Vector phi(const DsmProblem& p, const Vector& u) { return detail::evaluate_flow(p, u).phi; }

/// Integrates the DSM flow from p.u0() with an embedded Dormand-Prince 5(4)
/// pair under PI step control. Stops when p(t) <= max(p_stop p(0), p_floor)
/// or at t_max. The trajectory is recorded at every multiple of
/// cfg.sample_stride (steps are clipped to land on them) plus the final point.
inline FlowResult integrate(const DsmProblem& p, const FlowConfig& cfg = {}) {
  cfg.validate();
  // Dormand-Prince tableau.
  constexpr double a21 = 1.0 / 5.0;
  constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
  constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
  constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
  constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                   a65 = -5103.0 / 18656.0;
  constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0, b5 = -2187.0 / 6784.0,
                   b6 = 11.0 / 84.0;
  constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0, e5 = -17253.0 / 339200.0,
                   e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
  // PI controller constants.
  constexpr double beta = 0.04;
  constexpr double expo1 = 0.2 - beta * 0.75;
  constexpr double safety = 0.9;
  constexpr double fac_max = 5.0;   // growth at most x5
  constexpr double fac_min = 0.1;   // shrink at most x10

  const std::size_t n = p.dim();
  const double h_max = cfg.effective_h_max();
  FlowResult r;

  Vector u = p.u0();
  auto ev = detail::evaluate_flow(p, u);
  ++r.rhs_evaluations;
  r.p0 = norm(ev.f);
  const double stop_level = std::max(cfg.p_stop * r.p0, cfg.p_floor);

  auto record = [&](double t, const Vector& f, double step) {
    r.trajectory.push_back({t, u, norm(f), norm(full_residual(p, u)), step});
  };
  record(0.0, ev.f, 0.0);

  if (r.p0 <= stop_level) {
    r.status = FlowStatus::ResidualConverged;
    r.u_final = u;
    return r;
  }

  Vector k1 = ev.phi;
  double t = 0.0;
  double h = cfg.h_init > 0.0 ? cfg.h_init : std::min(h_max, 0.1 * std::pow(cfg.rel_tol, 0.2));
  h = std::min(h, h_max);
  double fac_old = 1e-4;
  std::size_t next_sample = 1;
  r.status = FlowStatus::TMaxReached;

  auto stage = [&](const Vector& base, double hh, std::initializer_list<std::pair<double, const Vector*>> terms) {
    Vector y = base;
    for (const auto& [coef, k] : terms)
      if (coef != 0.0) y.axpy(hh * coef, *k);
    return y;
  };

  while (true) {
    if (r.accepted_steps + r.rejected_steps >= cfg.max_steps) {
      r.status = FlowStatus::StepFailure;
      break;
    }
    const double t_sample = std::min(static_cast<double>(next_sample) * cfg.sample_stride, cfg.t_max);
    // A step that would leave a sliver before the sample time is stretched onto it.
    const bool clipped = t + 1.01 * h >= t_sample;
    const double hs = clipped ? t_sample - t : h;
    if (hs < 1e-14 * std::max(1.0, t)) {
      r.status = FlowStatus::StepFailure;
      break;
    }

    const Vector k2 = phi(p, stage(u, hs, {{a21, &k1}}));
    const Vector k3 = phi(p, stage(u, hs, {{a31, &k1}, {a32, &k2}}));
    const Vector k4 = phi(p, stage(u, hs, {{a41, &k1}, {a42, &k2}, {a43, &k3}}));
    const Vector k5 = phi(p, stage(u, hs, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
    const Vector k6 = phi(p, stage(u, hs, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));
    Vector u_new = stage(u, hs, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
    auto ev_new = detail::evaluate_flow(p, u_new);
    const Vector& k7 = ev_new.phi;
    r.rhs_evaluations += 6;

    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double ei = hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      const double sc = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(u[i]), std::abs(u_new[i]));
      err += (ei / sc) * (ei / sc);
    }
    err = n == 0 ? 0.0 : std::sqrt(err / static_cast<double>(n));
    if (!std::isfinite(err)) err = 1e10;

    const double fac11 = std::pow(std::max(err, 1e-300), expo1);
    if (err <= 1.0) {
      double fac = fac11 / std::pow(fac_old, beta);
      fac = std::clamp(fac / safety, 1.0 / fac_max, 1.0 / fac_min);
      const double h_new = std::min(hs / fac, h_max);
      fac_old = std::max(err, 1e-4);
      ++r.accepted_steps;

      t = clipped ? t_sample : t + hs;
      u = std::move(u_new);
      k1 = ev_new.phi;
      h = clipped ? std::max(h, h_new) : h_new;
      h = std::min(h, h_max);

      const double pt = norm(ev_new.f);
      if (distance(u, p.u0()) > p.radius()) r.left_ball = true;
      const bool converged = pt <= stop_level;
      const bool at_end = t >= cfg.t_max;
      const bool ball_stop = r.left_ball && cfg.stop_on_leave_ball;
      if (clipped || converged || at_end || ball_stop) {
        record(t, ev_new.f, hs);
        if (clipped && t_sample < cfg.t_max) ++next_sample;
      }
      if (converged) {
        r.status = FlowStatus::ResidualConverged;
        break;
      }
      if (ball_stop) {
        r.status = FlowStatus::LeftBall;
        break;
      }
      if (at_end) {
        r.status = FlowStatus::TMaxReached;
        break;
      }
    } else {
      ++r.rejected_steps;
      h = hs / std::min(fac_max, fac11 / safety);
    }
  }

  r.u_final = u;
  if (r.p0 > 0.0)
    for (const auto& pt : r.trajectory)
      r.decay_deviation = std::max(r.decay_deviation, std::abs(pt.p - r.p0 * std::exp(-pt.t)) / r.p0);
  return r;
}

struct DecayReport {
  double p0 = 0.0;
  double decay_deviation = 0.0;
  double fitted_rate = 0.0;  // least-squares slope of ln p(t); exactly -1 for the continuous flow
};

inline DecayReport decay_report(const FlowResult& r) {
  if (r.trajectory.empty()) throw InvalidArgument("decay_report: empty trajectory");
  DecayReport d{r.p0, r.decay_deviation, 0.0};
  const double cutoff = 100.0 * std::numeric_limits<double>::epsilon() * r.p0;
  double st = 0, sy = 0, stt = 0, sty = 0;
  std::size_t m = 0;
  for (const auto& pt : r.trajectory) {
    if (!(pt.p > cutoff) || pt.p <= 0.0) continue;
    const double y = std::log(pt.p);
    st += pt.t;
    sy += y;
    stt += pt.t * pt.t;
    sty += pt.t * y;
    ++m;
  }
  if (m >= 2) {
    const double denom = static_cast<double>(m) * stt - st * st;
    if (denom > 0.0) d.fitted_rate = (static_cast<double>(m) * sty - st * sy) / denom;
  }
  return d;
}

/// Checks ||u(t) - u_final|| <= m1 p0 exp(-t) + 1e-7 p0 and
/// ||u(t) - u0|| <= m1 p0 + 1e-7 p0 at every recorded point, u_final standing
/// in for u(infinity).
inline bool error_bound_check(const FlowResult& r, double m1, double slack = 1e-7) {
  if (r.status != FlowStatus::ResidualConverged)
    throw InvalidArgument("error_bound_check: flow did not converge");
  if (r.trajectory.empty()) return true;
  const Vector& u0 = r.trajectory.front().u;
  const double tol = slack * r.p0;
  for (const auto& pt : r.trajectory) {
    if (distance(pt.u, r.u_final) > m1 * r.p0 * std::exp(-pt.t) + tol) return false;
    if (distance(pt.u, u0) > m1 * r.p0 + tol) return false;
  }
  return true;
}

/// CSV with header `t,p,residual_F,u_norm,step`, 17 significant digits.
inline void write_trajectory_csv(std::ostream& out, const FlowResult& r) {
  out << "t,p,residual_F,u_norm,step\n" << std::setprecision(17);
  for (const auto& pt : r.trajectory)
    out << pt.t << ',' << pt.p << ',' << pt.residual_F << ',' << norm(pt.u) << ',' << pt.step << '\n';
}

} // namespace dsm
