#pragma once

// The problem F(v) = L v + eps v + g(v) = 0 on a ball B(u0, R), and the
// certificates that check the hypotheses the DSM convergence results rest on.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dsm/errors.hpp"
#include "dsm/linalg.hpp"

namespace dsm {

namespace tolerances {
inline constexpr double singular_linearization = 1e-12;
inline constexpr double monotone = 1e-10;
inline constexpr double resolvent = 1e-9;
inline constexpr double fd_step = 1e-5;
} // namespace tolerances

// ---------------------------------------------------------------------------
// NonlinearMap
// ---------------------------------------------------------------------------

/// Optional a-priori bounds on sup ||g^(j)|| over the ball, j = 0, 1, 2.
/// Stored for reporting; no solver path consumes them.
struct NonlinearBounds {
  std::optional<double> m0;
  std::optional<double> m1;
  std::optional<double> m2;
};

/// g : R^n -> R^n with its Jacobian. Evaluation must be pure.
///
/// Built-in maps carry a JSON description (`spec()`) of the form
/// {"builtin": name, "params": {...}} so that problems can be saved and
/// reloaded; user-defined maps have a null spec and cannot be serialized.
class NonlinearMap {
public:
  using EvalFn = std::function<Vector(const Vector&)>;
  using JacobianFn = std::function<Matrix(const Vector&)>;

  NonlinearMap() = default;
  NonlinearMap(std::size_t dim, EvalFn eval, JacobianFn jacobian, nlohmann::json spec = nullptr,
               bool monotone_claimed = false)
    : dim_(dim), eval_(std::move(eval)), jacobian_(std::move(jacobian)), spec_(std::move(spec)),
      monotone_claimed_(monotone_claimed) {}

  std::size_t dim() const noexcept { return dim_; }

  Vector operator()(const Vector& u) const {
    check_dim(u);
    return eval_(u);
  }
  Matrix jacobian(const Vector& u) const {
    check_dim(u);
    return jacobian_(u);
  }

  const nlohmann::json& spec() const noexcept { return spec_; }
  std::string name() const {
    return spec_.is_object() && spec_.contains("builtin") ? spec_["builtin"].get<std::string>() : "custom";
  }

  bool monotone_claimed() const noexcept { return monotone_claimed_; }
  const NonlinearBounds& bounds() const noexcept { return bounds_; }
  NonlinearMap& set_bounds(NonlinearBounds b) {
    bounds_ = b;
    return *this;
  }

private:
  void check_dim(const Vector& u) const {
    if (u.size() != dim_)
      throw DimensionMismatch("nonlinear map of dimension " + std::to_string(dim_) + " applied to vector of " +
                              std::to_string(u.size()));
  }

  std::size_t dim_ = 0;
  EvalFn eval_;
  JacobianFn jacobian_;
  nlohmann::json spec_;
  bool monotone_claimed_ = false;
  NonlinearBounds bounds_;
};

namespace nonlinear {

inline nlohmann::json to_json(const Vector& v) { return v.values(); }
inline nlohmann::json to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) rows.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
  return rows;
}

/// g(u) = c
inline NonlinearMap constant(Vector c) {
  const std::size_t n = c.size();
  nlohmann::json spec = {{"builtin", "constant"}, {"params", {{"c", to_json(c)}}}};
  return NonlinearMap(
    n, [c](const Vector&) { return c; }, [n](const Vector&) { return Matrix(n, n); }, std::move(spec), true);
}

inline NonlinearMap zero(std::size_t n) { return constant(Vector(n)); }

/// g(u)_i = scale * u_i^3 + c_i. Monotone for scale >= 0.
inline NonlinearMap cubic(double scale, Vector c) {
  const std::size_t n = c.size();
  nlohmann::json spec = {{"builtin", "cubic"}, {"params", {{"scale", scale}, {"c", to_json(c)}}}};
  return NonlinearMap(
    n,
    [scale, c](const Vector& u) {
      Vector r = c;
      for (std::size_t i = 0; i < u.size(); ++i) r[i] += scale * u[i] * u[i] * u[i];
      return r;
    },
    [scale, n](const Vector& u) {
      Matrix j(n, n);
      for (std::size_t i = 0; i < n; ++i) j(i, i) = 3.0 * scale * u[i] * u[i];
      return j;
    },
    std::move(spec), scale >= 0.0);
}

/// g(u) = B u + c. Monotone iff the symmetric part of B is PSD; the claim is
/// left to the monotonicity certificate.
inline NonlinearMap affine(Matrix b, Vector c) {
  if (!b.square() || b.rows() != c.size()) throw DimensionMismatch("affine map: B and c disagree");
  const std::size_t n = c.size();
  nlohmann::json spec = {{"builtin", "affine"}, {"params", {{"B", to_json(b)}, {"c", to_json(c)}}}};
  return NonlinearMap(
    n, [b, c](const Vector& u) { return b * u + c; }, [b](const Vector&) { return b; }, std::move(spec), false);
}

/// g(u) = c + scale * Q (Q^T u)^3 (cube taken entrywise), with Q an n x r
/// basis. Monotone for scale >= 0 since g'(u) = Q diag(3 scale (Q^T u)^2) Q^T.
inline NonlinearMap range_cubic(Matrix basis, double scale, Vector c) {
  if (basis.rows() != c.size()) throw DimensionMismatch("range_cubic: basis and c disagree");
  const std::size_t n = c.size();
  const std::size_t r = basis.cols();
  nlohmann::json spec = {{"builtin", "range_cubic"},
                         {"params", {{"basis", to_json(basis)}, {"scale", scale}, {"c", to_json(c)}}}};
  const Matrix qt = basis.transpose();
  return NonlinearMap(
    n,
    [basis, qt, scale, c](const Vector& u) {
      Vector a = qt * u;
      for (auto& x : a) x = x * x * x;
      Vector out = basis * a;
      out *= scale;
      return out + c;
    },
    [basis, qt, scale, n, r](const Vector& u) {
      const Vector a = qt * u;
      Matrix scaled = basis;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < r; ++k) scaled(i, k) *= 3.0 * scale * a[k] * a[k];
      return scaled * qt;
    },
    std::move(spec), scale >= 0.0);
}

} // namespace nonlinear

// ---------------------------------------------------------------------------
// DsmProblem
// ---------------------------------------------------------------------------

/// F(v) = L v + eps v + g(v) = 0 together with the start u0 and ball radius R.
///
/// L + eps I is factorized once at construction. A singular L with eps = 0 is
/// representable (the full residual and the membership probe need it); the
/// operations that apply (L + eps I)^-1 then throw SingularOperator.
class DsmProblem {
public:
  DsmProblem(DenseOperator l, NonlinearMap g, Vector u0, double radius, double epsilon = 0.0,
             std::string name = "problem")
    : l_(std::move(l)), g_(std::move(g)), u0_(std::move(u0)), radius_(radius), epsilon_(epsilon),
      name_(std::move(name)) {
    if (l_.dim() != g_.dim() || l_.dim() != u0_.size())
      throw DimensionMismatch("DsmProblem: dimensions of L (" + std::to_string(l_.dim()) + "), g (" +
                              std::to_string(g_.dim()) + ") and u0 (" + std::to_string(u0_.size()) + ") disagree");
    if (!(radius_ > 0.0)) throw InvalidArgument("DsmProblem: ball radius must be positive");
    if (!(epsilon_ >= 0.0) || !std::isfinite(epsilon_)) throw InvalidArgument("DsmProblem: epsilon must be >= 0");
    if (!u0_.all_finite()) throw InvalidArgument("DsmProblem: u0 has non-finite entries");
    try {
      shifted_lu_ = std::make_shared<const LuFactorization>(l_.matrix().shifted(epsilon_));
    } catch (const SingularOperator& e) {
      singular_message_ = e.what();
      singular_condition_ = e.condition_estimate();
    }
  }

  const DenseOperator& L() const noexcept { return l_; }
  const NonlinearMap& g() const noexcept { return g_; }
  const Vector& u0() const noexcept { return u0_; }
  double radius() const noexcept { return radius_; }
  double epsilon() const noexcept { return epsilon_; }
  std::size_t dim() const noexcept { return l_.dim(); }
  const std::string& name() const noexcept { return name_; }

  bool shifted_invertible() const noexcept { return shifted_lu_ != nullptr; }

  const LuFactorization& shifted_lu() const {
    if (!shifted_lu_)
      throw SingularOperator("L + eps I (eps = " + std::to_string(epsilon_) + ") is singular: " + singular_message_,
                             singular_condition_);
    return *shifted_lu_;
  }

  /// (L + eps I)^-1 b
  Vector solve_shifted(const Vector& b) const { return shifted_lu().solve(b); }

  DsmProblem with_epsilon(double eps) const { return {l_, g_, u0_, radius_, eps, name_}; }
  DsmProblem with_start(Vector u0) const { return {l_, g_, std::move(u0), radius_, epsilon_, name_}; }
  DsmProblem with_radius(double r) const { return {l_, g_, u0_, r, epsilon_, name_}; }
  DsmProblem with_name(std::string n) const { return {l_, g_, u0_, radius_, epsilon_, std::move(n)}; }

private:
  DenseOperator l_;
  NonlinearMap g_;
  Vector u0_;
  double radius_;
  double epsilon_;
  std::string name_;
  std::shared_ptr<const LuFactorization> shifted_lu_;
  std::string singular_message_;
  double singular_condition_ = std::numeric_limits<double>::infinity();
};

/// L u + eps u + g(u)
inline Vector full_residual(const DsmProblem& p, const Vector& u) {
  Vector r = p.L().apply(u);
  r.axpy(p.epsilon(), u);
  return r += p.g()(u);
}

/// f(u) = u + (L + eps I)^-1 g(u). Its norm is the quantity p(t) that decays
/// exactly like exp(-t) along the continuous flow.
inline Vector preconditioned_residual(const DsmProblem& p, const Vector& u) {
  return u + p.solve_shifted(p.g()(u));
}

/// I + (L + eps I)^-1 g'(u), the Jacobian of preconditioned_residual.
inline Matrix linearized_operator(const DsmProblem& p, const Vector& u) {
  Matrix j = p.shifted_lu().solve(p.g().jacobian(u));
  for (std::size_t i = 0; i < j.rows(); ++i) j(i, i) += 1.0;
  return j;
}

// ---------------------------------------------------------------------------
// Certificates
// ---------------------------------------------------------------------------

enum class CertificateKind { TrustCondition, ResolventBound, Sector, Monotone, Invertible };

inline const char* to_string(CertificateKind k) {
  switch (k) {
    case CertificateKind::TrustCondition: return "TrustCondition";
    case CertificateKind::ResolventBound: return "ResolventBound";
    case CertificateKind::Sector: return "Sector";
    case CertificateKind::Monotone: return "Monotone";
    case CertificateKind::Invertible: return "Invertible";
  }
  return "?";
}

/// Outcome of one hypothesis check. `passed` is exactly the kind-specific
/// inequality evaluated on `quantities`.
struct Certificate {
  CertificateKind kind;
  std::string subject;
  bool passed = false;
  std::map<std::string, double> quantities;
  std::string note;

  double at(const std::string& key) const {
    auto it = quantities.find(key);
    if (it == quantities.end()) throw InvalidArgument("certificate has no quantity '" + key + "'");
    return it->second;
  }
};

inline nlohmann::json to_json(const Certificate& c) {
  nlohmann::json q = nlohmann::json::object();
  for (const auto& [k, v] : c.quantities) {
    if (std::isfinite(v)) q[k] = v;
    else q[k] = v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
  }
  return {{"kind", to_string(c.kind)}, {"subject", c.subject}, {"passed", c.passed}, {"quantities", q},
          {"note", c.note}};
}

/// `count` points uniformly distributed in B(center, radius); the centre itself
/// is always the first sample.
inline std::vector<Vector> ball_samples(const Vector& center, double radius, std::size_t count,
                                        std::uint64_t seed = 42) {
  std::vector<Vector> out;
  if (count == 0) return out;
  out.push_back(center);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif;
  const std::size_t n = center.size();
  while (out.size() < count) {
    Vector d(n);
    for (auto& x : d) x = gauss(rng);
    const double len = norm(d);
    if (len == 0.0) continue;
    const double r = radius * std::pow(unif(rng), 1.0 / static_cast<double>(n));
    d *= r / len;
    out.push_back(center + d);
  }
  return out;
}

/// Bound m = ||(L + eps I)^-1|| = 1 / sigma_min(L + eps I).
inline Certificate check_invertible(const DsmProblem& p) {
  Certificate c{CertificateKind::Invertible, "shifted_operator"};
  const Matrix shifted = p.L().matrix().shifted(p.epsilon());
  const auto sv = singular_values(shifted);
  const double smin = sv.empty() ? 0.0 : sv.back();
  const double smax = sv.empty() ? 0.0 : sv.front();
  c.quantities["epsilon"] = p.epsilon();
  c.quantities["sigma_min"] = smin;
  c.quantities["sigma_max"] = smax;
  c.quantities["m"] = smin > 0.0 ? 1.0 / smin : std::numeric_limits<double>::infinity();
  c.quantities["condition"] = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  c.passed = smin > tolerances::singular_pivot * std::max(1.0, smax) && p.shifted_invertible();
  c.note = "bound on ||(L + eps I)^-1||";
  return c;
}

/// Monte Carlo estimate of m1 = sup ||[I + (L + eps I)^-1 g'(u)]^-1|| over the
/// given samples. This is a lower bound of the true supremum over the ball.
/// Throws SingularLinearization when some sigma_min is at or below `threshold`.
inline Certificate estimate_m1(const DsmProblem& p, const std::vector<Vector>& samples,
                               double threshold = tolerances::singular_linearization) {
  if (samples.empty()) throw InvalidArgument("estimate_m1: no samples");
  Certificate c{CertificateKind::Invertible, "linearization"};
  double m1 = 0.0;
  double smin_all = std::numeric_limits<double>::infinity();
  double max_offset = 0.0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const double sigma = smallest_singular_value(linearized_operator(p, samples[k]));
    if (!(sigma > threshold)) {
      std::ostringstream msg;
      msg << "linearization singular at sample " << k << ": sigma_min = " << sigma;
      throw SingularLinearization(msg.str());
    }
    smin_all = std::min(smin_all, sigma);
    m1 = std::max(m1, 1.0 / sigma);
    max_offset = std::max(max_offset, distance(samples[k], p.u0()));
  }
  c.passed = true;
  c.quantities["m1"] = m1;
  c.quantities["sigma_min"] = smin_all;
  c.quantities["samples"] = static_cast<double>(samples.size());
  c.quantities["max_sample_offset"] = max_offset;
  c.quantities["radius"] = p.radius();
  c.note = "Monte Carlo lower bound of the supremum over the ball";
  return c;
}

/// p0 * m1 <= R with p0 = ||u0 + (L + eps I)^-1 g(u0)||.
inline Certificate check_trust_condition(const DsmProblem& p, double m1) {
  if (!(m1 > 0.0)) throw InvalidArgument("check_trust_condition: m1 must be positive");
  Certificate c{CertificateKind::TrustCondition, "start"};
  const double p0 = norm(preconditioned_residual(p, p.u0()));
  c.quantities["p0"] = p0;
  c.quantities["m1"] = m1;
  c.quantities["R"] = p.radius();
  c.quantities["margin"] = p.radius() - p0 * m1;
  c.passed = p0 * m1 <= p.radius();
  return c;
}

/// Sector S = {z : 0 < |z| <= a, |arg z - pi| <= delta} of regular points.
struct SectorAssumption {
  double a = 0.5;
  double delta = std::numbers::pi / 6.0;
};

inline bool numerically_symmetric(const Matrix& m, double tol = tolerances::symmetry) {
  const double asym = m.max_asymmetry();
  return asym == 0.0 || asym <= tol * operator_norm(m);
}

/// Checks that the punctured sector S around the negative real axis contains
/// no spectrum of L. Self-adjoint L reduces to an eigenvalue test on [-a, 0);
/// otherwise sigma_min(L - z I) is sampled on a grid of log-spaced moduli in
/// [1e-3 a, a] times 9 angles in [pi - delta, pi + delta].
inline Certificate check_sector(const DenseOperator& l, double a, double delta, int grid_size = 64) {
  if (!(a > 0.0)) throw InvalidArgument("check_sector: a must be positive");
  if (!(delta > 0.0 && delta < std::numbers::pi / 2.0)) throw InvalidArgument("check_sector: delta not in (0, pi/2)");
  if (grid_size < 1) throw InvalidArgument("check_sector: grid_size must be positive");
  Certificate c{CertificateKind::Sector, "L"};
  c.quantities["a"] = a;
  c.quantities["delta"] = delta;
  const Matrix& m = l.matrix();
  const std::size_t n = m.rows();
  const double lnorm = operator_norm(m);

  if (numerically_symmetric(m)) {
    const auto eig = symmetric_eigen_unchecked(m);
    const double zero_tol = tolerances::psd * lnorm;
    double margin = std::numeric_limits<double>::infinity();
    bool inside = false;
    for (double lambda : eig.values) {
      double d;
      if (lambda >= -zero_tol) d = std::max(lambda, 0.0);
      else if (lambda < -a) d = -a - lambda;
      else {
        inside = true;
        d = -std::min(lambda + a, -lambda);
      }
      margin = std::min(margin, d);
    }
    c.passed = !inside;
    c.quantities["margin"] = margin;
    c.quantities["grid_points"] = 0.0;
    c.note = "self-adjoint: eigenvalue test on [-a, 0)";
    return c;
  }

  // sigma_min(L - zI) is 1-Lipschitz in z, so sigma_min above the radius of a
  // grid point's cell rules out spectrum anywhere in that cell.
  constexpr int angles = 9;
  const int moduli = (grid_size + angles - 1) / angles;
  const double half_angle = delta / (angles - 1);
  auto ring = [&](int im) {
    const double frac = moduli == 1 ? 1.0 : static_cast<double>(im) / (moduli - 1);
    return a * std::pow(10.0, -3.0 * (1.0 - frac));
  };
  double min_sigma = std::numeric_limits<double>::infinity();
  double margin = std::numeric_limits<double>::infinity();
  int points = 0;
  Matrix embed(2 * n, 2 * n);
  for (int im = 0; im < moduli; ++im) {
    const double r = ring(im);
    const double below = im == 0 ? r : 0.5 * (r - ring(im - 1));
    const double above = im + 1 == moduli ? 0.0 : 0.5 * (ring(im + 1) - r);
    const double cell = std::hypot(std::max(below, above), (r + above) * half_angle);
    for (int ia = 0; ia < angles; ++ia) {
      const double theta = std::numbers::pi - delta + 2.0 * delta * ia / (angles - 1);
      const double x = r * std::cos(theta);
      const double y = r * std::sin(theta);
      // real form of (L - x I) - i y I
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double b = m(i, j) - (i == j ? x : 0.0);
          embed(i, j) = b;
          embed(n + i, n + j) = b;
          embed(i, n + j) = (i == j) ? y : 0.0;
          embed(n + i, j) = (i == j) ? -y : 0.0;
        }
      const double sigma = smallest_singular_value(embed);
      min_sigma = std::min(min_sigma, sigma);
      margin = std::min(margin, sigma - cell);
      ++points;
    }
  }
  c.passed = margin > tolerances::singular_linearization * std::max(1.0, lnorm);
  c.quantities["margin"] = margin;
  c.quantities["min_sigma"] = min_sigma;
  c.quantities["grid_points"] = points;
  c.note = "general: sigma_min(L - z I) exceeds the cell radius at every sector grid point";
  return c;
}

/// ||(L + eps)^-1|| <= 1 / (eps sin(delta)) on every eps of the grid. For a
/// self-adjoint PSD L, sin(delta) = 1; otherwise a sector must be supplied and
/// verified first.
inline Certificate check_resolvent_bound(const DsmProblem& p, const std::vector<double>& eps_grid,
                                         std::optional<SectorAssumption> sector = std::nullopt,
                                         double tol = tolerances::resolvent) {
  const Matrix& m = p.L().matrix();
  double sin_delta = 1.0;
  std::string basis;
  bool psd = false;
  if (numerically_symmetric(m)) {
    const double lnorm = operator_norm(m);
    psd = symmetric_eigen_unchecked(m).min() >= -tolerances::psd * lnorm;
  }
  if (psd) {
    basis = "self-adjoint PSD, sin(delta) = 1";
  } else if (sector) {
    if (!check_sector(p.L(), sector->a, sector->delta).passed)
      throw NotApplicable("check_resolvent_bound: supplied sector contains spectrum of L");
    sin_delta = std::sin(sector->delta);
    basis = "verified sector";
  } else {
    throw NotApplicable("check_resolvent_bound: L is neither self-adjoint PSD nor given a verified sector");
  }

  Certificate c{CertificateKind::ResolventBound, "L"};
  c.passed = true;
  double min_margin = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < eps_grid.size(); ++k) {
    const double eps = eps_grid[k];
    if (!(eps > 0.0)) throw InvalidArgument("check_resolvent_bound: eps must be positive");
    const Matrix shifted = m.shifted(eps);
    const double smin = smallest_singular_value(shifted);
    const double resolvent = smin > 0.0 ? 1.0 / smin : std::numeric_limits<double>::infinity();
    const double bound = 1.0 / (eps * sin_delta);
    const std::string idx = std::to_string(k);
    c.quantities["eps_" + idx] = eps;
    c.quantities["norm_" + idx] = resolvent;
    c.quantities["bound_" + idx] = bound;
    min_margin = std::min(min_margin, bound - resolvent);
    // When sigma_min(L + eps) sits exactly at eps sin(delta) (singular L), the
    // computed value can undershoot by the SVD's backward error.
    const double rounding = 8.0 * static_cast<double>(m.rows()) * std::numeric_limits<double>::epsilon() *
                            operator_norm(shifted);
    if (!(resolvent <= bound + tol) && !(smin >= eps * sin_delta - rounding)) c.passed = false;
  }
  c.quantities["sin_delta"] = sin_delta;
  c.quantities["min_margin"] = min_margin;
  c.note = basis;
  return c;
}

/// Max over columns j of ||D_h g(u) e_j - g'(u) e_j|| / max(||g'(u) e_j||, 1),
/// with D_h the central difference of step h.
inline double fd_jacobian_check(const NonlinearMap& g, const Vector& u, double h = tolerances::fd_step) {
  if (!(h >= 1e-8 && h <= 1e-4)) throw InvalidArgument("fd_jacobian_check: h must lie in [1e-8, 1e-4]");
  const Matrix jac = g.jacobian(u);
  double worst = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    Vector up = u, um = u;
    up[j] += h;
    um[j] -= h;
    Vector fd = g(up) - g(um);
    fd *= 1.0 / (2.0 * h);
    const Vector col = jac.column(j);
    worst = std::max(worst, distance(fd, col) / std::max(norm(col), 1.0));
  }
  return worst;
}

/// lambda_min of the symmetric part of g'(u) >= -tol at every sample, and the
/// secant form (g(u) - g(v), u - v) >= -tol on every sample pair.
inline Certificate monotonicity_certificate(const NonlinearMap& g, const std::vector<Vector>& samples,
                                           double tol = tolerances::monotone) {
  Certificate c{CertificateKind::Monotone, "g"};
  double min_eig = std::numeric_limits<double>::infinity();
  double min_secant = std::numeric_limits<double>::infinity();
  std::vector<Vector> values;
  values.reserve(samples.size());
  for (const auto& u : samples) {
    if (!u.all_finite()) throw InvalidArgument("monotonicity_certificate: non-finite sample");
    min_eig = std::min(min_eig, symmetric_eigen_unchecked(g.jacobian(u).symmetric_part()).min());
    values.push_back(g(u));
  }
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (std::size_t j = i + 1; j < samples.size(); ++j)
      min_secant = std::min(min_secant, inner(values[i] - values[j], samples[i] - samples[j]));
  c.quantities["min_symmetric_eigenvalue"] = min_eig;
  c.quantities["min_secant"] = min_secant;
  c.quantities["samples"] = static_cast<double>(samples.size());
  c.passed = !(min_eig < -tol) && !(min_secant < -tol);
  c.note = "sampled quadratic form of g' and secant pairs";
  return c;
}

} // namespace dsm
