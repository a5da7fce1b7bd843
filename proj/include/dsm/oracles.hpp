#pragma once

// Independent checks for the flow solvers: a damped Newton root finder, the
// spectral pseudoinverse for linear problems, and the variational membership
// test (F(z), z - w) >= 0 for the solution set of a monotone equation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "dsm/errors.hpp"
#include "dsm/linalg.hpp"
#include "dsm/model.hpp"

namespace dsm {

enum class OracleMethod { DampedNewton, Pseudoinverse, MembershipProbe };

inline const char* to_string(OracleMethod m) {
  switch (m) {
    case OracleMethod::DampedNewton: return "DampedNewton";
    case OracleMethod::Pseudoinverse: return "Pseudoinverse";
    case OracleMethod::MembershipProbe: return "MembershipProbe";
  }
  return "?";
}

struct OracleReport {
  Vector solution;
  double residual = 0.0;
  std::size_t iterations = 0;
  OracleMethod method = OracleMethod::DampedNewton;
};

inline nlohmann::json to_json(const OracleReport& r) {
  return {{"solution", r.solution.values()},
          {"residual", r.residual},
          {"iterations", r.iterations},
          {"method", to_string(r.method)}};
}

/// Newton's method on f(u) = u + (L + eps I)^-1 g(u) with Armijo backtracking.
/// Stops when ||f(u)|| <= tol; throws MaxIterations after `max_iterations`.
inline OracleReport newton_oracle(const DsmProblem& p, const Vector& u0, double tol = 1e-13,
                                  std::size_t max_iterations = 200) {
  if (!(tol > 0.0)) throw InvalidArgument("newton_oracle: tol must be positive");
  OracleReport r;
  r.method = OracleMethod::DampedNewton;
  Vector u = u0;
  Vector f = preconditioned_residual(p, u);
  double fn = norm(f);
  while (fn > tol) {
    if (r.iterations >= max_iterations)
      throw MaxIterations("newton_oracle: no convergence after " + std::to_string(max_iterations) +
                          " iterations, ||f|| = " + std::to_string(fn));
    Vector d;
    try {
      d = LuFactorization(linearized_operator(p, u), tolerances::singular_linearization).solve(f);
    } catch (const SingularOperator& e) {
      throw SingularLinearization(std::string("newton_oracle: ") + e.what());
    }
    double lambda = 1.0;
    Vector trial = u - d;
    Vector ft = preconditioned_residual(p, trial);
    while (norm(ft) > (1.0 - 1e-4 * lambda) * fn && lambda > 1e-10) {
      lambda *= 0.5;
      trial = u;
      trial.axpy(-lambda, d);
      ft = preconditioned_residual(p, trial);
    }
    ++r.iterations;
    if (norm(ft) >= fn) {
      // Rounding floor: no further decrease is possible.
      break;
    }
    u = std::move(trial);
    f = std::move(ft);
    fn = norm(f);
  }
  r.solution = u;
  r.residual = fn;
  return r;
}

/// Orthonormal basis (columns) of the eigenvectors of a symmetric L whose
/// eigenvalues satisfy |lambda| <= cutoff * max |lambda|.
inline Matrix nullspace_basis(const DenseOperator& l, double cutoff = 1e-10) {
  const auto eig = symmetric_eigen(l);
  const std::size_t n = l.dim();
  const double lmax = std::max(std::abs(eig.min()), std::abs(eig.max()));
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < n; ++i)
    if (std::abs(eig.values[i]) <= cutoff * lmax) idx.push_back(i);
  Matrix out(n, idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j)
    for (std::size_t i = 0; i < n; ++i) out(i, j) = eig.vectors(i, idx[j]);
  return out;
}

/// Minimal-norm solution L^+ b of L x = b for symmetric L, through the
/// eigendecomposition with eigenvalues |lambda| <= 1e-10 lambda_max treated as
/// zero. Throws Inconsistent when ||L x - b|| > 1e-8 ||b||.
inline Vector pseudoinverse_min_norm(const DenseOperator& l, const Vector& b, double cutoff = 1e-10) {
  if (b.size() != l.dim()) throw DimensionMismatch("pseudoinverse_min_norm: size of b differs from dim L");
  const auto eig = symmetric_eigen(l);
  const std::size_t n = l.dim();
  const double lmax = std::max(std::abs(eig.min()), std::abs(eig.max()));
  Vector x(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double lambda = eig.values[k];
    if (!(std::abs(lambda) > cutoff * lmax)) continue;
    const Vector vk = eig.vectors.column(k);
    x.axpy(inner(vk, b) / lambda, vk);
  }
  const double res = distance(l.apply(x), b);
  if (res > 1e-8 * norm(b))
    throw Inconsistent("pseudoinverse_min_norm: b is not in the range of L (residual " + std::to_string(res) + ")");
  return x;
}

inline OracleReport pseudoinverse_report(const DenseOperator& l, const Vector& b) {
  OracleReport r;
  r.method = OracleMethod::Pseudoinverse;
  r.solution = pseudoinverse_min_norm(l, b);
  r.residual = distance(l.apply(r.solution), b);
  return r;
}

struct MembershipResult {
  bool member = false;
  double margin = std::numeric_limits<double>::infinity();  // min_z (F(z), z - w)
  std::size_t samples = 0;
  std::size_t worst_sample = 0;
};

/// w belongs to the solution set of a monotone F iff (F(z), z - w) >= 0 for
/// all z. Tested on the given samples with tolerance
/// -1e-9 (1 + ||z||)(1 + ||F(z)||). A finite sample can only refute
/// membership, so `true` means "not refuted". Requires eps = 0.
inline MembershipResult membership_probe(const DsmProblem& p, const Vector& w, const std::vector<Vector>& z_samples) {
  if (p.epsilon() != 0.0) throw InvalidArgument("membership_probe: requires eps = 0");
  if (w.size() != p.dim()) throw DimensionMismatch("membership_probe: w has the wrong dimension");
  MembershipResult r;
  r.member = true;
  r.samples = z_samples.size();
  for (std::size_t k = 0; k < z_samples.size(); ++k) {
    const Vector& z = z_samples[k];
    const Vector fz = full_residual(p, z);
    const double value = inner(fz, z - w);
    if (value < r.margin) {
      r.margin = value;
      r.worst_sample = k;
    }
    if (value < -1e-9 * (1.0 + norm(z)) * (1.0 + norm(fz))) r.member = false;
  }
  return r;
}

/// `count` Gaussian samples around w split over the radii 0.01, 0.1 and 1,
/// plus points w - t F(w)/||F(w)|| for t = 1e-4 ... 1e-1 when F(w) != 0.
/// Monotonicity makes the latter refute any non-solution for small t.
inline std::vector<Vector> default_probe_samples(const DsmProblem& p, const Vector& w, std::size_t count = 200,
                                                 std::uint64_t seed = 42) {
  std::vector<Vector> out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  const double radii[] = {0.01, 0.1, 1.0};
  for (std::size_t k = 0; k < count; ++k) {
    Vector d(w.size());
    for (auto& x : d) x = gauss(rng);
    const double len = norm(d);
    if (len > 0.0) d *= radii[k % 3] / len;
    out.push_back(w + d);
  }
  const Vector fw = full_residual(p, w);
  const double fn = norm(fw);
  if (fn > 0.0)
    for (double t : {1e-4, 1e-3, 1e-2, 1e-1}) {
      Vector z = w;
      z.axpy(-t / fn, fw);
      out.push_back(std::move(z));
    }
  return out;
}

struct ConvexityReport {
  std::size_t trials = 0;
  std::size_t passed = 0;
  double max_residual = 0.0;
  std::size_t nullity = 0;

  bool all_passed() const { return passed == trials; }
};

/// For the linear family L v = b (g = -b) with symmetric PSD L, samples pairs
/// v, w of the solution set x* + N a, checks that s v + (1 - s) w for
/// s = 0.25, 0.5, 0.75 solves the equation to 1e-9 and passes the membership
/// probe, and that the limit of the convergent solution sequence
/// x* + N (a + a'/k) solves it as well.
inline ConvexityReport convexity_closedness_suite(const DenseOperator& l, const Vector& b, std::size_t trials,
                                                  std::uint64_t seed = 42) {
  const Vector xstar = pseudoinverse_min_norm(l, b);
  const Matrix ns = nullspace_basis(l);
  const std::size_t n = l.dim(), k = ns.cols();
  const DsmProblem lin(l, nonlinear::constant(-b), Vector(n), 1.0, 0.0, "linear");
  ConvexityReport rep;
  rep.trials = trials;
  rep.nullity = k;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  auto point = [&](const Vector& a) { return k == 0 ? xstar : xstar + ns * a; };
  auto coeffs = [&] {
    Vector a(k);
    for (auto& x : a) x = 3.0 * gauss(rng);
    return a;
  };
  auto residual = [&](const Vector& z) { return distance(l.apply(z), b); };

  for (std::size_t t = 0; t < trials; ++t) {
    const Vector a = coeffs(), a2 = coeffs(), dir = coeffs();
    const Vector v = point(a), w = point(a2);
    bool ok = true;
    for (double s : {0.25, 0.5, 0.75}) {
      Vector z = s * v;
      z.axpy(1.0 - s, w);
      const double res = residual(z);
      rep.max_residual = std::max(rep.max_residual, res);
      if (!(res <= 1e-9)) ok = false;
      if (!membership_probe(lin, z, default_probe_samples(lin, z, 30, seed + t)).member) ok = false;
    }
    // v_j = x* + N (a + dir / j) -> v; every member and the limit are solutions.
    for (std::size_t j = 1; j <= 64; j *= 2) {
      Vector aj = a;
      aj.axpy(1.0 / static_cast<double>(j), dir);
      const double res = residual(point(aj));
      rep.max_residual = std::max(rep.max_residual, res);
      if (!(res <= 1e-9)) ok = false;
    }
    const double res_limit = residual(v);
    rep.max_residual = std::max(rep.max_residual, res_limit);
    if (!(res_limit <= 1e-9)) ok = false;
    if (ok) ++rep.passed;
  }
  return rep;
}

} // namespace dsm
