#pragma once

// Built-in problem families, one per hypothesis combination, and the JSON
// problem file format.
//
// Problem file schema:
//
//   {
//     "name":    string,
//     "dim":     integer,
//     "L":       {"inline": [[...], ...], "flags": ["self_adjoint", "psd"]}
//              | {"file": "matrix.txt"}                  (relative to the JSON file)
//              | {"builtin": "identity" | "zero" | "hilbert" | "diag", "values": [...]},
//     "g":       {"builtin": "zero" | "constant" | "cubic" | "affine" | "range_cubic",
//                 "params": {...}},
//     "u0":      [...]            (default: zeros),
//     "R":       number           (default: 1),
//     "epsilon": number           (default: 0),
//     "tags":    ["invertible", "trust_condition", "self_adjoint_psd",
//                 "monotone_g", "sector", "singular"],
//     "solution": {"min_norm": [...], "nullspace": [[...], ...]}   (optional)
//   }
//
// g parameters: constant {c}; cubic {scale, c}; affine {B, c};
// range_cubic {basis, scale, c} where basis is an n x r array of rows.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dsm/errors.hpp"
#include "dsm/linalg.hpp"
#include "dsm/matrix_io.hpp"
#include "dsm/model.hpp"

namespace dsm {

enum class Hypothesis { Invertible, TrustCondition, SelfAdjointPsd, MonotoneG, Sector, Singular };

inline const char* to_string(Hypothesis h) {
  switch (h) {
    case Hypothesis::Invertible: return "invertible";
    case Hypothesis::TrustCondition: return "trust_condition";
    case Hypothesis::SelfAdjointPsd: return "self_adjoint_psd";
    case Hypothesis::MonotoneG: return "monotone_g";
    case Hypothesis::Sector: return "sector";
    case Hypothesis::Singular: return "singular";
  }
  return "?";
}

inline Hypothesis hypothesis_from_string(const std::string& s) {
  for (auto h : {Hypothesis::Invertible, Hypothesis::TrustCondition, Hypothesis::SelfAdjointPsd,
                 Hypothesis::MonotoneG, Hypothesis::Sector, Hypothesis::Singular})
    if (s == to_string(h)) return h;
  throw ParseError("unknown hypothesis tag '" + s + "'");
}

/// Solution set {min_norm + nullspace * a}.
struct KnownSolution {
  Vector min_norm;
  Matrix nullspace;  // n x k, orthonormal columns; k = 0 for a unique solution
};

struct ProblemSpec {
  std::string name;
  std::size_t dim = 0;
  std::uint64_t seed = 42;
  std::set<Hypothesis> tags;
};

struct GeneratedProblem {
  DsmProblem problem;
  ProblemSpec spec;
  std::optional<KnownSolution> known;
  std::vector<Certificate> certificates;
};

/// Default sector used by the Sector tag.
inline constexpr SectorAssumption default_sector{0.5, std::numbers::pi / 6.0};

// ---------------------------------------------------------------------------
// Certificates attached to tags
// ---------------------------------------------------------------------------

/// Self-adjoint PSD verification expressed as the resolvent bound with
/// sin(delta) = 1 on eps = 1, 1e-1, 1e-2, 1e-3. Fails (rather than throwing)
/// when L is not self-adjoint PSD.
inline Certificate psd_resolvent_certificate(const DsmProblem& p) {
  try {
    auto c = check_resolvent_bound(p, {1.0, 1e-1, 1e-2, 1e-3});
    if (c.note.rfind("self-adjoint", 0) != 0) c.passed = false;
    return c;
  } catch (const NotApplicable& e) {
    Certificate c{CertificateKind::ResolventBound, "L"};
    c.passed = false;
    c.note = e.what();
    return c;
  }
}

/// Certificate for the Singular tag: sigma_min(L) <= 1e-10 ||L||.
inline Certificate singular_certificate(const DenseOperator& l) {
  Certificate c{CertificateKind::Invertible, "L_singular"};
  const auto sv = singular_values(l.matrix());
  c.quantities["sigma_min"] = sv.back();
  c.quantities["sigma_max"] = sv.front();
  c.passed = sv.back() <= tolerances::psd * sv.front();
  c.note = "passes when L is numerically singular";
  return c;
}

inline Certificate trust_certificate(const DsmProblem& p, std::size_t samples, std::uint64_t seed,
                                     double* m1_out = nullptr) {
  const auto m1c = estimate_m1(p, ball_samples(p.u0(), p.radius(), samples, seed));
  if (m1_out) *m1_out = m1c.at("m1");
  return check_trust_condition(p, m1c.at("m1"));
}

/// Evaluates the certificate behind each tag. Sets `ok` false when any fails.
inline std::vector<Certificate> certify_tags(const DsmProblem& p, const std::set<Hypothesis>& tags, bool& ok,
                                             std::uint64_t seed = 42) {
  std::vector<Certificate> out;
  ok = true;
  auto add = [&](Certificate c) {
    ok = ok && c.passed;
    out.push_back(std::move(c));
  };
  for (Hypothesis h : tags) {
    switch (h) {
      case Hypothesis::Invertible: add(check_invertible(p)); break;
      case Hypothesis::TrustCondition:
        if (!p.shifted_invertible()) {
          Certificate c{CertificateKind::TrustCondition, "start"};
          c.note = "L + eps I singular";
          add(c);
        } else {
          try {
            add(trust_certificate(p, 64, seed));
          } catch (const SingularLinearization& e) {
            Certificate c{CertificateKind::TrustCondition, "start"};
            c.note = e.what();
            add(c);
          }
        }
        break;
      case Hypothesis::SelfAdjointPsd: add(psd_resolvent_certificate(p)); break;
      case Hypothesis::MonotoneG:
        add(monotonicity_certificate(p.g(), ball_samples(p.u0(), p.radius(), 32, seed)));
        break;
      case Hypothesis::Sector: add(check_sector(p.L(), default_sector.a, default_sector.delta)); break;
      case Hypothesis::Singular: add(singular_certificate(p.L())); break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

namespace detail {

inline Vector gaussian_vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  Vector v(n);
  for (auto& x : v) x = gauss(rng);
  return v;
}

inline Vector random_unit(std::size_t n, std::mt19937_64& rng) {
  while (true) {
    Vector v = gaussian_vector(n, rng);
    const double len = norm(v);
    if (len > 1e-3) return v *= 1.0 / len;
  }
}

/// Haar-ish random orthogonal matrix: twice-reorthogonalized Gram-Schmidt of
/// a Gaussian matrix.
inline Matrix random_orthogonal(std::size_t n, std::mt19937_64& rng) {
  std::vector<Vector> cols;
  while (cols.size() < n) {
    Vector v = gaussian_vector(n, rng);
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : cols) v.axpy(-inner(q, v), q);
    const double len = norm(v);
    if (len < 1e-6) continue;
    cols.push_back(v *= 1.0 / len);
  }
  return Matrix::from_columns(cols);
}

/// Q diag(lambda) Q^T, symmetrized exactly.
inline Matrix spectral_matrix(const Matrix& q, const Vector& lambda) {
  const std::size_t n = lambda.size();
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += q(i, k) * lambda[k] * q(j, k);
      m(i, j) = s;
      m(j, i) = s;
    }
  return m;
}

inline Vector cube(Vector v) {
  for (auto& x : v) x = x * x * x;
  return v;
}

inline Matrix columns(const Matrix& q, std::size_t first, std::size_t count) {
  Matrix out(q.rows(), count);
  for (std::size_t i = 0; i < q.rows(); ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = q(i, first + j);
  return out;
}

/// Picks R = 2 m1 p0, re-estimating m1 over the enlarged ball until the trust
/// condition holds for the estimate.
inline DsmProblem with_trust_radius(const DsmProblem& base, std::uint64_t seed, std::size_t samples = 64) {
  const double p0 = norm(preconditioned_residual(base, base.u0()));
  if (p0 == 0.0) return base.with_radius(1.0);
  double m1 = 1.0;
  for (int iter = 0; iter < 20; ++iter) {
    DsmProblem p = base.with_radius(2.0 * m1 * p0);
    const double est = estimate_m1(p, ball_samples(p.u0(), p.radius(), samples, seed)).at("m1");
    if (p0 * est <= p.radius()) return p;
    m1 = est;
  }
  throw Error("with_trust_radius: m1 estimate did not stabilize");
}

inline void require_tags(GeneratedProblem& gp) {
  bool ok = false;
  gp.certificates = certify_tags(gp.problem, gp.spec.tags, ok, gp.spec.seed);
  if (!ok) throw CertificateMismatch("generated problem '" + gp.spec.name + "' fails its tagged certificates");
}

} // namespace detail

/// L = Q diag(lambda) Q^T with lambda evenly spread over [1, 4] (2.5 when
/// dim = 1); g(u) = scale u^3 + c with c a random unit vector; u0 = 0 and
/// R = 2 m1 p(0). Tags: invertible, trust_condition, self_adjoint_psd,
/// monotone_g.
inline GeneratedProblem gen_wellposed_cubic(std::size_t dim, double scale, std::uint64_t seed = 42) {
  if (dim < 1) throw InvalidArgument("gen_wellposed_cubic: dim must be >= 1");
  if (!(scale >= 0.0)) throw InvalidArgument("gen_wellposed_cubic: scale must be >= 0");
  for (std::uint64_t attempt = 0; attempt < 16; ++attempt) {
    std::mt19937_64 rng(seed + 7919 * attempt);
    Vector lambda(dim);
    for (std::size_t i = 0; i < dim; ++i)
      lambda[i] = dim == 1 ? 2.5 : 1.0 + 3.0 * static_cast<double>(i) / static_cast<double>(dim - 1);
    const Matrix q = detail::random_orthogonal(dim, rng);
    DenseOperator l(detail::spectral_matrix(q, lambda), {true, true});
    const Vector c = detail::random_unit(dim, rng);
    DsmProblem base(l, nonlinear::cubic(scale, c), Vector(dim), 1.0, 0.0, "wellposed_cubic");
    GeneratedProblem gp{detail::with_trust_radius(base, seed), {"wellposed_cubic", dim, seed, {}}, std::nullopt, {}};
    gp.spec.tags = {Hypothesis::Invertible, Hypothesis::TrustCondition, Hypothesis::SelfAdjointPsd,
                    Hypothesis::MonotoneG};
    try {
      detail::require_tags(gp);
      return gp;
    } catch (const CertificateMismatch&) {
    }
  }
  throw Error("gen_wellposed_cubic: could not generate a problem satisfying its tags");
}

/// L = Q diag(lambda_1..lambda_rank, 0, ..., 0) Q^T with the positive
/// eigenvalues spread over [1, 4] (Q = I when `diagonal`). The solution set is
/// {Q_r a* + Q_n b}: g is the constant c = -Q_r (Lambda_r a* + s a*^3), plus
/// s Q_r (Q_r^T u)^3 when cubic_scale s > 0. The minimal-norm solution is
/// Q_r a*, with a* a random unit vector (all ones when `diagonal`).
inline GeneratedProblem gen_singular_monotone(std::size_t dim, std::size_t rank, double cubic_scale = 0.0,
                                              std::uint64_t seed = 42, bool diagonal = false) {
  if (!(rank >= 1 && rank < dim)) throw InvalidArgument("gen_singular_monotone: need 1 <= rank < dim");
  if (!(cubic_scale >= 0.0)) throw InvalidArgument("gen_singular_monotone: cubic_scale must be >= 0");
  std::mt19937_64 rng(seed);
  Vector lambda(dim);
  for (std::size_t i = 0; i < rank; ++i)
    lambda[i] = rank == 1 ? 1.0 : 1.0 + 3.0 * static_cast<double>(i) / static_cast<double>(rank - 1);
  const Matrix q = diagonal ? Matrix::identity(dim) : detail::random_orthogonal(dim, rng);
  const Matrix qr = detail::columns(q, 0, rank);
  const Matrix qn = detail::columns(q, rank, dim - rank);
  Vector a = diagonal ? Vector(rank, 1.0) : detail::random_unit(rank, rng);

  Vector inner_term(rank);
  const Vector a3 = detail::cube(a);
  for (std::size_t i = 0; i < rank; ++i) inner_term[i] = lambda[i] * a[i] + cubic_scale * a3[i];
  const Vector c = -(qr * inner_term);

  DenseOperator l(detail::spectral_matrix(q, lambda), {true, true});
  NonlinearMap g = cubic_scale > 0.0 ? nonlinear::range_cubic(qr, cubic_scale, c) : nonlinear::constant(c);
  const Vector vmin = qr * a;
  DsmProblem p(l, g, Vector(dim), 2.0 * (1.0 + norm(vmin)), 0.0, "singular_monotone");
  GeneratedProblem gp{p, {"singular_monotone", dim, seed, {}}, KnownSolution{vmin, qn}, {}};
  gp.spec.tags = {Hypothesis::SelfAdjointPsd, Hypothesis::MonotoneG, Hypothesis::Singular};
  detail::require_tags(gp);
  return gp;
}

/// Hilbert matrix L_ij = 1/(i + j - 1) (SPD, severely ill-conditioned) and
/// g(u) = s u^3 + c with c = -(L y + s y^3) for a random unit y, the unique
/// solution.
inline GeneratedProblem gen_illconditioned(std::size_t dim, double cubic_scale = 0.1, double epsilon = 1e-2,
                                           std::uint64_t seed = 42) {
  if (dim < 1 || dim > 12) throw InvalidArgument("gen_illconditioned: dim must lie in [1, 12]");
  std::mt19937_64 rng(seed);
  Matrix h(dim, dim);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) h(i, j) = 1.0 / static_cast<double>(i + j + 1);
  const Vector y = detail::random_unit(dim, rng);
  Vector c = h * y;
  c.axpy(cubic_scale, detail::cube(y));
  c *= -1.0;
  DsmProblem base(DenseOperator(h, {true, true}), nonlinear::cubic(cubic_scale, c), Vector(dim), 1.0, epsilon,
                  "illconditioned");
  GeneratedProblem gp{detail::with_trust_radius(base, seed), {"illconditioned", dim, seed, {}},
                      KnownSolution{y, Matrix(dim, 0)}, {}};
  gp.spec.tags = {Hypothesis::SelfAdjointPsd, Hypothesis::MonotoneG};
  if (epsilon > 0.0) gp.spec.tags.insert(Hypothesis::TrustCondition);
  detail::require_tags(gp);
  return gp;
}

/// Nonsymmetric L = Q B Q^T with B block diagonal: the first block is the
/// rotation [[0, 1], [-1, 0]], the others [[alpha, beta], [-beta, alpha]]
/// with alpha in [0.2, 1], beta in [0.5, 2]. The spectrum stays off the
/// negative real axis, so the default sector (a = 0.5, delta = pi/6) is clear.
/// g(u) = 0.1 u^3 + c.
inline GeneratedProblem gen_sector_nonsymmetric(std::size_t dim, double epsilon = 0.1, std::uint64_t seed = 42) {
  if (dim < 2 || dim % 2 != 0) throw InvalidArgument("gen_sector_nonsymmetric: dim must be even and >= 2");
  for (std::uint64_t attempt = 0; attempt < 16; ++attempt) {
    std::mt19937_64 rng(seed + 7919 * attempt);
    std::uniform_real_distribution<double> alpha_dist(0.2, 1.0), beta_dist(0.5, 2.0);
    Matrix b(dim, dim);
    for (std::size_t k = 0; k < dim / 2; ++k) {
      const double alpha = k == 0 ? 0.0 : alpha_dist(rng);
      const double beta = k == 0 ? 1.0 : beta_dist(rng);
      b(2 * k, 2 * k) = alpha;
      b(2 * k, 2 * k + 1) = beta;
      b(2 * k + 1, 2 * k) = -beta;
      b(2 * k + 1, 2 * k + 1) = alpha;
    }
    const Matrix q = dim == 2 ? Matrix::identity(2) : detail::random_orthogonal(dim, rng);
    const Matrix l = q * b * q.transpose();
    const Vector c = detail::random_unit(dim, rng);
    DsmProblem base(DenseOperator(l), nonlinear::cubic(0.1, c), Vector(dim), 1.0, epsilon, "sector_nonsymmetric");
    GeneratedProblem gp{detail::with_trust_radius(base, seed), {"sector_nonsymmetric", dim, seed, {}},
                        std::nullopt, {}};
    gp.spec.tags = {Hypothesis::Sector, Hypothesis::Invertible, Hypothesis::TrustCondition, Hypothesis::MonotoneG};
    try {
      detail::require_tags(gp);
      return gp;
    } catch (const CertificateMismatch&) {
    }
  }
  throw Error("gen_sector_nonsymmetric: could not generate a problem satisfying its tags");
}

/// L = diag(1, 0), g = (-1, 0): solution line {(1, t)}, minimal-norm point (1, 0).
inline GeneratedProblem gen_diag_singular() {
  auto gp = gen_singular_monotone(2, 1, 0.0, 42, true);
  gp.spec.name = "diag_singular";
  gp.problem = gp.problem.with_name("diag_singular");
  return gp;
}

/// Builds a built-in family by name, as used by the CLI and problem files.
inline GeneratedProblem make_builtin(const std::string& name, std::size_t dim, std::uint64_t seed = 42,
                                     double scale = 0.1, std::size_t rank = 0) {
  if (name == "wellposed_cubic") return gen_wellposed_cubic(dim, scale, seed);
  if (name == "singular_monotone")
    return gen_singular_monotone(dim, rank == 0 ? (dim + 1) / 2 : rank, 0.0, seed);
  if (name == "singular_monotone_cubic") {
    auto gp = gen_singular_monotone(dim, rank == 0 ? (dim + 1) / 2 : rank, scale, seed);
    gp.spec.name = name;
    gp.problem = gp.problem.with_name(name);
    return gp;
  }
  if (name == "illconditioned") return gen_illconditioned(dim, scale, 1e-2, seed);
  if (name == "sector_nonsymmetric") return gen_sector_nonsymmetric(dim, 0.1, seed);
  if (name == "diag_singular") return gen_diag_singular();
  throw InvalidArgument("unknown builtin problem '" + name + "'");
}

inline std::vector<std::string> builtin_names() {
  return {"wellposed_cubic", "singular_monotone", "singular_monotone_cubic", "illconditioned",
          "sector_nonsymmetric", "diag_singular"};
}

// ---------------------------------------------------------------------------
// Problem files
// ---------------------------------------------------------------------------

struct LoadedProblem {
  DsmProblem problem;
  ProblemSpec spec;
  std::optional<KnownSolution> known;
  std::vector<Certificate> certificates;
  bool verified = true;  // flags and tags all passed
  std::string mismatch;  // description of what failed when not verified
};

namespace detail {

template <class F>
auto with_field(const std::string& field, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ParseError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("field '" + field + "': " + e.what());
  } catch (const Error& e) {
    throw ParseError("field '" + field + "': " + e.what());
  }
}

inline Vector vector_from_json(const nlohmann::json& j, std::size_t dim, const std::string& field) {
  return with_field(field, [&] {
    auto v = Vector(j.get<std::vector<double>>());
    if (v.size() != dim)
      throw ParseError("field '" + field + "': expected " + std::to_string(dim) + " entries, got " +
                       std::to_string(v.size()));
    if (!v.all_finite()) throw ParseError("field '" + field + "': non-finite entry");
    return v;
  });
}

inline Matrix matrix_from_json(const nlohmann::json& j, std::size_t rows, std::size_t cols, const std::string& field) {
  return with_field(field, [&] {
    auto data = j.get<std::vector<std::vector<double>>>();
    if (data.size() != rows) throw ParseError("field '" + field + "': expected " + std::to_string(rows) + " rows");
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
      if (data[i].size() != cols)
        throw ParseError("field '" + field + "': row " + std::to_string(i) + " must have " + std::to_string(cols) +
                         " entries");
      for (std::size_t k = 0; k < cols; ++k) m(i, k) = data[i][k];
    }
    if (!m.all_finite()) throw ParseError("field '" + field + "': non-finite entry");
    return m;
  });
}

inline OperatorFlags flags_from_json(const nlohmann::json& j) {
  OperatorFlags f;
  if (!j.contains("flags")) return f;
  for (const auto& s : j.at("flags")) {
    const auto name = s.get<std::string>();
    if (name == "self_adjoint") f.self_adjoint = true;
    else if (name == "psd") f.psd_claimed = true;
    else throw ParseError("field 'L.flags': unknown flag '" + name + "'");
  }
  return f;
}

inline DenseOperator operator_from_json(const nlohmann::json& j, std::size_t dim,
                                        const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ParseError("field 'L': expected an object");
  if (j.contains("inline")) {
    return DenseOperator(matrix_from_json(j["inline"], dim, dim, "L.inline"), flags_from_json(j));
  }
  if (j.contains("file")) {
    const auto rel = with_field("L.file", [&] { return j["file"].get<std::string>(); });
    std::filesystem::path path(rel);
    if (path.is_relative()) path = base_dir / path;
    auto op = read_matrix_file(path.string());
    if (op.dim() != dim)
      throw ParseError("field 'L.file': matrix has dim " + std::to_string(op.dim()) + ", expected " +
                       std::to_string(dim));
    return op;
  }
  if (j.contains("builtin")) {
    const auto name = with_field("L.builtin", [&] { return j["builtin"].get<std::string>(); });
    if (name == "identity") return DenseOperator(Matrix::identity(dim), {true, true});
    if (name == "zero") return DenseOperator(Matrix(dim, dim), {true, true});
    if (name == "hilbert") {
      Matrix h(dim, dim);
      for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t k = 0; k < dim; ++k) h(i, k) = 1.0 / static_cast<double>(i + k + 1);
      return DenseOperator(h, {true, true});
    }
    if (name == "diag") {
      const Vector d = vector_from_json(j.at("values"), dim, "L.values");
      const bool nonneg = std::all_of(d.begin(), d.end(), [](double x) { return x >= 0.0; });
      return DenseOperator(Matrix::diagonal(d), {true, nonneg});
    }
    throw ParseError("field 'L.builtin': unknown operator '" + name + "'");
  }
  throw ParseError("field 'L': expected one of 'inline', 'file', 'builtin'");
}

inline NonlinearMap nonlinear_from_json(const nlohmann::json& j, std::size_t dim) {
  if (!j.is_object() || !j.contains("builtin")) throw ParseError("field 'g': expected {\"builtin\": ..., \"params\": ...}");
  const auto name = with_field("g.builtin", [&] { return j["builtin"].get<std::string>(); });
  const nlohmann::json params = j.value("params", nlohmann::json::object());
  auto c_or_zero = [&] { return params.contains("c") ? vector_from_json(params["c"], dim, "g.params.c") : Vector(dim); };
  if (name == "zero") return nonlinear::zero(dim);
  if (name == "constant") return nonlinear::constant(c_or_zero());
  if (name == "cubic")
    return nonlinear::cubic(with_field("g.params.scale", [&] { return params.at("scale").get<double>(); }), c_or_zero());
  if (name == "affine") return nonlinear::affine(matrix_from_json(params.at("B"), dim, dim, "g.params.B"), c_or_zero());
  if (name == "range_cubic") {
    const auto& basis = params.at("basis");
    const std::size_t r = basis.empty() ? 0 : basis.at(0).size();
    return nonlinear::range_cubic(matrix_from_json(basis, dim, r, "g.params.basis"),
                                  with_field("g.params.scale", [&] { return params.at("scale").get<double>(); }),
                                  c_or_zero());
  }
  throw ParseError("field 'g.builtin': unknown nonlinearity '" + name + "'");
}

} // namespace detail

/// Parses a problem document, verifies operator flags and tags, and attaches
/// the evaluated certificates. Throws ParseError on schema violations and,
/// when `strict`, CertificateMismatch when a flag or tag fails verification;
/// otherwise the failure is reported through `verified` and `mismatch`.
inline LoadedProblem parse_problem(const nlohmann::json& doc, const std::filesystem::path& base_dir = ".",
                                   bool strict = true) {
  if (!doc.is_object()) throw ParseError("problem document must be a JSON object");
  const auto dim = detail::with_field("dim", [&] { return doc.at("dim").get<long long>(); });
  if (dim <= 0) throw ParseError("field 'dim': must be positive");
  const auto n = static_cast<std::size_t>(dim);
  const std::string name = doc.value("name", std::string("problem"));

  if (!doc.contains("L")) throw ParseError("missing field 'L'");
  if (!doc.contains("g")) throw ParseError("missing field 'g'");
  DenseOperator l = detail::operator_from_json(doc["L"], n, base_dir);
  NonlinearMap g = detail::nonlinear_from_json(doc["g"], n);
  Vector u0 = doc.contains("u0") ? detail::vector_from_json(doc["u0"], n, "u0") : Vector(n);
  const double r = detail::with_field("R", [&] { return doc.value("R", 1.0); });
  const double eps = detail::with_field("epsilon", [&] { return doc.value("epsilon", 0.0); });
  if (!(r > 0.0)) throw ParseError("field 'R': must be positive");
  if (!(eps >= 0.0)) throw ParseError("field 'epsilon': must be nonnegative");

  std::string flag_mismatch;
  const auto flag_report = l.verify_flags();
  if (!flag_report.ok()) {
    std::ostringstream msg;
    msg << "operator flags contradicted: ";
    if (!flag_report.symmetric_ok) msg << "self_adjoint flag but max |A_ij - A_ji| = " << flag_report.asymmetry << "; ";
    if (!flag_report.psd_ok) msg << "psd flag but smallest eigenvalue = " << flag_report.min_eigenvalue;
    if (strict) throw CertificateMismatch(msg.str());
    flag_mismatch = msg.str();
  }

  LoadedProblem lp{DsmProblem(l, g, u0, r, eps, name), {name, n, 42, {}}, std::nullopt, {}};
  if (!flag_mismatch.empty()) {
    lp.verified = false;
    lp.mismatch = flag_mismatch;
  }
  if (doc.contains("tags"))
    for (const auto& t : doc["tags"]) lp.spec.tags.insert(hypothesis_from_string(t.get<std::string>()));
  if (doc.contains("solution")) {
    const auto& s = doc["solution"];
    KnownSolution ks{detail::vector_from_json(s.at("min_norm"), n, "solution.min_norm"), Matrix(n, 0)};
    if (s.contains("nullspace")) {
      std::vector<Vector> cols;
      for (const auto& col : s["nullspace"]) cols.push_back(detail::vector_from_json(col, n, "solution.nullspace"));
      if (!cols.empty()) ks.nullspace = Matrix::from_columns(cols);
    }
    lp.known = ks;
  }

  bool ok = false;
  lp.certificates = certify_tags(lp.problem, lp.spec.tags, ok);
  if (!ok) {
    std::string failed;
    for (const auto& c : lp.certificates)
      if (!c.passed) failed += std::string(" ") + to_string(c.kind) + "(" + c.subject + ")";
    const std::string msg = "problem '" + name + "': tagged hypotheses fail verification:" + failed;
    if (strict) throw CertificateMismatch(msg);
    lp.verified = false;
    lp.mismatch += (lp.mismatch.empty() ? "" : "; ") + msg;
  }
  if (lp.spec.tags.count(Hypothesis::Invertible) == 0) lp.certificates.push_back(check_invertible(lp.problem));
  return lp;
}

inline LoadedProblem load_problem(const std::string& path, bool strict = true) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open problem file");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  try {
    return parse_problem(doc, std::filesystem::path(path).parent_path(), strict);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

/// Serializes a problem with inline L. The nonlinearity must be a built-in.
inline nlohmann::json problem_to_json(const DsmProblem& p, const std::set<Hypothesis>& tags = {},
                                      const std::optional<KnownSolution>& known = std::nullopt) {
  if (p.g().spec().is_null()) throw InvalidArgument("problem_to_json: nonlinearity is not a serializable builtin");
  nlohmann::json l = {{"inline", nonlinear::to_json(p.L().matrix())}};
  nlohmann::json flags = nlohmann::json::array();
  if (p.L().flags().self_adjoint) flags.push_back("self_adjoint");
  if (p.L().flags().psd_claimed) flags.push_back("psd");
  if (!flags.empty()) l["flags"] = flags;
  nlohmann::json tag_list = nlohmann::json::array();
  for (Hypothesis h : tags) tag_list.push_back(to_string(h));
  nlohmann::json doc = {{"name", p.name()},   {"dim", p.dim()},          {"L", l},
                        {"g", p.g().spec()},  {"u0", p.u0().values()},   {"R", p.radius()},
                        {"epsilon", p.epsilon()}, {"tags", tag_list}};
  if (known) {
    nlohmann::json null_cols = nlohmann::json::array();
    for (std::size_t j = 0; j < known->nullspace.cols(); ++j) null_cols.push_back(known->nullspace.column(j).values());
    doc["solution"] = {{"min_norm", known->min_norm.values()}, {"nullspace", null_cols}};
  }
  return doc;
}

inline void save_problem(const std::string& path, const DsmProblem& p, const std::set<Hypothesis>& tags = {},
                         const std::optional<KnownSolution>& known = std::nullopt) {
  std::ofstream out(path);
  if (!out) throw Error(path + ": cannot open for writing");
  out << problem_to_json(p, tags, known).dump(2) << '\n';
}

} // namespace dsm
