#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "omlat/array_model.hpp"
#include "omlat/error.hpp"
#include "omlat/fock.hpp"
#include "omlat/lindblad.hpp"
#include "omlat/parallel.hpp"

// Gutzwiller (site-factorized) dynamics of a homogeneous array. One local
// mode truncated at n_max carries the state; neighbours enter through moments.
namespace omlat::meanfield {

using Matrix4 = Eigen::Matrix<cplx, 4, 4>;

// Onsite operator basis A = (1, a, a^dag, a^dag a).
enum class Local : int { id = 0, a = 1, ad = 2, n = 3 };

inline Local dagger(Local x) {
  switch (x) {
    case Local::a: return Local::ad;
    case Local::ad: return Local::a;
    default: return x;
  }
}

struct Moments {
  cplx a = 0.0, ad = 0.0;
  cplx n = 0.0;
  cplx a2 = 0.0, ad2 = 0.0;
  cplx adaa = 0.0, adada = 0.0;  // <a^dag a a>, <a^dag a^dag a>

  // Conjugate pairs and a real occupation (relative tolerance; NaN fails).
  void check_consistent(double tol = 1e-9) const {
    auto bad = [&](cplx x, cplx y) { return !(std::abs(x - std::conj(y)) <= tol * (1.0 + std::abs(y))); };
    if (bad(ad, a) || bad(ad2, a2) || bad(adada, adaa) || !(std::abs(n.imag()) <= tol * (1.0 + std::abs(n))))
      throw ValidationError("moments are not conjugate-pair consistent");
  }

  static Moments from_values(cplx a, double n, cplx a2, cplx adaa) {
    return {a, std::conj(a), n, a2, std::conj(a2), adaa, std::conj(adaa)};
  }

  // <B A> for onsite B, A, expressed through the tracked moments.
  cplx product(Local b, Local x) const {
    using L = Local;
    if (b == L::id) return x == L::id ? 1.0 : (x == L::a ? a : x == L::ad ? ad : n);
    if (x == L::id) return b == L::a ? a : b == L::ad ? ad : n;
    if (b == L::a) {
      if (x == L::a) return a2;
      if (x == L::ad) return n + 1.0;
      return adaa + a;  // a n
    }
    if (b == L::ad) {
      if (x == L::a) return n;
      if (x == L::ad) return ad2;
      return adada;  // a^dag n
    }
    if (x == L::a) return adaa;     // n a
    if (x == L::ad) return adada + ad;  // n a^dag
    throw ValidationError("<n n> is not among the tracked moments");
  }
};

// ---------------------------------------------------------------------------
// Banded local operators on a single mode.

inline Matrix left(Local op, const Matrix& x) {
  const Index d = x.rows();
  Matrix out = Matrix::Zero(d, x.cols());
  switch (op) {
    case Local::id: return x;
    case Local::a:
      for (Index m = 0; m + 1 < d; ++m) out.row(m) = std::sqrt(double(m + 1)) * x.row(m + 1);
      break;
    case Local::ad:
      for (Index m = 1; m < d; ++m) out.row(m) = std::sqrt(double(m)) * x.row(m - 1);
      break;
    case Local::n:
      for (Index m = 1; m < d; ++m) out.row(m) = double(m) * x.row(m);
      break;
  }
  return out;
}

inline Matrix right(const Matrix& x, Local op) {
  const Index d = x.cols();
  Matrix out = Matrix::Zero(x.rows(), d);
  switch (op) {
    case Local::id: return x;
    case Local::a:
      for (Index m = 1; m < d; ++m) out.col(m) = std::sqrt(double(m)) * x.col(m - 1);
      break;
    case Local::ad:
      for (Index m = 0; m + 1 < d; ++m) out.col(m) = std::sqrt(double(m + 1)) * x.col(m + 1);
      break;
    case Local::n:
      for (Index m = 1; m < d; ++m) out.col(m) = double(m) * x.col(m);
      break;
  }
  return out;
}

inline Matrix local_matrix(Local op, int n_max) {
  return left(op, Matrix::Identity(n_max + 1, n_max + 1));
}

inline Moments moments_of(const Matrix& rho) {
  auto tr = [&](Local x, Local y = Local::id, Local z = Local::id) {
    return left(x, left(y, left(z, rho))).trace();
  };
  Moments m;
  m.a = tr(Local::a);
  m.ad = tr(Local::ad);
  m.n = tr(Local::n);
  m.a2 = tr(Local::a, Local::a);
  m.ad2 = tr(Local::ad, Local::ad);
  m.adaa = tr(Local::ad, Local::a, Local::a);
  m.adada = tr(Local::ad, Local::ad, Local::a);
  return m;
}

struct MeanFieldState {
  Matrix rho;
  Moments moments;

  explicit MeanFieldState(Matrix r) : rho(std::move(r)), moments(moments_of(rho)) {}
  int n_max() const { return static_cast<int>(rho.rows()) - 1; }
};

inline Matrix vacuum(int n_max) {
  if (n_max < 1) throw ValidationError("n_max must be >= 1");
  Matrix r = Matrix::Zero(n_max + 1, n_max + 1);
  r(0, 0) = 1.0;
  return r;
}

// |alpha><alpha| built from the Poisson amplitudes and renormalized.
inline Matrix coherent_state(cplx alpha, int n_max) {
  if (n_max < 1) throw ValidationError("n_max must be >= 1");
  Vector v(n_max + 1);
  v(0) = 1.0;
  for (int k = 1; k <= n_max; ++k) v(k) = v(k - 1) * alpha / std::sqrt(double(k));
  v /= v.norm();
  return v * v.adjoint();
}

// ---------------------------------------------------------------------------
// Coefficient tables.

struct CoefficientTables {
  Matrix4 L1;
  Matrix4 L2;
};

inline CoefficientTables appD_matrices(const Moments& m, double chi) {
  m.check_consistent();
  const double x = chi;
  const double q = 1 + x + x * x, p = 1 + 2 * x + 2 * x * x, s = 4 + 7 * x + 4 * x * x, t = 2 + 3 * x;
  const double c = x * (1 + x);
  const cplx a = m.a, ad = m.ad, n = m.n.real();
  CoefficientTables out;
  Matrix4& L1 = out.L1;
  L1 << 0.0, 2.0 * (2.0 * ad * (q - c * n) + s * m.adada), 0.0, 0.0,
      2.0 * (2.0 * a * (q - c * n) + s * m.adaa), 4.0 * (n + c * (ad * a + n)),
      -2.0 * (x * a * a + 2.0 * (1 + x) * m.a2), -4.0 * p * a,
      0.0, -2.0 * (x * ad * ad + 2.0 * (1 + x) * m.ad2), 4.0 * q * (n + 1.0), 2.0 * t * ad,
      0.0, -4.0 * p * ad, 2.0 * t * a, 4.0 * p;
  Matrix4& L2 = out.L2;
  L2 << 0.0, -2.0 * (ad * (t - 2.0 * c * n) + s * m.adada), 0.0, 0.0,
      -2.0 * (a * (t - 2.0 * c * n) + s * m.adaa), 4.0 * q * n,
      -2.0 * (x * a * a + 2.0 * (1 + x) * m.a2), 2.0 * t * a,
      0.0, -2.0 * (x * ad * ad + 2.0 * (1 + x) * m.ad2), 4.0 * (c * ad * a + q * (n + 1.0)), -4.0 * p * ad,
      0.0, 2.0 * t * ad, -4.0 * p * a, 4.0 * p;
  return out;
}

// Terms with an identity slot are commutators and can be shuffled between
// (i,1) and (1,j) without changing the generator; this fixes one choice.
inline Matrix4 canonical_gauge(Matrix4 c) {
  c(0, 1) -= c(2, 0);
  c(2, 0) = 0.0;
  c(1, 0) -= c(0, 2);
  c(0, 2) = 0.0;
  c(3, 0) -= c(0, 3);
  c(0, 3) = 0.0;
  return c;
}

// ---------------------------------------------------------------------------
// Generic decoupler.

struct SiteFactor {
  int offset;
  Local op;
};

struct ProductTerm {
  cplx coeff;
  std::vector<SiteFactor> factors;
};

using GenericJump = std::vector<ProductTerm>;

inline GenericJump adjoint(const GenericJump& k) {
  GenericJump out;
  for (const auto& t : k) {
    ProductTerm u{std::conj(t.coeff), {}};
    for (const auto& f : t.factors) u.factors.push_back({f.offset, dagger(f.op)});
    out.push_back(std::move(u));
  }
  return out;
}

namespace detail {

inline std::map<int, Local> site_map(const ProductTerm& t) {
  std::map<int, Local> m;
  for (const auto& f : t.factors)
    if (!m.emplace(f.offset, f.op).second)
      throw ValidationError("product term repeats site offset " + std::to_string(f.offset));
  return m;
}

inline Local at(const std::map<int, Local>& m, int o) {
  const auto it = m.find(o);
  return it == m.end() ? Local::id : it->second;
}

// Row index i with A_i^dag = A, column index j with A_j = B.
inline int row_of(Local a) { return static_cast<int>(dagger(a)); }
inline int col_of(Local b) { return static_cast<int>(b); }

}  // namespace detail

// Local coefficient matrix C for sum_K Lambda[K] after tracing out all but
// one site with homogeneous product-state moments. For each pair of terms
// (t, u) of K and each site o in their joint support, the local operator pair
// (A, B) = (t|_o, u|_o^dag) picks up prod_{o' != o} <u|_o'^dag t|_o'>.
inline Matrix4 decouple_generic(const std::vector<GenericJump>& jumps, const Moments& m) {
  m.check_consistent();
  Matrix4 c = Matrix4::Zero();
  for (const auto& k : jumps) {
    std::vector<std::map<int, Local>> maps;
    for (const auto& t : k) maps.push_back(detail::site_map(t));
    for (std::size_t ti = 0; ti < k.size(); ++ti) {
      for (std::size_t ui = 0; ui < k.size(); ++ui) {
        std::vector<int> support;
        for (const auto& [o, op] : maps[ti]) support.push_back(o);
        for (const auto& [o, op] : maps[ui])
          if (!maps[ti].contains(o)) support.push_back(o);
        const cplx weight = k[ti].coeff * std::conj(k[ui].coeff);
        for (int o : support) {
          const Local A = detail::at(maps[ti], o);
          const Local B = dagger(detail::at(maps[ui], o));
          if (A == Local::id && B == Local::id) continue;
          cplx f = weight;
          for (int o2 : support)
            if (o2 != o) f *= m.product(dagger(detail::at(maps[ui], o2)), detail::at(maps[ti], o2));
          c(detail::row_of(A), detail::col_of(B)) += f;
        }
      }
    }
  }
  return c;
}

// Reduced lattice operators from the array module, rewritten with site
// offsets relative to their reference site and unit prefactor |E/Delta| = 1.
inline std::vector<GenericJump> reduced_lattice_jumps(double chi) {
  array::ArrayParams p;
  p.L = 8;
  p.E = 1.0;
  p.Delta = 1.0;
  p.chi = chi;
  const auto ops = array::reduced_jump_ops(p);
  const int ref = 3;
  std::vector<GenericJump> out;
  for (const auto& k : {ops[2 * ref], ops[2 * ref + 1]}) {
    GenericJump g;
    for (const auto& t : k.terms) {
      const int i = t.create.site - ref, j = t.annihilate.site - ref;
      if (i == j)
        g.push_back({t.coeff, {{i, Local::n}}});
      else
        g.push_back({t.coeff, {{i, Local::ad}, {j, Local::a}}});
    }
    out.push_back(std::move(g));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Generators.

struct MeanFieldParams {
  double Gamma_prime = 0.0;  // primary control, in units of kappa
  double chi = 1.0;
  double n_th = 0.0;
  double Upsilon = 0.5;
  double kappa = 1.0;

  static constexpr double kScale = 156.0 / 3.0;
  double Gamma() const { return Gamma_prime / kScale; }

  void validate() const {
    if (!(Gamma_prime >= 0.0) || !(n_th >= 0.0) || !(Upsilon >= 0.0) || !(kappa >= 0.0))
      throw ValidationError("mean-field rates must be nonnegative");
    if (!(Upsilon < kappa)) throw ValidationError("Upsilon < kappa required for stability");
    if (!std::isfinite(chi)) throw ValidationError("chi must be finite");
  }
};

// sum_ij C_ij (2 A_i^dag rho A_j - {A_j A_i^dag, rho})
inline Matrix apply_coefficients(const Matrix4& c, const Matrix& rho) {
  const int n_max = static_cast<int>(rho.rows()) - 1;
  Matrix out = Matrix::Zero(rho.rows(), rho.cols());
  Matrix anti = Matrix::Zero(rho.rows(), rho.cols());
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      const cplx cij = c(i, j);
      if (cij == cplx(0.0)) continue;
      const Local ai_dag = dagger(static_cast<Local>(i));
      const Local aj = static_cast<Local>(j);
      out += 2.0 * cij * right(left(ai_dag, rho), aj);
      anti += cij * left(aj, local_matrix(ai_dag, n_max));
    }
  }
  out -= anti * rho + rho * anti;
  return out;
}

inline Matrix4 meanfield_coefficients(const Moments& m, const MeanFieldParams& p) {
  const auto t = appD_matrices(m, p.chi);
  return p.Gamma() * (p.n_th + 1.0) * t.L1 + p.Gamma() * p.n_th * t.L2;
}

inline Matrix meanfield_liouvillian(const MeanFieldState& s, const MeanFieldParams& p) {
  if (p.Gamma_prime == 0.0) return Matrix::Zero(s.rho.rows(), s.rho.cols());
  return apply_coefficients(meanfield_coefficients(s.moments, p), s.rho);
}

// Pump Upsilon Lambda[a^dag] + loss kappa Lambda[a] + optional seed drive
// H = seed (a + a^dag).
inline Matrix pump_loss(const Matrix& rho, const MeanFieldParams& p, double seed) {
  using L = Local;
  Matrix out = p.Upsilon * (2.0 * right(left(L::ad, rho), L::a) - left(L::a, left(L::ad, rho)) -
                            right(right(rho, L::a), L::ad));
  out += p.kappa * (2.0 * right(left(L::a, rho), L::ad) - left(L::n, rho) - right(rho, L::n));
  if (seed != 0.0) {
    const Matrix hr = seed * (left(L::a, rho) + left(L::ad, rho));
    const Matrix rh = seed * (right(rho, L::a) + right(rho, L::ad));
    out += -I * (hr - rh);
  }
  return out;
}

inline Matrix full_generator(const Matrix& rho, const MeanFieldParams& p, double seed) {
  Matrix out = pump_loss(rho, p, seed);
  if (p.Gamma_prime != 0.0) out += apply_coefficients(meanfield_coefficients(moments_of(rho), p), rho);
  return out;
}

// ---------------------------------------------------------------------------
// Dynamics.

struct MeanFieldObservables {
  double n = 0.0;
  double coherent_fraction = 0.0;  // |<a>|^2 / n, 0 at n = 0
  double g2 = 0.0;                 // <a^dag a^dag a a> / n^2, NaN at n = 0
  double alpha2 = 0.0;
};

inline MeanFieldObservables observables(const Matrix& rho) {
  using L = Local;
  MeanFieldObservables o;
  o.n = left(L::n, rho).trace().real();
  const cplx a = left(L::a, rho).trace();
  o.alpha2 = std::norm(a);
  const double g2num = left(L::ad, left(L::ad, left(L::a, left(L::a, rho)))).trace().real();
  o.coherent_fraction = o.n > 0.0 ? o.alpha2 / o.n : 0.0;
  o.g2 = o.n > 0.0 ? g2num / (o.n * o.n) : std::numeric_limits<double>::quiet_NaN();
  return o;
}

struct SeedProtocol {
  double amplitude = 0.0;  // drive strength, units of kappa
  double duration = 1.0;   // applied while t kappa < duration
};

struct MeanFieldOptions {
  double dt = 0.01;
  double t_final = 100.0;
  int stride = 100;
  SeedProtocol seed;
  double trace_abort = 1e-5;
};

struct MeanFieldSample {
  double t;
  MeanFieldObservables obs;
};

struct MeanFieldTrajectory {
  std::vector<MeanFieldSample> samples;
  Matrix final_state;
  double final_residual = 0.0;  // max |d rho/dt| without seed
  EngineDiagnostics diagnostics;
};

inline MeanFieldTrajectory evolve_meanfield(Matrix rho, const MeanFieldParams& p, const MeanFieldOptions& o) {
  p.validate();
  if (!(o.dt > 0.0) || !(o.t_final >= 0.0) || o.stride < 1)
    throw ValidationError("mean-field run needs dt > 0, t_final >= 0, stride >= 1");
  if (rho.rows() != rho.cols() || rho.rows() < 2) throw ValidationError("local state must be square");
  const long steps = static_cast<long>(std::llround(o.t_final / o.dt));
  const double h = o.dt;
  const double tr0 = rho.trace().real();

  MeanFieldTrajectory out;
  out.diagnostics.dt = h;
  auto record = [&](long k) {
    if (!rho.allFinite()) throw NumericalError("mean-field state diverged at t = " + std::to_string(k * h));
    const double drift = std::abs(rho.trace() - tr0);
    if (drift > o.trace_abort)
      throw NumericalError("mean-field trace drift " + std::to_string(drift) + " exceeds " +
                           std::to_string(o.trace_abort));
    auto& d = out.diagnostics;
    d.max_trace_drift = std::max(d.max_trace_drift, drift);
    d.max_herm_defect = std::max(d.max_herm_defect, (rho - rho.adjoint()).cwiseAbs().maxCoeff());
    const Matrix herm = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(herm, Eigen::EigenvaluesOnly);
    d.min_eigenvalue = std::min(d.min_eigenvalue, es.eigenvalues()(0));
    out.samples.push_back({k * h, observables(rho)});
  };

  record(0);
  for (long k = 0; k < steps; ++k) {
    const double t = k * h;
    const double seed = (t + 0.5 * h < o.seed.duration) ? o.seed.amplitude : 0.0;
    // a blown-up stage yields garbage moments; that is an integrator failure
    auto gen = [&](const Matrix& r) {
      try {
        return full_generator(r, p, seed);
      } catch (const ValidationError& e) {
        throw NumericalError("mean-field state diverged near t = " + std::to_string(t) + " (" + e.what() +
                             "; reduce dt)");
      }
    };
    const Matrix k1 = gen(rho);
    if (!k1.allFinite()) throw NumericalError("mean-field generator not finite (RK4 unstable; reduce dt)");
    const Matrix k2 = gen(rho + 0.5 * h * k1);
    const Matrix k3 = gen(rho + 0.5 * h * k2);
    const Matrix k4 = gen(rho + h * k3);
    rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!rho.allFinite())
      throw NumericalError("mean-field state diverged at t = " + std::to_string((k + 1) * h) +
                           " (RK4 unstable; reduce dt)");
    ++out.diagnostics.steps;
    if ((k + 1) % o.stride == 0 || k + 1 == steps) record(k + 1);
  }
  out.final_residual = full_generator(rho, p, 0.0).cwiseAbs().maxCoeff();
  out.final_state = std::move(rho);
  return out;
}

struct SweepRow {
  double Gamma_prime;
  MeanFieldObservables obs;
  double residual;
  EngineDiagnostics diagnostics;
};

inline std::vector<SweepRow> transition_sweep(const MeanFieldParams& base, const std::vector<double>& grid,
                                              int n_max, const MeanFieldOptions& o, unsigned threads = 0) {
  if (!std::is_sorted(grid.begin(), grid.end())) throw ValidationError("Gamma' grid must be sorted");
  base.validate();
  return parallel_map(grid.size(), threads, [&](std::size_t i) {
    MeanFieldParams p = base;
    p.Gamma_prime = grid[i];
    const auto tr = evolve_meanfield(vacuum(n_max), p, o);
    return SweepRow{grid[i], tr.samples.back().obs, tr.final_residual, tr.diagnostics};
  });
}

}  // namespace omlat::meanfield
