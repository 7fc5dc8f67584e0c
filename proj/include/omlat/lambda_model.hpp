#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "omlat/analysis.hpp"
#include "omlat/error.hpp"
#include "omlat/fock.hpp"
#include "omlat/lindblad.hpp"
#include "omlat/parallel.hpp"

// Two-membrane Lambda system: lower photon modes a1, a2 and excited mode c.
// All rates are in units of the engineered rate Gamma_tilde.
namespace omlat::lambda {

struct LambdaParams {
  cplx E = 0.0;           // effective optomechanical drive
  double Delta = 0.0;     // drive detuning of the excited mode
  double Jtilde = 0.0;    // residual hopping between a1 and a2
  double kappa = 0.0;     // photon loss (amplitude decay rate)
  double Gamma_tilde = 1.0;
  double n_th = 0.0;      // reservoir occupation
  double chi_ratio = 0.0; // g / g'
  cplx eps1 = 0.0;
  cplx eps2 = 0.0;
  double Delta1 = 0.0;    // coherent drive detuning (frame frequency)

  void validate() const {
    if (!(kappa >= 0.0)) throw ValidationError("kappa must be >= 0");
    if (!(Gamma_tilde >= 0.0)) throw ValidationError("Gamma_tilde must be >= 0");
    if (!(n_th >= 0.0)) throw ValidationError("n_th must be >= 0");
    for (double v : {Delta, Jtilde, chi_ratio, Delta1, std::abs(E), std::abs(eps1), std::abs(eps2)})
      if (!std::isfinite(v)) throw ValidationError("Lambda-model parameters must be finite");
  }
};

struct PhysicalParams {
  double g = 0.0;
  double gprime = 0.0;
  double J = 0.0;
  double delta_omega = 1.0;
  double gamma = 0.0;   // mechanical damping
  double F = 0.0;       // drive force
  double Omega = 0.0;   // drive frequency
  double Omega_M = 0.0; // mechanical frequency
  double phi1 = 0.0;
  double phi2 = 0.0;
  double X_M = 1.0;     // zero-point length
};

struct EffectiveParams {
  LambdaParams lambda;
  cplx X1 = 0.0;
  cplx X2 = 0.0;
};

// Mechanical displacements X_l, drive E = -g J X1 / dw, rate
// Gamma_tilde = 2 (g' X_M J / dw)^2 / gamma and chi = g / g'.
inline EffectiveParams derive_effective(const PhysicalParams& p) {
  if (!(p.delta_omega > 0.0)) throw ValidationError("delta_omega must be > 0");
  if (!(p.gamma > 0.0)) throw ValidationError("mechanical damping gamma must be > 0");
  if (p.gprime == 0.0) throw ValidationError("g' must be nonzero");
  if (std::abs(p.J / p.delta_omega) > 0.2)
    warn("J / delta_omega = " + std::to_string(p.J / p.delta_omega) +
         " is not small; effective model is unreliable");
  const cplx denom(p.Omega - p.Omega_M, p.gamma / 2.0);
  if (std::abs(denom) == 0.0) throw ValidationError("division by zero in X_l");
  EffectiveParams out;
  const double amp = p.F * p.X_M * p.X_M;
  out.X1 = std::polar(1.0, -p.phi1) * amp / denom;
  out.X2 = std::polar(1.0, -p.phi2) * amp / denom;
  out.lambda.E = -p.g * p.J * out.X1 / p.delta_omega;
  const double r = p.gprime * p.X_M * p.J / p.delta_omega;
  out.lambda.Gamma_tilde = 2.0 * r * r / p.gamma;
  out.lambda.chi_ratio = p.g / p.gprime;
  return out;
}

inline ModeLayout full_layout(int n_a, int n_c) {
  return ModeLayout({"a1", "a2", "c"}, {n_a, n_a, n_c});
}

inline void require_modes(const ModeLayout& l, std::initializer_list<const char*> names) {
  for (const char* n : names)
    if (!l.contains(n)) throw ValidationError(std::string("layout is missing mode '") + n + "'");
}

// Jump operators K1 = c[a2^dag + (1+chi) a1^dag], K2 = c[a1^dag + (1+chi) a2^dag].
inline std::vector<FockOperator> engineered_jumps(const ModeLayout& l, double chi) {
  require_modes(l, {"a1", "a2", "c"});
  const auto a1d = creation(l, "a1");
  const auto a2d = creation(l, "a2");
  const auto c = lowering(l, "c");
  return {c * (a2d + (1.0 + chi) * a1d), c * (a1d + (1.0 + chi) * a2d)};
}

// Master equation in the frame rotating at the coherent drive frequency.
inline MasterEquation build_full_me(const LambdaParams& p, const ModeLayout& l) {
  p.validate();
  require_modes(l, {"a1", "a2", "c"});
  const auto a1 = lowering(l, "a1");
  const auto a2 = lowering(l, "a2");
  const auto c = lowering(l, "c");
  const auto a1d = a1.adjoint(), a2d = a2.adjoint(), cd = c.adjoint();

  FockOperator h = -p.Delta1 * (a1d * a1 + a2d * a2) - (p.Delta + p.Delta1) * (cd * c) -
                   p.Jtilde * (a1d * a2 + a2d * a1);
  const FockOperator drive = p.E * (cd * (a2 - a1));
  h += drive + drive.adjoint();
  const FockOperator pump = p.eps1 * a1d + p.eps2 * a2d;
  h += pump + pump.adjoint();

  std::vector<LindbladChannel> ch;
  for (const auto& k : engineered_jumps(l, p.chi_ratio))
    ch.push_back({k, p.Gamma_tilde * (p.n_th + 1.0)});
  if (p.n_th > 0.0)
    for (const auto& k : engineered_jumps(l, p.chi_ratio))
      ch.push_back({k.adjoint(), p.Gamma_tilde * p.n_th});
  for (const auto& a : {a1, a2, c}) ch.push_back({a, p.kappa});
  return MasterEquation(std::move(h), std::move(ch));
}

// Symmetric / antisymmetric populations, built from a1 and a2.
struct ModeObservables {
  FockOperator n_s, n_a, n_c;
};

inline ModeObservables mode_observables(const ModeLayout& l) {
  const auto a1 = lowering(l, "a1");
  const auto a2 = lowering(l, "a2");
  const cplx r = 1.0 / std::numbers::sqrt2;
  const auto as = r * (a1 + a2);
  const auto aa = r * (a1 - a2);
  return {as.adjoint() * as, aa.adjoint() * aa, number(l, "c")};
}

inline Matrix vacuum(const ModeLayout& l) {
  Matrix rho = Matrix::Zero(l.dimension(), l.dimension());
  rho(0, 0) = 1.0;
  return rho;
}

// ---------------------------------------------------------------------------
// Output spectrum of mode a2.

struct SpectrumOptions {
  int n_a = 4;
  int n_c = 2;
  double t0 = 50.0;        // minimum relaxation time before correlations
  double window = 450.0;   // correlation window
  double sample_dt = 0.1;  // correlator sampling step
  double dt = 0.0;         // RK4 step (<= 0: automatic)
  double steady_tol = 1e-8;
};

struct SpectrumRun {
  SpectrumResult spectrum;
  CorrelatorResult correlator;
  double steady_residual = 0.0;
  double steady_time = 0.0;
  EngineDiagnostics diagnostics;
  double n_s = 0.0, n_a = 0.0, n_c = 0.0;
};

inline SpectrumRun run_spectrum_experiment(const LambdaParams& p, const SpectrumOptions& o = {}) {
  if (!(o.window > 0.0) || !(o.sample_dt > 0.0))
    throw ValidationError("spectrum window and sampling step must be positive");
  const ModeLayout l = full_layout(o.n_a, o.n_c);
  const MasterEquation me = build_full_me(p, l);
  SteadyStateOptions so;
  so.t_min = o.t0;
  so.dt = o.dt;
  so.tol = o.steady_tol;
  so.t_max = std::max(1e4, 10 * o.t0);
  const auto ss = steady_state(me, vacuum(l), so);

  SpectrumRun run;
  run.steady_residual = ss.residual;
  run.steady_time = ss.t_reached;
  run.diagnostics = ss.diagnostics;
  const auto obs = mode_observables(l);
  run.n_s = ss.state.expectation(obs.n_s).real();
  run.n_a = ss.state.expectation(obs.n_a).real();
  run.n_c = ss.state.expectation(obs.n_c).real();

  const auto n = static_cast<std::size_t>(std::llround(o.window / o.sample_dt));
  std::vector<double> grid(n);
  for (std::size_t j = 0; j < n; ++j) grid[j] = static_cast<double>(j) * o.sample_dt;
  const auto a2 = lowering(l, "a2");
  run.correlator = two_time_correlator(me, ss.state.matrix(), a2.adjoint(), a2, grid, o.dt);
  run.diagnostics.steps += run.correlator.diagnostics.steps;
  run.spectrum = spectrum(run.correlator);
  return run;
}

// Spectrum heights at the symmetric (-J) and antisymmetric (+J) mode
// frequencies, each taken as the maximum within one bin of the target.
struct PeakPair {
  double symmetric_position = 0.0, symmetric_height = 0.0;
  double antisymmetric_position = 0.0, antisymmetric_height = 0.0;
};

inline PeakPair mode_peaks(const SpectrumResult& s, double jtilde) {
  PeakPair pp;
  auto best_near = [&](double target, double& pos, double& height) {
    const std::size_t c = nearest_index(s.frequencies, target);
    const std::size_t lo = c > 0 ? c - 1 : c;
    const std::size_t hi = std::min(c + 1, s.frequencies.size() - 1);
    std::size_t best = lo;
    for (std::size_t i = lo; i <= hi; ++i)
      if (s.amplitudes[i] > s.amplitudes[best]) best = i;
    pos = s.frequencies[best];
    height = s.amplitudes[best];
  };
  best_near(-jtilde, pp.symmetric_position, pp.symmetric_height);
  best_near(+jtilde, pp.antisymmetric_position, pp.antisymmetric_height);
  return pp;
}

// ---------------------------------------------------------------------------
// Detuned driving of the antisymmetric mode.

struct PopulationRow {
  double Delta1 = 0.0;
  double n_s = 0.0, n_a = 0.0, n_c = 0.0;
  double residual = 0.0;
  double min_eigenvalue = 0.0;
  EngineDiagnostics diagnostics;
};

inline PopulationRow steady_populations(const LambdaParams& p, int n_a, int n_c) {
  const ModeLayout l = full_layout(n_a, n_c);
  const MasterEquation me = build_full_me(p, l);
  const auto ss = steady_state_direct(me);
  const auto obs = mode_observables(l);
  return {p.Delta1,
          ss.state.expectation(obs.n_s).real(),
          ss.state.expectation(obs.n_a).real(),
          ss.state.expectation(obs.n_c).real(),
          ss.residual,
          ss.diagnostics.min_eigenvalue,
          ss.diagnostics};
}

inline std::vector<PopulationRow> run_detuning_sweep(const LambdaParams& p,
                                                     const std::vector<double>& delta1_grid,
                                                     int n_a = 4, int n_c = 2,
                                                     unsigned threads = 1) {
  if (std::abs(p.eps1 + p.eps2) > 1e-12 * std::max(1.0, std::abs(p.eps1)))
    throw ValidationError("detuning sweep drives the antisymmetric mode only: need eps1 = -eps2");
  return parallel_map(delta1_grid.size(), threads, [&](std::size_t i) {
    LambdaParams q = p;
    q.Delta1 = delta1_grid[i];
    return steady_populations(q, n_a, n_c);
  });
}

// ---------------------------------------------------------------------------
// Adiabatically eliminated model on the rotated modes (as, aa).

inline ModeLayout rotated_layout(int n_max) { return ModeLayout({"as", "aa"}, {n_max, n_max}); }

inline MasterEquation build_eliminated_me(const LambdaParams& p, const ModeLayout& l) {
  p.validate();
  if (p.chi_ratio != 0.0) throw ValidationError("eliminated model requires chi_ratio = 0");
  if (p.n_th != 0.0) throw ValidationError("eliminated model requires n_th = 0");
  require_modes(l, {"as", "aa"});
  const std::size_t is = l.index_of("as");
  const std::size_t ia = l.index_of("aa");
  const auto as = lowering(l, "as");
  const auto aa = lowering(l, "aa");
  const auto ns = number(l, "as");
  const auto na = number(l, "aa");
  const double e2 = std::norm(p.E);
  const double g4 = 4.0 * p.Gamma_tilde;

  Matrix shift = Matrix::Zero(l.dimension(), l.dimension());
  Matrix f = Matrix::Zero(l.dimension(), l.dimension());
  for (Index b = 0; b < l.dimension(); ++b) {
    const double nsb = l.occupation(b, is);
    const double nab = l.occupation(b, ia);
    const double gh = g4 * (nsb + 1.0);
    shift(b, b) = 2.0 * e2 * p.Delta / (p.Delta * p.Delta + gh * gh) * nab;
    f(b, b) = 1.0 / cplx(gh, p.Delta);
  }
  FockOperator h(l, shift);
  h += -p.Delta1 * (ns + na) - p.Jtilde * (ns - na);
  const cplx r = 1.0 / std::numbers::sqrt2;
  const FockOperator pump =
      r * (p.eps1 + p.eps2) * as.adjoint() + r * (p.eps1 - p.eps2) * aa.adjoint();
  h += pump + pump.adjoint();

  const FockOperator k = as.adjoint() * FockOperator(l, f) * aa;
  std::vector<LindbladChannel> ch{{k, 8.0 * e2 * p.Gamma_tilde}, {as, p.kappa}, {aa, p.kappa}};
  return MasterEquation(std::move(h), std::move(ch));
}

// ---------------------------------------------------------------------------
// Separable approximation of the state in the (as, aa, c) basis.

struct SeparabilityRow {
  double E = 0.0;
  double population_ratio = 0.0;  // <n_s> / <n_a>
  double trace_sep = 0.0;
  double trace_sep_swapped = 0.0;  // selection on the antisymmetric occupation
  double n_s = 0.0, n_a = 0.0, n_c = 0.0;
  double decomposition_defect = 0.0;  // max |rho - rho_sep - sigma_ent|
  double min_eigenvalue = 0.0;
  EngineDiagnostics diagnostics;
};

struct SeparableDecomposition {
  Matrix rho_rotated;  // state in (as, aa, c) coordinates
  Matrix rho_sep;
  Matrix sigma_ent;
  double trace_sep = 0.0;
};

// rho is given on layout (a1, a2, c). For every eigenvector the symmetric
// occupation with the largest weight at n_c = 0 is kept; ties go to the
// smaller occupation. `select_antisymmetric` swaps the roles of the two
// rotated modes (diagnostic only).
inline SeparableDecomposition separable_decomposition(const ModeLayout& l, const Matrix& rho,
                                                      bool select_antisymmetric = false) {
  require_modes(l, {"a1", "a2", "c"});
  const FockOperator u = mode_rotation_symm_antisymm(l, "a1", "a2");
  SeparableDecomposition out;
  out.rho_rotated = u.matrix().adjoint() * rho * u.matrix();
  const auto eig = eig_hermitian(FockOperator(l, out.rho_rotated), 1e-8);
  std::size_t i1 = l.index_of("a1");
  std::size_t i2 = l.index_of("a2");
  if (select_antisymmetric) std::swap(i1, i2);
  const std::size_t ic = l.index_of("c");
  const int nmax = l.cutoff(i1);

  out.rho_sep = Matrix::Zero(l.dimension(), l.dimension());
  for (Index lam = 0; lam < eig.values.size(); ++lam) {
    const double p = eig.values(lam);
    const auto psi = eig.vectors.col(lam);
    int best = 0;
    double best_w = -1.0;
    for (int ns = 0; ns <= nmax; ++ns) {
      double w = 0.0;
      for (int na = 0; na <= nmax; ++na) {
        std::vector<int> occ(l.modes(), 0);
        occ[i1] = ns;
        occ[i2] = na;
        occ[ic] = 0;
        w += std::norm(psi(l.basis_index(occ)));
      }
      if (w > best_w * (1.0 + 1e-12) + 1e-300) {
        best_w = w;
        best = ns;
      }
    }
    Vector v = Vector::Zero(l.dimension());
    for (int na = 0; na <= nmax; ++na) {
      std::vector<int> occ(l.modes(), 0);
      occ[i1] = best;
      occ[i2] = na;
      const Index b = l.basis_index(occ);
      v(b) = psi(b);
    }
    out.rho_sep += p * v * v.adjoint();
  }
  out.trace_sep = out.rho_sep.trace().real();
  out.sigma_ent = out.rho_rotated - out.rho_sep;
  return out;
}

struct SeparabilityOptions {
  int n_a = 5;
  int n_c = 1;
  double t_max = 10.0;
  double dt = 0.0;
};

inline SeparabilityRow separability_point(const LambdaParams& p, const SeparabilityOptions& o) {
  const ModeLayout l = full_layout(o.n_a, o.n_c);
  const MasterEquation me = build_full_me(p, l);
  EvolveOptions eo;
  eo.dt = o.dt;
  eo.t_final = o.t_max;
  eo.stride = 1 << 30;
  const auto tr = evolve_rk4(me, vacuum(l), eo);
  const Matrix& rho = tr.final_state;
  const auto dec = separable_decomposition(l, rho);
  const auto obs = mode_observables(l);
  SeparabilityRow row;
  row.E = std::abs(p.E);
  row.n_s = (obs.n_s.matrix() * rho).trace().real();
  row.n_a = (obs.n_a.matrix() * rho).trace().real();
  row.n_c = (obs.n_c.matrix() * rho).trace().real();
  row.population_ratio = row.n_s / row.n_a;
  row.trace_sep = dec.trace_sep;
  row.trace_sep_swapped = separable_decomposition(l, rho, true).trace_sep;
  row.decomposition_defect =
      (dec.rho_rotated - dec.rho_sep - dec.sigma_ent).cwiseAbs().maxCoeff();
  row.min_eigenvalue = tr.diagnostics.min_eigenvalue;
  row.diagnostics = tr.diagnostics;
  return row;
}

inline std::vector<SeparabilityRow> separability_scan(const LambdaParams& p,
                                                      const std::vector<double>& e_grid,
                                                      const SeparabilityOptions& o = {},
                                                      unsigned threads = 1) {
  return parallel_map(e_grid.size(), threads, [&](std::size_t i) {
    LambdaParams q = p;
    q.E = e_grid[i];
    return separability_point(q, o);
  });
}

}  // namespace omlat::lambda
