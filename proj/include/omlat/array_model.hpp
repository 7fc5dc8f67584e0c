#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "omlat/analysis.hpp"
#include "omlat/error.hpp"
#include "omlat/fock.hpp"
#include "omlat/parallel.hpp"

// Membrane array with L doublets: one lower mode a_l per site and one excited
// mode c_l per link, periodic boundaries. Sites are 1-based in the physics
// (parity (-1)^l) and stored 0-based.
namespace omlat::array {

struct ArrayParams {
  int L = 12;
  cplx E = 0.2;
  double Delta = -10.0;
  double chi = 0.0;
  double Gamma_tilde = 1.0;

  void validate() const {
    if (L < 2) throw ValidationError("array needs L >= 2");
    if (!(Gamma_tilde >= 0.0)) throw ValidationError("Gamma_tilde must be >= 0");
    if (!std::isfinite(Delta) || !std::isfinite(chi) || !std::isfinite(std::abs(E)))
      throw ValidationError("array parameters must be finite");
  }
};

enum class Band { a, c };

struct Mode {
  Band band;
  int site;  // 0-based
  auto operator<=>(const Mode&) const = default;
};

// coeff * create^dag * annihilate
struct BilinearTerm {
  cplx coeff;
  Mode create;
  Mode annihilate;
};

struct JumpOperator {
  std::string label;
  std::vector<BilinearTerm> terms;

  // Merge equal mode pairs, drop zeros, sort.
  void canonicalize(double drop = 0.0) {
    std::map<std::pair<Mode, Mode>, cplx> acc;
    for (const auto& t : terms) acc[{t.create, t.annihilate}] += t.coeff;
    terms.clear();
    for (const auto& [k, v] : acc)
      if (std::abs(v) > drop) terms.push_back({v, k.first, k.second});
  }

  bool lower_band_only() const {
    return std::all_of(terms.begin(), terms.end(), [](const BilinearTerm& t) {
      return t.create.band == Band::a && t.annihilate.band == Band::a;
    });
  }
};

inline int wrap(int site, int L) { return ((site % L) + L) % L; }

// (-1)^l for the 1-based site of 0-based index s
inline double parity(int s) { return (s % 2 == 0) ? -1.0 : 1.0; }

// K_{2l-1} = chi a_l^dag (c_{l-1} + c_l) + (a_l^dag + a_{l+1}^dag) c_l
// K_{2l}   = chi a_{l+1}^dag (c_l + c_{l+1}) + (a_l^dag + a_{l+1}^dag) c_l
inline std::vector<JumpOperator> full_jump_ops(const ArrayParams& p) {
  p.validate();
  const int L = p.L;
  std::vector<JumpOperator> out;
  for (int l = 0; l < L; ++l) {
    const Mode al{Band::a, l}, an{Band::a, wrap(l + 1, L)};
    const Mode cp{Band::c, wrap(l - 1, L)}, cl{Band::c, l}, cn{Band::c, wrap(l + 1, L)};
    JumpOperator odd{"K" + std::to_string(2 * l + 1),
                     {{p.chi, al, cp}, {p.chi, al, cl}, {1.0, al, cl}, {1.0, an, cl}}};
    JumpOperator even{"K" + std::to_string(2 * l + 2),
                      {{p.chi, an, cl}, {p.chi, an, cn}, {1.0, al, cl}, {1.0, an, cl}}};
    odd.canonicalize();
    even.canonicalize();
    out.push_back(std::move(odd));
    out.push_back(std::move(even));
  }
  return out;
}

// Replace every c_l by (-1)^l (E/Delta)(a_l - a_{l+1}).
inline JumpOperator substitute_adiabatic(const JumpOperator& k, const ArrayParams& p) {
  if (p.Delta == 0.0) throw ValidationError("adiabatic substitution needs Delta != 0");
  const cplx ratio = p.E / p.Delta;
  JumpOperator out{k.label, {}};
  for (const auto& t : k.terms) {
    if (t.annihilate.band == Band::a) {
      out.terms.push_back(t);
      continue;
    }
    const int l = t.annihilate.site;
    const cplx f = t.coeff * parity(l) * ratio;
    out.terms.push_back({f, t.create, {Band::a, l}});
    out.terms.push_back({-f, t.create, {Band::a, wrap(l + 1, p.L)}});
  }
  out.canonicalize();
  return out;
}

inline std::vector<JumpOperator> reduced_jump_ops(const ArrayParams& p) {
  std::vector<JumpOperator> out;
  for (const auto& k : full_jump_ops(p)) out.push_back(substitute_adiabatic(k, p));
  return out;
}

// The reduced operators written out term by term:
// K_{2l-1} ~ (2chi+1) n_l - n_{l+1} - (1+chi) a_l^dag a_{l+1} + a_{l+1}^dag a_l - chi a_l^dag a_{l-1}
// K_{2l}   ~ n_l - (2chi+1) n_{l+1} + (1+chi) a_{l+1}^dag a_l - a_l^dag a_{l+1} + chi a_{l+1}^dag a_{l+2}
// with common prefactor (-1)^l E/Delta. Collecting terms this way assumes
// neighbouring sites carry opposite signs, which fails across the seam of an
// odd ring; only even L is accepted here.
inline std::vector<JumpOperator> reduced_jump_ops_explicit(const ArrayParams& p) {
  p.validate();
  if (p.Delta == 0.0) throw ValidationError("reduced operators need Delta != 0");
  if (p.L % 2 != 0) throw ValidationError("closed-form reduced operators need even L");
  const int L = p.L;
  const double x = p.chi;
  std::vector<JumpOperator> out;
  for (int l = 0; l < L; ++l) {
    const cplx s = parity(l) * p.E / p.Delta;
    auto a = [&](int off) { return Mode{Band::a, wrap(l + off, L)}; };
    JumpOperator odd{"K" + std::to_string(2 * l + 1),
                     {{s * (2 * x + 1), a(0), a(0)},
                      {-s, a(1), a(1)},
                      {-s * (1 + x), a(0), a(1)},
                      {s, a(1), a(0)},
                      {-s * x, a(0), a(-1)}}};
    JumpOperator even{"K" + std::to_string(2 * l + 2),
                      {{s, a(0), a(0)},
                       {-s * (2 * x + 1), a(1), a(1)},
                       {s * (1 + x), a(1), a(0)},
                       {-s, a(0), a(1)},
                       {s * x, a(1), a(2)}}};
    odd.canonicalize();
    even.canonicalize();
    out.push_back(std::move(odd));
    out.push_back(std::move(even));
  }
  return out;
}

// Largest coefficient mismatch between two operators (after merging terms).
inline double max_coefficient_difference(JumpOperator x, JumpOperator y) {
  x.canonicalize();
  y.canonicalize();
  std::map<std::pair<Mode, Mode>, cplx> diff;
  for (const auto& t : x.terms) diff[{t.create, t.annihilate}] += t.coeff;
  for (const auto& t : y.terms) diff[{t.create, t.annihilate}] -= t.coeff;
  double m = 0.0;
  for (const auto& [k, v] : diff) m = std::max(m, std::abs(v));
  return m;
}

struct LatticeJumpOps {
  std::vector<JumpOperator> full;
  std::vector<JumpOperator> reduced;
};

inline LatticeJumpOps lattice_jump_ops(const ArrayParams& p) {
  return {full_jump_ops(p), reduced_jump_ops(p)};
}

// ---------------------------------------------------------------------------
// Dark-state checks.

// L x L matrix of a reduced (lower-band) operator in the one-photon sector.
inline Matrix single_particle_matrix(const JumpOperator& k, int L) {
  if (!k.lower_band_only()) throw ValidationError("operator acts on the excited band");
  Matrix m = Matrix::Zero(L, L);
  for (const auto& t : k.terms) m(t.create.site, t.annihilate.site) += t.coeff;
  return m;
}

inline Vector plane_wave(int L, double k) {
  Vector v(L);
  for (int l = 0; l < L; ++l) v(l) = std::polar(1.0 / std::sqrt(static_cast<double>(L)), k * (l + 1));
  return v;
}

// Max over reduced operators of |K |k>| for the one-photon plane wave.
inline double single_particle_residual(const ArrayParams& p, double k) {
  const Vector psi = plane_wave(p.L, k);
  double r = 0.0;
  for (const auto& op : reduced_jump_ops(p)) r = std::max(r, (single_particle_matrix(op, p.L) * psi).norm());
  return r;
}

namespace detail {

// a_i^dag a_j applied to a state vector on L sites with per-site cutoff n.
inline void add_hopping(const ModeLayout& l, int i, int j, cplx c, const Vector& psi, Vector& out) {
  const auto si = static_cast<std::size_t>(i), sj = static_cast<std::size_t>(j);
  const int cut = l.cutoff(si);
  for (Index b = 0; b < psi.size(); ++b) {
    if (psi(b) == cplx(0.0)) continue;
    const int nj = l.occupation(b, sj);
    if (nj == 0) continue;
    double amp = std::sqrt(static_cast<double>(nj));
    Index target = b - l.stride(sj);
    const int ni = (i == j) ? nj - 1 : l.occupation(b, si);
    if (ni + 1 > cut) continue;
    amp *= std::sqrt(static_cast<double>(ni + 1));
    target += l.stride(si);
    out(target) += c * amp * psi(b);
  }
}

}  // namespace detail

// (sum_l a_l^dag)^N |0> / norm on L sites, each truncated at N photons.
inline Vector condensate_state(const ModeLayout& l, int photons) {
  Vector psi = Vector::Zero(l.dimension());
  psi(0) = 1.0;
  for (int n = 0; n < photons; ++n) {
    Vector next = Vector::Zero(l.dimension());
    for (std::size_t m = 0; m < l.modes(); ++m) {
      for (Index b = 0; b < psi.size(); ++b) {
        if (psi(b) == cplx(0.0)) continue;
        const int o = l.occupation(b, m);
        if (o + 1 > l.cutoff(m)) continue;
        next(b + l.stride(m)) += std::sqrt(static_cast<double>(o + 1)) * psi(b);
      }
    }
    psi = next;
  }
  return psi / psi.norm();
}

// Brute-force max |K psi| over reduced operators for the N-photon k = 0 state.
inline double condensate_residual(const ArrayParams& p, int photons) {
  if (photons < 0) throw ValidationError("photon number must be >= 0");
  std::vector<std::string> names;
  for (int l = 0; l < p.L; ++l) names.push_back("a" + std::to_string(l + 1));
  const ModeLayout layout(names, std::vector<int>(p.L, std::max(photons, 1)));
  const Vector psi = condensate_state(layout, photons);
  double r = 0.0;
  for (const auto& op : reduced_jump_ops(p)) {
    Vector out = Vector::Zero(psi.size());
    for (const auto& t : op.terms)
      detail::add_hopping(layout, t.create.site, t.annihilate.site, t.coeff, psi, out);
    r = std::max(r, out.norm());
  }
  return r;
}

struct DarkStateCheck {
  double k = 0.0;
  double single_particle = 0.0;
  double condensate = 0.0;  // only evaluated at k = 0 (else 0)
  double e_ik_minus_1 = 0.0;
};

inline DarkStateCheck momentum_dark_state_check(const ArrayParams& p, double k, int max_photons = 3) {
  const double m = k * p.L / (2.0 * std::numbers::pi);
  if (std::abs(m - std::round(m)) > 1e-9)
    throw ValidationError("k must lie on the grid 2 pi m / L");
  DarkStateCheck out;
  out.k = k;
  out.single_particle = single_particle_residual(p, k);
  out.e_ik_minus_1 = std::abs(std::polar(1.0, k) - 1.0);
  if (std::abs(std::remainder(k, 2.0 * std::numbers::pi)) < 1e-12)
    for (int n = 1; n <= max_photons; ++n) out.condensate = std::max(out.condensate, condensate_residual(p, n));
  return out;
}

// ---------------------------------------------------------------------------
// Semiclassical dynamics.

struct SemiclassicalState {
  Vector alpha;  // <a_l>, per site
  Vector c_amp;  // <c_l>, per link

  double norm() const { return alpha.squaredNorm() + c_amp.squaredNorm(); }
};

struct RelativePhases {
  std::vector<double> phi;
  std::vector<bool> flagged;  // zero amplitude on either end
};

// phi_l = Arg[alpha_l alpha_{l+1}^*], in (-pi, pi]
inline RelativePhases relative_phases(const Vector& alpha) {
  const Index L = alpha.size();
  RelativePhases r;
  for (Index l = 0; l < L; ++l) {
    const cplx z = alpha(l) * std::conj(alpha((l + 1) % L));
    if (z == cplx(0.0)) {
      r.phi.push_back(std::numeric_limits<double>::quiet_NaN());
      r.flagged.push_back(true);
      continue;
    }
    double ph = std::arg(z);
    if (ph <= -std::numbers::pi) ph += 2.0 * std::numbers::pi;
    r.phi.push_back(ph);
    r.flagged.push_back(false);
  }
  return r;
}

inline RelativePhases relative_phases(const SemiclassicalState& s) { return relative_phases(s.alpha); }

// Factorized drift of <a_l>, <c_l> under H_ph + H_D and Gamma_tilde Lambda[K]
// for the two-band operators. Precomputes the operator lists.
class SemiclassicalModel {
 public:
  explicit SemiclassicalModel(const ArrayParams& p) : p_(p), jumps_(full_jump_ops(p)) {}

  const ArrayParams& params() const { return p_; }

  void derivative(const Vector& alpha, const Vector& c, Vector& da, Vector& dc) const {
    const int L = p_.L;
    const cplx E = p_.E;
    da.setZero(L);
    dc.setZero(L);
    for (int m = 0; m < L; ++m) {
      const int prev = wrap(m - 1, L);
      da(m) = -I * std::conj(E) * (parity(m) * c(m) - parity(prev) * c(prev));
      dc(m) = -I * (-p_.Delta * c(m) + parity(m) * E * (alpha(m) - alpha(wrap(m + 1, L))));
    }
    const double g = p_.Gamma_tilde;
    for (const auto& k : jumps_) {
      cplx kv = 0.0;
      for (const auto& t : k.terms) kv += t.coeff * std::conj(alpha(t.create.site)) * c(t.annihilate.site);
      for (const auto& t : k.terms) {
        da(t.create.site) += g * std::conj(kv) * t.coeff * c(t.annihilate.site);
        dc(t.annihilate.site) -= g * std::conj(t.coeff) * alpha(t.create.site) * kv;
      }
    }
  }

  SemiclassicalState derivative(const SemiclassicalState& s) const {
    SemiclassicalState d;
    derivative(s.alpha, s.c_amp, d.alpha, d.c_amp);
    return d;
  }

 private:
  ArrayParams p_;
  std::vector<JumpOperator> jumps_;
};

inline SemiclassicalState semiclassical_eom(const ArrayParams& p, const SemiclassicalState& s) {
  if (s.alpha.size() != p.L || s.c_amp.size() != p.L)
    throw ValidationError("semiclassical state not sized for L");
  return SemiclassicalModel(p).derivative(s);
}

// Uniform |alpha_l| = amplitude, phases uniform in (-pi, pi], c = 0.
inline SemiclassicalState random_phase_state(int L, double amplitude, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-std::numbers::pi, std::numbers::pi);
  SemiclassicalState s;
  s.alpha.resize(L);
  s.c_amp = Vector::Zero(L);
  for (int l = 0; l < L; ++l) s.alpha(l) = std::polar(amplitude, u(rng));
  return s;
}

struct SemiclassicalSample {
  double t = 0.0;
  std::vector<double> c2;      // |c_l|^2
  std::vector<double> alpha2;  // |alpha_l|^2
  std::vector<double> phi;
  double c2_total = 0.0;
  double norm = 0.0;
};

struct SemiclassicalRun {
  std::vector<SemiclassicalSample> samples;
  SemiclassicalState final_state;
  double max_norm_drift = 0.0;
};

inline SemiclassicalRun evolve_semiclassical(const ArrayParams& p, SemiclassicalState s, double dt,
                                             double t_final, int stride) {
  if (!(dt > 0.0) || !(t_final >= 0.0) || stride < 1)
    throw ValidationError("semiclassical run needs dt > 0, t_final >= 0, stride >= 1");
  const SemiclassicalModel model(p);
  const int L = p.L;
  if (s.alpha.size() != L || s.c_amp.size() != L) throw ValidationError("state not sized for L");
  const long steps = static_cast<long>(std::ceil(t_final / dt - 1e-9));
  const double h = steps > 0 ? t_final / steps : dt;
  const double n0 = s.norm();

  SemiclassicalRun run;
  auto record = [&](long n) {
    if (!s.alpha.allFinite() || !s.c_amp.allFinite())
      throw NumericalError("semiclassical state diverged at t = " + std::to_string(n * h));
    SemiclassicalSample smp;
    smp.t = n * h;
    for (int l = 0; l < L; ++l) {
      smp.c2.push_back(std::norm(s.c_amp(l)));
      smp.alpha2.push_back(std::norm(s.alpha(l)));
    }
    smp.phi = relative_phases(s.alpha).phi;
    smp.c2_total = s.c_amp.squaredNorm();
    smp.norm = s.norm();
    run.max_norm_drift = std::max(run.max_norm_drift, std::abs(smp.norm - n0));
    run.samples.push_back(std::move(smp));
  };

  Vector ka[4], kc[4], ya, yc;
  record(0);
  for (long n = 1; n <= steps; ++n) {
    model.derivative(s.alpha, s.c_amp, ka[0], kc[0]);
    ya = s.alpha + 0.5 * h * ka[0];
    yc = s.c_amp + 0.5 * h * kc[0];
    model.derivative(ya, yc, ka[1], kc[1]);
    ya = s.alpha + 0.5 * h * ka[1];
    yc = s.c_amp + 0.5 * h * kc[1];
    model.derivative(ya, yc, ka[2], kc[2]);
    ya = s.alpha + h * ka[2];
    yc = s.c_amp + h * kc[2];
    model.derivative(ya, yc, ka[3], kc[3]);
    s.alpha += (h / 6.0) * (ka[0] + 2.0 * ka[1] + 2.0 * ka[2] + ka[3]);
    s.c_amp += (h / 6.0) * (kc[0] + 2.0 * kc[1] + 2.0 * kc[2] + kc[3]);
    if (n % stride == 0 || n == steps) record(n);
  }
  run.final_state = std::move(s);
  return run;
}

// ---------------------------------------------------------------------------
// Single-particle transformation of the double-well chain.

struct TransformationDefects {
  double orthogonality = 0.0;  // max |M M^T - 1|
  double off_diagonal = 0.0;   // max off-diagonal |M H M^-1|
};

inline Eigen::MatrixXd chain_hamiltonian(double J, int L) {
  const int n = 2 * L;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    h(i, i) = (i % 2 == 0) ? -0.5 : 0.5;
    h(i, (i + 1) % n) = J;
    h((i + 1) % n, i) = J;
  }
  return h;
}

inline Eigen::MatrixXd chain_transformation(double J, int L) {
  const int n = 2 * L;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    m(i, i) = (i % 2 == 0) ? -1.0 : 1.0;
    m(i, (i + 1) % n) = J;
    m((i + 1) % n, i) = J;
  }
  return m;
}

inline TransformationDefects appendixA_transformation_check(double J, int L) {
  if (L < 2) throw ValidationError("transformation check needs L >= 2");
  if (!(std::abs(J) < 0.5)) throw ValidationError("transformation check needs |J| < 0.5");
  const Eigen::MatrixXd h = chain_hamiltonian(J, L);
  const Eigen::MatrixXd m = chain_transformation(J, L);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  if (!lu.isInvertible()) throw NumericalError("transformation matrix is singular");
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(2 * L, 2 * L);
  TransformationDefects d;
  d.orthogonality = (m * m.transpose() - eye).cwiseAbs().maxCoeff();
  Eigen::MatrixXd t = m * h * lu.inverse();
  t.diagonal().setZero();
  d.off_diagonal = t.cwiseAbs().maxCoeff();
  return d;
}

}  // namespace omlat::array
