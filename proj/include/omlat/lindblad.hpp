#pragma once

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "omlat/error.hpp"
#include "omlat/fock.hpp"

namespace omlat {

using SparseMatrix = Eigen::SparseMatrix<cplx>;

namespace detail {

// Coordinate list of the nonzero entries of a small operator. The products
// below are tuned for column-major dense operands.
struct CooOperator {
  std::vector<Index> row, col;
  std::vector<cplx> val;

  static CooOperator from_dense(const Matrix& m) {
    CooOperator op;
    for (Index j = 0; j < m.cols(); ++j)
      for (Index i = 0; i < m.rows(); ++i)
        if (m(i, j) != cplx(0.0)) {
          op.row.push_back(i);
          op.col.push_back(j);
          op.val.push_back(m(i, j));
        }
    return op;
  }

  std::size_t nnz() const { return val.size(); }

  // out = op * x
  void left(const Matrix& x, Matrix& out) const {
    out.setZero();
    const std::size_t n = nnz();
    const Index rows = x.rows();
    for (Index c = 0; c < x.cols(); ++c) {
      const double* xc = reinterpret_cast<const double*>(x.data() + c * rows);
      double* oc = reinterpret_cast<double*>(out.data() + c * rows);
      for (std::size_t e = 0; e < n; ++e) {
        const double vr = val[e].real(), vi = val[e].imag();
        const double xr = xc[2 * col[e]], xi = xc[2 * col[e] + 1];
        oc[2 * row[e]] += vr * xr - vi * xi;
        oc[2 * row[e] + 1] += vr * xi + vi * xr;
      }
    }
  }

  // out += x * op^dag
  void right_adjoint_add(const Matrix& x, Matrix& out) const {
    const Index rows = x.rows();
    for (std::size_t e = 0; e < nnz(); ++e) {
      const double vr = val[e].real(), vi = -val[e].imag();
      const double* xc = reinterpret_cast<const double*>(x.data() + col[e] * rows);
      double* oc = reinterpret_cast<double*>(out.data() + row[e] * rows);
      for (Index i = 0; i < rows; ++i) {
        const double xr = xc[2 * i], xi = xc[2 * i + 1];
        oc[2 * i] += vr * xr - vi * xi;
        oc[2 * i + 1] += vr * xi + vi * xr;
      }
    }
  }

  SparseMatrix sparse(Index d) const {
    std::vector<Eigen::Triplet<cplx>> t;
    for (std::size_t e = 0; e < nnz(); ++e) t.emplace_back(row[e], col[e], val[e]);
    SparseMatrix m(d, d);
    m.setFromTriplets(t.begin(), t.end());
    return m;
  }
};

}  // namespace detail

struct LindbladChannel {
  FockOperator jump;
  double rate = 0.0;
};

// L rho = -i[H, rho] + sum_k rate_k (2 K rho K^dag - K^dag K rho - rho K^dag K)
//
// Internally compiled to sparse form: with A = -iH - sum rate K^dag K,
// L rho = A rho + rho A^dag + sum (sqrt(2 rate) K) rho (sqrt(2 rate) K)^dag.
class MasterEquation {
 public:
  MasterEquation(FockOperator hamiltonian, std::vector<LindbladChannel> channels,
                 double herm_tol = 1e-9)
      : h_(std::move(hamiltonian)), channels_(std::move(channels)) {
    const double defect = h_.hermiticity_defect();
    if (defect > herm_tol)
      throw ValidationError("Hamiltonian not Hermitian (defect " + std::to_string(defect) + ")");
    for (const auto& c : channels_) {
      h_.check_same(c.jump);
      if (!(c.rate >= 0.0) || !std::isfinite(c.rate))
        throw ValidationError("Lindblad rate must be finite and nonnegative");
    }
    compile();
  }

  const ModeLayout& layout() const { return h_.layout(); }
  Index dimension() const { return h_.dimension(); }
  const FockOperator& hamiltonian() const { return h_; }
  const std::vector<LindbladChannel>& channels() const { return channels_; }

  // out = L rho. `out` must not alias `rho`.
  void apply(const Matrix& rho, Matrix& out) const {
    a_.left(rho, out);
    a_.right_adjoint_add(rho, out);
    for (const auto& k : jumps_) {
      k.left(rho, tmp_);
      k.right_adjoint_add(tmp_, out);
    }
  }

  // Same as apply() for Hermitian rho, using rho A^dag = (A rho)^dag.
  void apply_hermitian(const Matrix& rho, Matrix& out) const {
    a_.left(rho, tmp_);
    out = tmp_ + tmp_.adjoint();
    for (const auto& k : jumps_) {
      k.left(rho, tmp_);
      k.right_adjoint_add(tmp_, out);
    }
  }

  Matrix apply(const Matrix& rho) const {
    check_shape(rho);
    Matrix out(rho.rows(), rho.cols());
    apply(rho, out);
    return out;
  }

  FockOperator apply(const FockOperator& rho) const {
    h_.check_same(rho);
    return {layout(), apply(rho.matrix())};
  }

  // Upper bound on the spectral radius of L, used to pick stable RK4 steps.
  double norm_bound() const { return norm_bound_; }

  // Default RK4 step, about a third of the stability limit (|h lambda| <= 2.78).
  double default_dt() const { return norm_bound_ > 0.0 ? 1.0 / norm_bound_ : 1.0; }

  // Column-stacking vectorization: vec(L rho) = S vec(rho).
  SparseMatrix superoperator() const {
    const Index d = dimension();
    SparseMatrix id(d, d);
    id.setIdentity();
    const SparseMatrix a = a_.sparse(d);
    SparseMatrix s = Eigen::kroneckerProduct(id, a).eval();
    s += Eigen::kroneckerProduct(SparseMatrix(a.conjugate()), id).eval();
    for (const auto& kc : jumps_) {
      const SparseMatrix k = kc.sparse(d);
      s += Eigen::kroneckerProduct(SparseMatrix(k.conjugate()), k).eval();
    }
    s.makeCompressed();
    return s;
  }

  void check_shape(const Matrix& rho) const {
    if (rho.rows() != dimension() || rho.cols() != dimension())
      throw ValidationError("state dimension does not match master equation layout");
  }

 private:
  void compile() {
    const Index d = dimension();
    Matrix a = -I * h_.matrix();
    // |L|_HS <= spread(H) + sum 4 rate |K|^2 bounds the spectral radius.
    Eigen::SelfAdjointEigenSolver<Matrix> hs(h_.matrix(), Eigen::EigenvaluesOnly);
    double bound = hs.eigenvalues().maxCoeff() - hs.eigenvalues().minCoeff();
    for (const auto& c : channels_) {
      if (c.rate == 0.0) continue;
      const Matrix& k = c.jump.matrix();
      const Matrix kdk = k.adjoint() * k;
      a -= c.rate * kdk;
      Eigen::SelfAdjointEigenSolver<Matrix> ks(kdk, Eigen::EigenvaluesOnly);
      bound += 4.0 * c.rate * ks.eigenvalues().maxCoeff();
      jumps_.push_back(detail::CooOperator::from_dense(std::sqrt(2.0 * c.rate) * k));
    }
    a_ = detail::CooOperator::from_dense(a);
    norm_bound_ = bound;
    tmp_.resize(d, d);
  }

  FockOperator h_;
  std::vector<LindbladChannel> channels_;
  detail::CooOperator a_;
  std::vector<detail::CooOperator> jumps_;
  double norm_bound_ = 0.0;
  // Scratch buffer; makes apply() non-reentrant. Copy the equation per thread.
  mutable Matrix tmp_;
};

inline FockOperator lindblad_apply(const MasterEquation& me, const FockOperator& rho) {
  return me.apply(rho);
}

// ---------------------------------------------------------------------------
// RK4 propagation.

struct Observable {
  std::string name;
  FockOperator op;
};

struct EvolveOptions {
  double dt = 0.0;       // <= 0: use MasterEquation::default_dt()
  double t_final = 0.0;  // integration length
  int stride = 1;        // record every `stride` steps
  bool check_positivity = true;
};

struct EngineDiagnostics {
  double max_trace_drift = 0.0;
  double max_herm_defect = 0.0;
  double min_eigenvalue = 1.0;
  long steps = 0;
  double dt = 0.0;

  void merge(const EngineDiagnostics& o) {
    max_trace_drift = std::max(max_trace_drift, o.max_trace_drift);
    max_herm_defect = std::max(max_herm_defect, o.max_herm_defect);
    min_eigenvalue = std::min(min_eigenvalue, o.min_eigenvalue);
    steps += o.steps;
  }
};

struct Trajectory {
  std::vector<double> t;
  std::vector<std::string> names;
  std::vector<std::vector<cplx>> values;  // values[sample][observable]
  Matrix final_state;
  EngineDiagnostics diagnostics;
};

namespace detail {

class Rk4Workspace {
 public:
  explicit Rk4Workspace(Index d)
      : k1(d, d), k2(d, d), k3(d, d), k4(d, d), y(d, d) {}

  // Classic RK4 step for an autonomous linear generator. `hermitian` selects
  // the cheaper kernel valid when rho (and hence every stage) is Hermitian.
  void step(const MasterEquation& me, Matrix& rho, double h, bool hermitian) {
    auto f = [&](const Matrix& in, Matrix& out) {
      if (hermitian)
        me.apply_hermitian(in, out);
      else
        me.apply(in, out);
    };
    f(rho, k1);
    y = rho + (0.5 * h) * k1;
    f(y, k2);
    y = rho + (0.5 * h) * k2;
    f(y, k3);
    y = rho + h * k3;
    f(y, k4);
    rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

  Matrix k1, k2, k3, k4, y;
};

inline void record_diagnostics(const Matrix& rho, bool positivity, EngineDiagnostics& d,
                               double t) {
  if (!rho.allFinite())
    throw NumericalError("non-finite density matrix at t = " + std::to_string(t) +
                         "; reduce dt");
  d.max_trace_drift = std::max(d.max_trace_drift, std::abs(rho.trace() - 1.0));
  d.max_herm_defect = std::max(d.max_herm_defect, (rho - rho.adjoint()).cwiseAbs().maxCoeff());
  if (positivity) {
    Matrix sym = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
    d.min_eigenvalue = std::min(d.min_eigenvalue, es.eigenvalues().minCoeff());
  }
}

inline std::pair<long, double> step_plan(double t_final, double dt) {
  if (!(dt > 0.0)) throw ValidationError("time step must be positive");
  if (!(t_final >= 0.0)) throw ValidationError("integration time must be nonnegative");
  const long n = static_cast<long>(std::ceil(t_final / dt - 1e-9));
  return {n, n > 0 ? t_final / static_cast<double>(n) : dt};
}

}  // namespace detail

inline Trajectory evolve_rk4(const MasterEquation& me, const Matrix& rho0,
                             const EvolveOptions& opt,
                             const std::vector<Observable>& observables = {}) {
  me.check_shape(rho0);
  for (const auto& o : observables) me.hamiltonian().check_same(o.op);
  if (opt.stride < 1) throw ValidationError("output stride must be >= 1");
  const double dt_req = opt.dt > 0.0 ? opt.dt : me.default_dt();
  if (dt_req * me.norm_bound() > 2.5)
    warn("dt = " + std::to_string(dt_req) + " is close to the RK4 stability limit");
  const auto [steps, h] = detail::step_plan(opt.t_final, dt_req);

  Trajectory tr;
  for (const auto& o : observables) tr.names.push_back(o.name);
  tr.diagnostics.dt = h;
  Matrix rho = rho0;
  const bool hermitian = (rho - rho.adjoint()).cwiseAbs().maxCoeff() <= 1e-12;
  detail::Rk4Workspace ws(me.dimension());

  auto sample = [&](long n) {
    const double t = n * h;
    detail::record_diagnostics(rho, opt.check_positivity, tr.diagnostics, t);
    tr.t.push_back(t);
    std::vector<cplx> row;
    row.reserve(observables.size());
    for (const auto& o : observables) row.push_back((o.op.matrix() * rho).trace());
    tr.values.push_back(std::move(row));
  };

  sample(0);
  for (long n = 1; n <= steps; ++n) {
    ws.step(me, rho, h, hermitian);
    if (n % opt.stride == 0 || n == steps) sample(n);
  }
  tr.diagnostics.steps = steps;
  tr.final_state = std::move(rho);
  return tr;
}

// ---------------------------------------------------------------------------
// Steady states.

struct SteadyStateOptions {
  double tol = 1e-8;      // on max |L rho|
  double dt = 0.0;        // <= 0: default_dt()
  double t_min = 0.0;     // always integrate at least this long
  double t_max = 1e5;     // give up afterwards
  double check_interval = 1.0;
  bool check_positivity = true;
};

struct SteadyStateResult {
  DensityMatrix state;
  double residual = 0.0;
  double t_reached = 0.0;
  EngineDiagnostics diagnostics;
};

inline double residual(const MasterEquation& me, const Matrix& rho) {
  return me.apply(rho).cwiseAbs().maxCoeff();
}

// Long-time RK4 integration with early stopping once the residual is below tol
// (and t >= t_min).
inline SteadyStateResult steady_state(const MasterEquation& me, const Matrix& rho_guess,
                                      const SteadyStateOptions& opt = {}) {
  me.check_shape(rho_guess);
  const double dt_req = opt.dt > 0.0 ? opt.dt : me.default_dt();
  const double chunk = std::max(opt.check_interval, dt_req);
  const auto [per_chunk, h] = detail::step_plan(chunk, dt_req);

  Matrix rho = rho_guess;
  const bool hermitian = (rho - rho.adjoint()).cwiseAbs().maxCoeff() <= 1e-12;
  detail::Rk4Workspace ws(me.dimension());
  EngineDiagnostics diag;
  diag.dt = h;
  detail::record_diagnostics(rho, opt.check_positivity, diag, 0.0);
  double t = 0.0;
  double res = residual(me, rho);
  long total = 0;
  while (true) {
    if (t >= opt.t_min - 1e-12 && res <= opt.tol) break;
    if (t >= opt.t_max)
      throw ConvergenceError("steady state not reached by t = " + std::to_string(t) +
                                 " (residual " + std::to_string(res) + ")",
                             res);
    for (long n = 0; n < per_chunk; ++n) ws.step(me, rho, h, hermitian);
    total += per_chunk;
    t += per_chunk * h;
    detail::record_diagnostics(rho, opt.check_positivity, diag, t);
    res = residual(me, rho);
  }
  diag.steps = total;
  Matrix herm = 0.5 * (rho + rho.adjoint());
  herm /= herm.trace();
  return {DensityMatrix(me.layout(), std::move(herm), 1e-8, 1e-6), res, t, diag};
}

// Null vector of the vectorized generator with one row replaced by the trace
// condition. BiCGSTAB with an incomplete-LU preconditioner handles the shipped
// sizes in well under a second; a full sparse LU is the fallback.
inline SteadyStateResult steady_state_direct(const MasterEquation& me, double tol = 1e-10) {
  const Index d = me.dimension();
  SparseMatrix s = me.superoperator();
  std::vector<Eigen::Triplet<cplx>> trip;
  trip.reserve(s.nonZeros() + d);
  for (Index col = 0; col < s.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(s, col); it; ++it)
      if (it.row() != 0) trip.emplace_back(it.row(), it.col(), it.value());
  for (Index i = 0; i < d; ++i) trip.emplace_back(0, i + i * d, 1.0);
  SparseMatrix a(d * d, d * d);
  a.setFromTriplets(trip.begin(), trip.end());
  a.makeCompressed();
  Vector rhs = Vector::Zero(d * d);
  rhs(0) = 1.0;

  auto to_state = [d](const Vector& v) {
    Matrix r = Eigen::Map<const Matrix>(v.data(), d, d);
    r = 0.5 * (r + r.adjoint()).eval();
    return Matrix(r / r.trace());
  };

  Vector x;
  {
    Eigen::BiCGSTAB<SparseMatrix, Eigen::IncompleteLUT<cplx>> it;
    it.preconditioner().setFillfactor(2);
    it.preconditioner().setDroptol(1e-4);
    it.setTolerance(1e-14);
    it.setMaxIterations(300);
    it.compute(a);
    if (it.info() == Eigen::Success) x = it.solve(rhs);
  }
  if (x.size() != d * d || !x.allFinite() || residual(me, to_state(x)) > tol) {
    Eigen::SparseLU<SparseMatrix> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) throw NumericalError("steady-state LU factorization failed");
    x = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !x.allFinite())
      throw NumericalError("steady-state linear solve failed");
  }
  Matrix rho = to_state(x);
  const double res = residual(me, rho);
  EngineDiagnostics diag;
  detail::record_diagnostics(rho, true, diag, 0.0);
  return {DensityMatrix(me.layout(), std::move(rho), 1e-8, 1e-6), res, 0.0, diag};
}

// ---------------------------------------------------------------------------
// Two-time correlations and spectra.

struct CorrelatorResult {
  std::vector<double> t;
  std::vector<cplx> g;
  EngineDiagnostics diagnostics;
};

// G(t) = Tr[A e^{Lt}(B rho)] - Tr[A rho] Tr[B rho] on an ascending grid with
// t_grid[0] >= 0. The propagated operator is B rho - Tr[B rho] rho, which gives
// the same G when rho is stationary and cancels exactly for constant A, B.
inline CorrelatorResult two_time_correlator(const MasterEquation& me, const Matrix& rho_ss,
                                            const FockOperator& a, const FockOperator& b,
                                            const std::vector<double>& t_grid, double dt = 0.0) {
  me.check_shape(rho_ss);
  me.hamiltonian().check_same(a);
  me.hamiltonian().check_same(b);
  if (t_grid.empty()) throw ValidationError("empty time grid");
  if (t_grid.front() < 0.0) throw ValidationError("time grid must start at t >= 0");
  for (std::size_t i = 1; i < t_grid.size(); ++i)
    if (!(t_grid[i] > t_grid[i - 1])) throw ValidationError("time grid must be ascending");

  const double dt_req = dt > 0.0 ? dt : me.default_dt();
  const cplx mean_b = (b.matrix() * rho_ss).trace();
  Matrix x = b.matrix() * rho_ss - mean_b * rho_ss;
  const Matrix& am = a.matrix();

  CorrelatorResult out;
  out.diagnostics.dt = dt_req;
  detail::Rk4Workspace ws(me.dimension());
  double t = 0.0;
  for (double target : t_grid) {
    const auto [n, h] = detail::step_plan(target - t, dt_req);
    for (long k = 0; k < n; ++k) ws.step(me, x, h, false);
    out.diagnostics.steps += n;
    t = target;
    if (!x.allFinite())
      throw NumericalError("non-finite correlator at t = " + std::to_string(t) + "; reduce dt");
    out.t.push_back(t);
    out.g.push_back((am * x).trace());
  }
  return out;
}

struct SpectrumResult {
  std::vector<double> frequencies;  // ascending, two-sided
  std::vector<double> amplitudes;   // max normalized to 1
  std::string convention = "S(w) = |sum_j G(t_j) exp(-i w t_j)|, two-sided, max-normalized";
};

// Rectangular-window DFT on the uniform grid t_j = t0 + j dt. Frequencies are
// the bins 2 pi k / (N dt), k = -N/2 .. N/2 - 1.
inline SpectrumResult spectrum(const std::vector<cplx>& g, double dt) {
  if (g.empty()) throw ValidationError("cannot take the spectrum of an empty series");
  if (!(dt > 0.0)) throw ValidationError("spectrum needs a positive sampling step");
  const long n = static_cast<long>(g.size());
  const double span = n * dt;
  SpectrumResult s;
  s.frequencies.reserve(n);
  s.amplitudes.reserve(n);
  std::vector<cplx> twiddle(n);
  for (long m = 0; m < n; ++m)
    twiddle[m] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(m) / n);
  for (long k = -n / 2; k < n - n / 2; ++k) {
    const double w = 2.0 * std::numbers::pi * static_cast<double>(k) / span;
    const long kk = ((k % n) + n) % n;
    cplx acc = 0.0;
    for (long j = 0; j < n; ++j) acc += g[j] * twiddle[(kk * j) % n];
    s.frequencies.push_back(w);
    s.amplitudes.push_back(std::abs(acc));
  }
  const double mx = *std::max_element(s.amplitudes.begin(), s.amplitudes.end());
  if (mx > 0.0)
    for (auto& v : s.amplitudes) v /= mx;
  return s;
}

inline SpectrumResult spectrum(const CorrelatorResult& c) {
  if (c.t.size() < 2) throw ValidationError("spectrum needs at least two samples");
  const double dt = c.t[1] - c.t[0];
  for (std::size_t i = 2; i < c.t.size(); ++i)
    if (std::abs((c.t[i] - c.t[i - 1]) - dt) > 1e-9 * std::max(1.0, std::abs(dt)))
      throw ValidationError("spectrum needs a uniform time grid");
  return spectrum(c.g, dt);
}

}  // namespace omlat
