#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "omlat/error.hpp"

namespace omlat {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using Index = Eigen::Index;

inline constexpr cplx I{0.0, 1.0};

// Ordered list of bosonic modes with their truncations. The first mode is the
// most significant digit of the Kronecker index.
class ModeLayout {
 public:
  ModeLayout() = default;

  ModeLayout(std::vector<std::string> names, std::vector<int> cutoffs)
      : names_(std::move(names)), cutoffs_(std::move(cutoffs)) {
    if (names_.empty()) throw ValidationError("mode layout needs at least one mode");
    if (names_.size() != cutoffs_.size())
      throw ValidationError("mode layout: names and cutoffs differ in length");
    std::unordered_set<std::string> seen;
    for (const auto& n : names_)
      if (!seen.insert(n).second) throw ValidationError("duplicate mode name '" + n + "'");
    dim_ = 1;
    strides_.assign(names_.size(), 1);
    for (std::size_t m = names_.size(); m-- > 0;) {
      if (cutoffs_[m] < 0)
        throw ValidationError("mode '" + names_[m] + "' has negative cutoff");
      strides_[m] = dim_;
      dim_ *= cutoffs_[m] + 1;
    }
  }

  static ModeLayout single(std::string name, int cutoff) {
    return ModeLayout({std::move(name)}, {cutoff});
  }

  std::size_t modes() const { return names_.size(); }
  Index dimension() const { return dim_; }
  int cutoff(std::size_t m) const { return cutoffs_.at(m); }
  Index local_dimension(std::size_t m) const { return cutoffs_.at(m) + 1; }
  Index stride(std::size_t m) const { return strides_.at(m); }
  const std::string& name(std::size_t m) const { return names_.at(m); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<int>& cutoffs() const { return cutoffs_; }

  bool contains(std::string_view mode) const {
    return std::find(names_.begin(), names_.end(), mode) != names_.end();
  }

  std::size_t index_of(std::string_view mode) const {
    auto it = std::find(names_.begin(), names_.end(), mode);
    if (it == names_.end()) throw ValidationError("unknown mode '" + std::string(mode) + "'");
    return static_cast<std::size_t>(it - names_.begin());
  }

  int occupation(Index basis, std::size_t m) const {
    return static_cast<int>((basis / strides_[m]) % (cutoffs_[m] + 1));
  }

  std::vector<int> occupations(Index basis) const {
    std::vector<int> occ(modes());
    for (std::size_t m = 0; m < modes(); ++m) occ[m] = occupation(basis, m);
    return occ;
  }

  Index basis_index(const std::vector<int>& occ) const {
    if (occ.size() != modes()) throw ValidationError("occupation list has wrong length");
    Index idx = 0;
    for (std::size_t m = 0; m < modes(); ++m) {
      if (occ[m] < 0 || occ[m] > cutoffs_[m])
        throw ValidationError("occupation outside truncation for mode '" + names_[m] + "'");
      idx += occ[m] * strides_[m];
    }
    return idx;
  }

  // Sub-layout containing the given modes, kept in this layout's order.
  ModeLayout subset(const std::vector<std::string>& keep) const {
    if (keep.empty()) throw ValidationError("mode subset must be nonempty");
    std::vector<bool> flag(modes(), false);
    for (const auto& k : keep) flag[index_of(k)] = true;
    std::vector<std::string> n;
    std::vector<int> c;
    for (std::size_t m = 0; m < modes(); ++m)
      if (flag[m]) {
        n.push_back(names_[m]);
        c.push_back(cutoffs_[m]);
      }
    return ModeLayout(std::move(n), std::move(c));
  }

  bool operator==(const ModeLayout& o) const {
    return names_ == o.names_ && cutoffs_ == o.cutoffs_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<int> cutoffs_;
  std::vector<Index> strides_;
  Index dim_ = 0;
};

// Concatenation of two layouts; mode names must stay unique.
inline ModeLayout concat(const ModeLayout& a, const ModeLayout& b) {
  auto n = a.names();
  auto c = a.cutoffs();
  n.insert(n.end(), b.names().begin(), b.names().end());
  c.insert(c.end(), b.cutoffs().begin(), b.cutoffs().end());
  return ModeLayout(std::move(n), std::move(c));
}

class FockOperator {
 public:
  FockOperator() = default;

  FockOperator(ModeLayout layout, Matrix elements)
      : layout_(std::move(layout)), m_(std::move(elements)) {
    if (m_.rows() != m_.cols() || m_.rows() != layout_.dimension())
      throw ValidationError("operator shape does not match its mode layout");
  }

  static FockOperator identity(const ModeLayout& l) {
    return {l, Matrix::Identity(l.dimension(), l.dimension())};
  }
  static FockOperator zero(const ModeLayout& l) {
    return {l, Matrix::Zero(l.dimension(), l.dimension())};
  }

  const ModeLayout& layout() const { return layout_; }
  const Matrix& matrix() const { return m_; }
  Index dimension() const { return m_.rows(); }

  FockOperator adjoint() const { return {layout_, m_.adjoint()}; }

  cplx trace() const { return m_.trace(); }

  double hermiticity_defect() const { return (m_ - m_.adjoint()).cwiseAbs().maxCoeff(); }

  FockOperator& operator+=(const FockOperator& o) {
    check_same(o);
    m_ += o.m_;
    return *this;
  }
  FockOperator& operator-=(const FockOperator& o) {
    check_same(o);
    m_ -= o.m_;
    return *this;
  }
  FockOperator& operator*=(cplx s) {
    m_ *= s;
    return *this;
  }

  friend FockOperator operator+(FockOperator a, const FockOperator& b) { return a += b; }
  friend FockOperator operator-(FockOperator a, const FockOperator& b) { return a -= b; }
  friend FockOperator operator*(FockOperator a, cplx s) { return a *= s; }
  friend FockOperator operator*(cplx s, FockOperator a) { return a *= s; }
  friend FockOperator operator*(const FockOperator& a, const FockOperator& b) {
    a.check_same(b);
    return {a.layout_, a.m_ * b.m_};
  }

  void check_same(const FockOperator& o) const {
    if (!(layout_ == o.layout_)) throw ValidationError("operator layouts do not match");
  }

 private:
  ModeLayout layout_;
  Matrix m_;
};

class DensityMatrix {
 public:
  static constexpr double kTraceTol = 1e-9;

  DensityMatrix() = default;

  explicit DensityMatrix(FockOperator op, double herm_tol = 1e-8, double pos_tol = 1e-7)
      : op_(std::move(op)), herm_tol_(herm_tol), pos_tol_(pos_tol) {
    const double tr_err = std::abs(op_.trace() - 1.0);
    if (tr_err > kTraceTol)
      throw ValidationError("density matrix trace deviates from 1 by " + std::to_string(tr_err));
    const double h = op_.hermiticity_defect();
    if (h > herm_tol_)
      throw ValidationError("density matrix not Hermitian (defect " + std::to_string(h) + ")");
    Eigen::SelfAdjointEigenSolver<Matrix> es(op_.matrix(), Eigen::EigenvaluesOnly);
    min_eig_ = es.eigenvalues().minCoeff();
    if (min_eig_ < -pos_tol_)
      throw ValidationError("density matrix has eigenvalue " + std::to_string(min_eig_));
  }

  DensityMatrix(const ModeLayout& l, Matrix m, double herm_tol = 1e-8, double pos_tol = 1e-7)
      : DensityMatrix(FockOperator(l, std::move(m)), herm_tol, pos_tol) {}

  // |psi><psi| after normalization.
  static DensityMatrix pure(const ModeLayout& l, const Vector& psi) {
    if (psi.size() != l.dimension()) throw ValidationError("state vector has wrong dimension");
    const double nrm = psi.norm();
    if (nrm == 0.0) throw ValidationError("zero state vector");
    Vector v = psi / nrm;
    return DensityMatrix(l, v * v.adjoint());
  }

  const FockOperator& op() const { return op_; }
  const Matrix& matrix() const { return op_.matrix(); }
  const ModeLayout& layout() const { return op_.layout(); }
  Index dimension() const { return op_.dimension(); }
  double herm_tol() const { return herm_tol_; }
  double pos_tol() const { return pos_tol_; }
  double min_eigenvalue() const { return min_eig_; }

  cplx expectation(const FockOperator& a) const {
    op_.check_same(a);
    return (a.matrix() * op_.matrix()).trace();
  }

 private:
  FockOperator op_;
  double herm_tol_ = 1e-8;
  double pos_tol_ = 1e-7;
  double min_eig_ = 0.0;
};

// ---------------------------------------------------------------------------
// Single-mode building blocks and embedding.

inline Matrix local_lowering(int cutoff) {
  Matrix a = Matrix::Zero(cutoff + 1, cutoff + 1);
  for (int n = 1; n <= cutoff; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Place a single-mode matrix on `mode`, identity elsewhere.
inline FockOperator embed(const ModeLayout& l, std::string_view mode, const Matrix& local) {
  const std::size_t m = l.index_of(mode);
  if (local.rows() != l.local_dimension(m) || local.cols() != l.local_dimension(m))
    throw ValidationError("local operator dimension does not match mode cutoff");
  const Index left = l.dimension() / (l.local_dimension(m) * l.stride(m));
  const Index right = l.stride(m);
  Matrix out = kron(kron(Matrix::Identity(left, left), local), Matrix::Identity(right, right));
  return {l, std::move(out)};
}

inline FockOperator lowering(const ModeLayout& l, std::string_view mode) {
  return embed(l, mode, local_lowering(l.cutoff(l.index_of(mode))));
}

inline FockOperator creation(const ModeLayout& l, std::string_view mode) {
  return lowering(l, mode).adjoint();
}

inline FockOperator number(const ModeLayout& l, std::string_view mode) {
  const int c = l.cutoff(l.index_of(mode));
  Matrix n = Matrix::Zero(c + 1, c + 1);
  for (int k = 0; k <= c; ++k) n(k, k) = k;
  return embed(l, mode, n);
}

// A ⊗ B on the concatenated layout.
inline FockOperator tensor(const FockOperator& a, const FockOperator& b) {
  return {concat(a.layout(), b.layout()), kron(a.matrix(), b.matrix())};
}

inline Vector basis_state(const ModeLayout& l, const std::vector<int>& occ) {
  Vector v = Vector::Zero(l.dimension());
  v(l.basis_index(occ)) = 1.0;
  return v;
}

// ---------------------------------------------------------------------------
// Matrix exponential: [6/6] Pade approximant with scaling and squaring.

inline Matrix expm(const Matrix& a) {
  const Index n = a.rows();
  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  int s = 0;
  if (norm1 > 0.5) s = static_cast<int>(std::ceil(std::log2(norm1 / 0.5)));
  const Matrix x = a / std::ldexp(1.0, s);

  // c_k = (2q-k)! q! / ((2q)! k! (q-k)!) for q = 6
  constexpr double c[7] = {1.0,
                           1.0 / 2.0,
                           5.0 / 44.0,
                           1.0 / 66.0,
                           1.0 / 792.0,
                           1.0 / 15840.0,
                           1.0 / 665280.0};
  const Matrix id = Matrix::Identity(n, n);
  Matrix num = c[0] * id;
  Matrix den = c[0] * id;
  Matrix p = id;
  for (int k = 1; k <= 6; ++k) {
    p = p * x;
    num += c[k] * p;
    den += ((k % 2) ? -c[k] : c[k]) * p;
  }
  Matrix r = den.partialPivLu().solve(num);
  for (int i = 0; i < s; ++i) r = r * r;
  return r;
}

inline FockOperator displacement(const ModeLayout& l, std::string_view mode, cplx alpha) {
  const std::size_t m = l.index_of(mode);
  const int c = l.cutoff(m);
  if (std::norm(alpha) > c / 4.0)
    warn("displacement |alpha|^2 = " + std::to_string(std::norm(alpha)) +
         " exceeds n_max/4 for mode '" + std::string(mode) + "'; truncation error likely");
  const Matrix a = local_lowering(c);
  const Matrix gen = alpha * a.adjoint() - std::conj(alpha) * a;
  return embed(l, mode, expm(gen));
}

inline DensityMatrix thermal_state(const ModeLayout& l, const std::vector<double>& occupations) {
  if (occupations.size() != l.modes())
    throw ValidationError("thermal_state needs one occupation per mode");
  Eigen::VectorXd diag = Eigen::VectorXd::Ones(1);
  for (std::size_t m = 0; m < l.modes(); ++m) {
    const double nb = occupations[m];
    if (!(nb >= 0.0)) throw ValidationError("thermal occupation must be nonnegative");
    Eigen::VectorXd p(l.local_dimension(m));
    const double q = nb / (nb + 1.0);
    double w = 1.0 / (nb + 1.0);
    for (Index k = 0; k < p.size(); ++k, w *= q) p(k) = w;
    p /= p.sum();
    Eigen::VectorXd next(diag.size() * p.size());
    for (Index i = 0; i < diag.size(); ++i) next.segment(i * p.size(), p.size()) = diag(i) * p;
    diag = std::move(next);
  }
  Matrix rho = Matrix::Zero(l.dimension(), l.dimension());
  rho.diagonal() = diag.cast<cplx>();
  return DensityMatrix(l, std::move(rho));
}

// Beam splitter taking (mode1, mode2) to their symmetric/antisymmetric
// combinations: U a1 U^dag = (a1 + a2)/sqrt2 and U a2 U^dag = (a1 - a2)/sqrt2 on
// every photon-number sector that fits inside the truncation. Columns of U are
// the rotated basis states |n_s, n_a> written in the original basis.
inline FockOperator mode_rotation_symm_antisymm(const ModeLayout& l, std::string_view mode1,
                                                std::string_view mode2) {
  const std::size_t i1 = l.index_of(mode1);
  const std::size_t i2 = l.index_of(mode2);
  if (i1 == i2) throw ValidationError("rotation needs two distinct modes");
  if (l.cutoff(i1) != l.cutoff(i2))
    throw ValidationError("rotated modes must share the same cutoff");
  const Matrix a1 = lowering(l, mode1).matrix();
  const Matrix a2 = lowering(l, mode2).matrix();
  const Matrix gen = a1.adjoint() * a2 - a2.adjoint() * a1;
  Matrix parity = Matrix::Zero(l.dimension(), l.dimension());
  for (Index b = 0; b < l.dimension(); ++b)
    parity(b, b) = (l.occupation(b, i2) % 2) ? -1.0 : 1.0;
  return {l, expm(-std::numbers::pi / 4.0 * gen) * parity};
}

struct EigenDecomposition {
  Eigen::VectorXd values;  // ascending
  Matrix vectors;          // columns
};

inline EigenDecomposition eig_hermitian(const FockOperator& op, double herm_tol = 1e-8) {
  const double h = op.hermiticity_defect();
  if (h > herm_tol)
    throw ValidationError("eig_hermitian: operator not Hermitian (defect " + std::to_string(h) +
                          ")");
  Matrix sym = 0.5 * (op.matrix() + op.matrix().adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  if (es.info() != Eigen::Success) throw NumericalError("Hermitian eigensolver failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

inline Matrix partial_trace(const ModeLayout& l, const Matrix& rho,
                            const std::vector<std::string>& keep) {
  const ModeLayout sub = l.subset(keep);
  std::vector<std::size_t> kept;
  for (const auto& n : sub.names()) kept.push_back(l.index_of(n));
  std::vector<bool> is_kept(l.modes(), false);
  for (auto k : kept) is_kept[k] = true;

  const Index d = l.dimension();
  std::vector<Index> red(d);
  std::vector<Index> env(d);
  for (Index b = 0; b < d; ++b) {
    Index r = 0;
    Index e = 0;
    for (std::size_t m = 0; m < l.modes(); ++m) {
      const int o = l.occupation(b, m);
      if (is_kept[m])
        r = r * l.local_dimension(m) + o;
      else
        e = e * l.local_dimension(m) + o;
    }
    red[b] = r;
    env[b] = e;
  }
  Matrix out = Matrix::Zero(sub.dimension(), sub.dimension());
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < d; ++i)
      if (env[i] == env[j]) out(red[i], red[j]) += rho(i, j);
  return out;
}

inline DensityMatrix partial_trace(const DensityMatrix& rho, const std::vector<std::string>& keep) {
  const ModeLayout sub = rho.layout().subset(keep);
  return DensityMatrix(sub, partial_trace(rho.layout(), rho.matrix(), keep), rho.herm_tol(),
                       rho.pos_tol());
}

}  // namespace omlat
