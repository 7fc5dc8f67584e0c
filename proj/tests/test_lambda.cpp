#include <gtest/gtest.h>

#include <random>

#include "omlat/lambda_model.hpp"

using namespace omlat;
using namespace omlat::lambda;

namespace {

PhysicalParams physical() {
  PhysicalParams p;
  p.g = 0.3;
  p.gprime = 1.5;
  p.J = 0.05;
  p.delta_omega = 1.0;
  p.gamma = 0.2;
  p.F = 2.0;
  p.Omega = 1.1;
  p.Omega_M = 1.0;
  p.X_M = 0.5;
  return p;
}

// The Fig. 8 parameter set at detuning 2, used for the elimination check.
LambdaParams fig8(double e) {
  LambdaParams p;
  p.E = e;
  p.Delta = 2.0;
  p.Jtilde = 0.2;
  p.kappa = 0.1;
  p.eps1 = 0.2;
  p.Delta1 = 0.2;
  return p;
}

}  // namespace

TEST(Effective, NoForceNoDrive) {
  auto p = physical();
  p.F = 0.0;
  EXPECT_EQ(std::abs(derive_effective(p).lambda.E), 0.0);
}

TEST(Effective, PhaseCarriedThrough) {
  auto p = physical();
  const cplx e0 = derive_effective(p).lambda.E;
  p.phi1 = std::numbers::pi;
  const cplx e1 = derive_effective(p).lambda.E;
  EXPECT_LT(std::abs(e1 - e0 * std::polar(1.0, -std::numbers::pi)), 1e-14 * std::abs(e0));
}

TEST(Effective, ResonantAmplitude) {
  auto p = physical();
  p.Omega = p.Omega_M;
  const auto r = derive_effective(p);
  EXPECT_NEAR(std::abs(r.X1), 2.0 * p.F * p.X_M * p.X_M / p.gamma, 1e-12);
  EXPECT_NEAR(r.lambda.chi_ratio, p.g / p.gprime, 1e-15);
  const double x = p.gprime * p.X_M * p.J / p.delta_omega;
  EXPECT_NEAR(r.lambda.Gamma_tilde, 2.0 * x * x / p.gamma, 1e-15);
}

TEST(Effective, Validation) {
  auto p = physical();
  p.gamma = 0.0;
  EXPECT_THROW(derive_effective(p), ValidationError);
  p = physical();
  p.delta_omega = -1.0;
  EXPECT_THROW(derive_effective(p), ValidationError);
  p = physical();
  p.J = 0.5;
  int warned = 0;
  auto old = set_warning_handler([&](const std::string&) { ++warned; });
  derive_effective(p);
  set_warning_handler(old);
  EXPECT_EQ(warned, 1);
}

TEST(FullModel, ChannelCount) {
  LambdaParams p = fig8(0.5);
  const auto l = full_layout(2, 1);
  EXPECT_EQ(build_full_me(p, l).channels().size(), 5u);
  p.n_th = 0.2;
  EXPECT_EQ(build_full_me(p, l).channels().size(), 7u);
  p.kappa = -1.0;
  EXPECT_THROW(build_full_me(p, l), ValidationError);
}

TEST(FullModel, SymmetricStateIsDark) {
  const auto l = full_layout(4, 1);
  const auto a1 = lowering(l, "a1");
  const auto a2 = lowering(l, "a2");
  const Matrix sym = (a1.adjoint() + a2.adjoint()).matrix();
  const Matrix drive = (lowering(l, "c").adjoint() * (a2 - a1)).matrix();
  const auto ks = engineered_jumps(l, 0.0);
  Vector psi = basis_state(l, {0, 0, 0});
  for (int n = 1; n <= 3; ++n) {
    psi = sym * psi;
    for (const auto& k : ks) EXPECT_EQ((k.matrix() * psi).norm(), 0.0);
    EXPECT_LT((drive * psi).norm(), 1e-13 * psi.norm());
  }
}

TEST(FullModel, TraceAndHermiticity) {
  LambdaParams p = fig8(0.7);
  p.n_th = 0.3;
  p.chi_ratio = 0.5;
  const auto l = full_layout(2, 1);
  const auto me = build_full_me(p, l);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  Matrix m(l.dimension(), l.dimension());
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = cplx(g(rng), g(rng));
  const Matrix rho = m * m.adjoint();
  const Matrix out = me.apply(rho);
  EXPECT_LT(std::abs(out.trace()), 1e-11);
  EXPECT_LT((out - out.adjoint()).cwiseAbs().maxCoeff(), 1e-11);
}

TEST(Spectrum, AxisIsSymmetricAndPeaksAreFound) {
  LambdaParams p;
  p.E = 0.2;
  p.Delta = 10.0;
  p.Jtilde = 0.2;
  p.kappa = 0.1;
  p.eps1 = 0.1;
  SpectrumOptions o;
  o.n_a = 2;
  o.n_c = 1;
  o.t0 = 20.0;
  o.window = 100.0;
  o.sample_dt = 0.5;
  o.steady_tol = 1e-7;
  const auto run = run_spectrum_experiment(p, o);
  const auto& w = run.spectrum.frequencies;
  ASSERT_EQ(w.size(), 200u);
  const double bin = 2.0 * std::numbers::pi / o.window;
  EXPECT_NEAR(w.front(), -100 * bin, 1e-12);
  EXPECT_NEAR(w.back(), 99 * bin, 1e-12);
  EXPECT_LE(run.steady_residual, 1e-7);
  const auto pk = mode_peaks(run.spectrum, p.Jtilde);
  EXPECT_LE(std::abs(pk.symmetric_position + p.Jtilde), bin);
  EXPECT_LE(std::abs(pk.antisymmetric_position - p.Jtilde), bin);
}

TEST(DetuningSweep, RequiresAntisymmetricDrive) {
  LambdaParams p = fig8(1.0);
  EXPECT_THROW(run_detuning_sweep(p, {0.0}, 2, 1), ValidationError);
}

TEST(DetuningSweep, ExcitedModeSuppressed) {
  LambdaParams p;
  p.E = 2.0;
  p.Delta = 50.0;
  p.Jtilde = 2.0;
  p.kappa = 0.1;
  p.eps1 = 0.2;
  p.eps2 = -0.2;
  const auto rows = run_detuning_sweep(p, {1.0, 2.0, 3.0}, 3, 1);
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& r : rows) {
    EXPECT_LT(r.n_c, 0.1 * r.n_a);
    EXPECT_LT(r.residual, 1e-8);
    EXPECT_GT(r.min_eigenvalue, -1e-6);
  }
  EXPECT_GT(rows[1].n_a, rows[0].n_a);
  EXPECT_GT(rows[1].n_a, rows[2].n_a);
}

TEST(Eliminated, JumpOnEmptySymmetricSector) {
  LambdaParams p = fig8(0.5);
  const auto l = rotated_layout(4);
  const auto me = build_eliminated_me(p, l);
  const Matrix& k = me.channels()[0].jump.matrix();
  for (int na = 1; na <= 4; ++na) {
    const Vector out = k * basis_state(l, {0, na});
    const cplx expect = std::sqrt(static_cast<double>(na)) / cplx(4.0 * p.Gamma_tilde, p.Delta);
    EXPECT_LT(std::abs(out(l.basis_index({1, na - 1})) - expect), 1e-15);
    EXPECT_NEAR(out.norm(), std::abs(expect), 1e-15);
  }
}

TEST(Eliminated, LargeDetuningLimit) {
  LambdaParams p = fig8(0.5);
  p.Delta = 1e6;
  const auto l = rotated_layout(3);
  const Matrix k = build_eliminated_me(p, l).channels()[0].jump.matrix();
  const Matrix bare = (lowering(l, "as").adjoint() * lowering(l, "aa")).matrix();
  const Matrix scaled = cplx(0.0, p.Delta) * k;
  EXPECT_LT((scaled - bare).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Eliminated, Preconditions) {
  LambdaParams p = fig8(0.5);
  p.chi_ratio = 0.1;
  EXPECT_THROW(build_eliminated_me(p, rotated_layout(2)), ValidationError);
  p.chi_ratio = 0.0;
  p.n_th = 0.1;
  EXPECT_THROW(build_eliminated_me(p, rotated_layout(2)), ValidationError);
}

TEST(Eliminated, AgreesWithFullModel) {
  for (double e : {0.2, 0.5}) {
    const LambdaParams p = fig8(e);
    const auto lf = full_layout(5, 1);
    const auto full = steady_state_direct(build_full_me(p, lf));
    const auto obs = mode_observables(lf);
    const double rf = full.state.expectation(obs.n_s).real() / full.state.expectation(obs.n_a).real();

    const auto le = rotated_layout(5);
    const auto elim = steady_state_direct(build_eliminated_me(p, le));
    const double re =
        elim.state.expectation(number(le, "as")).real() / elim.state.expectation(number(le, "aa")).real();
    EXPECT_LT(std::abs(re - rf) / rf, 0.15) << "E = " << e;
  }
}

TEST(Separability, DecompositionIsLosslessAndBounded) {
  SeparabilityOptions o;
  o.t_max = 4.0;
  const auto rows = separability_scan(fig8(0.0), {0.0, 0.4, 0.8}, o);
  for (const auto& r : rows) {
    EXPECT_LT(r.decomposition_defect, 1e-14);
    EXPECT_GE(r.trace_sep, 0.0);
    EXPECT_LE(r.trace_sep, 1.0 + 1e-12);
    EXPECT_GE(r.trace_sep_swapped, 0.0);
    EXPECT_LE(r.trace_sep_swapped, 1.0 + 1e-12);
    EXPECT_LT(r.diagnostics.max_trace_drift, 1e-6);
  }
  EXPECT_LT(rows[0].population_ratio, rows[1].population_ratio);
  EXPECT_LT(rows[1].population_ratio, rows[2].population_ratio);
}

TEST(Separability, ProductStateIsFullySeparable) {
  // A pure Fock product in the rotated frame has a single dominant n_s.
  const auto l = full_layout(3, 1);
  const Matrix u = mode_rotation_symm_antisymm(l, "a1", "a2").matrix();
  const Vector rotated = basis_state(l, {1, 2, 0});
  const Vector psi = u * rotated;
  const auto dec = separable_decomposition(l, psi * psi.adjoint());
  EXPECT_NEAR(dec.trace_sep, 1.0, 1e-10);
}
