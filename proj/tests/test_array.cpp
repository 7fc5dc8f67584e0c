#include <gtest/gtest.h>

#include "omlat/array_model.hpp"

using namespace omlat;
using namespace omlat::array;

namespace {

ArrayParams params(int L, double chi) {
  ArrayParams p;
  p.L = L;
  p.E = 0.2;
  p.Delta = -10.0;
  p.chi = chi;
  return p;
}

double two_pi() { return 2.0 * std::numbers::pi; }

}  // namespace

TEST(JumpOps, SubstitutionMatchesExplicitForm) {
  for (int L : {2, 4, 6, 8}) {
    for (double chi : {0.0, 0.5, 1.0, 2.0}) {
      auto p = params(L, chi);
      p.E = cplx(0.3, -0.1);
      const auto ops = lattice_jump_ops(p);
      const auto expl = reduced_jump_ops_explicit(p);
      ASSERT_EQ(ops.reduced.size(), expl.size());
      ASSERT_EQ(ops.full.size(), 2u * L);
      for (std::size_t i = 0; i < expl.size(); ++i) {
        EXPECT_TRUE(ops.reduced[i].lower_band_only());
        EXPECT_LT(max_coefficient_difference(ops.reduced[i], expl[i]), 1e-15) << "L=" << L << " chi=" << chi;
      }
    }
  }
}

TEST(JumpOps, OddRingHasFrustratedSeam) {
  // staggered signs clash where site L-1 meets site 0; the substituted
  // operators stay dark, the closed form is refused
  auto p = params(5, 1.0);
  EXPECT_THROW(reduced_jump_ops_explicit(p), ValidationError);
  EXPECT_LE(condensate_residual(p, 2), 1e-12);
}

TEST(JumpOps, OddOperatorCoefficientPattern) {
  // K_1 at chi: (2chi+1) n_1 - n_2 - (1+chi) a_1^+ a_2 + a_2^+ a_1 - chi a_1^+ a_0
  const double chi = 0.7;
  auto p = params(6, chi);
  p.E = 1.0;
  p.Delta = 1.0;
  const auto k = reduced_jump_ops(p).at(0);
  auto coeff = [&](int cr, int an) {
    cplx s = 0.0;
    for (const auto& t : k.terms)
      if (t.create == Mode{Band::a, cr} && t.annihilate == Mode{Band::a, an}) s += t.coeff;
    return s;
  };
  const double pre = parity(0);
  EXPECT_NEAR(std::abs(coeff(0, 0) - pre * (2 * chi + 1)), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(coeff(1, 1) - pre * -1.0), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(coeff(0, 1) - pre * -(1 + chi)), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(coeff(1, 0) - pre * 1.0), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(coeff(0, 5) - pre * -chi), 0.0, 1e-14);
}

TEST(JumpOps, HomogeneousAmplitudesGiveZeroExpectation) {
  for (double chi : {0.0, 1.0}) {
    const auto p = params(5, chi);
    const cplx alpha(0.4, 0.3);
    for (const auto& k : reduced_jump_ops(p)) {
      cplx s = 0.0;
      for (const auto& t : k.terms) s += t.coeff * std::conj(alpha) * alpha;
      EXPECT_LT(std::abs(s), 1e-15);
    }
  }
}

TEST(JumpOps, TwoSiteChainAnnihilatesSymmetricState) {
  const auto p = params(2, 0.0);
  const Vector sym = plane_wave(2, 0.0);
  for (const auto& k : reduced_jump_ops(p)) EXPECT_LT((single_particle_matrix(k, 2) * sym).norm(), 1e-15);
}

TEST(DarkState, CondensateIsExactlyDark) {
  for (double chi : {0.0, 1.0}) {
    for (int L = 2; L <= 6; ++L) {
      const auto p = params(L, chi);
      for (int n = 1; n <= 3; ++n) EXPECT_LE(condensate_residual(p, n), 1e-12) << "L=" << L << " N=" << n;
    }
  }
}

TEST(DarkState, ZoneBoundaryIsBright) {
  const auto c = momentum_dark_state_check(params(4, 0.0), std::numbers::pi);
  EXPECT_GT(c.single_particle, 1e-6);
  EXPECT_NEAR(c.e_ik_minus_1, 2.0, 1e-15);
  EXPECT_EQ(c.condensate, 0.0);
}

TEST(DarkState, ResidualProportionalToPhaseFactor) {
  const int L = 12;
  const auto p = params(L, 0.0);
  double ratio = -1.0;
  for (int m = 1; m < L; ++m) {
    const auto c = momentum_dark_state_check(p, two_pi() * m / L);
    const double r = c.single_particle / c.e_ik_minus_1;
    if (ratio < 0.0) ratio = r;
    EXPECT_NEAR(r, ratio, 1e-12 * ratio) << "m=" << m;
  }
  EXPECT_LT(momentum_dark_state_check(p, 0.0).single_particle, 1e-15);
}

TEST(DarkState, RejectsOffGridMomentum) {
  EXPECT_THROW(momentum_dark_state_check(params(4, 0.0), 0.3), ValidationError);
}

TEST(Semiclassical, HomogeneousFixedPoint) {
  for (double chi : {0.0, 1.0}) {
    const auto p = params(6, chi);
    SemiclassicalState s;
    s.alpha = Vector::Constant(6, cplx(0.6, -0.2));
    s.c_amp = Vector::Zero(6);
    const auto d = semiclassical_eom(p, s);
    EXPECT_LT(d.alpha.norm() + d.c_amp.norm(), 1e-15);
  }
}

TEST(Semiclassical, FreeRotationWithoutCoupling) {
  auto p = params(4, 0.0);
  p.E = 0.0;
  p.Gamma_tilde = 0.0;
  auto s = random_phase_state(4, 1.0, 3);
  s.c_amp << cplx(0.1, 0.2), cplx(-0.3, 0.0), cplx(0.0, 0.5), cplx(0.2, -0.2);
  const auto c0 = s.c_amp;
  const auto a0 = s.alpha;
  const double t = 2.0;
  const auto run = evolve_semiclassical(p, s, 1e-3, t, 1000);
  const Vector expect = c0 * std::polar(1.0, p.Delta * t);
  EXPECT_LT((run.final_state.c_amp - expect).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((run.final_state.alpha - a0).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Semiclassical, NormConservation) {
  for (double chi : {0.0, 1.0}) {
    const auto p = params(6, chi);
    const auto s = random_phase_state(6, 1.0, 17);
    const double t = 10.0;
    const auto run = evolve_semiclassical(p, s, 0.005, t, 100);
    EXPECT_LT(run.max_norm_drift / t, 1e-8);
    // the drift itself is norm conserving, not only the integrator
    const auto d = semiclassical_eom(p, s);
    const double dn = 2.0 * (s.alpha.adjoint() * d.alpha + s.c_amp.adjoint() * d.c_amp)(0).real();
    EXPECT_LT(std::abs(dn), 1e-14);
  }
}

TEST(Semiclassical, OddRingDriftConservesNorm) {
  for (double chi : {0.0, 1.0}) {
    const auto p = params(5, chi);
    const auto s = random_phase_state(5, 1.0, 23);
    auto st = s;
    st.c_amp << cplx(0.1, 0.0), cplx(0.0, -0.2), cplx(0.3, 0.1), cplx(-0.1, 0.1), cplx(0.05, 0.2);
    const auto d = semiclassical_eom(p, st);
    const double dn = 2.0 * (st.alpha.adjoint() * d.alpha + st.c_amp.adjoint() * d.c_amp)(0).real();
    EXPECT_LT(std::abs(dn), 1e-14);
  }
}

TEST(Semiclassical, PhaseLockingSetsIn) {
  // short version of the locking run: phase spread must shrink
  const auto p = params(6, 0.0);
  const auto s = random_phase_state(6, 1.0, 5);
  auto spread = [](const RelativePhases& r) {
    double m = 0.0;
    for (double x : r.phi) m = std::max(m, std::abs(x));
    return m;
  };
  const double before = spread(relative_phases(s));
  const auto run = evolve_semiclassical(p, s, 0.02, 2000.0, 10000);
  EXPECT_LT(spread(relative_phases(run.final_state)), 0.1 * before);
}

TEST(Semiclassical, Determinism) {
  const auto a = random_phase_state(12, 1.0, 12345);
  const auto b = random_phase_state(12, 1.0, 12345);
  EXPECT_EQ((a.alpha - b.alpha).norm(), 0.0);
  EXPECT_GT((a.alpha - random_phase_state(12, 1.0, 1).alpha).norm(), 0.0);
  EXPECT_THROW(evolve_semiclassical(params(12, 0.0), a, 0.0, 1.0, 1), ValidationError);
}

TEST(Semiclassical, DivergenceAborts) {
  auto p = params(4, 0.0);
  p.Delta = 1e6;
  const auto s = random_phase_state(4, 1.0, 1);
  EXPECT_THROW(evolve_semiclassical(p, s, 1.0, 1000.0, 10), NumericalError);
}

TEST(Phases, UniformAndGradient) {
  const auto u = relative_phases(Vector::Constant(5, cplx(0.3, 0.4)));
  for (double x : u.phi) EXPECT_EQ(x, 0.0);
  Vector g(12);
  for (int l = 0; l < 12; ++l) g(l) = std::polar(1.0, std::numbers::pi * (l + 1) / 6.0);
  for (double x : relative_phases(g).phi) EXPECT_NEAR(x, -std::numbers::pi / 6.0, 1e-14);
}

TEST(Phases, WindingIdentity) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = random_phase_state(9, 1.0, seed);
    double sum = 0.0;
    for (double x : relative_phases(s).phi) sum += x;
    const double w = sum / two_pi();
    EXPECT_NEAR(w, std::round(w), 1e-12);
  }
}

TEST(Phases, ZeroAmplitudeFlagged) {
  Vector a = Vector::Ones(4);
  a(2) = 0.0;
  const auto r = relative_phases(a);
  EXPECT_TRUE(r.flagged[1]);
  EXPECT_TRUE(r.flagged[2]);
  EXPECT_TRUE(std::isnan(r.phi[1]));
  EXPECT_FALSE(r.flagged[0]);
}

TEST(Transformation, ZeroCouplingIsExact) {
  const auto d = appendixA_transformation_check(0.0, 2);
  EXPECT_EQ(d.orthogonality, 0.0);
  EXPECT_EQ(d.off_diagonal, 0.0);
}

TEST(Transformation, QuadraticDefects) {
  const auto d1 = appendixA_transformation_check(0.01, 2);
  const auto d2 = appendixA_transformation_check(0.02, 2);
  EXPECT_LE(d1.orthogonality, 3e-4);
  EXPECT_LE(d1.off_diagonal, 3e-4);
  for (double r : {d2.orthogonality / d1.orthogonality, d2.off_diagonal / d1.off_diagonal}) {
    EXPECT_GE(r, 3.2);
    EXPECT_LE(r, 4.8);
  }
  // periodic tiling to longer chains keeps the scaling
  const auto l1 = appendixA_transformation_check(0.01, 5);
  const auto l2 = appendixA_transformation_check(0.02, 5);
  EXPECT_NEAR(l2.off_diagonal / l1.off_diagonal, 4.0, 0.8);
  EXPECT_THROW(appendixA_transformation_check(0.01, 1), ValidationError);
}
