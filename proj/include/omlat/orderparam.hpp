#pragma once

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>

#include "omlat/error.hpp"
#include "omlat/fock.hpp"
#include "omlat/meanfield.hpp"

// Closed-form order-parameter theory: displaced thermal state, the flow of
// |alpha|^2 and its effective potential. All rates in units of kappa.
namespace omlat::orderparam {

struct FlowParams {
  double kappa = 1.0;
  double Upsilon = 0.5;
  double Gamma_prime = 0.0;

  void validate() const {
    if (!(kappa >= 0.0) || !(Upsilon >= 0.0) || !(Gamma_prime >= 0.0))
      throw ValidationError("flow rates must be nonnegative");
    if (!(Upsilon < kappa)) throw ValidationError("Upsilon < kappa required for stability");
  }

  double n_inf() const { return Upsilon / (kappa - Upsilon); }
};

inline constexpr double kShift = 3.0 / 13.0;

struct DisplacedRates {
  double nbar;
  double kappa_eff;
  double upsilon_eff;
};

inline DisplacedRates nbar_of_alpha(const FlowParams& p, double alpha2) {
  p.validate();
  if (!(alpha2 >= 0.0)) throw ValidationError("|alpha|^2 must be >= 0");
  const double g = p.Gamma_prime;
  DisplacedRates r;
  r.nbar = p.Upsilon / (p.kappa - p.Upsilon + alpha2 * g);
  r.kappa_eff = p.kappa + r.nbar * kShift * g + (alpha2 + kShift) * g;
  r.upsilon_eff = p.Upsilon + r.nbar * kShift * g;
  return r;
}

inline double flow_rhs(const FlowParams& p, double alpha2) {
  p.validate();
  if (!(alpha2 >= 0.0)) throw ValidationError("|alpha|^2 must be >= 0");
  const double d = p.kappa - p.Upsilon;
  return -2.0 * d * (alpha2 + p.Upsilon / (d + alpha2 * p.Gamma_prime) - p.Upsilon / d);
}

// U(|alpha|) = (kappa - Upsilon)|alpha|^2/2 + Gamma' (|alpha|^4/4 - n_inf |alpha|^2/2)
inline double potential(const FlowParams& p, double alpha) {
  p.validate();
  const double x = alpha * alpha;
  return (p.kappa - p.Upsilon) * x / 2.0 + p.Gamma_prime * (x * x / 4.0 - p.n_inf() * x / 2.0);
}

inline double gamma_prime_crit(const FlowParams& p) {
  p.validate();
  if (p.Upsilon == 0.0) return std::numeric_limits<double>::infinity();
  const double d = p.kappa - p.Upsilon;
  return d * d / p.Upsilon;
}

inline double steady_alpha2(const FlowParams& p) {
  const double crit = gamma_prime_crit(p);
  if (!(p.Gamma_prime > crit)) return 0.0;
  return p.n_inf() * (1.0 - crit / p.Gamma_prime);
}

// Minimizer of U over |alpha| >= 0 (Brent).
inline double potential_minimizer(const FlowParams& p) {
  p.validate();
  const double hi = 2.0 * std::sqrt(p.n_inf() + 1.0) + 1.0;
  const auto r = boost::math::tools::brent_find_minima([&](double a) { return potential(p, a); }, 0.0, hi,
                                                       std::numeric_limits<double>::digits / 2);
  return r.first;
}

// Quartic-truncated flow: gradient flow of U written in x = |alpha|^2,
// dx/dt = -4 x dU/dx. Its stable nonzero root (TOMS 748), 0 if none.
inline double quartic_flow_rhs(const FlowParams& p, double x) {
  return -2.0 * x * ((p.kappa - p.Upsilon) + p.Gamma_prime * (x - p.n_inf()));
}

inline double quartic_flow_fixed_point(const FlowParams& p) {
  p.validate();
  auto f = [&](double x) { return quartic_flow_rhs(p, x) / x; };
  const double lo = 1e-300, hi = p.n_inf() + 1.0;
  if (f(lo) <= 0.0) return 0.0;
  std::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(52), iters);
  return 0.5 * (r.first + r.second);
}

// Stable root of the full flow on (0, n_inf], 0 below threshold.
inline double flow_fixed_point(const FlowParams& p) {
  p.validate();
  // flow_rhs / x with the 1/x removed analytically, so x -> 0 is exact.
  const double d = p.kappa - p.Upsilon;
  auto f = [&](double x) { return -2.0 * d * (1.0 - p.Upsilon * p.Gamma_prime / (d * (d + x * p.Gamma_prime))); };
  const double lo = 0.0, hi = p.n_inf() + 1.0;
  if (!(f(lo) > 0.0)) return 0.0;
  std::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(52), iters);
  return 0.5 * (r.first + r.second);
}

// max |L_d rho_bar| for the quadratic displaced-frame generator acting on a
// thermal state of occupation nbar (linear and cubic terms dropped).
inline double displaced_liouvillian_check(const FlowParams& p, double alpha2, double nbar, int n_max) {
  p.validate();
  if (n_max < 1 || !(nbar >= 0.0)) throw ValidationError("need n_max >= 1 and nbar >= 0");
  const auto rates = nbar_of_alpha(p, alpha2);
  const ModeLayout l({"a"}, {n_max});
  const Matrix rho = thermal_state(l, {nbar}).matrix();
  using meanfield::left;
  using meanfield::right;
  using L = meanfield::Local;
  const Matrix loss = 2.0 * right(left(L::a, rho), L::ad) - left(L::n, rho) - right(rho, L::n);
  const Matrix gain = 2.0 * right(left(L::ad, rho), L::a) - left(L::a, left(L::ad, rho)) -
                      right(right(rho, L::a), L::ad);
  return (rates.kappa_eff * loss + rates.upsilon_eff * gain).cwiseAbs().maxCoeff();
}

struct OrderParamRow {
  double Gamma_prime;
  double alpha2;
  double coherent_fraction;  // alpha2 / n_inf
  double nbar;
  double kappa_eff;
  double upsilon_eff;
};

inline OrderParamRow analytic_row(FlowParams p) {
  const double a2 = steady_alpha2(p);
  const auto r = nbar_of_alpha(p, a2);
  const double frac = p.n_inf() > 0.0 ? a2 / p.n_inf() : 0.0;
  return {p.Gamma_prime, a2, frac, r.nbar, r.kappa_eff, r.upsilon_eff};
}

}  // namespace omlat::orderparam
