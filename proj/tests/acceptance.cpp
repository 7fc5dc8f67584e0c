// Acceptance run: one PASS/FAIL line per criterion, computed from the shipped
// recipes where one exists. Criteria 1 and 9 are documented as unattainable
// under the fixed conventions (README, "Known gaps"); the binary exits 0 only
// when the failing set is exactly that documented set, so both a regression
// and an unexpected pass are reported as errors.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "omlat/analysis.hpp"
#include "omlat/runner.hpp"

using namespace omlat;
using json = nlohmann::json;

namespace {

const std::filesystem::path kRecipes = OMLAT_RECIPE_DIR;

struct Verdict {
  bool pass;
  std::string detail;
};

runner::RunOutput run_recipe(const std::string& stem) { return runner::run(config::load(kRecipes / (stem + ".yaml")), 0); }

std::vector<double> column(const runner::RunOutput& r, const std::string& name) {
  const auto j = r.table.column(name);
  std::vector<double> v;
  for (const auto& row : r.table.rows) v.push_back(row[j]);
  return v;
}

std::string fmt(const char* f, auto... xs) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, xs...);
  return buf;
}

// Engine health from every shipped run that touches the density-matrix engine.
std::vector<std::pair<std::string, json>> g_diagnostics;

void keep(const std::string& name, const runner::RunOutput& r) { g_diagnostics.emplace_back(name, r.diagnostics); }

Verdict criterion1() {
  const auto weak = run_recipe("fig3_weak");
  const auto strong = run_recipe("fig3_strong");
  keep("fig3_weak", weak);
  keep("fig3_strong", strong);
  const auto w = column(weak, "omega");
  const auto a = column(weak, "amplitude");
  const double bin = w[1] - w[0];
  auto peaks = local_maxima(w, a, 0.05);
  std::sort(peaks.begin(), peaks.end(), [](const Peak& x, const Peak& y) { return x.height > y.height; });
  bool ok = peaks.size() >= 2;
  double sep = 0.0, ratio = 0.0;
  if (ok) {
    sep = std::abs(peaks[0].position - peaks[1].position);
    ratio = peaks[1].height / peaks[0].height;
    ok = std::abs(sep - 0.4) <= bin && ratio >= 0.9;
  }
  const double hs = strong.results["symmetric_peak"][1];
  const double ha = strong.results["antisymmetric_peak"][1];
  const bool suppressed = ha < hs / 3.0;
  return {ok && suppressed,
          fmt("E=0.01: separation %.4f (target 0.4 +- %.4f), height ratio %.3f; E=0.5: antisym/sym %.3f (< 1/3)", sep,
              bin, ratio, ha / hs)};
}

Verdict criterion2() {
  const auto r = run_recipe("fig4");
  keep("fig4", r);
  const auto nth = column(r, "n_th"), d1 = column(r, "Delta1"), ns = column(r, "n_s"), na = column(r, "n_a"),
             nc = column(r, "n_c");
  double best_s = -1, best_a = -1, pos_s = 0, pos_a = 0, peak_hot = -1, worst_c = 0;
  for (std::size_t i = 0; i < d1.size(); ++i) {
    worst_c = std::max(worst_c, nc[i] / na[i]);
    if (nth[i] == 0.0) {
      if (ns[i] > best_s) best_s = ns[i], pos_s = d1[i];
      if (na[i] > best_a) best_a = na[i], pos_a = d1[i];
    } else if (nth[i] == 0.5) {
      peak_hot = std::max(peak_hot, ns[i]);
    }
  }
  const double res = 0.2 + 1e-9;
  const bool ok = std::abs(pos_s - 2.0) <= res && std::abs(pos_a - 2.0) <= res && worst_c < 0.1 &&
                  peak_hot > 0.25 * best_s;
  return {ok, fmt("peaks n_s at %.2f, n_a at %.2f (2.0 +- 0.2); max n_c/n_a %.3f; n_th=0.5 sym peak %.3f of n_th=0",
                  pos_s, pos_a, worst_c, peak_hot / best_s)};
}

Verdict criterion3() {
  const auto r = run_recipe("fig5");
  const auto t = column(r, "t"), c2 = column(r, "c2_total");
  const double max_phi = r.results["final_max_abs_phi"];
  const double drift = r.results["max_norm_drift"];
  // fit after the transient that fills the excited band from zero
  std::vector<double> x, y;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i] >= 0.1 * t.back()) x.push_back(t[i]), y.push_back(std::log(c2[i]));
  const auto fit = fit_line(x, y);
  const bool ok = max_phi <= 1e-3 && fit.r2 >= 0.95 && fit.slope < 0.0 && drift <= 1e-6;
  return {ok, fmt("max|phi| %.2e rad (<= 1e-3); log sum|c|^2 slope %.3e, R^2 %.4f (>= 0.95); norm drift %.2e (<= 1e-6)",
                  max_phi, fit.slope, fit.r2, drift)};
}

Verdict criterion4() {
  const auto r = run_recipe("darkstate");
  double worst = r.results["max_condensate_residual"];
  for (int L = 2; L <= 6; ++L)  // the recipe uses chi = 1; also cover chi = 0
    for (int n = 1; n <= 3; ++n) {
      array::ArrayParams p;
      p.L = L;
      worst = std::max(worst, array::condensate_residual(p, n));
    }
  return {worst <= 1e-12, fmt("max k=0 residual %.2e over L<=6, N<=3, chi in {0,1} (<= 1e-12)", worst)};
}

Verdict criterion5() {
  const auto normal = run_recipe("fig6_normal");
  const auto coherent = run_recipe("fig6_coherent");
  const auto sweep = run_recipe("fig7");
  keep("fig6_normal", normal);
  keep("fig6_coherent", coherent);
  keep("fig7", sweep);
  const double cn = column(normal, "coh_frac").back(), gn = column(normal, "g2").back();
  const double cc = column(coherent, "coh_frac").back(), gc = column(coherent, "g2").back();
  const auto coh = column(sweep, "coh_frac"), g2 = column(sweep, "g2");
  bool mono = true;
  double g2_lo = gn, g2_hi = gn;
  for (std::size_t i = 0; i < coh.size(); ++i) {
    if (i > 0 && coh[i] < coh[i - 1]) mono = false;
    if (coh[i] <= 0.02) g2_lo = std::min(g2_lo, g2[i]), g2_hi = std::max(g2_hi, g2[i]);
  }
  const bool ok = cn <= 0.02 && cc >= 0.3 && g2_lo >= 1.9 && g2_hi <= 2.05 && gc < 1.5 && mono && coh.size() == 20;
  return {ok, fmt("coh frac %.2e at 0.5 (<= 0.02), %.3f at 2.5 (>= 0.3); normal g2 in [%.3f, %.3f]; g2 %.3f at 2.5 "
                  "(< 1.5); %zu-point sweep %s",
                  cn, cc, g2_lo, g2_hi, gc, coh.size(), mono ? "nondecreasing" : "NOT monotone")};
}

Verdict criterion6() {
  const auto r = run_recipe("orderparam");
  bool crit_ok = r.results["Gamma_prime_crit"].get<double>() == 0.5;
  for (double k : {1.0, 2.0, 3.5})
    for (double u : {0.1, 0.5, 0.9}) {
      orderparam::FlowParams p;
      p.kappa = k;
      p.Upsilon = u * k;
      crit_ok = crit_ok && orderparam::gamma_prime_crit(p) == (p.kappa - p.Upsilon) * (p.kappa - p.Upsilon) / p.Upsilon;
    }
  orderparam::FlowParams p;
  p.Gamma_prime = 2.5;
  const double ss = orderparam::steady_alpha2(p);
  double worst_min = 0.0;
  for (double gp : {1.0, 2.5}) {
    orderparam::FlowParams q;
    q.Gamma_prime = gp;
    const double a = orderparam::potential_minimizer(q);
    worst_min = std::max(worst_min, std::abs(a * a - orderparam::quartic_flow_fixed_point(q)));
  }
  const double disp = orderparam::displaced_liouvillian_check(p, ss, orderparam::nbar_of_alpha(p, ss).nbar, 25);
  const bool ok = crit_ok && std::abs(ss - 0.8) <= 1e-15 && worst_min <= 1e-6 && disp <= 1e-6;
  return {ok, fmt("crit formula %s; |alpha|^2_ss = %.15f; flow vs potential %.1e (<= 1e-6); displaced residual %.1e "
                  "(<= 1e-6)",
                  crit_ok ? "exact" : "MISMATCH", ss, worst_min, disp)};
}

Verdict criterion7() {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  double worst = 0.0;
  for (double chi : {0.0, 1.0, 2.0}) {
    const auto jumps = meanfield::reduced_lattice_jumps(chi);
    std::vector<meanfield::GenericJump> dag;
    for (const auto& k : jumps) dag.push_back(meanfield::adjoint(k));
    for (int i = 0; i < 20; ++i) {
      const auto m = meanfield::Moments::from_values({g(rng), g(rng)}, 2.0 * std::abs(g(rng)), {g(rng), g(rng)},
                                                     {g(rng), g(rng)});
      const auto t = meanfield::appD_matrices(m, chi);
      using meanfield::canonical_gauge;
      worst = std::max(worst, (canonical_gauge(meanfield::decouple_generic(jumps, m)) - canonical_gauge(t.L1))
                                  .cwiseAbs()
                                  .maxCoeff());
      worst = std::max(worst,
                       (canonical_gauge(meanfield::decouple_generic(dag, m)) - canonical_gauge(t.L2)).cwiseAbs().maxCoeff());
    }
  }
  meanfield::MeanFieldParams p;
  p.Gamma_prime = 2.5;
  const double coh = meanfield::meanfield_liouvillian(meanfield::MeanFieldState(meanfield::coherent_state(0.3, 12)), p)
                         .cwiseAbs()
                         .maxCoeff();
  return {worst <= 1e-9 && coh <= 1e-9,
          fmt("decoupler vs tables %.1e over 20 moment sets x chi in {0,1,2} (<= 1e-9); coherent residual %.1e (<= 1e-9)",
              worst, coh)};
}

Verdict criterion8() {
  const auto d1 = array::appendixA_transformation_check(0.01, 2);
  const auto d2 = array::appendixA_transformation_check(0.02, 2);
  const double ro = d2.orthogonality / d1.orthogonality, rf = d2.off_diagonal / d1.off_diagonal;
  const bool ok = ro >= 3.2 && ro <= 4.8 && rf >= 3.2 && rf <= 4.8 && d1.orthogonality <= 3e-4 && d1.off_diagonal <= 3e-4;
  return {ok, fmt("J=0.01: orth %.2e, offdiag %.2e (<= 3e-4); doubling ratios %.3f, %.3f (in [3.2, 4.8])",
                  d1.orthogonality, d1.off_diagonal, ro, rf)};
}

Verdict criterion9() {
  const auto r = run_recipe("fig8");
  keep("fig8", r);
  const auto e = column(r, "E"), ratio = column(r, "population_ratio"), tr = column(r, "trace_sep");
  bool ratio_up = true, trace_up = true;
  for (std::size_t i = 1; i < e.size(); ++i) {
    ratio_up = ratio_up && ratio[i] > ratio[i - 1];
    trace_up = trace_up && tr[i] > tr[i - 1];
  }
  std::vector<double> y;
  for (double t : tr) y.push_back(std::log(std::max(1.0 - t, 1e-300)));
  const auto fit = fit_line(e, y);
  const bool ok = ratio_up && trace_up && fit.slope < 0.0 && fit.r2 >= 0.9;
  return {ok, fmt("population ratio %.3f -> %.3f %s; Tr rho_sep %.3f -> %.3f (min %.3f) %s; log(1-Tr) slope %.3f R^2 %.3f",
                  ratio.front(), ratio.back(), ratio_up ? "strictly increasing" : "NOT monotone", tr.front(), tr.back(),
                  *std::min_element(tr.begin(), tr.end()), trace_up ? "increasing" : "NOT increasing", fit.slope,
                  fit.r2)};
}

double decay_error(double dt) {
  const auto l = ModeLayout::single("a", 3);
  const MasterEquation me(FockOperator::zero(l), {{lowering(l, "a"), 1.0}});
  Matrix rho0 = Matrix::Zero(4, 4);
  rho0(3, 3) = 1.0;
  EvolveOptions o;
  o.dt = dt;
  o.t_final = 1.0;
  o.stride = 1 << 30;
  const auto tr = evolve_rk4(me, rho0, o, {{"n", number(l, "a")}});
  return std::abs(tr.values.back()[0].real() - 3.0 * std::exp(-2.0));
}

Verdict criterion10() {
  double drift = 0.0, herm = 0.0, eig = 1.0;
  std::string worst_run;
  for (const auto& [name, d] : g_diagnostics) {
    drift = std::max(drift, d["max_trace_drift"].get<double>());
    herm = std::max(herm, d["max_herm_defect"].get<double>());
    if (d["min_eigenvalue"].get<double>() < eig) eig = d["min_eigenvalue"], worst_run = name;
  }
  const double order = decay_error(0.1) / decay_error(0.05);
  const bool ok = !g_diagnostics.empty() && drift <= 1e-6 && herm <= 1e-8 && eig >= -1e-6 && order >= 12 && order <= 20;
  return {ok, fmt("%zu engine runs: trace drift %.1e (<= 1e-6), herm %.1e (<= 1e-8), min eig %.1e (>= -1e-6, %s); RK4 "
                  "order factor %.2f (in [12, 20])",
                  g_diagnostics.size(), drift, herm, eig, worst_run.c_str(), order)};
}

}  // namespace

int main() {
  const std::set<int> known_red{1, 9};
  const std::vector<std::function<Verdict()>> checks{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                     criterion6, criterion7, criterion8, criterion9, criterion10};
  std::set<int> failed;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = checks[i]();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!v.pass) failed.insert(id);
    std::printf("%s criterion %d: %s [%.1f s]%s\n", v.pass ? "PASS" : "FAIL", id, v.detail.c_str(), wall,
                !v.pass && known_red.contains(id) ? " (known red)" : "");
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria pass; documented known-red set {1, 9}\n", checks.size() - failed.size(), checks.size());
  if (failed != known_red) {
    std::printf("failing set differs from the documented known-red set\n");
    return 1;
  }
  return 0;
}
