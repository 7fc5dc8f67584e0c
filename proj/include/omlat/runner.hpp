#pragma once

#include <array>
#include <chrono>
#include <filesystem>
#include <numbers>
#include <string>

#include "omlat/array_model.hpp"
#include "omlat/config.hpp"
#include "omlat/lambda_model.hpp"
#include "omlat/meanfield.hpp"
#include "omlat/orderparam.hpp"
#include "omlat/output.hpp"

// Dispatch from a resolved config to the model modules.
namespace omlat::runner {

using json = nlohmann::json;
using output::Table;

struct RunOutput {
  Table table;
  json results = json::object();      // experiment-specific summary
  json diagnostics = json::object();  // engine health
};

inline json to_json(const EngineDiagnostics& d) {
  return {{"max_trace_drift", d.max_trace_drift},
          {"max_herm_defect", d.max_herm_defect},
          {"min_eigenvalue", d.min_eigenvalue},
          {"steps", d.steps},
          {"dt", d.dt}};
}

inline lambda::LambdaParams lambda_params(const json& s) {
  lambda::LambdaParams p;
  p.E = config::get_complex(s["E"]);
  p.Delta = s["Delta"];
  p.Jtilde = s["Jtilde"];
  p.kappa = s["kappa"];
  p.Gamma_tilde = s["Gamma_tilde"];
  p.n_th = s["n_th"];
  p.chi_ratio = s["chi"];
  p.eps1 = config::get_complex(s["eps1"]);
  p.eps2 = config::get_complex(s["eps2"]);
  p.Delta1 = s["Delta1"];
  p.validate();
  return p;
}

inline array::ArrayParams array_params(const json& s, int L) {
  array::ArrayParams p;
  p.L = L;
  p.E = config::get_complex(s["E"]);
  p.Delta = s["Delta"];
  p.chi = s["chi"];
  p.Gamma_tilde = s["Gamma_tilde"];
  p.validate();
  return p;
}

inline meanfield::MeanFieldParams meanfield_params(const json& s) {
  meanfield::MeanFieldParams p;
  p.Gamma_prime = s["Gamma_prime"];
  p.chi = s["chi"];
  p.n_th = s["n_th"];
  p.Upsilon = s["Upsilon"];
  p.kappa = s["kappa"];
  p.validate();
  return p;
}

inline RunOutput run_spectrum(const json& c) {
  const auto p = lambda_params(c["lambda"]);
  lambda::SpectrumOptions o;
  o.n_a = c["truncation"]["n_a"];
  o.n_c = c["truncation"]["n_c"];
  o.dt = c["integrator"]["dt"];
  o.t0 = c["integrator"]["t0"];
  o.window = c["integrator"]["window"];
  o.sample_dt = c["integrator"]["sample_dt"];
  o.steady_tol = c["integrator"]["steady_tol"];
  const auto run = lambda::run_spectrum_experiment(p, o);
  const auto pk = lambda::mode_peaks(run.spectrum, p.Jtilde);

  RunOutput out;
  out.table.columns = {"omega", "amplitude"};
  out.table.comments = {"convention: " + run.spectrum.convention};
  for (std::size_t i = 0; i < run.spectrum.frequencies.size(); ++i)
    out.table.add({run.spectrum.frequencies[i], run.spectrum.amplitudes[i]});
  out.results = {{"symmetric_peak", {pk.symmetric_position, pk.symmetric_height}},
                 {"antisymmetric_peak", {pk.antisymmetric_position, pk.antisymmetric_height}},
                 {"steady_residual", run.steady_residual},
                 {"steady_time", run.steady_time},
                 {"n_s", run.n_s},
                 {"n_a", run.n_a},
                 {"n_c", run.n_c},
                 {"convention", run.spectrum.convention}};
  out.diagnostics = to_json(run.diagnostics);
  return out;
}

inline RunOutput run_detuning_sweep(const json& c, unsigned threads) {
  const auto base = lambda_params(c["lambda"]);
  const auto& sw = c["sweep"];
  const auto grid = config::step_grid(sw["Delta1_min"], sw["Delta1_max"], sw["Delta1_step"]);
  RunOutput out;
  out.table.columns = {"n_th", "Delta1", "n_s", "n_a", "n_c", "residual", "min_eigenvalue"};
  EngineDiagnostics diag;
  for (double nth : sw["n_th"].get<std::vector<double>>()) {
    auto p = base;
    p.n_th = nth;
    p.validate();
    const auto rows = lambda::run_detuning_sweep(p, grid, c["truncation"]["n_a"], c["truncation"]["n_c"], threads);
    for (const auto& r : rows) {
      out.table.add({nth, r.Delta1, r.n_s, r.n_a, r.n_c, r.residual, r.min_eigenvalue});
      diag.merge(r.diagnostics);
    }
  }
  out.diagnostics = to_json(diag);
  return out;
}

inline RunOutput run_separability(const json& c, unsigned threads) {
  const auto p = lambda_params(c["lambda"]);
  const auto& sw = c["sweep"];
  const auto grid = config::step_grid(sw["E_min"], sw["E_max"], sw["E_step"]);
  lambda::SeparabilityOptions o;
  o.n_a = c["truncation"]["n_a"];
  o.n_c = c["truncation"]["n_c"];
  o.dt = c["integrator"]["dt"];
  o.t_max = c["integrator"]["t_final"];
  const auto rows = lambda::separability_scan(p, grid, o, threads);
  RunOutput out;
  out.table.columns = {"E",   "population_ratio", "trace_sep", "trace_sep_swapped", "n_s",
                       "n_a", "n_c",              "decomposition_defect", "min_eigenvalue"};
  out.table.comments = {"trace_sep_swapped selects on the antisymmetric occupation (diagnostic)"};
  EngineDiagnostics diag;
  for (const auto& r : rows) {
    out.table.add({r.E, r.population_ratio, r.trace_sep, r.trace_sep_swapped, r.n_s, r.n_a, r.n_c,
                   r.decomposition_defect, r.min_eigenvalue});
    diag.merge(r.diagnostics);
  }
  out.diagnostics = to_json(diag);
  return out;
}

inline RunOutput run_semiclassical(const json& c) {
  const auto p = array_params(c["array"], c["array"]["L"]);
  const auto s0 = array::random_phase_state(p.L, c["initial"]["amplitude"], c["rng_seed"].get<std::uint64_t>());
  const auto& in = c["integrator"];
  const auto run = array::evolve_semiclassical(p, s0, in["dt"], in["t_final"], in["output_stride"]);
  RunOutput out;
  auto& cols = out.table.columns;
  cols = {"t"};
  for (int l = 1; l <= p.L; ++l) cols.push_back("c2_" + std::to_string(l));
  for (int l = 1; l <= p.L; ++l) cols.push_back("alpha2_" + std::to_string(l));
  for (int l = 1; l <= p.L; ++l) cols.push_back("phi_" + std::to_string(l));
  cols.push_back("c2_total");
  cols.push_back("norm");
  for (const auto& smp : run.samples) {
    std::vector<double> row{smp.t};
    row.insert(row.end(), smp.c2.begin(), smp.c2.end());
    row.insert(row.end(), smp.alpha2.begin(), smp.alpha2.end());
    row.insert(row.end(), smp.phi.begin(), smp.phi.end());
    row.push_back(smp.c2_total);
    row.push_back(smp.norm);
    out.table.add(std::move(row));
  }
  double max_phi = 0.0;
  for (double v : run.samples.back().phi) max_phi = std::max(max_phi, std::abs(v));
  out.results = {{"final_max_abs_phi", max_phi},
                 {"final_c2_total", run.samples.back().c2_total},
                 {"max_norm_drift", run.max_norm_drift},
                 {"drive_interpretation", "E = drive strength, Delta = detuning, both in units of Gamma_tilde"}};
  out.diagnostics = {{"max_norm_drift", run.max_norm_drift}};
  return out;
}

inline RunOutput run_darkstate(const json& c, unsigned threads) {
  const auto& ck = c["check"];
  const int l_max = ck["L_max"], n_max = ck["N_max"], l_mom = ck["L_momentum"];
  if (l_max < 2 || n_max < 1 || l_mom < 2) throw ValidationError("check needs L_max >= 2, N_max >= 1, L_momentum >= 2");
  struct Job {
    int L, N, m;
  };
  std::vector<Job> jobs;
  for (int L = 2; L <= l_max; ++L)
    for (int N = 1; N <= n_max; ++N) jobs.push_back({L, N, -1});
  for (int m = 0; m < l_mom; ++m) jobs.push_back({l_mom, 1, m});
  const auto res = parallel_map(jobs.size(), threads, [&](std::size_t i) {
    const Job& j = jobs[i];
    const auto p = array_params(c["array"], j.L);
    if (j.m < 0) return std::array<double, 5>{double(j.L), double(j.N), 0.0, array::condensate_residual(p, j.N), 0.0};
    const double k = 2.0 * std::numbers::pi * j.m / j.L;
    const auto d = array::momentum_dark_state_check(p, k, 0);
    return std::array<double, 5>{double(j.L), 1.0, k, d.single_particle, d.e_ik_minus_1};
  });
  RunOutput out;
  out.table.columns = {"L", "N", "k", "residual", "abs_exp_ik_minus_1"};
  out.table.comments = {"rows with k = 0 and N >= 1 on L <= L_max: brute-force k = 0 condensate",
                        "rows on L = L_momentum: one-photon plane waves"};
  double worst = 0.0;
  for (std::size_t i = 0; i < res.size(); ++i) {
    out.table.add({res[i].begin(), res[i].end()});
    if (jobs[i].m < 0) worst = std::max(worst, res[i][3]);
  }
  out.results = {{"max_condensate_residual", worst}};
  return out;
}

inline meanfield::MeanFieldOptions meanfield_options(const json& c) {
  meanfield::MeanFieldOptions o;
  o.dt = c["integrator"]["dt"];
  o.t_final = c["integrator"]["t_final"];
  if (c["integrator"].contains("output_stride")) o.stride = c["integrator"]["output_stride"];
  o.seed.amplitude = c["seed"]["amplitude"];
  o.seed.duration = c["seed"]["duration"];
  return o;
}

inline RunOutput run_meanfield_evolve(const json& c) {
  const auto p = meanfield_params(c["meanfield"]);
  const auto tr = meanfield::evolve_meanfield(meanfield::vacuum(c["truncation"]["n_max"]), p, meanfield_options(c));
  RunOutput out;
  out.table.columns = {"t", "n", "coh_frac", "g2", "alpha2"};
  for (const auto& s : tr.samples) out.table.add({s.t, s.obs.n, s.obs.coherent_fraction, s.obs.g2, s.obs.alpha2});
  out.results = {{"final_residual", tr.final_residual}, {"Gamma", p.Gamma()}, {"chi", p.chi}};
  out.diagnostics = to_json(tr.diagnostics);
  return out;
}

inline RunOutput run_meanfield_sweep(const json& c, unsigned threads) {
  const auto p = meanfield_params(c["meanfield"]);
  const auto& sw = c["sweep"];
  const auto grid = config::linspace(sw["Gamma_prime_min"], sw["Gamma_prime_max"], sw["points"]);
  const auto rows = meanfield::transition_sweep(p, grid, c["truncation"]["n_max"], meanfield_options(c), threads);
  RunOutput out;
  out.table.columns = {"Gamma_prime", "n", "coh_frac", "g2", "residual"};
  EngineDiagnostics diag;
  for (const auto& r : rows) {
    out.table.add({r.Gamma_prime, r.obs.n, r.obs.coherent_fraction, r.obs.g2, r.residual});
    diag.merge(r.diagnostics);
  }
  out.results = {{"chi", p.chi}};
  out.diagnostics = to_json(diag);
  return out;
}

inline RunOutput run_orderparam(const json& c) {
  orderparam::FlowParams p;
  p.kappa = c["flow"]["kappa"];
  p.Upsilon = c["flow"]["Upsilon"];
  p.validate();
  const auto& sw = c["sweep"];
  RunOutput out;
  out.table.columns = {"Gamma_prime", "alpha2", "coh_frac", "nbar", "kappa_eff", "upsilon_eff"};
  for (double g : config::linspace(sw["Gamma_prime_min"], sw["Gamma_prime_max"], sw["points"])) {
    p.Gamma_prime = g;
    const auto r = orderparam::analytic_row(p);
    out.table.add({r.Gamma_prime, r.alpha2, r.coherent_fraction, r.nbar, r.kappa_eff, r.upsilon_eff});
  }
  p.Gamma_prime = 0.0;
  out.results = {{"Gamma_prime_crit", orderparam::gamma_prime_crit(p)}, {"n_inf", p.n_inf()}};
  return out;
}

inline RunOutput run(const json& c, unsigned threads = 0) {
  const std::string kind = c["experiment"];
  if (kind == "spectrum") return run_spectrum(c);
  if (kind == "detuning-sweep") return run_detuning_sweep(c, threads);
  if (kind == "separability") return run_separability(c, threads);
  if (kind == "semiclassical") return run_semiclassical(c);
  if (kind == "darkstate-check") return run_darkstate(c, threads);
  if (kind == "meanfield-evolve") return run_meanfield_evolve(c);
  if (kind == "meanfield-sweep") return run_meanfield_sweep(c, threads);
  if (kind == "orderparam") return run_orderparam(c);
  throw ValidationError("unknown experiment '" + kind + "'");
}

struct Artifacts {
  std::filesystem::path csv;
  std::filesystem::path metadata;
};

// Runs and writes <out_dir>/<output>.csv plus <output>.json.
inline Artifacts run_and_write(const json& c, const std::filesystem::path& out_dir, unsigned threads = 0) {
  const auto t0 = std::chrono::steady_clock::now();
  const RunOutput r = run(c, threads);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const std::string hash = config::config_hash(c);
  const std::string stem = c["output"];
  if (stem.empty() || stem.find('/') != std::string::npos) throw ValidationError("output must be a plain file stem");
  Artifacts a{out_dir / (stem + ".csv"), out_dir / (stem + ".json")};
  output::write_file(a.csv, output::render_csv(r.table, c["experiment"], hash));
  const json meta = {{"omlat_version", output::kVersion},
                     {"experiment", c["experiment"]},
                     {"figure", c["figure"]},
                     {"config", c},
                     {"config_hash", hash},
                     {"wall_time_s", wall},
                     {"csv", a.csv.filename().string()},
                     {"columns", r.table.columns},
                     {"results", r.results},
                     {"diagnostics", r.diagnostics}};
  output::write_file(a.metadata, meta.dump(2) + "\n");
  return a;
}

}  // namespace omlat::runner
