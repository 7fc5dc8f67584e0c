#pragma once

#include <yaml-cpp/yaml.h>

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

#include "omlat/error.hpp"
#include "omlat/fock.hpp"

// Experiment recipes: flat YAML mappings, one section per model block.
// Every file is checked against a per-experiment schema of defaults; unknown
// sections or keys are rejected and the merged result is the resolved config.
namespace omlat::config {

using json = nlohmann::json;

inline const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> k{"spectrum",        "detuning-sweep",  "separability",
                                          "semiclassical",   "darkstate-check", "meanfield-evolve",
                                          "meanfield-sweep", "orderparam"};
  return k;
}

namespace detail {

// Complex-valued keys take a number or [re, im].
inline json cx(double re, double im = 0.0) { return json::array({re, im}); }

inline json lambda_section() {
  return {{"E", cx(0.0)},      {"Delta", 50.0},   {"Jtilde", 0.2},   {"kappa", 0.1},
          {"Gamma_tilde", 1.0}, {"n_th", 0.0},    {"chi", 0.0},      {"eps1", cx(0.0)},
          {"eps2", cx(0.0)},   {"Delta1", 0.0}};
}

inline json meanfield_section() {
  return {{"Gamma_prime", 0.0}, {"chi", 1.0}, {"n_th", 0.0}, {"Upsilon", 0.5}, {"kappa", 1.0}};
}

inline json common(const std::string& kind, const std::string& units) {
  return {{"experiment", kind}, {"figure", ""}, {"description", ""},
          {"units", units},     {"rng_seed", 0},  {"output", kind}};
}

}  // namespace detail

// Defaults for one experiment kind; defines the accepted keys.
inline json schema(const std::string& kind) {
  using detail::cx;
  json s;
  if (kind == "spectrum") {
    s = detail::common(kind, "gamma_tilde");
    s["lambda"] = detail::lambda_section();
    s["truncation"] = {{"n_a", 4}, {"n_c", 2}};
    s["integrator"] = {{"dt", 0.0}, {"t0", 50.0}, {"window", 450.0}, {"sample_dt", 0.1}, {"steady_tol", 1e-8}};
  } else if (kind == "detuning-sweep") {
    s = detail::common(kind, "gamma_tilde");
    s["lambda"] = detail::lambda_section();
    s["truncation"] = {{"n_a", 4}, {"n_c", 2}};
    s["sweep"] = {{"Delta1_min", 0.0}, {"Delta1_max", 4.0}, {"Delta1_step", 0.2}, {"n_th", json::array({0.0})}};
  } else if (kind == "separability") {
    s = detail::common(kind, "gamma_tilde");
    s["lambda"] = detail::lambda_section();
    s["truncation"] = {{"n_a", 5}, {"n_c", 1}};
    s["integrator"] = {{"dt", 0.0}, {"t_final", 10.0}};
    s["sweep"] = {{"E_min", 0.0}, {"E_max", 1.0}, {"E_step", 0.1}};
  } else if (kind == "semiclassical") {
    s = detail::common(kind, "gamma_tilde");
    s["array"] = {{"L", 12}, {"E", cx(0.2)}, {"Delta", -10.0}, {"chi", 0.0}, {"Gamma_tilde", 1.0}};
    s["initial"] = {{"amplitude", 1.0}};
    s["integrator"] = {{"dt", 0.02}, {"t_final", 15000.0}, {"output_stride", 500}};
  } else if (kind == "darkstate-check") {
    s = detail::common(kind, "gamma_tilde");
    s["array"] = {{"E", cx(0.2)}, {"Delta", -10.0}, {"chi", 0.0}, {"Gamma_tilde", 1.0}};
    s["check"] = {{"L_max", 6}, {"N_max", 3}, {"L_momentum", 12}};
  } else if (kind == "meanfield-evolve") {
    s = detail::common(kind, "kappa");
    s["meanfield"] = detail::meanfield_section();
    s["truncation"] = {{"n_max", 12}};
    s["integrator"] = {{"dt", 0.01}, {"t_final", 100.0}, {"output_stride", 10}};
    s["seed"] = {{"amplitude", 0.1}, {"duration", 1.0}};
  } else if (kind == "meanfield-sweep") {
    s = detail::common(kind, "kappa");
    s["meanfield"] = detail::meanfield_section();
    s["truncation"] = {{"n_max", 12}};
    s["integrator"] = {{"dt", 0.01}, {"t_final", 100.0}};
    s["seed"] = {{"amplitude", 0.1}, {"duration", 1.0}};
    s["sweep"] = {{"Gamma_prime_min", 0.15}, {"Gamma_prime_max", 3.0}, {"points", 20}};
  } else if (kind == "orderparam") {
    s = detail::common(kind, "kappa");
    s["flow"] = {{"kappa", 1.0}, {"Upsilon", 0.5}};
    s["sweep"] = {{"Gamma_prime_min", 0.0}, {"Gamma_prime_max", 3.0}, {"points", 31}};
  } else {
    throw ValidationError("unknown experiment '" + kind + "'");
  }
  return s;
}

// YAML -> JSON. Quoted scalars stay strings; plain scalars become numbers or
// booleans when they parse as such.
inline json to_json(const YAML::Node& n) {
  switch (n.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined: return nullptr;
    case YAML::NodeType::Sequence: {
      json a = json::array();
      for (const auto& x : n) a.push_back(to_json(x));
      return a;
    }
    case YAML::NodeType::Map: {
      json o = json::object();
      for (const auto& kv : n) {
        const auto key = kv.first.as<std::string>();
        if (o.contains(key)) throw ValidationError("duplicate key '" + key + "'");
        o[key] = to_json(kv.second);
      }
      return o;
    }
    case YAML::NodeType::Scalar: {
      const std::string& v = n.Scalar();
      if (n.Tag() == "!") return v;
      long long i;
      if (YAML::convert<long long>::decode(n, i)) return i;
      double d;
      if (YAML::convert<double>::decode(n, d)) return d;
      bool b;
      if (YAML::convert<bool>::decode(n, b)) return b;
      return v;
    }
  }
  return nullptr;
}

namespace detail {

inline bool is_complex_default(const json& d) { return d.is_array() && d.size() == 2 && d[0].is_number(); }

inline json coerce(const std::string& where, const json& def, const json& v) {
  auto fail = [&](const std::string& what) { throw ValidationError(where + ": expected " + what); };
  if (is_complex_default(def)) {
    if (v.is_number()) return cx(v.get<double>());
    if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
      return cx(v[0].get<double>(), v[1].get<double>());
    fail("a number or [re, im]");
  }
  if (def.is_array()) {
    if (!v.is_array()) fail("a list of numbers");
    json out = json::array();
    for (const auto& x : v) {
      if (!x.is_number()) fail("a list of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }
  if (def.is_number_integer()) {
    if (!v.is_number_integer()) fail("an integer");
    return v;
  }
  if (def.is_number()) {
    if (!v.is_number()) fail("a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail("a finite number");
    return d;
  }
  if (def.is_string()) {
    if (v.is_string()) return v;
    if (v.is_number()) return v.dump();  // figure: 3
    fail("a string");
  }
  return v;
}

}  // namespace detail

// Merge `doc` over the schema defaults, rejecting unknown keys.
inline json resolve(const json& doc) {
  if (!doc.is_object()) throw ValidationError("config must be a mapping");
  if (!doc.contains("experiment") || !doc["experiment"].is_string())
    throw ValidationError("config needs an 'experiment' key");
  const std::string kind = doc["experiment"].get<std::string>();
  json out = schema(kind);
  for (const auto& [k, v] : doc.items()) {
    if (!out.contains(k)) throw ValidationError("unknown key '" + k + "'");
    const json& def = out[k];
    if (def.is_object()) {
      if (!v.is_object()) throw ValidationError("section '" + k + "' must be a mapping");
      for (const auto& [kk, vv] : v.items()) {
        if (!def.contains(kk)) throw ValidationError("unknown key '" + k + "." + kk + "'");
        out[k][kk] = detail::coerce(k + "." + kk, def[kk], vv);
      }
    } else {
      out[k] = detail::coerce(k, def, v);
    }
  }
  const std::string want = schema(kind)["units"].get<std::string>();
  if (out["units"] != want)
    throw ValidationError("units: experiment '" + kind + "' is expressed in units of " + want);
  return out;
}

inline json load(const std::filesystem::path& path) {
  YAML::Node n;
  try {
    n = YAML::LoadFile(path.string());
  } catch (const YAML::BadFile&) {
    throw IoError("cannot read config " + path.string());
  } catch (const YAML::Exception& e) {
    throw ValidationError("config parse error in " + path.string() + ": " + e.what());
  }
  return resolve(to_json(n));
}

inline json parse(const std::string& text) {
  try {
    return resolve(to_json(YAML::Load(text)));
  } catch (const YAML::Exception& e) {
    throw ValidationError(std::string("config parse error: ") + e.what());
  }
}

// FNV-1a 64-bit over the canonical dump (keys sorted).
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string config_hash(const json& resolved) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(resolved.dump())));
  return buf;
}

inline cplx get_complex(const json& v) { return {v[0].get<double>(), v[1].get<double>()}; }

// Inclusive grid lo, lo + step, ... up to hi (within half a step).
inline std::vector<double> step_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi >= lo)) throw ValidationError("grid needs step > 0 and max >= min");
  const auto n = static_cast<long>(std::floor((hi - lo) / step + 0.5));
  if (n > 100000) throw ValidationError("grid too large");
  std::vector<double> g;
  for (long i = 0; i <= n; ++i) g.push_back(lo + static_cast<double>(i) * step);
  return g;
}

inline std::vector<double> linspace(double lo, double hi, long points) {
  if (points < 1 || !(hi >= lo)) throw ValidationError("grid needs points >= 1 and max >= min");
  std::vector<double> g;
  for (long i = 0; i < points; ++i)
    g.push_back(points == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1));
  return g;
}

}  // namespace omlat::config
