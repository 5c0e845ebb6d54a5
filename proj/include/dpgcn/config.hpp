#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "dpgcn/errors.hpp"
#include "dpgcn/gcn.hpp"
#include "dpgcn/graph.hpp"
#include "dpgcn/mechanism.hpp"

namespace dpgcn {

// Key-value config format: one "key = value" per line, '#' comments, blank
// lines ignored. Keys are validated by the consumer so typos surface early.
using KvMap = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace detail

inline KvMap parse_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("config: cannot open " + path);
  KvMap kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const std::string body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw validation_error(path + ":" + std::to_string(lineno) +
                             ": expected \"key = value\"");
    }
    const std::string key = detail::trim(body.substr(0, eq));
    const std::string value = detail::trim(body.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw validation_error(path + ":" + std::to_string(lineno) +
                             ": expected \"key = value\"");
    }
    kv[key] = value;
  }
  return kv;
}

namespace detail {

inline double parse_double_field(const std::string& field, const std::string& value) {
  std::istringstream ss(value);
  double x = 0.0;
  std::string extra;
  if (!(ss >> x) || (ss >> extra)) {
    throw validation_error(field + ": expected a number, got \"" + value + "\"");
  }
  return x;
}

inline long long parse_int_field(const std::string& field, const std::string& value) {
  std::istringstream ss(value);
  long long x = 0;
  std::string extra;
  if (!(ss >> x) || (ss >> extra)) {
    throw validation_error(field + ": expected an integer, got \"" + value + "\"");
  }
  return x;
}

inline std::uint64_t parse_seed_field(const std::string& field, const std::string& value) {
  std::istringstream ss(value);
  std::uint64_t x = 0;
  std::string extra;
  if (!(ss >> x) || (ss >> extra)) {
    throw validation_error(field + ": expected an unsigned integer, got \"" + value + "\"");
  }
  return x;
}

}  // namespace detail

// Recognized keys: eps, delta, ps, m (integer or "auto"), m_cap, seed,
// threads, vote_mode. Absent keys keep the passed-in defaults.
inline MechanismConfig mechanism_config_from_kv(const KvMap& kv,
                                                MechanismConfig base = MechanismConfig{}) {
  for (const auto& [key, value] : kv) {
    if (key == "eps") {
      base.epsilon = detail::parse_double_field("eps", value);
    } else if (key == "delta") {
      base.delta = detail::parse_double_field("delta", value);
    } else if (key == "ps") {
      base.ps = detail::parse_double_field("ps", value);
    } else if (key == "m") {
      if (value == "auto") {
        base.m_auto = true;
      } else {
        base.m_auto = false;
        base.m = detail::parse_int_field("m", value);
      }
    } else if (key == "m_cap") {
      base.m_cap = detail::parse_int_field("m_cap", value);
    } else if (key == "seed") {
      base.seed = detail::parse_seed_field("seed", value);
    } else if (key == "threads") {
      base.threads = static_cast<int>(detail::parse_int_field("threads", value));
    } else if (key == "vote_mode") {
      base.vote_mode = parse_vote_mode(value);
    }
  }
  return base;
}

// Recognized keys: activation, h0, h1, tau.
inline GcnModel model_from_kv(const KvMap& kv, GcnModel base = GcnModel{}) {
  for (const auto& [key, value] : kv) {
    if (key == "activation") {
      base.activation = parse_activation(value);
    } else if (key == "h0") {
      base.h0 = detail::parse_double_field("h0", value);
    } else if (key == "h1") {
      base.h1 = detail::parse_double_field("h1", value);
    } else if (key == "tau") {
      base.tau = detail::parse_double_field("tau", value);
    }
  }
  return base;
}

// Declarative experiment: graph source (SBM parameters, or explicit files),
// model, mechanism config, and verification loop settings.
struct ExperimentConfig {
  // graph source: either files...
  std::string graph_path;     // edge-list file; empty -> generate SBM
  std::string features_path;  // required with graph_path
  // ...or SBM generation
  SbmParams sbm{20, 0.5, 0.1};

  GcnModel model{1.0, 0.05, Activation::kTanh, 0.0};
  MechanismConfig mechanism{.m_auto = true};  // minimal configs resolve m automatically
  long long trials = 200;  // per-trial verification records
  double eta = 0.25;

  void validate() const {
    if (graph_path.empty()) {
      sbm.validate();
    } else if (features_path.empty()) {
      throw validation_error("features: required when graph is given");
    }
    mechanism.validate();
    if (trials < 1) throw validation_error("trials: must be >= 1");
    if (!(eta > 0.0 && eta < 1.0)) throw validation_error("eta: must be in (0,1)");
  }
};

inline ExperimentConfig parse_experiment_config(const std::string& path) {
  const KvMap kv = parse_kv_file(path);
  static const std::map<std::string, int> known = {
      {"graph", 0},  {"features", 0}, {"n", 0},     {"p_in", 0},   {"p_out", 0},
      {"eps", 0},    {"delta", 0},    {"ps", 0},    {"m", 0},      {"m_cap", 0},
      {"seed", 0},   {"threads", 0},  {"vote_mode", 0}, {"activation", 0},
      {"h0", 0},     {"h1", 0},       {"tau", 0},   {"trials", 0}, {"eta", 0}};
  for (const auto& [key, value] : kv) {
    if (known.find(key) == known.end()) {
      throw validation_error(key + ": unknown experiment config key");
    }
  }

  ExperimentConfig cfg;
  cfg.mechanism = mechanism_config_from_kv(kv, cfg.mechanism);
  cfg.model = model_from_kv(kv, cfg.model);
  for (const auto& [key, value] : kv) {
    if (key == "graph") {
      cfg.graph_path = value;
    } else if (key == "features") {
      cfg.features_path = value;
    } else if (key == "n") {
      cfg.sbm.n = static_cast<int>(detail::parse_int_field("n", value));
    } else if (key == "p_in") {
      cfg.sbm.p_in = detail::parse_double_field("p_in", value);
    } else if (key == "p_out") {
      cfg.sbm.p_out = detail::parse_double_field("p_out", value);
    } else if (key == "trials") {
      cfg.trials = detail::parse_int_field("trials", value);
    } else if (key == "eta") {
      cfg.eta = detail::parse_double_field("eta", value);
    }
  }
  cfg.validate();
  return cfg;
}

}  // namespace dpgcn
