#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "dpgcn/errors.hpp"
#include "dpgcn/gcn.hpp"
#include "dpgcn/graph.hpp"
#include "dpgcn/rng.hpp"
#include "dpgcn/theory.hpp"

namespace dpgcn {

// Whole-vector voting is the mode the stability score is defined over and the
// only mode covered by the privacy analysis. Per-node voting is experimental.
enum class VoteMode { kWholeVector, kPerNode };

inline std::string vote_mode_name(VoteMode m) {
  return m == VoteMode::kWholeVector ? "whole_vector" : "per_node";
}

inline VoteMode parse_vote_mode(const std::string& s) {
  if (s == "whole_vector") return VoteMode::kWholeVector;
  if (s == "per_node") return VoteMode::kPerNode;
  throw validation_error("vote_mode: expected whole_vector|per_node, got \"" + s + "\"");
}

struct MechanismConfig {
  double epsilon = 1.0;
  double delta = 0.01;
  double ps = 0.5;
  long long m = 0;      // ignored when m_auto is set
  bool m_auto = false;  // resolve m = ceil(ln(n/delta)/ps^2) at run time
  long long m_cap = kDefaultMCap;
  std::uint64_t seed = 0;
  VoteMode vote_mode = VoteMode::kWholeVector;
  int threads = 1;

  void validate() const {
    if (!(epsilon > 0.0)) throw validation_error("epsilon: must be > 0");
    if (!(delta > 0.0 && delta < 1.0)) throw validation_error("delta: must be in (0,1)");
    if (!(ps > 0.0 && ps <= 1.0)) throw validation_error("ps: must be in (0,1]");
    if (!m_auto && m < 1) throw validation_error("m: must be >= 1 or \"auto\"");
    if (m_cap < 1) throw validation_error("m_cap: must be >= 1");
    if (threads < 1) throw validation_error("threads: must be >= 1");
  }
};

struct VoteTally {
  LabelVector consensus;
  int c1 = 0;        // frequency of the most common label vector
  int c2 = 0;        // frequency of the second most common (0 if all identical)
  int distinct = 0;  // number of distinct vectors
};

struct MechanismOutcome {
  bool released = false;
  std::optional<LabelVector> labels;  // present iff released
  double d_hat = 0.0;
  double d_tilde = 0.0;
  double threshold = 0.0;  // ln(1/delta)/epsilon
  long long m = 0;         // resolved subsample count
  VoteTally tally;
  std::vector<std::string> warnings;
};

// Each undirected edge kept independently with probability ps, one draw per
// unordered pair. ps = 0 is allowed here (testing); run_mechanism rejects it.
inline Graph subsample_edges(const Graph& g, double ps, RngStream& stream) {
  if (!(ps >= 0.0 && ps <= 1.0)) throw validation_error("subsample_edges: ps must be in [0,1]");
  std::vector<Edge> kept;
  kept.reserve(g.edges().size());
  for (const auto& e : g.edges()) {
    if (stream.uniform01() < ps) kept.push_back(e);
  }
  return Graph(g.node_count(), std::move(kept), Graph::CanonicalTag{});
}

// Groups identical whole vectors; consensus is the most frequent one, ties
// broken by the +1-first lexicographic order. In per-node mode the consensus
// is the coordinatewise majority (ties to +1) while c1/c2/distinct keep their
// vector-level meaning so the stability score stays well defined.
inline VoteTally majority_vote(const std::vector<LabelVector>& vectors,
                               VoteMode mode = VoteMode::kWholeVector) {
  if (vectors.empty()) throw validation_error("majority_vote: empty vector list");
  const int n = vectors.front().size();
  for (const auto& v : vectors) {
    if (v.size() != n) throw validation_error("majority_vote: label vectors differ in length");
  }

  std::map<LabelVector, int, PlusFirstLess> groups;
  for (const auto& v : vectors) ++groups[v];

  VoteTally tally;
  tally.distinct = static_cast<int>(groups.size());
  for (const auto& [vec, count] : groups) {
    if (count > tally.c1) {
      tally.c2 = tally.c1;
      tally.c1 = count;
      tally.consensus = vec;
    } else if (count > tally.c2) {
      tally.c2 = count;
    }
  }

  if (mode == VoteMode::kPerNode) {
    std::vector<std::int8_t> consensus(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      int plus = 0;
      for (const auto& v : vectors) plus += v[i] > 0 ? 1 : 0;
      consensus[static_cast<size_t>(i)] =
          2 * plus >= static_cast<int>(vectors.size()) ? 1 : -1;
    }
    tally.consensus = LabelVector(std::move(consensus));
  }
  return tally;
}

// Stability score d_hat = (c1 - c2) / (4 m ps) - 1. May be negative.
inline double stability_score(const VoteTally& tally, long long m, double ps) {
  if (m < 1) throw validation_error("stability_score: m must be >= 1");
  if (!(ps > 0.0)) throw validation_error("stability_score: ps must be > 0");
  return static_cast<double>(tally.c1 - tally.c2) / (4.0 * static_cast<double>(m) * ps) - 1.0;
}

inline double ptr_threshold(double epsilon, double delta) {
  if (!(epsilon > 0.0)) throw validation_error("ptr_threshold: epsilon must be > 0");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw validation_error("ptr_threshold: delta must be in (0,1)");
  }
  return std::log(1.0 / delta) / epsilon;
}

// Deterministic release core, exposed so tests can force the noise value.
inline MechanismOutcome ptr_release_with_noise(double d_hat, const MechanismConfig& config,
                                               const LabelVector& labels, double noise) {
  MechanismOutcome out;
  out.d_hat = d_hat;
  out.d_tilde = d_hat + noise;
  out.threshold = ptr_threshold(config.epsilon, config.delta);
  out.released = out.d_tilde > out.threshold;
  if (out.released) out.labels = labels;
  return out;
}

// d_tilde = d_hat + Lap(0, 1/epsilon); release iff d_tilde > ln(1/delta)/epsilon.
inline MechanismOutcome ptr_release(double d_hat, const MechanismConfig& config,
                                    const LabelVector& labels, RngStream& noise_stream) {
  config.validate();
  return ptr_release_with_noise(d_hat, config, labels,
                                noise_stream.laplace(1.0 / config.epsilon));
}

namespace detail {

// The m (subsample -> forward) trials are independent; each owns the stream
// derived from (seed, kSubsample, trial index), so any partition across
// threads reproduces the serial result.
inline std::vector<LabelVector> subsample_labels(const Graph& g, const FeatureVector& x,
                                                 const GcnModel& model, double ps,
                                                 long long m, std::uint64_t seed,
                                                 int threads) {
  std::vector<LabelVector> labels(static_cast<size_t>(m));
  auto work = [&](long long begin, long long end) {
    for (long long l = begin; l < end; ++l) {
      RngStream stream(seed, StreamPurpose::kSubsample, static_cast<std::uint64_t>(l));
      const Graph sub = subsample_edges(g, ps, stream);
      labels[static_cast<size_t>(l)] = gcn_forward(sub, x, model).labels;
    }
  };
  const int t = std::max(1, std::min<int>(threads, static_cast<int>(m)));
  if (t == 1) {
    work(0, m);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(t));
    const long long chunk = (m + t - 1) / t;
    for (int i = 0; i < t; ++i) {
      const long long begin = static_cast<long long>(i) * chunk;
      const long long end = std::min<long long>(m, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(work, begin, end);
    }
    for (auto& th : pool) th.join();
  }
  return labels;
}

}  // namespace detail

// Full pipeline: m subsamples -> per-subgraph forward pass -> majority vote ->
// stability score -> noised release decision. Pure function of
// (g, x, model, config) including under parallel execution.
inline MechanismOutcome run_mechanism(const Graph& g, const FeatureVector& x,
                                      const GcnModel& model, const MechanismConfig& config) {
  config.validate();
  std::vector<std::string> warnings;

  long long m = config.m;
  if (config.m_auto) {
    const MChoice choice = choose_m(g.node_count(), config.delta, config.ps, config.m_cap);
    m = choice.m;
    if (choice.capped) {
      warnings.push_back("m capped at " + std::to_string(config.m_cap) +
                         " (formula value " + std::to_string(choice.raw) +
                         "); the voting-term guarantee weakens");
    }
  }

  const ForwardResult full = gcn_forward(g, x, model);
  if (!(full.gamma_min > 0.0)) {
    warnings.push_back("full-graph margin is degenerate (gamma_min = 0); "
                       "stability analysis assumes gamma_min > 0");
  }
  if (config.vote_mode == VoteMode::kPerNode) {
    warnings.push_back("per-node voting is experimental and outside the privacy analysis");
  }

  const std::vector<LabelVector> labels = detail::subsample_labels(
      g, x, model, config.ps, m, config.seed, config.threads);
  const VoteTally tally = majority_vote(labels, config.vote_mode);
  const double d_hat = stability_score(tally, m, config.ps);

  RngStream noise_stream(config.seed, StreamPurpose::kNoise, 0);
  MechanismOutcome out = ptr_release(d_hat, config, tally.consensus, noise_stream);
  out.tally = tally;
  out.m = m;
  out.warnings = std::move(warnings);
  return out;
}

}  // namespace dpgcn
