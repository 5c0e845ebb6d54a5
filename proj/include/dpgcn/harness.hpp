#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/distributions/beta.hpp>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dpgcn/config.hpp"
#include "dpgcn/errors.hpp"
#include "dpgcn/gcn.hpp"
#include "dpgcn/graph.hpp"
#include "dpgcn/mechanism.hpp"
#include "dpgcn/rng.hpp"
#include "dpgcn/spectral.hpp"
#include "dpgcn/theory.hpp"

namespace dpgcn {

inline std::string format_g17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return std::string(buf);
}

// CSV with a fixed, versioned schema line so downstream plotting stays stable.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns)
      : out_(path), width_(columns.size()) {
    if (!out_) throw validation_error("CsvWriter: cannot open " + path);
    out_ << "# schema=dpgcn-v1\n";
    for (size_t i = 0; i < columns.size(); ++i) {
      if (i > 0) out_ << ",";
      out_ << columns[i];
    }
    out_ << "\n";
  }

  void row(const std::vector<double>& values) {
    if (values.size() != width_) throw invariant_error("CsvWriter: column count mismatch");
    for (size_t i = 0; i < values.size(); ++i) {
      if (i > 0) out_ << ",";
      out_ << format_g17(values[i]);
    }
    out_ << "\n";
  }

  void close() {
    out_.close();
    if (out_.fail()) throw validation_error("CsvWriter: write failed");
  }

 private:
  std::ofstream out_;
  size_t width_;
};

// Violation budget plus a 3-sigma binomial allowance for Monte Carlo noise.
inline double violation_allowance(double budget, long long trials) {
  if (trials < 1) throw validation_error("violation_allowance: trials must be >= 1");
  const double q = std::min(budget, 1.0);
  if (q >= 1.0) return 1.0;
  return q + 3.0 * std::sqrt(q * (1.0 - q) / static_cast<double>(trials));
}

// ---------------------------------------------------------------------------
// Variance-proxy identity. Two independent routes must agree to 1e-10:
// the closed form 2 ps (1-ps) ||L||_2, and the literal sum of E[Y^2] over
// edges, where each Y is the centered per-edge Laplacian term and the
// expectation enumerates both values of the edge-retention coin.

struct VarianceProxyCheck {
  double direct_norm = 0.0;
  double closed_form = 0.0;
  double abs_diff = 0.0;
};

inline VarianceProxyCheck variance_proxy_check(const Graph& g, double ps) {
  if (!(ps >= 0.0 && ps <= 1.0)) {
    throw validation_error("variance_proxy_check: ps must be in [0,1]");
  }
  const int n = g.node_count();
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd edge_lap = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [u, v] : g.edges()) {
    edge_lap.setZero();
    edge_lap(u, u) = 1.0;
    edge_lap(v, v) = 1.0;
    edge_lap(u, v) = -1.0;
    edge_lap(v, u) = -1.0;
    for (const double b : {1.0, 0.0}) {
      const double prob = b > 0.5 ? ps : 1.0 - ps;
      const Eigen::MatrixXd y = (ps - b) * edge_lap;
      sum += prob * (y * y);
    }
  }
  VarianceProxyCheck out;
  out.direct_norm = spectral_norm(sum).value;
  out.closed_form = bernstein_params(ps, spectral_norm(g.laplacian()).value).variance_proxy;
  out.abs_diff = std::fabs(out.direct_norm - out.closed_form);
  return out;
}

inline constexpr double kVarianceProxyTol = 1e-10;

// ---------------------------------------------------------------------------
// Per-trial record shared by the concentration checks and the experiment CSV.

struct TrialRecord {
  long long trial_index = 0;
  double delta_norm = 0.0;     // exact ||L - L_sub||_2 for this subsample
  double bernstein_rhs = 0.0;  // high-probability bound on delta_norm
  long long hamming = 0;       // label flips vs the full graph
  double lemma1_rhs = 0.0;     // deterministic flip-count bound at delta_norm
  double rate = 0.0;           // hamming / n
};

namespace detail {

// One subsample trial. The flip-count inequality is deterministic given the
// exact norm, so any violation is an implementation bug, not bad luck.
inline TrialRecord single_trial(const Graph& g, const Eigen::MatrixXd& l_full,
                                double lap_norm, const ForwardResult& full,
                                const FeatureVector& x, const GcnModel& model, double ps,
                                double eta, std::uint64_t seed, long long index) {
  RngStream stream(seed, StreamPurpose::kTrial, static_cast<std::uint64_t>(index));
  const Graph sub = subsample_edges(g, ps, stream);
  TrialRecord rec;
  rec.trial_index = index;
  rec.delta_norm = spectral_norm(l_full - sub.laplacian()).value;
  rec.bernstein_rhs = delta_l_bound(lap_norm, g.node_count(), ps, eta);
  const ForwardResult sub_fwd = gcn_forward(sub, x, model);
  rec.hamming = hamming(full.labels, sub_fwd.labels);
  rec.rate = static_cast<double>(rec.hamming) / static_cast<double>(g.node_count());
  rec.lemma1_rhs = flip_count_bound(full, model, rec.delta_norm);
  if (static_cast<double>(rec.hamming) > rec.lemma1_rhs * (1.0 + 1e-12) + 1e-12) {
    throw invariant_error("flip-count bound violated at trial " + std::to_string(index) +
                          ": hamming " + std::to_string(rec.hamming) + " > bound " +
                          format_g17(rec.lemma1_rhs));
  }
  return rec;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Concentration check for ||L - L_sub||_2.

struct BernsteinReport {
  int n = 0;
  double ps = 0.0;
  double eta = 0.0;
  long long trials = 0;
  double lap_norm = 0.0;
  double bound_rhs = 0.0;  // bias + tail value, identical across trials
  long long violations = 0;
  double violation_fraction = 0.0;
  double allowed = 0.0;  // eta + 3-sigma allowance
  double mean_delta_norm = 0.0;
  double max_delta_norm = 0.0;
  VarianceProxyCheck proxy;
  bool proxy_ok = false;
  bool pass = false;
};

inline BernsteinReport verify_bernstein(const Graph& g, double ps, long long trials,
                                        double eta, std::uint64_t seed) {
  if (trials < 100) throw validation_error("verify_bernstein: trials must be >= 100");
  if (!(eta > 0.0 && eta < 1.0)) {
    throw validation_error("verify_bernstein: eta must be in (0,1)");
  }
  BernsteinReport rep;
  rep.n = g.node_count();
  rep.ps = ps;
  rep.eta = eta;
  rep.trials = trials;
  const Eigen::MatrixXd l_full = g.laplacian();
  rep.lap_norm = spectral_norm(l_full).value;
  rep.bound_rhs = delta_l_bound(rep.lap_norm, rep.n, ps, eta);

  double sum_norm = 0.0;
  for (long long t = 0; t < trials; ++t) {
    RngStream stream(seed, StreamPurpose::kTrial, static_cast<std::uint64_t>(t));
    const Graph sub = subsample_edges(g, ps, stream);
    const double norm = spectral_norm(l_full - sub.laplacian()).value;
    sum_norm += norm;
    rep.max_delta_norm = std::max(rep.max_delta_norm, norm);
    if (norm > rep.bound_rhs) ++rep.violations;
  }
  rep.mean_delta_norm = sum_norm / static_cast<double>(trials);
  rep.violation_fraction = static_cast<double>(rep.violations) / static_cast<double>(trials);
  rep.allowed = violation_allowance(eta, trials);
  rep.proxy = variance_proxy_check(g, ps);
  rep.proxy_ok = rep.proxy.abs_diff <= kVarianceProxyTol;
  rep.pass = rep.proxy_ok && rep.violation_fraction <= rep.allowed;
  return rep;
}

// ---------------------------------------------------------------------------
// Misclassification-rate check for a single subsampled forward pass.

struct Theorem1Report {
  int n = 0;
  double ps = 0.0;
  double eta = 0.0;
  long long trials = 0;
  double bound_value = 0.0;  // f(ps, eta)
  long long violations = 0;
  double violation_fraction = 0.0;
  double allowed = 0.0;
  long long lemma1_checked = 0;  // hard assertion count (always == trials)
  double mean_rate = 0.0;
  double max_rate = 0.0;
  bool pass = false;
};

inline Theorem1Report verify_theorem1(const Graph& g, const FeatureVector& x,
                                      const GcnModel& model, double ps, double eta,
                                      long long trials, std::uint64_t seed) {
  if (trials < 1) throw validation_error("verify_theorem1: trials must be >= 1");
  const BoundInputs in = bound_inputs_from(g, x, model);
  const ForwardResult full = gcn_forward(g, x, model);
  const Eigen::MatrixXd l_full = g.laplacian();

  Theorem1Report rep;
  rep.n = in.n;
  rep.ps = ps;
  rep.eta = eta;
  rep.trials = trials;
  rep.bound_value = bound_f(in, ps, eta);

  double sum_rate = 0.0;
  for (long long t = 0; t < trials; ++t) {
    const TrialRecord rec =
        detail::single_trial(g, l_full, in.lap_norm, full, x, model, ps, eta, seed, t);
    ++rep.lemma1_checked;
    sum_rate += rec.rate;
    rep.max_rate = std::max(rep.max_rate, rec.rate);
    if (rec.rate > rep.bound_value) ++rep.violations;
  }
  rep.mean_rate = sum_rate / static_cast<double>(trials);
  rep.violation_fraction = static_cast<double>(rep.violations) / static_cast<double>(trials);
  rep.allowed = violation_allowance(eta, trials);
  rep.pass = rep.violation_fraction <= rep.allowed;
  return rep;
}

// ---------------------------------------------------------------------------
// Voted-consensus check. The release gate only decides release vs bottom and
// never alters labels, so the bound is checked on the pre-release consensus;
// released_only conditions on release instead (biased, off by default).

struct Theorem2Report {
  int n = 0;
  double ps = 0.0;
  double eta = 0.0;
  long long repeats = 0;
  long long m = 0;           // resolved subsample count per repeat
  double bound_value = 0.0;  // f(ps, eta)/4 + sqrt(ln(2/eta)/(2m))
  bool released_only = false;
  long long evaluated = 0;
  long long released_count = 0;
  long long violations = 0;
  double violation_fraction = 0.0;
  double allowed = 0.0;  // 2*eta + 3-sigma allowance
  double mean_rate = 0.0;
  double max_rate = 0.0;
  bool pass = false;
};

inline Theorem2Report verify_theorem2(const Graph& g, const FeatureVector& x,
                                      const GcnModel& model, const MechanismConfig& config,
                                      double eta, long long repeats, std::uint64_t seed,
                                      bool released_only = false) {
  config.validate();
  if (repeats < 1) throw validation_error("verify_theorem2: repeats must be >= 1");
  if (!(eta > 0.0 && eta < 1.0)) {
    throw validation_error("verify_theorem2: eta must be in (0,1)");
  }
  const BoundInputs in = bound_inputs_from(g, x, model);
  const ForwardResult full = gcn_forward(g, x, model);

  Theorem2Report rep;
  rep.n = in.n;
  rep.ps = config.ps;
  rep.eta = eta;
  rep.repeats = repeats;
  rep.released_only = released_only;

  double sum_rate = 0.0;
  for (long long r = 0; r < repeats; ++r) {
    MechanismConfig c = config;
    c.seed = derive_seed(seed, StreamPurpose::kTrial, static_cast<std::uint64_t>(r));
    const MechanismOutcome out = run_mechanism(g, x, model, c);
    if (r == 0) {
      rep.m = out.m;
      rep.bound_value = bound_aggregated(in, config.ps, eta, out.m, eta);
    }
    if (out.released) ++rep.released_count;
    if (released_only && !out.released) continue;
    const double rate = misclassification_rate(full.labels, out.tally.consensus);
    ++rep.evaluated;
    sum_rate += rate;
    rep.max_rate = std::max(rep.max_rate, rate);
    if (rate > rep.bound_value) ++rep.violations;
  }
  if (rep.evaluated > 0) {
    rep.mean_rate = sum_rate / static_cast<double>(rep.evaluated);
    rep.violation_fraction =
        static_cast<double>(rep.violations) / static_cast<double>(rep.evaluated);
    rep.allowed = violation_allowance(2.0 * eta, rep.evaluated);
    rep.pass = rep.violation_fraction <= rep.allowed;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Empirical privacy audit. The output-event family is the finite set of
// observed outcomes ({bottom} plus each distinct released vector), which makes
// this a lower-bound audit: a large estimate is a hard failure, a small one is
// consistent with (not proof of) the budget.

inline double clopper_pearson_lower(long long k, long long n, double confidence = 0.95) {
  if (n < 1) throw validation_error("clopper_pearson_lower: n must be >= 1");
  if (k < 0 || k > n) throw validation_error("clopper_pearson_lower: k out of range");
  if (k == 0) return 0.0;
  const boost::math::beta_distribution<double> d(static_cast<double>(k),
                                                 static_cast<double>(n - k + 1));
  return boost::math::quantile(d, (1.0 - confidence) / 2.0);
}

inline double clopper_pearson_upper(long long k, long long n, double confidence = 0.95) {
  if (n < 1) throw validation_error("clopper_pearson_upper: n must be >= 1");
  if (k < 0 || k > n) throw validation_error("clopper_pearson_upper: k out of range");
  if (k == n) return 1.0;
  const boost::math::beta_distribution<double> d(static_cast<double>(k + 1),
                                                 static_cast<double>(n - k));
  return boost::math::quantile(d, 1.0 - (1.0 - confidence) / 2.0);
}

struct DirectionalEps {
  double value = 0.0;
  bool infinite = false;
};

// Smallest eps with p_event <= e^eps * q_event + delta, clipped at 0.
inline DirectionalEps eps_required(double p_event, double q_event, double delta) {
  if (p_event - delta <= 0.0) return {0.0, false};
  if (q_event <= 0.0) return {std::numeric_limits<double>::infinity(), true};
  return {std::max(0.0, std::log((p_event - delta) / q_event)), false};
}

struct EventCount {
  long long on_g = 0;
  long long on_gp = 0;
};

// Keys: "_|_" for the withheld outcome, otherwise the released label string.
using EventCounts = std::map<std::string, EventCount>;

// mech_g / mech_gp: callable (trial index) -> optional<LabelVector>.
template <typename MechG, typename MechGp>
EventCounts collect_audit_events(MechG&& mech_g, MechGp&& mech_gp, long long trials) {
  if (trials < 1) throw validation_error("collect_audit_events: trials must be >= 1");
  EventCounts counts;
  for (long long t = 0; t < trials; ++t) {
    const std::optional<LabelVector> a = mech_g(t);
    const std::optional<LabelVector> b = mech_gp(t);
    counts[a ? a->to_string() : "_|_"].on_g += 1;
    counts[b ? b->to_string() : "_|_"].on_gp += 1;
  }
  return counts;
}

struct AuditEvent {
  std::string key;
  long long count_g = 0;
  long long count_gp = 0;
  double eps_point = 0.0;  // max over both directions at this event
  bool infinite = false;
};

struct AuditReport {
  long long trials = 0;
  double epsilon = 0.0;
  double delta = 0.0;
  double confidence = 0.95;
  int edge_u = -1;
  int edge_v = -1;
  double release_freq_g = 0.0;
  double release_freq_gp = 0.0;
  double eps_hat = 0.0;  // point estimate, max over events and directions
  bool eps_hat_infinite = false;
  double eps_hat_upper = 0.0;  // CI-extreme estimate (upper numerator, lower denominator)
  bool eps_hat_upper_infinite = false;
  bool pass_point = false;  // eps_hat <= epsilon
  bool pass_upper = false;  // eps_hat_upper <= epsilon
  std::vector<AuditEvent> events;
};

inline AuditReport audit_from_counts(const EventCounts& counts, long long trials,
                                     double epsilon, double delta,
                                     double confidence = 0.95) {
  if (trials < 1) throw validation_error("audit_from_counts: trials must be >= 1");
  if (!(epsilon > 0.0)) throw validation_error("audit_from_counts: epsilon must be > 0");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw validation_error("audit_from_counts: delta must be in (0,1)");
  }
  AuditReport rep;
  rep.trials = trials;
  rep.epsilon = epsilon;
  rep.delta = delta;
  rep.confidence = confidence;

  const double nd = static_cast<double>(trials);
  for (const auto& [key, count] : counts) {
    const double pg = static_cast<double>(count.on_g) / nd;
    const double pgp = static_cast<double>(count.on_gp) / nd;
    if (key != "_|_") {
      rep.release_freq_g += pg;
      rep.release_freq_gp += pgp;
    }

    AuditEvent ev;
    ev.key = key;
    ev.count_g = count.on_g;
    ev.count_gp = count.on_gp;
    const DirectionalEps fwd = eps_required(pg, pgp, delta);
    const DirectionalEps bwd = eps_required(pgp, pg, delta);
    ev.infinite = fwd.infinite || bwd.infinite;
    ev.eps_point = std::max(fwd.value, bwd.value);
    rep.eps_hat_infinite = rep.eps_hat_infinite || ev.infinite;
    rep.eps_hat = std::max(rep.eps_hat, ev.eps_point);
    rep.events.push_back(std::move(ev));

    const double pg_hi = clopper_pearson_upper(count.on_g, trials, confidence);
    const double pg_lo = clopper_pearson_lower(count.on_g, trials, confidence);
    const double pgp_hi = clopper_pearson_upper(count.on_gp, trials, confidence);
    const double pgp_lo = clopper_pearson_lower(count.on_gp, trials, confidence);
    const DirectionalEps fwd_hi = eps_required(pg_hi, pgp_lo, delta);
    const DirectionalEps bwd_hi = eps_required(pgp_hi, pg_lo, delta);
    rep.eps_hat_upper_infinite =
        rep.eps_hat_upper_infinite || fwd_hi.infinite || bwd_hi.infinite;
    rep.eps_hat_upper = std::max(rep.eps_hat_upper, std::max(fwd_hi.value, bwd_hi.value));
  }
  if (rep.eps_hat_infinite) rep.eps_hat = std::numeric_limits<double>::infinity();
  if (rep.eps_hat_upper_infinite) {
    rep.eps_hat_upper = std::numeric_limits<double>::infinity();
  }
  rep.pass_point = !rep.eps_hat_infinite && rep.eps_hat <= epsilon;
  rep.pass_upper = !rep.eps_hat_upper_infinite && rep.eps_hat_upper <= epsilon;
  return rep;
}

// Audits the full pipeline on (g, g with edge (u,v) toggled). Each trial is an
// independent mechanism run with its own derived seed on each side.
inline AuditReport audit_dp(const Graph& g, const FeatureVector& x, const GcnModel& model,
                            const MechanismConfig& config, long long trials, int u, int v) {
  config.validate();
  const Graph gp = neighboring_graph(g, u, v);
  auto run_side = [&](const Graph& graph, StreamPurpose purpose, long long t) {
    MechanismConfig c = config;
    c.seed = derive_seed(config.seed, purpose, static_cast<std::uint64_t>(t));
    return run_mechanism(graph, x, model, c).labels;
  };
  const EventCounts counts = collect_audit_events(
      [&](long long t) { return run_side(g, StreamPurpose::kAuditG, t); },
      [&](long long t) { return run_side(gp, StreamPurpose::kAuditGPrime, t); }, trials);
  AuditReport rep = audit_from_counts(counts, trials, config.epsilon, config.delta);
  rep.edge_u = std::min(u, v);
  rep.edge_v = std::max(u, v);
  return rep;
}

// ---------------------------------------------------------------------------
// Theory report: everything the bound and feasibility subcommands emit.

struct TheoryReport {
  BoundInputs inputs;
  double epsilon = 0.0;
  double delta = 0.0;
  double eta = 0.0;
  std::vector<std::pair<double, double>> f_grid;  // (ps, f(ps, eta))
  FeasibleRange range;
  double ps = 0.0;  // the ps used for the m choice
  MChoice m_choice;
};

inline std::vector<double> default_ps_grid() {
  std::vector<double> grid;
  for (int k = 1; k <= 20; ++k) grid.push_back(static_cast<double>(k) / 20.0);
  return grid;
}

inline TheoryReport build_theory_report(const BoundInputs& in, double epsilon, double delta,
                                        double eta, const std::vector<double>& ps_grid,
                                        double ps, long long m_cap = kDefaultMCap) {
  in.validate();
  TheoryReport rep;
  rep.inputs = in;
  rep.epsilon = epsilon;
  rep.delta = delta;
  rep.eta = eta;
  for (double p : ps_grid) rep.f_grid.emplace_back(p, bound_f(in, p, eta));
  rep.range = feasible_range(in, epsilon, delta);
  rep.ps = ps;
  rep.m_choice = choose_m(in.n, delta, ps, m_cap);
  return rep;
}

// ---------------------------------------------------------------------------
// JSON emission (nlohmann). Objects are key-sorted, so identical runs dump
// byte-identical text.

inline void to_json(nlohmann::json& j, const VarianceProxyCheck& c) {
  j = nlohmann::json{{"direct_norm", c.direct_norm},
                     {"closed_form", c.closed_form},
                     {"abs_diff", c.abs_diff}};
}

inline void to_json(nlohmann::json& j, const BernsteinReport& r) {
  j = nlohmann::json{{"check", "bernstein"},
                     {"n", r.n},
                     {"ps", r.ps},
                     {"eta", r.eta},
                     {"trials", r.trials},
                     {"lap_norm", r.lap_norm},
                     {"bound_rhs", r.bound_rhs},
                     {"violations", r.violations},
                     {"violation_fraction", r.violation_fraction},
                     {"allowed", r.allowed},
                     {"mean_delta_norm", r.mean_delta_norm},
                     {"max_delta_norm", r.max_delta_norm},
                     {"variance_proxy", r.proxy},
                     {"proxy_ok", r.proxy_ok},
                     {"pass", r.pass}};
}

inline void to_json(nlohmann::json& j, const Theorem1Report& r) {
  j = nlohmann::json{{"check", "theorem1"},
                     {"n", r.n},
                     {"ps", r.ps},
                     {"eta", r.eta},
                     {"trials", r.trials},
                     {"bound_value", r.bound_value},
                     {"violations", r.violations},
                     {"violation_fraction", r.violation_fraction},
                     {"allowed", r.allowed},
                     {"lemma1_checked", r.lemma1_checked},
                     {"mean_rate", r.mean_rate},
                     {"max_rate", r.max_rate},
                     {"pass", r.pass}};
}

inline void to_json(nlohmann::json& j, const Theorem2Report& r) {
  j = nlohmann::json{{"check", "theorem2"},
                     {"n", r.n},
                     {"ps", r.ps},
                     {"eta", r.eta},
                     {"repeats", r.repeats},
                     {"m", r.m},
                     {"bound_value", r.bound_value},
                     {"released_only", r.released_only},
                     {"evaluated", r.evaluated},
                     {"released_count", r.released_count},
                     {"violations", r.violations},
                     {"violation_fraction", r.violation_fraction},
                     {"allowed", r.allowed},
                     {"mean_rate", r.mean_rate},
                     {"max_rate", r.max_rate},
                     {"pass", r.pass}};
}

inline void to_json(nlohmann::json& j, const AuditEvent& e) {
  j = nlohmann::json{{"key", e.key},
                     {"count_g", e.count_g},
                     {"count_gp", e.count_gp},
                     {"eps_point", e.eps_point},
                     {"infinite", e.infinite}};
}

inline void to_json(nlohmann::json& j, const AuditReport& r) {
  j = nlohmann::json{{"check", "audit"},
                     {"trials", r.trials},
                     {"epsilon", r.epsilon},
                     {"delta", r.delta},
                     {"confidence", r.confidence},
                     {"edge", {r.edge_u, r.edge_v}},
                     {"release_freq_g", r.release_freq_g},
                     {"release_freq_gp", r.release_freq_gp},
                     {"eps_hat", r.eps_hat_infinite ? nlohmann::json() : nlohmann::json(r.eps_hat)},
                     {"eps_hat_infinite", r.eps_hat_infinite},
                     {"eps_hat_upper", r.eps_hat_upper_infinite ? nlohmann::json()
                                                                : nlohmann::json(r.eps_hat_upper)},
                     {"eps_hat_upper_infinite", r.eps_hat_upper_infinite},
                     {"pass_point", r.pass_point},
                     {"pass_upper", r.pass_upper},
                     {"events", r.events}};
}

inline void to_json(nlohmann::json& j, const BoundInputs& in) {
  j = nlohmann::json{{"n", in.n},
                     {"lap_norm", in.lap_norm},
                     {"c_sigma", in.c_sigma},
                     {"h1_abs", in.h1_abs},
                     {"gamma_min", in.gamma_min}};
}

inline void to_json(nlohmann::json& j, const FeasibleRange& r) {
  j = nlohmann::json{{"ps_star", r.ps_star_exists || r.margin_ample
                                     ? nlohmann::json(r.ps_star)
                                     : nlohmann::json()},
                     {"ps_star_exists", r.ps_star_exists},
                     {"margin_ample", r.margin_ample},
                     {"residual", r.residual},
                     {"ps_upper", r.ps_upper},
                     {"ps_upper_raw", r.ps_upper_raw},
                     {"clipped", r.clipped},
                     {"feasible", r.feasible},
                     {"reason", r.reason}};
}

inline void to_json(nlohmann::json& j, const VoteTally& t) {
  j = nlohmann::json{{"consensus", t.consensus.to_string()},
                     {"c1", t.c1},
                     {"c2", t.c2},
                     {"distinct", t.distinct}};
}

inline void to_json(nlohmann::json& j, const MechanismOutcome& o) {
  j = nlohmann::json{{"released", o.released},
                     {"labels", o.labels ? nlohmann::json(o.labels->to_string())
                                         : nlohmann::json()},
                     {"d_hat", o.d_hat},
                     {"d_tilde", o.d_tilde},
                     {"threshold", o.threshold},
                     {"m", o.m},
                     {"tally", o.tally},
                     {"warnings", o.warnings}};
}

inline void to_json(nlohmann::json& j, const MChoice& m) {
  j = nlohmann::json{{"m", m.m}, {"capped", m.capped}, {"raw", m.raw}};
}

inline void to_json(nlohmann::json& j, const TheoryReport& r) {
  nlohmann::json grid = nlohmann::json::array();
  for (const auto& [p, f] : r.f_grid) grid.push_back({{"ps", p}, {"f", f}});
  j = nlohmann::json{{"inputs", r.inputs},
                     {"epsilon", r.epsilon},
                     {"delta", r.delta},
                     {"eta", r.eta},
                     {"f_grid", grid},
                     {"range", r.range},
                     {"ps", r.ps},
                     {"m_choice", r.m_choice}};
}

inline void to_json(nlohmann::json& j, const TrialRecord& r) {
  j = nlohmann::json{{"trial_index", r.trial_index},
                     {"delta_norm", r.delta_norm},
                     {"bernstein_rhs", r.bernstein_rhs},
                     {"hamming", r.hamming},
                     {"lemma1_rhs", r.lemma1_rhs},
                     {"rate", r.rate}};
}

inline void write_json_file(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw validation_error("write_json_file: cannot open " + path);
  out << j.dump(2) << "\n";
  if (!out) throw validation_error("write_json_file: write failed for " + path);
}

// ---------------------------------------------------------------------------
// Declarative experiment: gen -> theory -> mechanism -> per-trial verification,
// emitted as one CSV (per-trial records) and one JSON summary.

struct ExperimentResult {
  int n = 0;
  int edge_count = 0;
  TheoryReport theory;
  MechanismOutcome outcome;
  long long trials = 0;
  double bound_value = 0.0;     // f(ps, eta)
  double bernstein_rhs = 0.0;
  long long bernstein_violations = 0;
  long long bound_violations = 0;
  double mean_rate = 0.0;
  double max_rate = 0.0;
  double mean_delta_norm = 0.0;
  double max_delta_norm = 0.0;
  std::vector<TrialRecord> records;
};

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();

  std::optional<Graph> graph;
  std::optional<FeatureVector> features;
  if (cfg.graph_path.empty()) {
    SbmSample sample = generate_sbm(cfg.sbm, cfg.mechanism.seed);
    features.emplace(planted_feature(sample.labels));
    graph.emplace(std::move(sample.graph));
  } else {
    graph.emplace(read_edge_list(cfg.graph_path));
    features.emplace(read_feature_vector(cfg.features_path));
  }
  const Graph& g = *graph;
  const FeatureVector& x = *features;

  const BoundInputs in = bound_inputs_from(g, x, cfg.model);
  const ForwardResult full = gcn_forward(g, x, cfg.model);
  const Eigen::MatrixXd l_full = g.laplacian();

  ExperimentResult res;
  res.n = g.node_count();
  res.edge_count = g.edge_count();
  res.theory = build_theory_report(in, cfg.mechanism.epsilon, cfg.mechanism.delta, cfg.eta,
                                   default_ps_grid(), cfg.mechanism.ps, cfg.mechanism.m_cap);
  res.outcome = run_mechanism(g, x, cfg.model, cfg.mechanism);
  res.trials = cfg.trials;
  res.bound_value = bound_f(in, cfg.mechanism.ps, cfg.eta);
  res.bernstein_rhs = delta_l_bound(in.lap_norm, in.n, cfg.mechanism.ps, cfg.eta);

  double sum_rate = 0.0, sum_norm = 0.0;
  res.records.reserve(static_cast<size_t>(cfg.trials));
  for (long long t = 0; t < cfg.trials; ++t) {
    const TrialRecord rec = detail::single_trial(g, l_full, in.lap_norm, full, x, cfg.model,
                                                 cfg.mechanism.ps, cfg.eta,
                                                 cfg.mechanism.seed, t);
    sum_rate += rec.rate;
    sum_norm += rec.delta_norm;
    res.max_rate = std::max(res.max_rate, rec.rate);
    res.max_delta_norm = std::max(res.max_delta_norm, rec.delta_norm);
    if (rec.delta_norm > res.bernstein_rhs) ++res.bernstein_violations;
    if (rec.rate > res.bound_value) ++res.bound_violations;
    res.records.push_back(rec);
  }
  res.mean_rate = sum_rate / static_cast<double>(cfg.trials);
  res.mean_delta_norm = sum_norm / static_cast<double>(cfg.trials);
  return res;
}

inline void to_json(nlohmann::json& j, const ExperimentResult& r) {
  j = nlohmann::json{{"n", r.n},
                     {"edge_count", r.edge_count},
                     {"theory", r.theory},
                     {"mechanism", r.outcome},
                     {"trials", r.trials},
                     {"bound_value", r.bound_value},
                     {"bernstein_rhs", r.bernstein_rhs},
                     {"bernstein_violations", r.bernstein_violations},
                     {"bound_violations", r.bound_violations},
                     {"mean_rate", r.mean_rate},
                     {"max_rate", r.max_rate},
                     {"mean_delta_norm", r.mean_delta_norm},
                     {"max_delta_norm", r.max_delta_norm}};
}

inline const std::vector<std::string>& trial_csv_columns() {
  static const std::vector<std::string> cols = {"trial_index", "delta_norm", "bernstein_rhs",
                                                "hamming",     "lemma1_rhs", "rate"};
  return cols;
}

inline void write_trial_csv(const std::vector<TrialRecord>& records, const std::string& path) {
  CsvWriter csv(path, trial_csv_columns());
  for (const TrialRecord& r : records) {
    csv.row({static_cast<double>(r.trial_index), r.delta_norm, r.bernstein_rhs,
             static_cast<double>(r.hamming), r.lemma1_rhs, r.rate});
  }
  csv.close();
}

inline void write_experiment_files(const ExperimentResult& res, const std::string& csv_path,
                                   const std::string& json_path) {
  write_trial_csv(res.records, csv_path);
  write_json_file(nlohmann::json(res), json_path);
}

}  // namespace dpgcn
