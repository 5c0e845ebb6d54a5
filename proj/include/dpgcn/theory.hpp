#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "dpgcn/errors.hpp"
#include "dpgcn/gcn.hpp"
#include "dpgcn/graph.hpp"
#include "dpgcn/spectral.hpp"

namespace dpgcn {

// Parameters the misclassification bounds depend on. h1_abs = 0 is legal
// (graph-independent filter, bound collapses to 0); gamma_min must be
// strictly positive.
struct BoundInputs {
  int n = 0;
  double lap_norm = 0.0;   // ||L||_2
  double c_sigma = 1.0;    // Lipschitz constant of the activation
  double h1_abs = 0.0;     // |h1|
  double gamma_min = 0.0;  // minimum margin

  void validate() const {
    if (n <= 0) throw validation_error("BoundInputs: n must be positive");
    if (!(lap_norm >= 0.0)) throw validation_error("BoundInputs: lap_norm must be >= 0");
    if (!(c_sigma > 0.0)) throw validation_error("BoundInputs: c_sigma must be > 0");
    if (!(h1_abs >= 0.0)) throw validation_error("BoundInputs: h1_abs must be >= 0");
    if (!(gamma_min > 0.0)) throw validation_error("BoundInputs: gamma_min must be > 0");
  }
};

// Convenience: derive the bound parameters from a concrete instance.
inline BoundInputs bound_inputs_from(const Graph& g, const FeatureVector& x,
                                     const GcnModel& model, double tol = 1e-10) {
  const ForwardResult fwd = gcn_forward(g, x, model);
  if (!(fwd.gamma_min > 0.0)) {
    throw validation_error("bound_inputs_from: degenerate margin (gamma_min = 0)");
  }
  BoundInputs in;
  in.n = g.node_count();
  in.lap_norm = spectral_norm(g.laplacian(), tol).value;
  in.c_sigma = lipschitz_constant(model.activation);
  in.h1_abs = std::fabs(model.h1);
  in.gamma_min = fwd.gamma_min;
  return in;
}

// Concentration parameters for the centered per-edge terms: variance proxy
// 2 p_s (1 - p_s) ||L||_2 and max term norm <= 2 for unweighted graphs.
struct BernsteinParams {
  double variance_proxy = 0.0;
  double max_term = 2.0;
};

inline BernsteinParams bernstein_params(double ps, double lap_norm) {
  if (!(ps >= 0.0 && ps <= 1.0)) throw validation_error("bernstein_params: ps must be in [0,1]");
  if (!(lap_norm >= 0.0)) throw validation_error("bernstein_params: lap_norm must be >= 0");
  return BernsteinParams{2.0 * ps * (1.0 - ps) * lap_norm, 2.0};
}

// High-probability bound on ||L_hat - L||_2 when each edge is kept
// independently with probability ps: bias + matrix-Bernstein tail,
//   |1-ps| ||L|| + sqrt(4 ps (1-ps) ||L|| ln(2n/eta)) + (4/3) ln(2n/eta),
// holding with probability at least 1 - eta.
inline double delta_l_bound(double lap_norm, int n, double ps, double eta) {
  if (n <= 0) throw validation_error("delta_l_bound: n must be positive");
  if (!(lap_norm >= 0.0)) throw validation_error("delta_l_bound: lap_norm must be >= 0");
  if (!(ps >= 0.0 && ps <= 1.0)) throw validation_error("delta_l_bound: ps must be in [0,1]");
  if (!(eta > 0.0 && eta < 1.0)) throw validation_error("delta_l_bound: eta must be in (0,1)");
  const double logterm = std::log(2.0 * static_cast<double>(n) / eta);
  return std::fabs(1.0 - ps) * lap_norm +
         std::sqrt(4.0 * ps * (1.0 - ps) * lap_norm * logterm) +
         (4.0 / 3.0) * logterm;
}

// Misclassification bound for a single subsampled graph, holding with
// probability at least 1 - eta:
//   f(ps, eta) = (C_sigma |h1| / (sqrt(n) gamma_min)) *
//                { (1-ps)||L|| + sqrt(4 ps (1-ps) ||L|| ln(2n/eta)) + (4/3) ln(2n/eta) }.
inline double bound_f(const BoundInputs& in, double ps, double eta) {
  in.validate();
  if (!(ps > 0.0 && ps <= 1.0)) throw validation_error("bound_f: ps must be in (0,1]");
  if (!(eta > 0.0 && eta < 1.0)) throw validation_error("bound_f: eta must be in (0,1)");
  const double prefactor =
      in.c_sigma * in.h1_abs / (std::sqrt(static_cast<double>(in.n)) * in.gamma_min);
  const double logterm = std::log(2.0 * static_cast<double>(in.n) / eta);
  const double bracket = (1.0 - ps) * in.lap_norm +
                         std::sqrt(4.0 * ps * (1.0 - ps) * in.lap_norm * logterm) +
                         (4.0 / 3.0) * logterm;
  return prefactor * bracket;
}

// Bound for the full voting mechanism over m subsamples: f(ps, eta)/4 plus a
// Hoeffding deviation sqrt(ln(2/eta_vote)/(2m)) standing in for the O(1/sqrt(m))
// voting term. With eta_vote = eta the total failure probability is <= 2 eta.
inline double bound_aggregated(const BoundInputs& in, double ps, double eta, long long m,
                               double eta_vote) {
  if (m < 1) throw validation_error("bound_aggregated: m must be >= 1");
  if (!(eta_vote > 0.0 && eta_vote < 1.0)) {
    throw validation_error("bound_aggregated: eta_vote must be in (0,1)");
  }
  return bound_f(in, ps, eta) / 4.0 +
         std::sqrt(std::log(2.0 / eta_vote) / (2.0 * static_cast<double>(m)));
}

// ---------------------------------------------------------------------------
// Largest root of the margin-condition equation (eta = 1/4, target rate 1/n):
//   g(p) = (1-p)||L|| + sqrt(4 ||L|| ln(8n) p(1-p)) + (4/3) ln(8n)
//          - gamma_min / (sqrt(n) C_sigma |h1|) = 0.
// Solved on the original equation (grid sign-scan + bisection) rather than by
// isolating the square root, which would introduce spurious roots.

struct PsStarResult {
  double ps_star = 0.0;
  double residual = 0.0;
  // True when g < 0 on all of [0,1]: the margin is large enough that every
  // subsampling probability meets the target rate, so no lower endpoint binds.
  bool margin_ample = false;
};

namespace detail {

struct MarginEquation {
  double lap_norm;
  double log8n;
  double target;  // gamma_min / (sqrt(n) C_sigma |h1|)

  double operator()(double p) const {
    return (1.0 - p) * lap_norm + std::sqrt(4.0 * lap_norm * log8n * p * (1.0 - p)) +
           (4.0 / 3.0) * log8n - target;
  }
};

}  // namespace detail

inline PsStarResult solve_ps_star(const BoundInputs& in) {
  in.validate();
  if (in.h1_abs == 0.0) {
    // Filter ignores the graph entirely; the rate is 0 for every ps.
    return PsStarResult{0.0, 0.0, true};
  }
  const detail::MarginEquation g{
      in.lap_norm, std::log(8.0 * static_cast<double>(in.n)),
      in.gamma_min / (std::sqrt(static_cast<double>(in.n)) * in.c_sigma * in.h1_abs)};

  const double g_one = g(1.0);
  if (g_one > 0.0) {
    throw validation_error("solve_ps_star: no feasible p_s: margin condition unsatisfiable");
  }
  if (g_one == 0.0) {
    return PsStarResult{1.0, 0.0, false};
  }

  constexpr int kGridPoints = 10000;
  constexpr double kResidualTol = 1e-9;

  // Largest sign change first: scan down from p = 1.
  double lo = -1.0, hi = -1.0;
  double g_lo = 0.0;
  double p_hi = 1.0;
  double g_hi = g_one;
  bool found = false;
  for (int k = kGridPoints - 1; k >= 0; --k) {
    const double p = static_cast<double>(k) / kGridPoints;
    const double gp = g(p);
    if (gp == 0.0) {
      return PsStarResult{p, 0.0, false};
    }
    if ((gp > 0.0) != (g_hi > 0.0)) {
      lo = p;
      g_lo = gp;
      hi = p_hi;
      found = true;
      break;
    }
    p_hi = p;
    g_hi = gp;
  }
  if (!found) {
    // No sign change and g(1) < 0, so g < 0 throughout [0,1].
    return PsStarResult{0.0, 0.0, true};
  }

  double mid = 0.5 * (lo + hi);
  double g_mid = g(mid);
  for (int it = 0; it < 200 && std::fabs(g_mid) > kResidualTol; ++it) {
    if ((g_mid > 0.0) == (g_lo > 0.0)) {
      lo = mid;
      g_lo = g_mid;
    } else {
      hi = mid;
    }
    mid = 0.5 * (lo + hi);
    g_mid = g(mid);
  }
  if (std::fabs(g_mid) > kResidualTol) {
    throw convergence_error("solve_ps_star: bisection stalled with residual " +
                                std::to_string(std::fabs(g_mid)),
                            mid);
  }
  return PsStarResult{mid, std::fabs(g_mid), false};
}

// Feasible subsampling interval (ps_star, eps / (32 ln(1/delta))). The upper
// endpoint comes from the privacy side and is clipped to 1 when the formula
// exceeds it; feasibility is judged against the clipped value.
struct FeasibleRange {
  double ps_star = std::numeric_limits<double>::quiet_NaN();
  bool ps_star_exists = false;
  bool margin_ample = false;  // every ps meets the margin condition
  double residual = 0.0;
  double ps_upper = 0.0;      // clipped to 1
  double ps_upper_raw = 0.0;  // formula value before clipping
  bool clipped = false;
  bool feasible = false;
  std::string reason;
};

inline FeasibleRange feasible_range(const BoundInputs& in, double eps, double delta) {
  if (!(eps > 0.0)) throw validation_error("feasible_range: eps must be > 0");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw validation_error("feasible_range: delta must be in (0,1)");
  }
  FeasibleRange out;
  out.ps_upper_raw = eps / (32.0 * std::log(1.0 / delta));
  out.clipped = out.ps_upper_raw > 1.0;
  out.ps_upper = out.clipped ? 1.0 : out.ps_upper_raw;

  try {
    const PsStarResult root = solve_ps_star(in);
    if (root.margin_ample) {
      out.margin_ample = true;
      out.ps_star = 0.0;
      out.feasible = out.ps_upper > 0.0;
      out.reason = "margin ample: every p_s in (0,1] meets the misclassification condition";
      if (out.clipped) out.reason += "; ps_upper clipped to 1";
    } else {
      out.ps_star = root.ps_star;
      out.ps_star_exists = true;
      out.residual = root.residual;
      if (root.ps_star < out.ps_upper) {
        out.feasible = true;
        out.reason = out.clipped ? "feasible; ps_upper clipped to 1" : "feasible";
      } else {
        out.feasible = false;
        out.reason = "ps_star >= ps_upper: vacuous regime";
      }
    }
  } catch (const validation_error& e) {
    out.feasible = false;
    out.reason = e.what();
  }
  return out;
}

// m = ceil(ln(n/delta) / ps^2), capped so desk-scale runs stay bounded.
// A capped value weakens the voting-term guarantee; callers surface the flag.
struct MChoice {
  long long m = 1;
  bool capped = false;
  double raw = 0.0;  // pre-ceiling value
};

inline constexpr long long kDefaultMCap = 100000;

inline MChoice choose_m(int n, double delta, double ps, long long cap = kDefaultMCap) {
  if (n <= 0) throw validation_error("choose_m: n must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw validation_error("choose_m: delta must be in (0,1)");
  if (!(ps > 0.0)) throw validation_error("choose_m: ps must be > 0");
  if (cap < 1) throw validation_error("choose_m: cap must be >= 1");
  MChoice out;
  out.raw = std::log(static_cast<double>(n) / delta) / (ps * ps);
  double m = std::ceil(out.raw);
  if (m < 1.0) m = 1.0;
  if (m > static_cast<double>(cap)) {
    out.m = cap;
    out.capped = true;
  } else {
    out.m = static_cast<long long>(m);
  }
  return out;
}

}  // namespace dpgcn
