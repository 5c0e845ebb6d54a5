#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>

#include "dpgcn/errors.hpp"
#include "dpgcn/rng.hpp"

namespace dpgcn {

enum class SpectralMethod { kExactEigensolve, kPowerIteration };

struct SpectralNormResult {
  double value = 0.0;  // operator 2-norm, i.e. max |eigenvalue| for symmetric M
  SpectralMethod method = SpectralMethod::kExactEigensolve;
  int iterations = 0;
  double residual = 0.0;
};

namespace detail {

constexpr double kSymmetryTol = 1e-10;
constexpr int kExactCutoff = 512;

inline void require_symmetric(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) {
    throw validation_error("spectral_norm: matrix is not square");
  }
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTol) {
    throw validation_error("spectral_norm: matrix not symmetric (max |M - M^T| = " +
                           std::to_string(asym) + ")");
  }
}

inline SpectralNormResult exact_norm(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw convergence_error("spectral_norm: eigensolver failed", 0.0);
  }
  const auto& ev = es.eigenvalues();
  const double value = std::max(std::fabs(ev.minCoeff()), std::fabs(ev.maxCoeff()));
  return SpectralNormResult{value, SpectralMethod::kExactEigensolve, 0, 0.0};
}

// Power iteration on M^2 so the dominant |eigenvalue| is found regardless of
// sign (perturbation matrices L_hat - L are indefinite). M^2 is PSD, so the
// Rayleigh quotient mu_t increases monotonically toward lambda_max(M^2).
//
// Two stopping rules:
//   1. residual: ||M^2 v - mu v|| <= tol * s * max(1, s). By the symmetric
//      residual bound some eigenvalue of M^2 lies within resid of mu, which
//      puts s = sqrt(mu) within tol*max(1, s) of the norm.
//   2. rate extrapolation: when the top eigenvalues of M^2 are clustered the
//      residual decays slowly, but the value converges into the cluster far
//      sooner. Estimate the geometric rate rho from successive Rayleigh
//      increments and stop once the extrapolated remaining gap
//      delta * rho / (1 - rho) is far below tolerance for several consecutive
//      iterations.
inline SpectralNormResult power_norm(const Eigen::MatrixXd& m, double tol) {
  const Eigen::Index n = m.rows();
  if (m.cwiseAbs().maxCoeff() == 0.0) {
    return SpectralNormResult{0.0, SpectralMethod::kPowerIteration, 0, 0.0};
  }

  Eigen::VectorXd v = Eigen::VectorXd::Ones(n);
  v[0] += 1e-3;
  v.normalize();

  const int cap = static_cast<int>(20.0 * static_cast<double>(n) * std::log(1.0 / tol)) + 64;
  double mu_prev = 0.0;
  double delta_prev = -1.0;
  bool have_prev = false;
  int calm_streak = 0;
  int restarts = 0;
  double best = 0.0;

  for (int it = 1; it <= cap; ++it) {
    const Eigen::VectorXd w = m * (m * v);  // M^2 v
    const double mu = v.dot(w);             // Rayleigh quotient of M^2
    const double resid = (w - mu * v).norm();
    const double s = std::sqrt(std::max(mu, 0.0));
    best = std::max(best, s);
    const double accept = tol * s * std::max(1.0, s);
    if (s > 0.0 && resid <= accept) {
      return SpectralNormResult{s, SpectralMethod::kPowerIteration, it, resid};
    }
    if (have_prev) {
      const double delta = mu - mu_prev;  // >= 0 up to roundoff
      bool calm = false;
      if (delta <= 0.0) {
        calm = true;  // increments hit the floating-point floor
      } else if (delta_prev > 0.0 && delta < delta_prev) {
        const double rho = delta / delta_prev;
        calm = delta * rho / (1.0 - rho) <= 0.05 * accept;
      }
      calm_streak = calm ? calm_streak + 1 : 0;
      if (calm_streak >= 5 && s > 0.0) {
        return SpectralNormResult{s, SpectralMethod::kPowerIteration, it, resid};
      }
      delta_prev = delta;
    }
    const double wn = w.norm();
    if (wn == 0.0) {
      // v fell in the kernel of M^2; the start perturbation makes this rare.
      v = Eigen::VectorXd::Zero(n);
      RngStream restart(0xD09C5ULL, StreamPurpose::kRestart, static_cast<std::uint64_t>(restarts++));
      for (Eigen::Index i = 0; i < n; ++i) v[i] = restart.uniform01() - 0.5;
      v.normalize();
      have_prev = false;
      delta_prev = -1.0;
      calm_streak = 0;
      continue;
    }
    mu_prev = mu;
    have_prev = true;
    v = w / wn;
  }
  throw convergence_error("spectral_norm: power iteration did not converge in " +
                              std::to_string(cap) + " iterations (best estimate " +
                              std::to_string(best) + ")",
                          best);
}

}  // namespace detail

inline SpectralNormResult spectral_norm(const Eigen::MatrixXd& m, double tol,
                                        SpectralMethod method) {
  if (!(tol > 0.0)) throw validation_error("spectral_norm: tol must be > 0");
  detail::require_symmetric(m);
  switch (method) {
    case SpectralMethod::kExactEigensolve:
      return detail::exact_norm(m);
    case SpectralMethod::kPowerIteration:
      return detail::power_norm(m, tol);
  }
  throw validation_error("spectral_norm: unknown method");
}

// Exact symmetric eigensolve for n <= 512, shifted power iteration above.
inline SpectralNormResult spectral_norm(const Eigen::MatrixXd& m, double tol = 1e-10) {
  if (!(tol > 0.0)) throw validation_error("spectral_norm: tol must be > 0");
  detail::require_symmetric(m);
  return m.rows() <= detail::kExactCutoff ? detail::exact_norm(m)
                                          : detail::power_norm(m, tol);
}

}  // namespace dpgcn
