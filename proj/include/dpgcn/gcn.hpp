#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "dpgcn/errors.hpp"
#include "dpgcn/graph.hpp"

namespace dpgcn {

enum class Activation { kIdentity, kTanh, kSigmoid, kRelu };

inline double lipschitz_constant(Activation a) {
  switch (a) {
    case Activation::kIdentity: return 1.0;
    case Activation::kTanh: return 1.0;
    case Activation::kSigmoid: return 0.25;
    case Activation::kRelu: return 1.0;
  }
  throw validation_error("lipschitz_constant: unknown activation");
}

inline double apply_activation(Activation a, double u) {
  switch (a) {
    case Activation::kIdentity: return u;
    case Activation::kTanh: return std::tanh(u);
    case Activation::kSigmoid: return 1.0 / (1.0 + std::exp(-u));
    case Activation::kRelu: return u > 0.0 ? u : 0.0;
  }
  throw validation_error("apply_activation: unknown activation");
}

inline std::string activation_name(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kTanh: return "tanh";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kRelu: return "relu";
  }
  return "?";
}

inline Activation parse_activation(const std::string& s) {
  if (s == "identity") return Activation::kIdentity;
  if (s == "tanh") return Activation::kTanh;
  if (s == "sigmoid") return Activation::kSigmoid;
  if (s == "relu") return Activation::kRelu;
  throw validation_error("activation: expected identity|tanh|sigmoid|relu, got \"" + s + "\"");
}

// One-layer spectral filter y = sigma((h0*I + h1*L) x) thresholded at tau.
// tanh with tau = 0 is the default: C_sigma = 1 and scores symmetric around
// zero; relu needs tau > 0 for two-sided margins.
struct GcnModel {
  double h0 = 1.0;
  double h1 = 0.0;
  Activation activation = Activation::kTanh;
  double tau = 0.0;
};

// +/-1 label vector. Comparison and ordering use the voting convention:
// at the first differing coordinate, +1 orders before -1.
class LabelVector {
 public:
  LabelVector() = default;

  explicit LabelVector(std::vector<std::int8_t> v) : v_(std::move(v)) {
    for (std::int8_t x : v_) {
      if (x != 1 && x != -1) throw validation_error("LabelVector: entries must be +1 or -1");
    }
  }

  int size() const { return static_cast<int>(v_.size()); }
  std::int8_t operator[](int i) const { return v_[static_cast<size_t>(i)]; }
  const std::vector<std::int8_t>& values() const { return v_; }

  bool operator==(const LabelVector& o) const { return v_ == o.v_; }
  bool operator!=(const LabelVector& o) const { return v_ != o.v_; }

  std::string to_string() const {
    std::string s;
    s.reserve(v_.size());
    for (std::int8_t x : v_) s.push_back(x > 0 ? '+' : '-');
    return s;
  }

 private:
  std::vector<std::int8_t> v_;
};

// Strict weak order with +1 before -1 at the first differing coordinate;
// vote ties resolve to the smallest vector under this order.
struct PlusFirstLess {
  bool operator()(const LabelVector& a, const LabelVector& b) const {
    const int n = std::min(a.size(), b.size());
    for (int i = 0; i < n; ++i) {
      if (a[i] != b[i]) return a[i] > b[i];  // +1 > -1 numerically
    }
    return a.size() < b.size();
  }
};

struct ForwardResult {
  Eigen::VectorXd scores;   // f(G) = sigma((h0 I + h1 L) x)
  LabelVector labels;       // +1 iff score > tau (strict), else -1
  Eigen::VectorXd margins;  // |score_i - tau|
  double gamma_min = 0.0;   // min margin
  bool degenerate_margin = false;  // some score equals tau exactly
};

inline ForwardResult gcn_forward(const Graph& g, const FeatureVector& x,
                                 const GcnModel& model) {
  if (x.size() != g.node_count()) {
    throw validation_error("gcn_forward: feature length " + std::to_string(x.size()) +
                           " != node count " + std::to_string(g.node_count()));
  }
  const Eigen::VectorXd lx = laplacian_matvec(g, x.values());
  const int n = g.node_count();
  ForwardResult r;
  r.scores.resize(n);
  r.margins.resize(n);
  std::vector<std::int8_t> labels(static_cast<size_t>(n));
  double gmin = std::numeric_limits<double>::infinity();
  bool degenerate = false;
  for (int i = 0; i < n; ++i) {
    const double pre = model.h0 * x.values()[i] + model.h1 * lx[i];
    const double s = apply_activation(model.activation, pre);
    r.scores[i] = s;
    labels[static_cast<size_t>(i)] = s > model.tau ? 1 : -1;
    const double margin = std::fabs(s - model.tau);
    r.margins[i] = margin;
    if (margin == 0.0) degenerate = true;
    gmin = std::min(gmin, margin);
  }
  r.labels = LabelVector(std::move(labels));
  r.gamma_min = gmin;
  r.degenerate_margin = degenerate;
  return r;
}

inline int hamming(const LabelVector& y, const LabelVector& yhat) {
  if (y.size() != yhat.size()) {
    throw validation_error("hamming: length mismatch " + std::to_string(y.size()) + " vs " +
                           std::to_string(yhat.size()));
  }
  int count = 0;
  for (int i = 0; i < y.size(); ++i) count += y[i] != yhat[i] ? 1 : 0;
  return count;
}

inline double misclassification_rate(const LabelVector& y, const LabelVector& yhat) {
  if (y.size() == 0) throw validation_error("misclassification_rate: empty vectors");
  return static_cast<double>(hamming(y, yhat)) / static_cast<double>(y.size());
}

// Deterministic flip-count bound: Ham <= (sqrt(n) C_sigma |h1| / gamma_min) * ||L_hat - L||_2.
inline double flip_count_bound(const ForwardResult& result, const GcnModel& model,
                               double delta_norm) {
  if (delta_norm < 0.0) throw validation_error("flip_count_bound: delta_norm must be >= 0");
  if (!(result.gamma_min > 0.0)) {
    throw validation_error("flip_count_bound: margin degenerate; flip-count bound vacuous");
  }
  const double n = static_cast<double>(result.labels.size());
  return std::sqrt(n) * lipschitz_constant(model.activation) * std::fabs(model.h1) /
         result.gamma_min * delta_norm;
}

}  // namespace dpgcn
