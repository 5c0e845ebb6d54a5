#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dpgcn/errors.hpp"
#include "dpgcn/rng.hpp"

namespace dpgcn {

using Edge = std::pair<int, int>;  // unordered pair stored as (min, max)

// Undirected simple graph: fixed node set, canonical sorted edge list,
// cached degrees. Immutable after construction, safe to share across threads.
// Dense adjacency / Laplacian are materialized on demand (desk scale).
class Graph {
 public:
  struct CanonicalTag {};

  // Accepts edges in canonical form: u < v, sorted, unique. Used by hot paths
  // (subsampling) that produce canonical lists by construction.
  Graph(int n, std::vector<Edge> canonical_edges, CanonicalTag)
      : n_(n), edges_(std::move(canonical_edges)), degrees_(static_cast<size_t>(n), 0) {
    for (const auto& [u, v] : edges_) {
      ++degrees_[static_cast<size_t>(u)];
      ++degrees_[static_cast<size_t>(v)];
    }
  }

  int node_count() const { return n_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<int>& degrees() const { return degrees_; }
  int degree(int i) const { return degrees_[static_cast<size_t>(i)]; }

  int max_degree() const {
    int d = 0;
    for (int di : degrees_) d = std::max(d, di);
    return d;
  }

  bool has_edge(int u, int v) const {
    if (u == v) return false;
    const Edge e{std::min(u, v), std::max(u, v)};
    return std::binary_search(edges_.begin(), edges_.end(), e);
  }

  Eigen::MatrixXd adjacency() const {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n_, n_);
    for (const auto& [u, v] : edges_) {
      a(u, v) = 1.0;
      a(v, u) = 1.0;
    }
    return a;
  }

  // L = D - A.
  Eigen::MatrixXd laplacian() const {
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n_, n_);
    for (const auto& [u, v] : edges_) {
      l(u, v) = -1.0;
      l(v, u) = -1.0;
      l(u, u) += 1.0;
      l(v, v) += 1.0;
    }
    return l;
  }

 private:
  int n_;
  std::vector<Edge> edges_;
  std::vector<int> degrees_;
};

// Validates and canonicalizes an arbitrary edge list: both orientations and
// duplicates collapse to one undirected edge; self-loops and out-of-range
// indices are rejected.
inline Graph build_graph(int n, const std::vector<Edge>& edge_list) {
  if (n <= 0) throw validation_error("build_graph: node count must be positive");
  std::vector<Edge> canon;
  canon.reserve(edge_list.size());
  for (const auto& [u, v] : edge_list) {
    if (u < 0 || u >= n || v < 0 || v >= n) {
      throw validation_error("build_graph: node index out of range: (" +
                             std::to_string(u) + "," + std::to_string(v) +
                             ") with n=" + std::to_string(n));
    }
    if (u == v) {
      throw validation_error("build_graph: self-loop rejected at node " + std::to_string(u));
    }
    canon.emplace_back(std::min(u, v), std::max(u, v));
  }
  std::sort(canon.begin(), canon.end());
  canon.erase(std::unique(canon.begin(), canon.end()), canon.end());
  return Graph(n, std::move(canon), Graph::CanonicalTag{});
}

inline Eigen::MatrixXd laplacian(const Graph& g) { return g.laplacian(); }

// (h0*I + h1*L)x is assembled from this: (Lx)_i = d_i x_i - sum_{j~i} x_j.
// O(n + |E|), no dense matrix.
inline Eigen::VectorXd laplacian_matvec(const Graph& g, const Eigen::VectorXd& x) {
  if (x.size() != g.node_count()) {
    throw validation_error("laplacian_matvec: vector length " + std::to_string(x.size()) +
                           " != node count " + std::to_string(g.node_count()));
  }
  Eigen::VectorXd y(g.node_count());
  const auto& deg = g.degrees();
  for (int i = 0; i < g.node_count(); ++i) y[i] = deg[static_cast<size_t>(i)] * x[i];
  for (const auto& [u, v] : g.edges()) {
    y[u] -= x[v];
    y[v] -= x[u];
  }
  return y;
}

// Toggles the single edge (u,v): |E' symdiff E| = 1, node set unchanged.
inline Graph neighboring_graph(const Graph& g, int u, int v) {
  const int n = g.node_count();
  if (u < 0 || u >= n || v < 0 || v >= n) {
    throw validation_error("neighboring_graph: node index out of range");
  }
  if (u == v) throw validation_error("neighboring_graph: u == v rejected");
  const Edge e{std::min(u, v), std::max(u, v)};
  std::vector<Edge> edges = g.edges();
  auto it = std::lower_bound(edges.begin(), edges.end(), e);
  if (it != edges.end() && *it == e) {
    edges.erase(it);
  } else {
    edges.insert(it, e);
  }
  return Graph(n, std::move(edges), Graph::CanonicalTag{});
}

// Feature vector with mandatory L2 normalization; \|x\|_2 = 1 after
// construction (within 1e-12).
class FeatureVector {
 public:
  explicit FeatureVector(Eigen::VectorXd raw) : x_(std::move(raw)) {
    const double norm = x_.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw validation_error("FeatureVector: cannot normalize zero or non-finite vector");
    }
    x_ /= norm;
  }

  const Eigen::VectorXd& values() const { return x_; }
  int size() const { return static_cast<int>(x_.size()); }

 private:
  Eigen::VectorXd x_;
};

// ---------------------------------------------------------------------------
// Stochastic block model: two equal communities, independent edges.

struct SbmParams {
  int n = 0;          // must be even
  double p_in = 0.0;  // within-community edge probability
  double p_out = 0.0; // between-community edge probability

  void validate() const {
    if (n <= 0 || n % 2 != 0) throw validation_error("SbmParams: n must be positive and even");
    if (!(p_in >= 0.0 && p_in <= 1.0)) throw validation_error("SbmParams: p_in must be in [0,1]");
    if (!(p_out >= 0.0 && p_out <= 1.0)) throw validation_error("SbmParams: p_out must be in [0,1]");
    if (p_out > p_in) throw validation_error("SbmParams: requires p_out <= p_in");
  }
};

struct SbmSample {
  Graph graph;
  std::vector<std::int8_t> labels;  // +1 first half, -1 second half
};

inline SbmSample generate_sbm(const SbmParams& params, std::uint64_t seed) {
  params.validate();
  RngStream stream(seed, StreamPurpose::kSbm, 0);
  const int half = params.n / 2;
  std::vector<Edge> edges;
  for (int i = 0; i < params.n; ++i) {
    for (int j = i + 1; j < params.n; ++j) {
      const bool same = (i < half) == (j < half);
      const double p = same ? params.p_in : params.p_out;
      if (stream.uniform01() < p) edges.emplace_back(i, j);
    }
  }
  std::vector<std::int8_t> labels(static_cast<size_t>(params.n));
  for (int i = 0; i < params.n; ++i) labels[static_cast<size_t>(i)] = i < half ? 1 : -1;
  return SbmSample{Graph(params.n, std::move(edges), Graph::CanonicalTag{}), std::move(labels)};
}

// Interpretable feature vector from planted labels: x = labels / sqrt(n).
inline FeatureVector planted_feature(const std::vector<std::int8_t>& labels) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(labels.size()));
  for (size_t i = 0; i < labels.size(); ++i) x[static_cast<Eigen::Index>(i)] = labels[i];
  return FeatureVector(std::move(x));
}

// ---------------------------------------------------------------------------
// Edge-list file format: line 1 = n; each following non-empty line = "u v"
// (ASCII decimal, 0-indexed); '#' starts a comment. Carrying n on the first
// line lets isolated trailing vertices survive round-trips.

namespace detail {

inline std::string strip_comment(const std::string& line) {
  const auto pos = line.find('#');
  return pos == std::string::npos ? line : line.substr(0, pos);
}

inline bool blank(const std::string& s) {
  return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

}  // namespace detail

inline Graph read_edge_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("read_edge_list: cannot open " + path);
  std::string line;
  int lineno = 0;
  int n = -1;
  std::vector<Edge> edges;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = detail::strip_comment(line);
    if (detail::blank(body)) continue;
    std::istringstream ss(body);
    std::string extra;
    if (n < 0) {
      if (!(ss >> n) || n <= 0) {
        throw validation_error(path + ":" + std::to_string(lineno) +
                               ": expected positive node count");
      }
    } else {
      int u = 0, v = 0;
      if (!(ss >> u >> v)) {
        throw validation_error(path + ":" + std::to_string(lineno) +
                               ": expected \"u v\" edge line");
      }
      edges.emplace_back(u, v);
    }
    if (ss >> extra) {
      throw validation_error(path + ":" + std::to_string(lineno) +
                             ": trailing token \"" + extra + "\"");
    }
  }
  if (n < 0) throw validation_error("read_edge_list: " + path + " is empty");
  try {
    return build_graph(n, edges);
  } catch (const validation_error& e) {
    throw validation_error("read_edge_list: " + path + ": " + e.what());
  }
}

inline void write_edge_list(const Graph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw validation_error("write_edge_list: cannot open " + path);
  out << g.node_count() << "\n";
  for (const auto& [u, v] : g.edges()) out << u << " " << v << "\n";
  if (!out) throw validation_error("write_edge_list: write failed for " + path);
}

// Feature-vector file: one decimal float per line, length n; '#' comments.
inline FeatureVector read_feature_vector(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("read_feature_vector: cannot open " + path);
  std::string line;
  int lineno = 0;
  std::vector<double> vals;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = detail::strip_comment(line);
    if (detail::blank(body)) continue;
    std::istringstream ss(body);
    double x = 0.0;
    std::string extra;
    if (!(ss >> x) || (ss >> extra)) {
      throw validation_error(path + ":" + std::to_string(lineno) +
                             ": expected one decimal float");
    }
    vals.push_back(x);
  }
  if (vals.empty()) throw validation_error("read_feature_vector: " + path + " is empty");
  Eigen::VectorXd x(static_cast<Eigen::Index>(vals.size()));
  for (size_t i = 0; i < vals.size(); ++i) x[static_cast<Eigen::Index>(i)] = vals[i];
  return FeatureVector(std::move(x));
}

inline void write_feature_vector(const FeatureVector& fv, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw validation_error("write_feature_vector: cannot open " + path);
  char buf[64];
  for (int i = 0; i < fv.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", fv.values()[i]);
    out << buf << "\n";
  }
  if (!out) throw validation_error("write_feature_vector: write failed for " + path);
}

}  // namespace dpgcn
