#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "dpgcn/mechanism.hpp"

using dpgcn::FeatureVector;
using dpgcn::GcnModel;
using dpgcn::Graph;
using dpgcn::LabelVector;
using dpgcn::MechanismConfig;
using dpgcn::RngStream;
using dpgcn::StreamPurpose;
using dpgcn::VoteMode;
using dpgcn::build_graph;
using dpgcn::majority_vote;
using dpgcn::run_mechanism;
using dpgcn::stability_score;
using dpgcn::subsample_edges;

TEST_CASE("subsampling keeps everything at ps=1 and nothing at ps=0", "[mechanism]") {
  const auto sample = dpgcn::generate_sbm({20, 0.5, 0.1}, 3);
  RngStream s1(1, StreamPurpose::kSubsample, 0);
  const Graph all = subsample_edges(sample.graph, 1.0, s1);
  CHECK(all.edges() == sample.graph.edges());
  RngStream s2(1, StreamPurpose::kSubsample, 0);
  const Graph none = subsample_edges(sample.graph, 0.0, s2);
  CHECK(none.edge_count() == 0);
  CHECK(none.node_count() == 20);
}

TEST_CASE("subsampling is contained in the original graph", "[mechanism]") {
  const auto sample = dpgcn::generate_sbm({30, 0.5, 0.1}, 9);
  for (std::uint64_t idx = 0; idx < 50; ++idx) {
    RngStream s(7, StreamPurpose::kSubsample, idx);
    const Graph sub = subsample_edges(sample.graph, 0.4, s);
    CHECK(sub.node_count() == sample.graph.node_count());
    CHECK(std::includes(sample.graph.edges().begin(), sample.graph.edges().end(),
                        sub.edges().begin(), sub.edges().end()));
  }
}

TEST_CASE("retained edge count matches the binomial mean on K3", "[mechanism]") {
  const Graph k3 = build_graph(3, {{0, 1}, {1, 2}, {0, 2}});
  double total = 0.0;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    RngStream s(99, StreamPurpose::kSubsample, static_cast<std::uint64_t>(t));
    total += subsample_edges(k3, 0.5, s).edge_count();
  }
  CHECK(std::fabs(total / trials - 1.5) <= 0.06);
}

TEST_CASE("per-edge coins reproduce the subsample and its Laplacian gap", "[mechanism]") {
  // Replay the coin stream independently; the dropped edges must explain
  // L - L_sub exactly as a sum of edge Laplacians.
  const auto sample = dpgcn::generate_sbm({16, 0.6, 0.2}, 21);
  const int n = 16;
  for (std::uint64_t idx = 0; idx < 20; ++idx) {
    RngStream s(5, StreamPurpose::kSubsample, idx);
    const Graph sub = subsample_edges(sample.graph, 0.5, s);

    RngStream replay(5, StreamPurpose::kSubsample, idx);
    Eigen::MatrixXd gap = Eigen::MatrixXd::Zero(n, n);
    std::vector<dpgcn::Edge> kept;
    for (const auto& [u, v] : sample.graph.edges()) {
      const bool keep = replay.uniform01() < 0.5;
      if (keep) {
        kept.emplace_back(u, v);
      } else {
        Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
        d[u] = 1.0;
        d[v] = -1.0;
        gap += d * d.transpose();
      }
    }
    CHECK(kept == sub.edges());
    const Eigen::MatrixXd direct = sample.graph.laplacian() - sub.laplacian();
    CHECK((gap - direct).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("majority vote counts the two leading vectors", "[mechanism]") {
  const LabelVector pp({1, 1});
  const LabelVector pm({1, -1});
  const auto t = majority_vote({pp, pp, pm});
  CHECK(t.consensus == pp);
  CHECK(t.c1 == 2);
  CHECK(t.c2 == 1);
  CHECK(t.distinct == 2);

  const auto unanimous = majority_vote({pm, pm, pm});
  CHECK(unanimous.consensus == pm);
  CHECK(unanimous.c1 == 3);
  CHECK(unanimous.c2 == 0);
  CHECK(unanimous.distinct == 1);
}

TEST_CASE("vote ties resolve toward +1-first order", "[mechanism]") {
  const LabelVector pp({1, 1});
  const LabelVector pm({1, -1});
  const auto t = majority_vote({pm, pp});
  CHECK(t.consensus == pp);  // (+,+) orders before (+,-)
  CHECK(t.c1 == 1);
  CHECK(t.c2 == 1);
  CHECK(t.distinct == 2);
}

TEST_CASE("vote tallies satisfy the counting constraints", "[mechanism]") {
  RngStream stream(17, StreamPurpose::kTrial, 0);
  for (int rep = 0; rep < 100; ++rep) {
    const int m = 1 + static_cast<int>(stream.next_u64() % 12);
    std::vector<LabelVector> vecs;
    bool consensus_in_input = false;
    for (int i = 0; i < m; ++i) {
      std::vector<std::int8_t> v(4);
      for (auto& e : v) e = stream.uniform01() < 0.5 ? 1 : -1;
      vecs.emplace_back(std::move(v));
    }
    const auto t = majority_vote(vecs);
    CHECK(t.c1 >= t.c2);
    CHECK(t.c2 >= 0);
    CHECK(t.c1 + t.c2 <= m);
    CHECK(t.c1 >= (m + t.distinct - 1) / t.distinct);  // pigeonhole
    for (const auto& v : vecs) consensus_in_input |= v == t.consensus;
    CHECK(consensus_in_input);
  }
}

TEST_CASE("per-node voting takes coordinatewise majorities", "[mechanism]") {
  const LabelVector pm({1, -1});
  const LabelVector mp({-1, 1});
  const auto t = majority_vote({pm, mp}, VoteMode::kPerNode);
  // both coordinates tie -> +1; the consensus need not be an input vector
  CHECK(t.consensus == LabelVector({1, 1}));
  CHECK(t.c1 == 1);  // vector-level counts unchanged
  CHECK(t.c2 == 1);
  CHECK(t.distinct == 2);

  const auto t2 = majority_vote({pm, pm, mp}, VoteMode::kPerNode);
  CHECK(t2.consensus == pm);
  CHECK(t2.c1 == 2);
}

TEST_CASE("majority vote rejects malformed input", "[mechanism]") {
  CHECK_THROWS_AS(majority_vote({}), dpgcn::validation_error);
  CHECK_THROWS_AS(majority_vote({LabelVector({1, 1}), LabelVector({1})}),
                  dpgcn::validation_error);
}

TEST_CASE("stability score arithmetic", "[mechanism]") {
  dpgcn::VoteTally t;
  t.c1 = 90;
  t.c2 = 10;
  CHECK(stability_score(t, 100, 0.25) == Catch::Approx(-0.2).margin(1e-15));

  // unanimous: c1 = m, c2 = 0 -> 1/(4 ps) - 1
  t.c1 = 64;
  t.c2 = 0;
  CHECK(stability_score(t, 64, 0.5) == Catch::Approx(1.0 / 2.0 - 1.0).margin(1e-15));
  CHECK(stability_score(t, 64, 0.1) == Catch::Approx(1.0 / 0.4 - 1.0).margin(1e-12));

  // dead heat scores -1 regardless of ps
  t.c1 = 32;
  t.c2 = 32;
  CHECK(stability_score(t, 64, 0.7) == -1.0);

  CHECK_THROWS_AS(stability_score(t, 0, 0.5), dpgcn::validation_error);
  CHECK_THROWS_AS(stability_score(t, 64, 0.0), dpgcn::validation_error);
}

TEST_CASE("noise-free release decision is a strict threshold on d_hat", "[mechanism]") {
  MechanismConfig config;
  config.epsilon = 1.0;
  config.delta = 0.01;
  config.m = 10;
  const LabelVector y({1, -1});
  CHECK(dpgcn::ptr_threshold(1.0, 0.01) == Catch::Approx(std::log(100.0)).margin(1e-15));

  const auto held = dpgcn::ptr_release_with_noise(-1.0, config, y, 0.0);
  CHECK_FALSE(held.released);
  CHECK_FALSE(held.labels.has_value());
  CHECK(held.d_tilde == -1.0);

  const auto released = dpgcn::ptr_release_with_noise(10.0, config, y, 0.0);
  CHECK(released.released);
  REQUIRE(released.labels.has_value());
  CHECK(*released.labels == y);

  // exactly at the threshold: strict comparison holds back
  const auto at = dpgcn::ptr_release_with_noise(held.threshold, config, y, 0.0);
  CHECK_FALSE(at.released);

  // for fixed noise, release is monotone in d_hat
  bool was_released = false;
  for (double d = -2.0; d <= 8.0; d += 0.5) {
    const bool now = dpgcn::ptr_release_with_noise(d, config, y, 0.3).released;
    if (was_released) CHECK(now);
    was_released = now;
  }
}

TEST_CASE("release frequency matches the Laplace tail", "[mechanism]") {
  // Pr[d_hat + Lap(1/eps) > threshold] = exp(-eps (threshold - d_hat)) / 2
  // when d_hat <= threshold. Pick the gap ln 5 so the target is exactly 0.1.
  MechanismConfig config;
  config.epsilon = 1.0;
  config.delta = 0.01;
  config.m = 1;
  const double d_hat = dpgcn::ptr_threshold(config.epsilon, config.delta) - std::log(5.0);
  const LabelVector y({1});
  RngStream noise(123, StreamPurpose::kNoise, 0);
  const int trials = 100000;
  int released = 0;
  for (int t = 0; t < trials; ++t) {
    released += dpgcn::ptr_release(d_hat, config, y, noise).released ? 1 : 0;
  }
  const double freq = static_cast<double>(released) / trials;
  CHECK(std::fabs(freq - 0.1) <= 0.005);
}

TEST_CASE("full mechanism on ps=1 is deterministic voting", "[mechanism]") {
  const auto sample = dpgcn::generate_sbm({20, 0.6, 0.1}, 2);
  const FeatureVector x = dpgcn::planted_feature(sample.labels);
  const GcnModel model{1.0, 0.05, dpgcn::Activation::kTanh, 0.0};
  MechanismConfig config;
  config.ps = 1.0;
  config.m = 8;
  config.seed = 4;

  const auto out = run_mechanism(sample.graph, x, model, config);
  // every subsample equals the full graph: unanimous vote, d_hat = 1/4 - 1
  CHECK(out.d_hat == -0.75);
  CHECK(out.tally.c1 == 8);
  CHECK(out.tally.c2 == 0);
  CHECK(out.tally.distinct == 1);
  CHECK(out.tally.consensus == dpgcn::gcn_forward(sample.graph, x, model).labels);
  CHECK(out.m == 8);
}

TEST_CASE("full mechanism with m=1 has a trivial tally", "[mechanism]") {
  const auto sample = dpgcn::generate_sbm({12, 0.6, 0.1}, 6);
  const FeatureVector x = dpgcn::planted_feature(sample.labels);
  MechanismConfig config;
  config.ps = 0.7;
  config.m = 1;
  const auto out = run_mechanism(sample.graph, x, GcnModel{1.0, 0.05}, config);
  CHECK(out.tally.c1 == 1);
  CHECK(out.tally.c2 == 0);
  CHECK(out.tally.distinct == 1);
  CHECK(out.d_hat == Catch::Approx(1.0 / (4.0 * 0.7) - 1.0).margin(1e-12));
}

TEST_CASE("full mechanism is reproducible and thread-count invariant", "[mechanism]") {
  const auto sample = dpgcn::generate_sbm({24, 0.5, 0.1}, 8);
  const FeatureVector x = dpgcn::planted_feature(sample.labels);
  const GcnModel model{1.0, 0.08, dpgcn::Activation::kTanh, 0.0};
  MechanismConfig config;
  config.ps = 0.4;
  config.m = 33;
  config.seed = 11;

  const auto a = run_mechanism(sample.graph, x, model, config);
  const auto b = run_mechanism(sample.graph, x, model, config);
  CHECK(a.d_hat == b.d_hat);
  CHECK(a.d_tilde == b.d_tilde);
  CHECK(a.released == b.released);
  CHECK(a.tally.consensus == b.tally.consensus);
  CHECK(a.tally.c1 == b.tally.c1);
  CHECK(a.tally.c2 == b.tally.c2);

  MechanismConfig parallel = config;
  parallel.threads = 4;
  const auto c = run_mechanism(sample.graph, x, model, parallel);
  CHECK(a.d_hat == c.d_hat);
  CHECK(a.d_tilde == c.d_tilde);
  CHECK(a.tally.consensus == c.tally.consensus);
  CHECK(a.tally.c1 == c.tally.c1);
  CHECK(a.tally.c2 == c.tally.c2);
  CHECK(a.tally.distinct == c.tally.distinct);

  // a different seed must actually change the subsamples
  MechanismConfig other = config;
  other.seed = 12;
  const auto d = run_mechanism(sample.graph, x, model, other);
  CHECK((a.d_hat != d.d_hat || a.tally.c1 != d.tally.c1 || a.d_tilde != d.d_tilde));
}

TEST_CASE("automatic m resolution and capping warn as configured", "[mechanism]") {
  const auto sample = dpgcn::generate_sbm({20, 0.6, 0.1}, 2);
  const FeatureVector x = dpgcn::planted_feature(sample.labels);
  MechanismConfig config;
  config.ps = 0.5;
  config.delta = 0.01;
  config.m_auto = true;
  const auto out = run_mechanism(sample.graph, x, GcnModel{1.0, 0.02}, config);
  CHECK(out.m == dpgcn::choose_m(20, 0.01, 0.5).m);

  MechanismConfig capped = config;
  capped.m_cap = 10;
  const auto out2 = run_mechanism(sample.graph, x, GcnModel{1.0, 0.02}, capped);
  CHECK(out2.m == 10);
  bool warned = false;
  for (const auto& w : out2.warnings) warned |= w.find("capped") != std::string::npos;
  CHECK(warned);
}

TEST_CASE("mechanism warns on degenerate margins and per-node voting", "[mechanism]") {
  const Graph p3 = build_graph(3, {{0, 1}, {1, 2}});
  const FeatureVector x(Eigen::Vector3d(1.0, 0.0, 0.0));
  const GcnModel model{0.0, 1.0, dpgcn::Activation::kIdentity, 0.0};
  MechanismConfig config;
  config.m = 4;
  const auto out = run_mechanism(p3, x, model, config);
  bool warned = false;
  for (const auto& w : out.warnings) warned |= w.find("degenerate") != std::string::npos;
  CHECK(warned);

  const auto sample = dpgcn::generate_sbm({10, 0.6, 0.1}, 2);
  MechanismConfig pn;
  pn.m = 4;
  pn.vote_mode = VoteMode::kPerNode;
  const auto out2 = run_mechanism(sample.graph, dpgcn::planted_feature(sample.labels),
                                  GcnModel{1.0, 0.05}, pn);
  bool experimental = false;
  for (const auto& w : out2.warnings) {
    experimental |= w.find("experimental") != std::string::npos;
  }
  CHECK(experimental);
}

TEST_CASE("mechanism config validation names the offending field", "[mechanism]") {
  MechanismConfig config;
  config.m = 5;
  CHECK_NOTHROW(config.validate());

  config.epsilon = 0.0;
  CHECK_THROWS_WITH(config.validate(), Catch::Matchers::StartsWith("epsilon:"));
  config = MechanismConfig{};
  config.m = 5;
  config.delta = 1.0;
  CHECK_THROWS_WITH(config.validate(), Catch::Matchers::StartsWith("delta:"));
  config = MechanismConfig{};
  config.m = 5;
  config.ps = 0.0;
  CHECK_THROWS_WITH(config.validate(), Catch::Matchers::StartsWith("ps:"));
  config = MechanismConfig{};
  config.m = 0;
  CHECK_THROWS_WITH(config.validate(), Catch::Matchers::StartsWith("m:"));
  config = MechanismConfig{};
  config.m = 5;
  config.threads = 0;
  CHECK_THROWS_WITH(config.validate(), Catch::Matchers::StartsWith("threads:"));
}

TEST_CASE("vote mode parsing round-trips", "[mechanism]") {
  CHECK(dpgcn::parse_vote_mode("whole_vector") == VoteMode::kWholeVector);
  CHECK(dpgcn::parse_vote_mode("per_node") == VoteMode::kPerNode);
  CHECK(dpgcn::vote_mode_name(VoteMode::kWholeVector) == "whole_vector");
  CHECK(dpgcn::vote_mode_name(VoteMode::kPerNode) == "per_node");
  CHECK_THROWS_AS(dpgcn::parse_vote_mode("plurality"), dpgcn::validation_error);
}
