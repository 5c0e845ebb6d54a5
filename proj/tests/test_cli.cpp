#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <catch2/catch_amalgamated.hpp>

#include "json.hpp"

// Integration tests drive the installed binary exactly as a user would.

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CliResult run_cli(const std::string& args) {
  static int counter = 0;
  const std::string out_path = "/tmp/dpgcn_cli_out_" + std::to_string(++counter);
  const std::string err_path = "/tmp/dpgcn_cli_err_" + std::to_string(counter);
  const std::string cmd =
      std::string(DPGCN_CLI_PATH) + " " + args + " > " + out_path + " 2> " + err_path;
  const int status = std::system(cmd.c_str());
  CliResult r;
  REQUIRE(WIFEXITED(status));
  r.code = WEXITSTATUS(status);
  r.out = slurp(out_path);
  r.err = slurp(err_path);
  std::remove(out_path.c_str());
  std::remove(err_path.c_str());
  return r;
}

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  REQUIRE(out);
  out << body;
}

}  // namespace

TEST_CASE("gen writes reproducible graph and feature files", "[cli]") {
  const std::string g1 = "/tmp/dpgcn_cli_g1.edges", f1 = "/tmp/dpgcn_cli_g1.features";
  const std::string g2 = "/tmp/dpgcn_cli_g2.edges", f2 = "/tmp/dpgcn_cli_g2.features";
  const std::string args = "gen --n 20 --p-in 0.5 --p-out 0.1 --seed 7 --graph-out ";
  const auto a = run_cli(args + g1 + " --features-out " + f1);
  const auto b = run_cli(args + g2 + " --features-out " + f2);
  CHECK(a.code == 0);
  CHECK(b.code == 0);
  CHECK(slurp(g1) == slurp(g2));
  CHECK(slurp(f1) == slurp(f2));

  const auto j = nlohmann::json::parse(a.out);
  CHECK(j["n"].get<int>() == 20);
  CHECK(j["edge_count"].get<int>() > 0);

  // a different seed must produce a different graph
  const auto c = run_cli("gen --n 20 --p-in 0.5 --p-out 0.1 --seed 8 --graph-out " + g2 +
                         " --features-out " + f2);
  CHECK(c.code == 0);
  CHECK(slurp(g1) != slurp(g2));
  for (const auto& p : {g2, f2}) std::remove(p.c_str());
}

TEST_CASE("run consumes generated files and reports an outcome", "[cli]") {
  const std::string g = "/tmp/dpgcn_cli_run.edges", f = "/tmp/dpgcn_cli_run.features";
  REQUIRE(run_cli("gen --n 20 --seed 3 --graph-out " + g + " --features-out " + f).code == 0);

  const std::string args = "run --graph " + g + " --features " + f +
                           " --h1 0.05 --ps 0.6 --m 16 --seed 5";
  const auto a = run_cli(args);
  const auto b = run_cli(args);
  CHECK(a.code == 0);
  CHECK(a.out == b.out);

  const auto j = nlohmann::json::parse(a.out);
  CHECK(j["m"].get<long long>() == 16);
  CHECK(j["released"].is_boolean());
  CHECK(j["d_hat"].is_number());
  CHECK(j["threshold"].is_number());
  CHECK(j["tally"]["c1"].get<int>() >= 1);

  // thread count must not change the outcome
  const auto threaded = run_cli(args + " --threads 4");
  CHECK(threaded.out == a.out);

  for (const auto& p : {g, f}) std::remove(p.c_str());
}

TEST_CASE("run without files generates its own graph", "[cli]") {
  const auto a = run_cli("run --n 16 --p-in 0.6 --p-out 0.1 --m 8 --seed 2");
  CHECK(a.code == 0);
  const auto j = nlohmann::json::parse(a.out);
  CHECK(j["tally"]["consensus"].get<std::string>().size() == 16);
}

TEST_CASE("bound and feasible emit deterministic theory reports", "[cli]") {
  for (const std::string sub : {"bound", "feasible"}) {
    const std::string args = sub + " --n 20 --seed 4 --h1 0.02 --eps 1 --delta 0.01 --ps 0.2";
    const auto a = run_cli(args);
    const auto b = run_cli(args);
    CHECK(a.code == 0);
    CHECK(a.out == b.out);
    const auto j = nlohmann::json::parse(a.out);
    CHECK(j["f_grid"].size() == 20);
    CHECK(j["range"]["feasible"].is_boolean());
    CHECK(j["range"]["ps_upper"].is_number());
    CHECK(j["m_choice"]["m"].get<long long>() >= 1);
  }
}

TEST_CASE("verify subcommands pass on small healthy fixtures", "[cli]") {
  const auto bern = run_cli("verify bernstein --n 16 --seed 5 --ps 0.5 --trials 150 --eta 0.25");
  CHECK(bern.code == 0);
  CHECK(nlohmann::json::parse(bern.out)["pass"].get<bool>());

  const auto t1 =
      run_cli("verify theorem1 --n 16 --seed 5 --h1 0.05 --ps 0.5 --trials 150 --eta 0.25");
  CHECK(t1.code == 0);
  const auto t1j = nlohmann::json::parse(t1.out);
  CHECK(t1j["pass"].get<bool>());
  CHECK(t1j["lemma1_checked"].get<long long>() == 150);

  const auto t2 =
      run_cli("verify theorem2 --n 16 --seed 5 --h1 0.05 --ps 0.6 --m 8 --repeats 25 --eta 0.25");
  CHECK(t2.code == 0);
  CHECK(nlohmann::json::parse(t2.out)["pass"].get<bool>());

  // identical invocations emit identical bytes
  const auto again =
      run_cli("verify bernstein --n 16 --seed 5 --ps 0.5 --trials 150 --eta 0.25");
  CHECK(again.out == bern.out);
}

TEST_CASE("verify exits 2 when the check cannot pass", "[cli]") {
  // released-only conditioning with a gate that never opens: zero evaluations
  const auto vac = run_cli(
      "verify theorem2 --n 16 --seed 5 --h1 0.05 --ps 0.6 --m 8 --repeats 10 "
      "--eps 0.001 --delta 1e-9 --released-only");
  CHECK(vac.code == 2);
  CHECK(vac.err.find("verification failed") != std::string::npos);
}

TEST_CASE("audit runs end to end and is reproducible", "[cli]") {
  const std::string args =
      "audit --n 12 --p-in 0.6 --p-out 0.15 --seed 9 --h1 0.002 "
      "--eps 2 --delta 0.05 --ps 0.02 --m 16 --trials 400 --edge 0 4";
  const auto a = run_cli(args);
  const auto b = run_cli(args);
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  const auto j = nlohmann::json::parse(a.out);
  CHECK(j["trials"].get<long long>() == 400);
  CHECK(j["edge"][0].get<int>() == 0);
  CHECK(j["edge"][1].get<int>() == 4);
  CHECK(j["events"].is_array());
  CHECK_FALSE(j["events"].empty());
}

TEST_CASE("experiment writes csv and json deterministically", "[cli]") {
  const std::string cfg = "/tmp/dpgcn_cli_exp.cfg";
  write_file(cfg,
             "n = 16\np_in = 0.6\np_out = 0.1\nh1 = 0.05\n"
             "ps = 0.5\nm = 12\nseed = 3\ntrials = 30\neta = 0.25\n");
  const auto a = run_cli("experiment --config " + cfg + " --out /tmp/dpgcn_cli_exp_a");
  const auto b = run_cli("experiment --config " + cfg + " --out /tmp/dpgcn_cli_exp_b");
  CHECK(a.code == 0);
  CHECK(b.code == 0);
  const std::string csv = slurp("/tmp/dpgcn_cli_exp_a.csv");
  CHECK(csv == slurp("/tmp/dpgcn_cli_exp_b.csv"));
  CHECK(slurp("/tmp/dpgcn_cli_exp_a.json") == slurp("/tmp/dpgcn_cli_exp_b.json"));
  CHECK(csv.rfind("# schema=dpgcn-v1\n", 0) == 0);

  const auto j = nlohmann::json::parse(slurp("/tmp/dpgcn_cli_exp_a.json"));
  CHECK(j["trials"].get<long long>() == 30);
  CHECK(j["mechanism"]["m"].get<long long>() == 12);

  for (const char* p : {"/tmp/dpgcn_cli_exp_a.csv", "/tmp/dpgcn_cli_exp_a.json",
                        "/tmp/dpgcn_cli_exp_b.csv", "/tmp/dpgcn_cli_exp_b.json"}) {
    std::remove(p);
  }
  std::remove(cfg.c_str());
}

TEST_CASE("config files set parameters and explicit flags override them", "[cli]") {
  const std::string cfg = "/tmp/dpgcn_cli_mech.cfg";
  write_file(cfg, "eps = 9\nps = 0.25\nm = 40\ndelta = 0.01\n");
  const auto r = run_cli("run --n 16 --seed 2 --config " + cfg + " --eps 2");
  CHECK(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  // threshold = ln(1/delta)/eps reveals the effective epsilon
  CHECK(j["threshold"].get<double>() == Catch::Approx(std::log(100.0) / 2.0).epsilon(1e-12));
  CHECK(j["m"].get<long long>() == 40);  // config value survives (no --m flag)
  std::remove(cfg.c_str());
}

TEST_CASE("per-node voting is surfaced as a warning", "[cli]") {
  const auto r = run_cli("run --n 12 --seed 1 --m 4 --vote-mode per_node");
  CHECK(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  bool warned = false;
  for (const auto& w : j["warnings"]) {
    warned |= w.get<std::string>().find("experimental") != std::string::npos;
  }
  CHECK(warned);
}

TEST_CASE("validation failures exit 1 with a message", "[cli]") {
  const auto no_features = run_cli("run --graph /tmp/nonexistent.edges --m 4");
  CHECK(no_features.code == 1);
  CHECK(no_features.err.find("features") != std::string::npos);

  const auto odd_n = run_cli("gen --n 7 --graph-out /tmp/dpgcn_odd.edges "
                             "--features-out /tmp/dpgcn_odd.features");
  CHECK(odd_n.code == 1);
  CHECK(odd_n.err.find("error:") != std::string::npos);

  const auto bad_activation = run_cli("run --n 12 --m 4 --activation softmax");
  CHECK(bad_activation.code == 1);
  CHECK(bad_activation.err.find("activation") != std::string::npos);

  const std::string cfg = "/tmp/dpgcn_cli_bad.cfg";
  write_file(cfg, "n = 16\ndelta = 1.5\n");
  const auto bad_cfg = run_cli("experiment --config " + cfg);
  CHECK(bad_cfg.code == 1);
  CHECK(bad_cfg.err.find("delta") != std::string::npos);
  std::remove(cfg.c_str());

  const auto bad_which = run_cli("verify nonsense --n 12");
  CHECK(bad_which.code == 1);

  const auto no_sub = run_cli("");
  CHECK(no_sub.code == 1);
}
