// Command-line front end: gen | run | bound | feasible | verify | audit |
// experiment. Exit codes: 0 success, 1 validation error, 2 invariant failure.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dpgcn/config.hpp"
#include "dpgcn/harness.hpp"

namespace {

using nlohmann::json;

void emit(const json& j, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    dpgcn::write_json_file(j, out_path);
  }
}

// Graph source shared by every subcommand that consumes a graph: either an
// edge-list + feature file pair, or a fresh SBM with planted features.
struct InputOpts {
  std::string graph_path;
  std::string features_path;
  int n = 20;
  double p_in = 0.5;
  double p_out = 0.1;
};

void add_input_options(CLI::App* sub, InputOpts& in) {
  sub->add_option("--graph", in.graph_path, "edge-list file; omit to generate an SBM");
  sub->add_option("--features", in.features_path, "feature file (required with --graph)");
  sub->add_option("--n", in.n, "SBM node count, even (used when --graph is absent)");
  sub->add_option("--p-in", in.p_in, "SBM within-community edge probability");
  sub->add_option("--p-out", in.p_out, "SBM between-community edge probability");
}

struct LoadedInputs {
  dpgcn::Graph graph;
  dpgcn::FeatureVector features;
};

LoadedInputs load_inputs(const InputOpts& in, std::uint64_t seed) {
  if (!in.graph_path.empty()) {
    if (in.features_path.empty()) {
      throw dpgcn::validation_error("features: required when --graph is given");
    }
    return {dpgcn::read_edge_list(in.graph_path),
            dpgcn::read_feature_vector(in.features_path)};
  }
  dpgcn::SbmSample s = dpgcn::generate_sbm({in.n, in.p_in, in.p_out}, seed);
  dpgcn::FeatureVector x = dpgcn::planted_feature(s.labels);
  return {std::move(s.graph), std::move(x)};
}

struct ModelOpts {
  double h0 = 1.0;
  double h1 = 0.05;
  double tau = 0.0;
  std::string activation = "tanh";
};

void add_model_options(CLI::App* sub, ModelOpts& mo) {
  sub->add_option("--h0", mo.h0, "identity filter coefficient");
  sub->add_option("--h1", mo.h1, "Laplacian filter coefficient");
  sub->add_option("--tau", mo.tau, "label threshold");
  sub->add_option("--activation", mo.activation, "identity|tanh|sigmoid|relu");
}

dpgcn::GcnModel to_model(const CLI::App* sub, const ModelOpts& mo,
                         const std::string& config_path) {
  dpgcn::GcnModel model{mo.h0, mo.h1, dpgcn::parse_activation(mo.activation), mo.tau};
  if (!config_path.empty()) {
    model = dpgcn::model_from_kv(dpgcn::parse_kv_file(config_path), model);
  }
  if (sub->count("--h0")) model.h0 = mo.h0;
  if (sub->count("--h1")) model.h1 = mo.h1;
  if (sub->count("--tau")) model.tau = mo.tau;
  if (sub->count("--activation")) model.activation = dpgcn::parse_activation(mo.activation);
  return model;
}

struct MechOpts {
  std::string config_path;
  double eps = 1.0;
  double delta = 0.01;
  double ps = 0.5;
  std::string m = "auto";
  long long m_cap = dpgcn::kDefaultMCap;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string vote_mode = "whole_vector";
};

void add_mech_options(CLI::App* sub, MechOpts& mo) {
  sub->add_option("--config", mo.config_path, "key-value config file; flags override it");
  sub->add_option("--eps", mo.eps, "privacy budget epsilon");
  sub->add_option("--delta", mo.delta, "privacy budget delta");
  sub->add_option("--ps", mo.ps, "edge retention probability");
  sub->add_option("--m", mo.m, "subsample count, integer or \"auto\"");
  sub->add_option("--m-cap", mo.m_cap, "cap applied when m is auto-resolved");
  sub->add_option("--seed", mo.seed, "root RNG seed");
  sub->add_option("--threads", mo.threads, "worker threads for the subsample loop");
  sub->add_option("--vote-mode", mo.vote_mode, "whole_vector|per_node");
}

void apply_m_string(dpgcn::MechanismConfig& cfg, const std::string& m) {
  if (m == "auto") {
    cfg.m_auto = true;
  } else {
    cfg.m_auto = false;
    cfg.m = dpgcn::detail::parse_int_field("m", m);
  }
}

dpgcn::MechanismConfig to_mechanism_config(const CLI::App* sub, const MechOpts& mo) {
  dpgcn::MechanismConfig cfg;
  cfg.epsilon = mo.eps;
  cfg.delta = mo.delta;
  cfg.ps = mo.ps;
  apply_m_string(cfg, mo.m);
  cfg.m_cap = mo.m_cap;
  cfg.seed = mo.seed;
  cfg.threads = mo.threads;
  cfg.vote_mode = dpgcn::parse_vote_mode(mo.vote_mode);
  if (!mo.config_path.empty()) {
    cfg = dpgcn::mechanism_config_from_kv(dpgcn::parse_kv_file(mo.config_path), cfg);
  }
  if (sub->count("--eps")) cfg.epsilon = mo.eps;
  if (sub->count("--delta")) cfg.delta = mo.delta;
  if (sub->count("--ps")) cfg.ps = mo.ps;
  if (sub->count("--m")) apply_m_string(cfg, mo.m);
  if (sub->count("--m-cap")) cfg.m_cap = mo.m_cap;
  if (sub->count("--seed")) cfg.seed = mo.seed;
  if (sub->count("--threads")) cfg.threads = mo.threads;
  if (sub->count("--vote-mode")) cfg.vote_mode = dpgcn::parse_vote_mode(mo.vote_mode);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"subsampling-stability DP release of one-layer GCN label vectors"};
  app.require_subcommand(1);
  int exit_code = 0;

  // gen: SBM -> edge-list + feature files.
  auto* gen = app.add_subcommand("gen", "generate an SBM graph and planted feature file");
  auto gen_in = std::make_shared<InputOpts>();
  auto gen_seed = std::make_shared<std::uint64_t>(0);
  auto gen_graph_out = std::make_shared<std::string>("graph.edges");
  auto gen_features_out = std::make_shared<std::string>("graph.features");
  gen->add_option("--n", gen_in->n, "node count, even");
  gen->add_option("--p-in", gen_in->p_in, "within-community edge probability");
  gen->add_option("--p-out", gen_in->p_out, "between-community edge probability");
  gen->add_option("--seed", *gen_seed, "root RNG seed");
  gen->add_option("--graph-out", *gen_graph_out, "edge-list output path");
  gen->add_option("--features-out", *gen_features_out, "feature-vector output path");
  gen->callback([gen_in, gen_seed, gen_graph_out, gen_features_out]() {
    dpgcn::SbmSample s =
        dpgcn::generate_sbm({gen_in->n, gen_in->p_in, gen_in->p_out}, *gen_seed);
    const dpgcn::FeatureVector x = dpgcn::planted_feature(s.labels);
    dpgcn::write_edge_list(s.graph, *gen_graph_out);
    dpgcn::write_feature_vector(x, *gen_features_out);
    emit(json{{"n", s.graph.node_count()},
              {"edge_count", s.graph.edge_count()},
              {"seed", *gen_seed},
              {"graph", *gen_graph_out},
              {"features", *gen_features_out}},
         "");
  });

  // run: one mechanism invocation.
  auto* run = app.add_subcommand("run", "run the release mechanism once");
  auto run_in = std::make_shared<InputOpts>();
  auto run_model = std::make_shared<ModelOpts>();
  auto run_mech = std::make_shared<MechOpts>();
  auto run_out = std::make_shared<std::string>();
  add_input_options(run, *run_in);
  add_model_options(run, *run_model);
  add_mech_options(run, *run_mech);
  run->add_option("--out", *run_out, "write the outcome JSON here instead of stdout");
  run->callback([run, run_in, run_model, run_mech, run_out]() {
    const dpgcn::MechanismConfig cfg = to_mechanism_config(run, *run_mech);
    const dpgcn::GcnModel model = to_model(run, *run_model, run_mech->config_path);
    const LoadedInputs li = load_inputs(*run_in, cfg.seed);
    const dpgcn::MechanismOutcome outcome =
        dpgcn::run_mechanism(li.graph, li.features, model, cfg);
    emit(json(outcome), *run_out);
  });

  // bound / feasible: theory report (f grid, ps_star, interval, m).
  for (const char* name : {"bound", "feasible"}) {
    auto* sub = app.add_subcommand(
        name, std::string(name) == "bound"
                  ? "evaluate the misclassification bound on a ps grid"
                  : "solve for the feasible subsampling interval");
    auto t_in = std::make_shared<InputOpts>();
    auto t_model = std::make_shared<ModelOpts>();
    auto t_mech = std::make_shared<MechOpts>();
    auto t_eta = std::make_shared<double>(0.25);
    auto t_out = std::make_shared<std::string>();
    add_input_options(sub, *t_in);
    add_model_options(sub, *t_model);
    add_mech_options(sub, *t_mech);
    sub->add_option("--eta", *t_eta, "failure probability for the bound");
    sub->add_option("--out", *t_out, "write the report JSON here instead of stdout");
    sub->callback([sub, t_in, t_model, t_mech, t_eta, t_out]() {
      const dpgcn::MechanismConfig cfg = to_mechanism_config(sub, *t_mech);
      const dpgcn::GcnModel model = to_model(sub, *t_model, t_mech->config_path);
      const LoadedInputs li = load_inputs(*t_in, cfg.seed);
      const dpgcn::BoundInputs in = dpgcn::bound_inputs_from(li.graph, li.features, model);
      const dpgcn::TheoryReport rep =
          dpgcn::build_theory_report(in, cfg.epsilon, cfg.delta, *t_eta,
                                     dpgcn::default_ps_grid(), cfg.ps, cfg.m_cap);
      emit(json(rep), *t_out);
    });
  }

  // verify: Monte Carlo checks of the proved inequalities.
  auto* verify = app.add_subcommand("verify", "Monte Carlo verification of a bound");
  auto v_which = std::make_shared<std::string>();
  auto v_in = std::make_shared<InputOpts>();
  auto v_model = std::make_shared<ModelOpts>();
  auto v_mech = std::make_shared<MechOpts>();
  auto v_eta = std::make_shared<double>(0.25);
  auto v_trials = std::make_shared<long long>(2000);
  auto v_repeats = std::make_shared<long long>(200);
  auto v_released_only = std::make_shared<bool>(false);
  auto v_out = std::make_shared<std::string>();
  verify->add_option("which", *v_which, "bernstein|theorem1|theorem2")
      ->required()
      ->check(CLI::IsMember({"bernstein", "theorem1", "theorem2"}));
  add_input_options(verify, *v_in);
  add_model_options(verify, *v_model);
  add_mech_options(verify, *v_mech);
  verify->add_option("--eta", *v_eta, "failure probability under test");
  verify->add_option("--trials", *v_trials, "subsample trials (bernstein, theorem1)");
  verify->add_option("--repeats", *v_repeats, "full-mechanism repeats (theorem2)");
  verify->add_flag("--released-only", *v_released_only,
                   "condition the theorem2 check on released outcomes");
  verify->add_option("--out", *v_out, "write the report JSON here instead of stdout");
  verify->callback([verify, v_which, v_in, v_model, v_mech, v_eta, v_trials, v_repeats,
                    v_released_only, v_out, &exit_code]() {
    const dpgcn::MechanismConfig cfg = to_mechanism_config(verify, *v_mech);
    const dpgcn::GcnModel model = to_model(verify, *v_model, v_mech->config_path);
    const LoadedInputs li = load_inputs(*v_in, cfg.seed);
    bool pass = false;
    if (*v_which == "bernstein") {
      const dpgcn::BernsteinReport rep =
          dpgcn::verify_bernstein(li.graph, cfg.ps, *v_trials, *v_eta, cfg.seed);
      emit(json(rep), *v_out);
      pass = rep.pass;
    } else if (*v_which == "theorem1") {
      const dpgcn::Theorem1Report rep = dpgcn::verify_theorem1(
          li.graph, li.features, model, cfg.ps, *v_eta, *v_trials, cfg.seed);
      emit(json(rep), *v_out);
      pass = rep.pass;
    } else {
      const dpgcn::Theorem2Report rep =
          dpgcn::verify_theorem2(li.graph, li.features, model, cfg, *v_eta, *v_repeats,
                                 cfg.seed, *v_released_only);
      emit(json(rep), *v_out);
      pass = rep.pass;
    }
    if (!pass) {
      std::cerr << "verification failed: empirical violation frequency above allowance\n";
      exit_code = 2;
    }
  });

  // audit: empirical privacy comparison on a neighboring pair.
  auto* audit = app.add_subcommand("audit", "empirical privacy audit on a neighboring pair");
  auto a_in = std::make_shared<InputOpts>();
  auto a_model = std::make_shared<ModelOpts>();
  auto a_mech = std::make_shared<MechOpts>();
  auto a_trials = std::make_shared<long long>(10000);
  auto a_edge = std::make_shared<std::vector<int>>(std::vector<int>{0, 1});
  auto a_out = std::make_shared<std::string>();
  add_input_options(audit, *a_in);
  add_model_options(audit, *a_model);
  add_mech_options(audit, *a_mech);
  audit->add_option("--trials", *a_trials, "mechanism runs per graph");
  audit->add_option("--edge", *a_edge, "the edge toggled to form the neighbor")->expected(2);
  audit->add_option("--out", *a_out, "write the report JSON here instead of stdout");
  audit->callback([audit, a_in, a_model, a_mech, a_trials, a_edge, a_out]() {
    const dpgcn::MechanismConfig cfg = to_mechanism_config(audit, *a_mech);
    const dpgcn::GcnModel model = to_model(audit, *a_model, a_mech->config_path);
    const LoadedInputs li = load_inputs(*a_in, cfg.seed);
    const dpgcn::AuditReport rep = dpgcn::audit_dp(li.graph, li.features, model, cfg,
                                                   *a_trials, (*a_edge)[0], (*a_edge)[1]);
    emit(json(rep), *a_out);
  });

  // experiment: declarative end-to-end run.
  auto* experiment = app.add_subcommand("experiment", "run a declarative experiment file");
  auto e_config = std::make_shared<std::string>();
  auto e_out = std::make_shared<std::string>("experiment");
  experiment->add_option("--config", *e_config, "experiment config file")->required();
  experiment->add_option("--out", *e_out, "output prefix for <prefix>.csv and <prefix>.json");
  experiment->callback([e_config, e_out]() {
    const dpgcn::ExperimentConfig cfg = dpgcn::parse_experiment_config(*e_config);
    const dpgcn::ExperimentResult res = dpgcn::run_experiment(cfg);
    dpgcn::write_experiment_files(res, *e_out + ".csv", *e_out + ".json");
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const dpgcn::invariant_error& e) {
    std::cerr << "invariant violated: " << e.what() << "\n";
    return 2;
  } catch (const dpgcn::validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return exit_code;
}
