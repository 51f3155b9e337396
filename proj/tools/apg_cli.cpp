// apg: command-line pipeline for PrereqWorld domains, policies and
// Abstracted Policy Graphs.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "apg/apg.hpp"
#include "apg/experiments.hpp"
#include "apg/io.hpp"
#include "apg/prereqworld.hpp"
#include "apg/random.hpp"
#include "apg/solver.hpp"

namespace {

using namespace apg;

enum class LogLevel { kQuiet = 0, kError, kInfo, kDebug };

LogLevel log_level() {
  const char* env = std::getenv("APG_LOG");
  if (!env) return LogLevel::kError;
  const std::string v = env;
  if (v == "quiet" || v == "0") return LogLevel::kQuiet;
  if (v == "info" || v == "2") return LogLevel::kInfo;
  if (v == "debug" || v == "3") return LogLevel::kDebug;
  return LogLevel::kError;
}

void log(LogLevel level, const std::string& msg) {
  if (level > log_level()) return;
  static const char* names[] = {"", "error", "info", "debug"};
  std::cerr << "apg: " << names[static_cast<int>(level)] << ": " << msg << "\n";
}

// Collects what the manifest of each artifact needs.
struct Run {
  std::string command;
  std::string started_at = utc_timestamp();
  std::map<std::string, std::string> options;
  std::map<std::string, std::string> inputs;
  std::optional<std::uint64_t> seed;

  std::string input(const std::string& path) {
    auto text = read_text_file(path);
    inputs[path] = sha256_hex(text);
    log(LogLevel::kDebug, "read " + path);
    return text;
  }

  void output(const std::string& path, const std::string& text) const {
    write_text_file(path, text);
    RunManifest m;
    m.command = command;
    std::string canonical;
    for (const auto& [k, v] : options) canonical += k + "=" + v + "\n";
    m.config_digest = sha256_hex(canonical);
    m.seed = seed;
    m.input_digests = inputs;
    m.started_at = started_at;
    m.finished_at = utc_timestamp();
    write_manifest(path, m);
    log(LogLevel::kInfo, "wrote " + path);
  }
};

std::string fmt(double x, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, x);
  return buf;
}

std::string join_args(int argc, char** argv) {
  std::string out;
  for (int i = 0; i < argc; ++i) {
    if (i) out += ' ';
    out += argv[i];
  }
  return out;
}

ScoreFn value_lookup(const PolicyArtifact& artifact) {
  if (artifact.values.size() == 0) {
    throw Error(ErrorCode::kMissingValue, "policy file carries no value table");
  }
  return [&values = artifact.values](const State& s) { return values.at(s); };
}

State parse_state(const std::string& text, int width) {
  const State s = State::from_string(text);
  if (s.width() != width) {
    throw Error(ErrorCode::kWidthMismatch,
                "state '" + text + "' has width " + std::to_string(s.width()) +
                    ", expected " + std::to_string(width));
  }
  return s;
}

std::string features_text(const std::vector<FeatureId>& features) {
  if (features.empty()) return "none";
  std::string out;
  for (auto f : features) {
    if (!out.empty()) out += ' ';
    out += std::to_string(f);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Abstracted Policy Graphs for PrereqWorld policies"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  Run run;
  run.command = join_args(argc, argv);

  // generate-domain
  int gen_m = 0;
  double gen_rho = 0.0;
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  auto* gen = app.add_subcommand("generate-domain", "Generate a random PrereqWorld instance");
  gen->add_option("--m", gen_m, "Item count")->required()->check(CLI::Range(2, 30));
  gen->add_option("--rho", gen_rho, "Keep probability of consumed prerequisites")
      ->check(CLI::Range(0.0, 1.0));
  gen->add_option("--seed", gen_seed, "Random seed");
  gen->add_option("--out", gen_out, "Domain JSON path")->required();

  // solve
  std::string solve_domain, solve_out;
  double solve_gamma = 1.0;
  double solve_tol = 1e-9;
  auto* solve_cmd = app.add_subcommand("solve", "Value iteration and greedy policy");
  solve_cmd->add_option("--domain", solve_domain, "Domain JSON")->required();
  solve_cmd->add_option("--gamma", solve_gamma, "Discount factor in (0, 1]");
  solve_cmd->add_option("--tol", solve_tol, "Bellman residual tolerance");
  solve_cmd->add_option("--out", solve_out, "Policy JSON path")->required();

  // sample
  std::string sample_domain, sample_policy, sample_out;
  std::optional<double> sample_coverage;
  std::optional<std::size_t> sample_tuples;
  std::uint64_t sample_seed = 1;
  auto* sample = app.add_subcommand("sample", "Sample on-policy transition tuples");
  sample->add_option("--domain", sample_domain, "Domain JSON")->required();
  sample->add_option("--policy", sample_policy, "Policy JSON")->required();
  auto* cov_opt = sample->add_option("--coverage", sample_coverage,
                                     "Fraction of non-terminal states used as sources");
  auto* traj_opt = sample->add_option("--trajectories", sample_tuples,
                                      "Tuple budget for concatenated episodes");
  cov_opt->excludes(traj_opt);
  sample->add_option("--seed", sample_seed, "Random seed");
  sample->add_option("--out", sample_out, "Transitions JSON path")->required();

  // build-apg
  std::string build_transitions, build_policy, build_out, build_dot;
  std::optional<double> build_eps;
  bool build_gap = false;
  auto* build = app.add_subcommand("build-apg", "Build an Abstracted Policy Graph");
  build->add_option("--transitions", build_transitions, "Transitions JSON")->required();
  build->add_option("--policy", build_policy, "Policy JSON with value table")->required();
  auto* eps_opt = build->add_option("--epsilon", build_eps, "Importance threshold");
  auto* gap_opt = build->add_flag("--epsilon-from-gap", build_gap,
                                  "Use the policy's minimum action gap as threshold");
  eps_opt->excludes(gap_opt);
  build->add_option("--out", build_out, "APG JSON path")->required();
  build->add_option("--dot", build_dot, "Also write Graphviz DOT here");

  // explain
  std::string explain_apg, explain_policy, explain_state;
  auto* explain = app.add_subcommand("explain", "Relevant features and node summary for a state");
  explain->add_option("--apg", explain_apg, "APG JSON")->required();
  explain->add_option("--policy", explain_policy, "Policy JSON")->required();
  explain->add_option("--state", explain_state, "State bits, feature 1 first")->required();

  // predict
  std::string predict_apg, predict_policy, predict_state;
  int predict_n = 1;
  auto* predict = app.add_subcommand("predict", "Action distribution n steps ahead");
  predict->add_option("--apg", predict_apg, "APG JSON")->required();
  predict->add_option("--policy", predict_policy, "Policy JSON")->required();
  predict->add_option("--state", predict_state, "Start state")->required();
  predict->add_option("--n", predict_n, "Steps ahead")->check(CLI::NonNegativeNumber);

  // export-dot
  std::string dot_apg, dot_out;
  auto* dot = app.add_subcommand("export-dot", "Write an APG as Graphviz DOT");
  dot->add_option("--apg", dot_apg, "APG JSON")->required();
  dot->add_option("--out", dot_out, "DOT path")->required();

  // experiment
  std::string exp_kind, exp_config, exp_out;
  bool exp_full = false;
  std::optional<std::uint64_t> exp_seed;
  std::optional<int> exp_threads;
  auto* exp = app.add_subcommand("experiment", "Run an evaluation sweep and write CSV");
  exp->add_option("kind", exp_kind, "generalization | nhop | size")
      ->required()
      ->check(CLI::IsMember({"generalization", "nhop", "size"}));
  exp->add_option("--config", exp_config, "Config JSON (defaults if omitted)");
  exp->add_option("--out", exp_out, "Results CSV path")->required();
  exp->add_option("--seed", exp_seed, "Override the config seed");
  exp->add_option("--threads", exp_threads, "Worker threads (0 = all cores)");
  exp->add_flag("--full-scale", exp_full, "m=15, 100 instances, 1000 evaluations");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ErrorCode::kInvalidArgument);
  }

  try {
    if (*gen) {
      run.seed = gen_seed;
      run.options = {{"m", std::to_string(gen_m)}, {"rho", fmt(gen_rho, 17)}};
      const auto dom = generate_domain(gen_m, gen_rho, gen_seed, 0);
      run.output(gen_out, domain_to_json(dom));
    } else if (*solve_cmd) {
      const auto dom = domain_from_json(run.input(solve_domain));
      run.options = {{"gamma", fmt(solve_gamma, 17)}, {"tol", fmt(solve_tol, 17)}};
      const auto mdp = to_tabular(dom);
      ValueIterationOptions opts;
      opts.gamma = solve_gamma;
      opts.tol = solve_tol;
      const auto sol = solve(mdp, opts);
      PolicyArtifact artifact;
      artifact.num_features = dom.m;
      artifact.gamma = solve_gamma;
      artifact.policy = sol.policy();
      artifact.values = sol.value_function();
      try {
        artifact.min_action_gap = min_action_gap(q_values(mdp, sol.values, sol.gamma));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kUndefinedGap && e.code() != ErrorCode::kPrecondition) throw;
        log(LogLevel::kInfo, std::string("no action gap: ") + e.what());
      }
      run.output(solve_out, policy_to_json(artifact));
    } else if (*sample) {
      if (!sample_coverage && !sample_tuples) {
        throw Error(ErrorCode::kInvalidArgument,
                    "sample needs --coverage or --trajectories");
      }
      const auto dom = domain_from_json(run.input(sample_domain));
      const auto artifact = policy_from_json(run.input(sample_policy));
      run.seed = sample_seed;
      std::vector<TransitionTuple> tuples;
      if (sample_coverage) {
        run.options = {{"coverage", fmt(*sample_coverage, 17)}};
        Rng rng = Rng::derive(sample_seed, "sample/coverage", 0);
        tuples = sample_transition_set(dom, artifact.policy, *sample_coverage, rng);
      } else {
        run.options = {{"trajectories", std::to_string(*sample_tuples)}};
        Rng rng = Rng::derive(sample_seed, "sample/trajectories", 0);
        tuples = sample_trajectories(dom, artifact.policy, *sample_tuples, rng);
      }
      run.output(sample_out, transitions_to_json(tuples));
    } else if (*build) {
      const auto tuples = transitions_from_json(run.input(build_transitions));
      const auto artifact = policy_from_json(run.input(build_policy));
      double eps = 0.0;
      if (build_gap) {
        if (!artifact.min_action_gap) {
          throw Error(ErrorCode::kUndefinedGap, "policy file has no min_action_gap");
        }
        eps = *artifact.min_action_gap;
      } else if (build_eps) {
        eps = *build_eps;
      } else {
        throw Error(ErrorCode::kInvalidArgument,
                    "build-apg needs --epsilon or --epsilon-from-gap");
      }
      run.options = {{"epsilon", fmt(eps, 17)}};
      DivideStats stats;
      const auto sets = divide_abstract_states(tuples, artifact.policy,
                                               value_lookup(artifact), eps, &stats);
      const auto graph = Apg::build(sets, artifact.policy);
      log(LogLevel::kInfo, std::to_string(stats.filtered_size) + " of " +
                               std::to_string(stats.input_size) + " tuples on policy, " +
                               std::to_string(graph.num_nodes()) + " nodes, " +
                               std::to_string(stats.splits.size()) + " splits");
      run.output(build_out, apg_to_json(graph));
      if (!build_dot.empty()) run.output(build_dot, export_dot(graph));
    } else if (*explain) {
      const auto graph = apg_from_json(run.input(explain_apg));
      const auto artifact = policy_from_json(run.input(explain_policy));
      const State s = parse_state(explain_state, artifact.num_features);
      const auto node = classify_state(graph, s, artifact.policy);
      const auto summary = summarize_node(graph, node);
      std::cout << "state " << s.to_string() << "\n"
                << "node b" << node + 1 << " (action a_" << summary.action << ")\n"
                << "relevant features: "
                << features_text(relevant_features(graph, s, artifact.policy)) << "\n"
                << "summary: " << summary.text << "\n";
    } else if (*predict) {
      const auto graph = apg_from_json(run.input(predict_apg));
      const auto artifact = policy_from_json(run.input(predict_policy));
      const State s = parse_state(predict_state, artifact.num_features);
      const auto dist = predict_action_distribution(graph, s, predict_n, artifact.policy);
      for (const auto& [a, p] : dist.actions) {
        if (p == 0.0) continue;
        std::cout << (a == kTerminated ? std::string("terminated")
                                       : "a_" + std::to_string(a))
                  << " " << fmt(p) << "\n";
      }
    } else if (*dot) {
      const auto graph = apg_from_json(run.input(dot_apg));
      run.output(dot_out, export_dot(graph));
    } else if (*exp) {
      ExperimentConfig cfg;
      if (!exp_config.empty()) cfg = config_from_json(run.input(exp_config));
      if (exp_full) cfg = ExperimentConfig::full_scale(cfg);
      if (exp_seed) cfg.seed = *exp_seed;
      if (exp_threads) cfg.threads = *exp_threads;
      cfg.validate();
      run.seed = cfg.seed;
      run.options = {{"kind", exp_kind}, {"config", config_to_json(cfg)}};
      log(LogLevel::kInfo, "running " + exp_kind + " experiment");
      std::string csv;
      if (exp_kind == "generalization") {
        csv = to_csv(run_generalization(cfg), cfg);
      } else if (exp_kind == "nhop") {
        csv = to_csv(run_nhop(cfg), cfg);
      } else {
        csv = to_csv(run_size(cfg), cfg);
      }
      run.output(exp_out, csv);
    }
  } catch (const Error& e) {
    log(LogLevel::kError, std::string(error_code_name(e.code())) + ": " + e.what());
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    log(LogLevel::kError, e.what());
    return 1;
  }
  return 0;
}
