#pragma once

// Experiment harness over generated PrereqWorld instances: transition
// sampling, reference relevant-feature sets, exact n-hop action
// distributions, and the generalization / n-hop / size sweeps.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "apg/apg.hpp"
#include "apg/prereqworld.hpp"
#include "apg/solver.hpp"

namespace apg {

enum class EpsilonMode { kGap, kExplicit };

struct ExperimentConfig {
  int m = 12;
  double rho = 0.0;
  int num_instances = 10;
  int num_evals = 200;
  // Generalization: coverage levels. Other experiments: fraction of the
  // non-terminal state count used as the trajectory tuple budget.
  std::vector<double> coverage = {0.1, 0.2, 0.3, 0.4, 0.5,
                                  0.6, 0.7, 0.8, 0.9, 1.0};
  double sample_fraction = 0.5;
  int horizon = 10;
  std::uint64_t seed = 1;
  EpsilonMode epsilon_mode = EpsilonMode::kExplicit;
  double epsilon = 1.0;
  // Size experiment range.
  int m_min = 7;
  int m_max = 14;
  int threads = 0;  // 0 = hardware concurrency

  // Throws kInvalidArgument.
  void validate() const;
  // m=15, 100 instances, 1000 evaluations.
  static ExperimentConfig full_scale(ExperimentConfig base);
};

// One generated instance with its exact optimal solution.
struct SolvedInstance {
  PrereqWorldDomain domain;
  TabularMdp mdp;
  Solution solution;
  TabularPolicy policy;
  double epsilon = 0.0;

  double value(const State& s) const { return solution.values[s.code()]; }
};

// Fresh generation attempts per instance before kGenerationBudget escapes.
inline constexpr int kGenerationRestarts = 20;

// Instance `index` of a seeded trial. Restarts generation on fresh streams
// up to kGenerationRestarts times.
PrereqWorldDomain generate_domain(int m, double rho, std::uint64_t seed,
                                  std::uint64_t index);
// The same instance, solved.
SolvedInstance make_instance(int m, double rho, std::uint64_t seed,
                             std::uint64_t index, const ExperimentConfig& cfg);
SolvedInstance solve_instance(PrereqWorldDomain dom, EpsilonMode mode,
                              double explicit_epsilon);

// ceil(coverage * |non-terminal|) distinct non-terminal sources, uniformly
// chosen, one on-policy sampled tuple each.
std::vector<TransitionTuple> sample_transition_set(
    const PrereqWorldDomain& dom, const TabularPolicy& policy, double coverage,
    Rng& rng);

// Concatenated on-policy episodes from uniform non-terminal starts,
// truncated at exactly max_tuples. Episodes longer than `episode_cap` are cut
// (with a warning on stderr) and a new episode starts.
std::vector<TransitionTuple> sample_trajectories(
    const PrereqWorldDomain& dom, const TabularPolicy& policy,
    std::size_t max_tuples, Rng& rng, std::size_t episode_cap = 100'000);

// Relevant features per non-terminal state from the reference graph built on
// one sampled tuple per non-terminal state (coverage 1), g = exact V.
std::map<State, std::vector<FeatureId>> ground_truth_relevant_features(
    const PrereqWorldDomain& dom, const TabularPolicy& policy,
    const TabularValueFunction& values, double epsilon, Rng& rng);

// Exact distribution of pi(s_n) on the grounded chain.
ActionDistribution true_action_distribution(const TabularMdp& mdp,
                                            std::span<const ActionId> actions,
                                            const State& s0, int n);
ActionDistribution true_action_distribution(const PrereqWorldDomain& dom,
                                            const TabularPolicy& policy,
                                            const State& s0, int n);

double total_variation(const ActionDistribution& a, const ActionDistribution& b);

struct GeneralizationRow {
  double coverage = 0.0;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // sample std across instances
  int instances = 0;
  double mean_nodes = 0.0;
  int unclassified = 0;  // eval states whose action had no node
};

struct NhopRow {
  int n = 0;
  double agreement = 0.0;
  double std_agreement = 0.0;
  double mean_tv = 0.0;
  int instances = 0;
};

struct SizeRow {
  int m = 0;
  std::uint64_t states = 0;
  double median_nodes = 0.0;
  double mean_nodes = 0.0;
  double std_nodes = 0.0;
  int instances = 0;
};

std::vector<GeneralizationRow> run_generalization(const ExperimentConfig& cfg);
std::vector<NhopRow> run_nhop(const ExperimentConfig& cfg);
std::vector<SizeRow> run_size(const ExperimentConfig& cfg);

std::string to_csv(const std::vector<GeneralizationRow>& rows,
                   const ExperimentConfig& cfg);
std::string to_csv(const std::vector<NhopRow>& rows, const ExperimentConfig& cfg);
std::string to_csv(const std::vector<SizeRow>& rows, const ExperimentConfig& cfg);

}  // namespace apg
