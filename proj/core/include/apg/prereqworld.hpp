#pragma once

// PrereqWorld: m items, item j may require a set C_j of higher-numbered
// items. Producing item j consumes each prerequisite independently with
// probability 1 - rho. Holding the goal item ends the episode.

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "apg/mdp.hpp"
#include "apg/random.hpp"
#include "apg/tabular_mdp.hpp"

namespace apg {

struct PrereqWorldDomain {
  int m = 0;
  double rho = 0.0;
  int goal = 1;
  // prereqs[j - 1] is C_j, sorted ascending.
  std::vector<std::vector<int>> prereqs;

  const std::vector<int>& prerequisites(ActionId item) const {
    return prereqs[item - 1];
  }
  bool is_terminal(const State& s) const { return s[goal] == 1; }
  std::size_t edge_count() const;
};

// The m = 4 deterministic instance: C_1 = C_2 = {3, 4}, C_3 = {4}, C_4 = {}.
PrereqWorldDomain example_domain(double rho = 0.0);

// Throws kInvalidArgument unless m >= 1, rho in [0,1], goal == 1 and every
// member of C_j is in (j, m] without duplicates.
void validate_domain(const PrereqWorldDomain& dom);

struct OutcomeDistribution {
  // Sorted by state code; zero-probability outcomes are dropped.
  std::vector<std::pair<State, double>> entries;

  double probability(const State& s) const;
  double total() const;
};

// Throws kPrecondition for terminal s or a outside 1..m.
OutcomeDistribution transition_distribution(const PrereqWorldDomain& dom,
                                            const State& s, ActionId a);

// Every action costs one step: -1 on every transition, including the one
// that reaches the goal. Terminal states are absorbing with value 0, so
// V(s) = -(expected actions to reach the goal).
double reward(const PrereqWorldDomain& dom, const State& s_next);

TransitionTuple sample_step(const PrereqWorldDomain& dom, const State& s,
                            ActionId a, Rng& rng);

// Uniform over non-terminal states (rejection from uniform bit patterns).
State sample_start_state(const PrereqWorldDomain& dom, Rng& rng);

TabularMdp to_tabular(const PrereqWorldDomain& dom);

// Expected number of actions until absorption, per start state (index =
// state code, 0 for terminal states). `actions` is indexed by state code.
// Throws kDivergence if the policy is not proper.
std::vector<double> steps_to_goal(const TabularMdp& mdp,
                                  std::span<const ActionId> actions,
                                  std::int64_t max_sweeps = 100'000);

// Mean of steps_to_goal over the uniform non-terminal start distribution.
double expected_steps(const PrereqWorldDomain& dom, const TabularPolicy& policy);
double expected_steps(const PrereqWorldDomain& dom, const TabularPolicy& policy,
                      const State& start);

struct GenerateOptions {
  // Defaults to 2m when unset.
  std::optional<double> target_len;
  double tolerance = 0.10;
  // Defaults to 50m when unset.
  std::optional<int> max_attempts;
};

// Adds random prerequisite edges one at a time (item j uniform over 1..m-1,
// then k uniform over j+1..m) until the optimal policy's expected episode
// length lands within tolerance * target of target. An edge that overshoots
// is removed and counts as a failed attempt. Throws kGenerationBudget.
PrereqWorldDomain generate_instance(int m, double rho, Rng& rng,
                                    const GenerateOptions& opts = {});

}  // namespace apg
