#pragma once

// Tabular value iteration, Q-value extraction, greedy policies and the
// action-gap rule used to pick the APG stopping threshold.

#include <cstdint>
#include <vector>

#include "apg/mdp.hpp"
#include "apg/tabular_mdp.hpp"

namespace apg {

struct ValueIterationOptions {
  double gamma = 1.0;
  double tol = 1e-9;
  std::int64_t max_sweeps = 1'000'000;
};

// Q values within this distance are treated as tied.
inline constexpr double kTieTolerance = 1e-9;

// Dense values indexed by state code; terminal entries are 0.
// Sweeps are in-place (Gauss-Seidel) in descending code order and stop once
// a sweep changes no value by tol or more. Throws kDivergence past
// max_sweeps and kInvalidArgument for gamma outside (0, 1] or tol <= 0.
std::vector<double> solve_values(const TabularMdp& mdp,
                                 const ValueIterationOptions& opts = {});

TabularValueFunction value_iteration(const TabularMdp& mdp,
                                     const ValueIterationOptions& opts = {});

// Max-norm Bellman optimality residual of `values`.
double bellman_residual(const TabularMdp& mdp, const std::vector<double>& values,
                        double gamma);

class QTable {
 public:
  QTable(int num_features, int num_actions);

  int num_features() const { return num_features_; }
  int num_actions() const { return num_actions_; }
  std::uint64_t num_states() const { return std::uint64_t{1} << num_features_; }

  bool defined(std::uint64_t s) const { return defined_[s] != 0; }
  double at(std::uint64_t s, ActionId a) const {
    return q_[static_cast<std::size_t>(s) * num_actions_ + (a - 1)];
  }
  // Throws kPrecondition for terminal/undefined rows.
  double at(const State& s, ActionId a) const;

  void set(std::uint64_t s, ActionId a, double v) {
    defined_[s] = 1;
    q_[static_cast<std::size_t>(s) * num_actions_ + (a - 1)] = v;
  }

 private:
  int num_features_;
  int num_actions_;
  std::vector<double> q_;
  std::vector<std::uint8_t> defined_;
};

// Q(s,a) = sum_{s'} P(s'|s,a) (R + gamma V(s') [s' non-terminal]) for every
// non-terminal s.
QTable q_values(const TabularMdp& mdp, const std::vector<double>& values,
                double gamma);
QTable q_values(const TabularMdp& mdp, const TabularValueFunction& values,
                double gamma);

// argmax_a Q(s,a), lowest action id among ties. Index = state code; 0 for
// states without a Q row.
std::vector<ActionId> greedy_actions(const QTable& q);
TabularPolicy greedy_policy(const QTable& q);

// min over states of (best Q - best strictly-worse Q). Rows where every
// action ties are skipped; throws kUndefinedGap if all rows are skipped and
// kPrecondition if there are fewer than two actions.
double min_action_gap(const QTable& q);

// Convenience bundle for enumerable domains.
struct Solution {
  double gamma = 1.0;
  std::vector<double> values;       // by state code
  std::vector<ActionId> actions;    // by state code, 0 on terminal states
  TabularPolicy policy() const;
  TabularValueFunction value_function() const;
  int num_features = 0;
};

Solution solve(const TabularMdp& mdp, const ValueIterationOptions& opts = {});

}  // namespace apg
