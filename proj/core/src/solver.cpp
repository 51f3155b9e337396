#include "apg/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace apg {
namespace {

double backup(const TabularMdp& mdp, const std::vector<double>& values,
              std::uint64_t s, ActionId a, double gamma) {
  double q = 0.0;
  for (const auto& o : mdp.outcomes(s, a)) {
    const double future = mdp.terminal(o.next) ? 0.0 : values[o.next];
    q += o.prob * (o.reward + gamma * future);
  }
  return q;
}

void check_options(const ValueIterationOptions& opts) {
  if (!(opts.gamma > 0.0 && opts.gamma <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "gamma must lie in (0, 1], got " + std::to_string(opts.gamma));
  }
  if (!(opts.tol > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "tol must be positive");
  }
}

}  // namespace

std::vector<double> solve_values(const TabularMdp& mdp,
                                 const ValueIterationOptions& opts) {
  check_options(opts);
  const std::uint64_t n = mdp.num_states();
  std::vector<double> values(n, 0.0);
  for (std::int64_t sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    double delta = 0.0;
    for (std::uint64_t k = n; k-- > 0;) {
      if (mdp.terminal(k)) continue;
      double best = -std::numeric_limits<double>::infinity();
      for (ActionId a = 1; a <= mdp.num_actions(); ++a) {
        best = std::max(best, backup(mdp, values, k, a, opts.gamma));
      }
      delta = std::max(delta, std::abs(best - values[k]));
      values[k] = best;
    }
    if (!std::isfinite(delta)) break;
    if (delta < opts.tol) return values;
  }
  throw Error(ErrorCode::kDivergence,
              "value iteration did not converge within " +
                  std::to_string(opts.max_sweeps) + " sweeps");
}

TabularValueFunction value_iteration(const TabularMdp& mdp,
                                     const ValueIterationOptions& opts) {
  const auto values = solve_values(mdp, opts);
  TabularValueFunction out;
  for (std::uint64_t k = 0; k < values.size(); ++k) {
    out.set(mdp.state(k), values[k]);
  }
  return out;
}

double bellman_residual(const TabularMdp& mdp,
                        const std::vector<double>& values, double gamma) {
  double worst = 0.0;
  for (std::uint64_t k = 0; k < mdp.num_states(); ++k) {
    if (mdp.terminal(k)) {
      worst = std::max(worst, std::abs(values[k]));
      continue;
    }
    double best = -std::numeric_limits<double>::infinity();
    for (ActionId a = 1; a <= mdp.num_actions(); ++a) {
      best = std::max(best, backup(mdp, values, k, a, gamma));
    }
    worst = std::max(worst, std::abs(best - values[k]));
  }
  return worst;
}

QTable::QTable(int num_features, int num_actions)
    : num_features_(num_features),
      num_actions_(num_actions),
      q_((std::size_t{1} << num_features) * num_actions, 0.0),
      defined_(std::size_t{1} << num_features, 0) {}

double QTable::at(const State& s, ActionId a) const {
  if (s.width() != num_features_ || a < 1 || a > num_actions_ ||
      !defined(s.code())) {
    throw Error(ErrorCode::kPrecondition,
                "no Q value for (" + s.to_string() + ", a_" +
                    std::to_string(a) + ")");
  }
  return at(s.code(), a);
}

QTable q_values(const TabularMdp& mdp, const std::vector<double>& values,
                double gamma) {
  QTable q(mdp.num_features(), mdp.num_actions());
  for (std::uint64_t k = 0; k < mdp.num_states(); ++k) {
    if (mdp.terminal(k)) continue;
    for (ActionId a = 1; a <= mdp.num_actions(); ++a) {
      q.set(k, a, backup(mdp, values, k, a, gamma));
    }
  }
  return q;
}

QTable q_values(const TabularMdp& mdp, const TabularValueFunction& values,
                double gamma) {
  std::vector<double> dense(mdp.num_states(), 0.0);
  for (std::uint64_t k = 0; k < mdp.num_states(); ++k) {
    if (!mdp.terminal(k)) dense[k] = values.at(mdp.state(k));
  }
  return q_values(mdp, dense, gamma);
}

std::vector<ActionId> greedy_actions(const QTable& q) {
  std::vector<ActionId> out(q.num_states(), 0);
  for (std::uint64_t k = 0; k < q.num_states(); ++k) {
    if (!q.defined(k)) continue;
    ActionId best = 1;
    for (ActionId a = 2; a <= q.num_actions(); ++a) {
      if (q.at(k, a) > q.at(k, best) + kTieTolerance) best = a;
    }
    out[k] = best;
  }
  return out;
}

TabularPolicy greedy_policy(const QTable& q) {
  const auto actions = greedy_actions(q);
  TabularPolicy policy;
  for (std::uint64_t k = 0; k < actions.size(); ++k) {
    if (actions[k] != 0) {
      policy.set(State::from_code(k, q.num_features()), actions[k]);
    }
  }
  return policy;
}

double min_action_gap(const QTable& q) {
  if (q.num_actions() < 2) {
    throw Error(ErrorCode::kPrecondition,
                "action gap needs at least two actions");
  }
  double gap = std::numeric_limits<double>::infinity();
  for (std::uint64_t k = 0; k < q.num_states(); ++k) {
    if (!q.defined(k)) continue;
    double best = -std::numeric_limits<double>::infinity();
    for (ActionId a = 1; a <= q.num_actions(); ++a) {
      best = std::max(best, q.at(k, a));
    }
    double second = -std::numeric_limits<double>::infinity();
    for (ActionId a = 1; a <= q.num_actions(); ++a) {
      const double v = q.at(k, a);
      if (v < best - kTieTolerance) second = std::max(second, v);
    }
    if (std::isfinite(second)) gap = std::min(gap, best - second);
  }
  if (!std::isfinite(gap)) {
    throw Error(ErrorCode::kUndefinedGap,
                "every state has all actions tied; supply epsilon explicitly");
  }
  return gap;
}

TabularPolicy Solution::policy() const {
  TabularPolicy out;
  for (std::uint64_t k = 0; k < actions.size(); ++k) {
    if (actions[k] != 0) out.set(State::from_code(k, num_features), actions[k]);
  }
  return out;
}

TabularValueFunction Solution::value_function() const {
  TabularValueFunction out;
  for (std::uint64_t k = 0; k < values.size(); ++k) {
    out.set(State::from_code(k, num_features), values[k]);
  }
  return out;
}

Solution solve(const TabularMdp& mdp, const ValueIterationOptions& opts) {
  Solution sol;
  sol.gamma = opts.gamma;
  sol.num_features = mdp.num_features();
  sol.values = solve_values(mdp, opts);
  sol.actions = greedy_actions(q_values(mdp, sol.values, opts.gamma));
  return sol;
}

}  // namespace apg
