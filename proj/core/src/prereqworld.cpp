#include "apg/prereqworld.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "apg/solver.hpp"

namespace apg {

std::size_t PrereqWorldDomain::edge_count() const {
  std::size_t n = 0;
  for (const auto& c : prereqs) n += c.size();
  return n;
}

PrereqWorldDomain example_domain(double rho) {
  PrereqWorldDomain dom;
  dom.m = 4;
  dom.rho = rho;
  dom.goal = 1;
  dom.prereqs = {{3, 4}, {3, 4}, {4}, {}};
  return dom;
}

void validate_domain(const PrereqWorldDomain& dom) {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorCode::kInvalidArgument, "invalid domain: " + msg);
  };
  if (dom.m < 1 || dom.m > 30) fail("m must lie in 1..30");
  if (!(dom.rho >= 0.0 && dom.rho <= 1.0)) fail("rho must lie in [0, 1]");
  if (dom.goal != 1) fail("goal item must be 1");
  if (dom.prereqs.size() != static_cast<std::size_t>(dom.m)) {
    fail("expected " + std::to_string(dom.m) + " prerequisite sets");
  }
  for (int j = 1; j <= dom.m; ++j) {
    const auto& c = dom.prereqs[j - 1];
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (c[i] <= j || c[i] > dom.m) {
        fail("prerequisite " + std::to_string(c[i]) + " of item " +
             std::to_string(j) + " must lie in (" + std::to_string(j) + ", " +
             std::to_string(dom.m) + "]");
      }
      if (i > 0 && c[i] <= c[i - 1]) {
        fail("prerequisites of item " + std::to_string(j) +
             " must be sorted and distinct");
      }
    }
  }
}

double OutcomeDistribution::probability(const State& s) const {
  for (const auto& [state, p] : entries) {
    if (state == s) return p;
  }
  return 0.0;
}

double OutcomeDistribution::total() const {
  double sum = 0.0;
  for (const auto& e : entries) sum += e.second;
  return sum;
}

OutcomeDistribution transition_distribution(const PrereqWorldDomain& dom,
                                            const State& s, ActionId a) {
  if (s.width() != dom.m) {
    throw Error(ErrorCode::kPrecondition, "state width does not match m");
  }
  if (dom.is_terminal(s)) {
    throw Error(ErrorCode::kPrecondition,
                "state " + s.to_string() + " is terminal");
  }
  if (a < 1 || a > dom.m) {
    throw Error(ErrorCode::kPrecondition,
                "action " + std::to_string(a) + " outside 1.." +
                    std::to_string(dom.m));
  }
  OutcomeDistribution dist;
  const auto& pre = dom.prerequisites(a);
  const bool blocked =
      s[a] == 1 ||
      std::any_of(pre.begin(), pre.end(), [&](int k) { return s[k] == 0; });
  if (blocked) {
    dist.entries.emplace_back(s, 1.0);
    return dist;
  }
  const State made = s.with(a, 1);
  const std::size_t n = pre.size();
  for (std::uint64_t kept = 0; kept < (std::uint64_t{1} << n); ++kept) {
    State next = made;
    double p = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if ((kept >> i) & 1u) {
        p *= dom.rho;
      } else {
        p *= 1.0 - dom.rho;
        next = next.with(pre[i], 0);
      }
    }
    if (p > 0.0) dist.entries.emplace_back(next, p);
  }
  std::sort(dist.entries.begin(), dist.entries.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  // merge duplicates
  std::vector<std::pair<State, double>> merged;
  for (const auto& e : dist.entries) {
    if (!merged.empty() && merged.back().first == e.first) {
      merged.back().second += e.second;
    } else {
      merged.push_back(e);
    }
  }
  dist.entries = std::move(merged);
  return dist;
}

double reward(const PrereqWorldDomain&, const State&) { return -1.0; }

TransitionTuple sample_step(const PrereqWorldDomain& dom, const State& s,
                            ActionId a, Rng& rng) {
  const auto dist = transition_distribution(dom, s, a);
  State next = dist.entries.back().first;
  double u = rng.uniform01();
  for (const auto& [state, p] : dist.entries) {
    if (u < p) {
      next = state;
      break;
    }
    u -= p;
  }
  return TransitionTuple{s, a, next, reward(dom, next), dom.is_terminal(next)};
}

State sample_start_state(const PrereqWorldDomain& dom, Rng& rng) {
  const std::uint64_t top = (std::uint64_t{1} << dom.m) - 1;
  while (true) {
    const State s = State::from_code(rng.uniform_int(0, top), dom.m);
    if (!dom.is_terminal(s)) return s;
  }
}

TabularMdp to_tabular(const PrereqWorldDomain& dom) {
  validate_domain(dom);
  TabularMdp mdp(dom.m, dom.m);
  std::vector<TabularMdp::Outcome> out;
  for (std::uint64_t k = 0; k < mdp.num_states(); ++k) {
    const State s = mdp.state(k);
    mdp.set_terminal(k, dom.is_terminal(s));
  }
  for (std::uint64_t k = 0; k < mdp.num_states(); ++k) {
    if (mdp.terminal(k)) continue;
    const State s = mdp.state(k);
    for (ActionId a = 1; a <= dom.m; ++a) {
      out.clear();
      for (const auto& [next, p] : transition_distribution(dom, s, a).entries) {
        out.push_back({next.code(), p, reward(dom, next)});
      }
      mdp.add_outcomes(k, a, out);
    }
  }
  mdp.finalize();
  return mdp;
}

std::vector<double> steps_to_goal(const TabularMdp& mdp,
                                  std::span<const ActionId> actions,
                                  std::int64_t max_sweeps) {
  const std::uint64_t n = mdp.num_states();
  std::vector<double> steps(n, 0.0);
  for (std::uint64_t k = 0; k < n; ++k) {
    if (mdp.terminal(k)) continue;
    const ActionId a = actions[k];
    if (a < 1 || a > mdp.num_actions()) {
      throw Error(ErrorCode::kMissingPolicy,
                  "policy undefined at state " + mdp.state(k).to_string());
    }
    const auto out = mdp.outcomes(k, a);
    if (out.size() == 1 && out[0].next == k) {
      throw Error(ErrorCode::kDivergence,
                  "policy is not proper: a_" + std::to_string(a) +
                      " has no effect in " + mdp.state(k).to_string());
    }
  }
  for (std::int64_t sweep = 0; sweep < max_sweeps; ++sweep) {
    double delta = 0.0;
    for (std::uint64_t k = n; k-- > 0;) {
      if (mdp.terminal(k)) continue;
      double e = 1.0;
      for (const auto& o : mdp.outcomes(k, actions[k])) {
        if (!mdp.terminal(o.next)) e += o.prob * steps[o.next];
      }
      delta = std::max(delta, std::abs(e - steps[k]));
      steps[k] = e;
    }
    if (delta < 1e-12 * std::max(1.0, static_cast<double>(n))) return steps;
  }
  throw Error(ErrorCode::kDivergence,
              "expected steps did not converge; policy is not proper");
}

namespace {

std::vector<ActionId> dense_actions(const PrereqWorldDomain& dom,
                                    const TabularMdp& mdp,
                                    const TabularPolicy& policy) {
  std::vector<ActionId> actions(mdp.num_states(), 0);
  for (std::uint64_t k = 0; k < mdp.num_states(); ++k) {
    if (!mdp.terminal(k)) actions[k] = policy.at(mdp.state(k));
  }
  (void)dom;
  return actions;
}

double mean_non_terminal(const TabularMdp& mdp, const std::vector<double>& v) {
  double sum = 0.0;
  std::uint64_t count = 0;
  for (std::uint64_t k = 0; k < mdp.num_states(); ++k) {
    if (mdp.terminal(k)) continue;
    sum += v[k];
    ++count;
  }
  return sum / static_cast<double>(count);
}

}  // namespace

double expected_steps(const PrereqWorldDomain& dom,
                      const TabularPolicy& policy) {
  const auto mdp = to_tabular(dom);
  const auto steps = steps_to_goal(mdp, dense_actions(dom, mdp, policy));
  return mean_non_terminal(mdp, steps);
}

double expected_steps(const PrereqWorldDomain& dom, const TabularPolicy& policy,
                      const State& start) {
  const auto mdp = to_tabular(dom);
  const auto steps = steps_to_goal(mdp, dense_actions(dom, mdp, policy));
  return steps[start.code()];
}

PrereqWorldDomain generate_instance(int m, double rho, Rng& rng,
                                    const GenerateOptions& opts) {
  if (m < 2) {
    throw Error(ErrorCode::kInvalidArgument, "generate_instance needs m >= 2");
  }
  const double target = opts.target_len.value_or(2.0 * m);
  const double window = opts.tolerance * target;
  const int max_attempts = opts.max_attempts.value_or(50 * m);
  const std::size_t max_edges = static_cast<std::size_t>(m) * (m - 1) / 2;

  PrereqWorldDomain dom;
  dom.m = m;
  dom.rho = rho;
  dom.goal = 1;
  dom.prereqs.assign(m, {});
  validate_domain(dom);

  auto length = [&]() {
    const auto mdp = to_tabular(dom);
    const auto sol = solve(mdp);
    return mean_non_terminal(mdp, steps_to_goal(mdp, sol.actions));
  };

  double current = length();
  int failures = 0;
  while (std::abs(current - target) > window) {
    if (failures >= max_attempts || dom.edge_count() == max_edges) {
      throw Error(ErrorCode::kGenerationBudget,
                  "could not reach expected length " + std::to_string(target) +
                      " +/- " + std::to_string(window) + " for m=" +
                      std::to_string(m) + " (at " + std::to_string(current) +
                      ")");
    }
    if (current > target + window) {
      // Only reachable if the empty graph already overshoots.
      ++failures;
      continue;
    }
    int j = 0;
    int k = 0;
    do {
      j = static_cast<int>(rng.uniform_int(1, m - 1));
      k = static_cast<int>(rng.uniform_int(j + 1, m));
    } while (std::binary_search(dom.prereqs[j - 1].begin(),
                                dom.prereqs[j - 1].end(), k));
    auto& c = dom.prereqs[j - 1];
    c.insert(std::upper_bound(c.begin(), c.end(), k), k);
    const double next = length();
    if (next > target + window) {
      c.erase(std::find(c.begin(), c.end(), k));
      ++failures;
    } else {
      current = next;
    }
  }
  return dom;
}

}  // namespace apg
