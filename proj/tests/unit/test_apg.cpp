#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "apg/apg.hpp"
#include "apg/experiments.hpp"
#include "apg/prereqworld.hpp"
#include "apg/solver.hpp"
#include "test_util.hpp"

using namespace apg;
using apg::testing::error_of;

namespace {

State st(const char* s) { return State::from_string(s); }

TransitionTuple tup(const State& s, ActionId a, const State& next, bool terminal = false) {
  return {s, a, next, -1.0, terminal};
}

struct Fixture {
  PrereqWorldDomain dom;
  Solution sol;
  TabularPolicy policy;
  ScoreFn g;
};

Fixture solved(PrereqWorldDomain dom) {
  Fixture fx;
  fx.dom = std::move(dom);
  fx.sol = solve(to_tabular(fx.dom));
  fx.policy = fx.sol.policy();
  fx.g = [values = fx.sol.values](const State& s) { return values[s.code()]; };
  return fx;
}

// One on-policy tuple per non-terminal state.
std::vector<TransitionTuple> exhaustive(const Fixture& fx, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TransitionTuple> out;
  for (std::uint64_t k = 0; k < (std::uint64_t{1} << fx.dom.m); ++k) {
    const State s = State::from_code(k, fx.dom.m);
    if (fx.dom.is_terminal(s)) continue;
    out.push_back(sample_step(fx.dom, s, fx.policy.at(s), rng));
  }
  return out;
}

// Naive signed importance of feature f over a tuple list.
double naive_importance(const std::vector<TransitionTuple>& tuples, FeatureId f,
                        const ScoreFn& g) {
  long double n0 = 0, n1 = 0, s0 = 0, s1 = 0;
  for (const auto& t : tuples) {
    (t.s[f] == 0 ? n0 : n1) += 1;
    (t.s[f] == 0 ? s0 : s1) += g(t.s);
  }
  if (n0 == 0 || n1 == 0) return 0.0;
  const long double n = n0 + n1;
  return static_cast<double>((s0 / n0 - s1 / n1) * std::sqrt(n0 / n * (n1 / n)));
}

bool tuple_less(const TransitionTuple& a, const TransitionTuple& b) {
  if (a.s != b.s) return a.s < b.s;
  if (a.a != b.a) return a.a < b.a;
  return a.s_next < b.s_next;
}

// Abstract states of a hand-built graph: action 1 split on feature 1,
// action 2 unsplit.
std::vector<AbstractState> hand_built() {
  std::vector<AbstractState> sets(3);
  sets[0].id = 0;
  sets[0].split = {1, {{1, 0}}};
  sets[1].id = 1;
  sets[1].split = {1, {{1, 1}}};
  sets[2].id = 2;
  sets[2].split = {2, {}};
  // node 0: four tuples, two land in node 1's states, two in node 2's
  sets[0].tuples = {tup(st("00"), 1, st("10")), tup(st("01"), 1, st("11")),
                    tup(st("00"), 1, st("01")), tup(st("01"), 1, st("00"))};
  // node 1: everything terminates
  sets[1].tuples = {tup(st("10"), 1, st("11"), true), tup(st("11"), 1, st("11"), true)};
  // node 2: back to node 0
  sets[2].tuples = {tup(st("10"), 2, st("00"))};
  return sets;
}

TabularPolicy hand_policy() {
  // 00 and 01 pick action 1 or 2 depending on the second bit of the source
  TabularPolicy pi;
  pi.set(st("00"), 1);
  pi.set(st("01"), 2);
  pi.set(st("10"), 1);
  pi.set(st("11"), 1);
  return pi;
}

}  // namespace

TEST(FilterOnPolicy, KeepsExactlyAgreeingTuples) {
  const auto fx = solved(example_domain());
  const auto on = exhaustive(fx, 1);
  EXPECT_EQ(filter_on_policy(on, fx.policy), on);

  std::vector<TransitionTuple> mixed;
  for (const auto& t : on) {
    mixed.push_back(t);
    const ActionId other = t.a == 1 ? 2 : 1;
    mixed.push_back(sample_step(fx.dom, t.s, other, *std::make_unique<Rng>(3)));
  }
  const auto kept = filter_on_policy(mixed, fx.policy);
  EXPECT_EQ(kept, on);
}

TEST(FilterOnPolicy, ReplayBufferFromAnotherPolicy) {
  const auto fx = solved(generate_domain(7, 0.0, 4, 0));
  Rng rng(10);
  std::vector<TransitionTuple> buffer;
  for (int i = 0; i < 3000; ++i) {
    const State s = sample_start_state(fx.dom, rng);
    const auto a = static_cast<ActionId>(rng.uniform_int(1, fx.dom.m));
    buffer.push_back(sample_step(fx.dom, s, a, rng));
  }
  std::size_t brute = 0;
  for (const auto& t : buffer) brute += fx.sol.actions[t.s.code()] == t.a;
  const auto kept = filter_on_policy(buffer, fx.policy);
  EXPECT_EQ(kept.size(), brute);
  for (const auto& t : kept) EXPECT_EQ(fx.policy.at(t.s), t.a);
}

TEST(FilterOnPolicy, MissingPolicyEntry) {
  TabularPolicy pi;
  const std::vector<TransitionTuple> tuples = {tup(st("00"), 1, st("01"))};
  EXPECT_EQ(error_of([&] { filter_on_policy(tuples, pi); }), ErrorCode::kMissingPolicy);
}

TEST(DivideAbstractStates, ConstantScoreSingleAction) {
  std::vector<TransitionTuple> tuples;
  TabularPolicy pi;
  for (std::uint64_t k = 0; k < 8; ++k) {
    const State s = State::from_code(k, 3);
    pi.set(s, 2);
    tuples.push_back(tup(s, 2, s));
  }
  const auto sets = divide_abstract_states(tuples, pi, [](const State&) { return 1.0; }, 0.5);
  ASSERT_EQ(sets.size(), 1u);
  EXPECT_EQ(sets[0].split.action, 2);
  EXPECT_TRUE(sets[0].split.constraints.empty());
  EXPECT_EQ(sets[0].tuples.size(), 8u);
}

TEST(DivideAbstractStates, Errors) {
  TabularPolicy pi;
  pi.set(st("00"), 1);
  const std::vector<TransitionTuple> off = {tup(st("00"), 2, st("00"))};
  const ScoreFn g = [](const State&) { return 0.0; };
  EXPECT_EQ(error_of([&] { divide_abstract_states(off, pi, g, 1.0); }), ErrorCode::kEmptySet);
  const std::vector<TransitionTuple> on = {tup(st("00"), 1, st("00"))};
  EXPECT_EQ(error_of([&] { divide_abstract_states(on, pi, g, 0.0); }),
            ErrorCode::kInvalidArgument);
}

TEST(DivideAbstractStates, FourItemExhaustive) {
  const auto fx = solved(example_domain());
  const auto sets = divide_abstract_states(exhaustive(fx, 2), fx.policy, fx.g, 1.0);
  // the a_1 class is exactly the states holding items 3 and 4
  std::set<State> a1;
  for (const auto& set : sets) {
    if (set.split.action != 1) continue;
    for (const auto& t : set.tuples) a1.insert(t.s);
  }
  std::set<State> oracle;
  for (std::uint64_t k = 0; k < 8; ++k) {
    const State s = State::from_code(k, 4);
    if (s[3] == 1 && s[4] == 1) oracle.insert(s);
  }
  EXPECT_EQ(a1, oracle);

  const Apg apg = Apg::build(sets, fx.policy);
  for (std::size_t i = 0; i < apg.dimension(); ++i) {
    for (std::size_t j = 0; j < apg.dimension(); ++j) {
      const double p = apg.transition(i, j);
      EXPECT_TRUE(p == 0.0 || std::abs(p - 1.0) < 1e-12) << i << "->" << j << " " << p;
    }
  }
  // 0011 moves straight to the goal
  const auto node = classify_state(apg, st("0011"), fx.policy);
  EXPECT_DOUBLE_EQ(apg.transition(node, apg.terminal_index()), 1.0);
  // the a_1 class is never split, so its node carries no constraints
  EXPECT_TRUE(relevant_features(apg, st("0011"), fx.policy).empty());
}

TEST(DivideAbstractStates, DeterministicEightItemInstanceHasUnitEdges) {
  // instance 0 of seed 1; the acceptance suite covers ten instances
  const auto fx = solved(generate_domain(8, 0.0, 1, 0));
  const auto sets = divide_abstract_states(exhaustive(fx, 3), fx.policy, fx.g, 1.0);
  const Apg apg = Apg::build(sets, fx.policy);
  int non_unit = 0;
  for (double p : apg.matrix()) non_unit += p != 0.0 && std::abs(p - 1.0) > 1e-12;
  RecordProperty("non_unit_edges", non_unit);
  for (std::size_t i = 0; i < apg.dimension(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < apg.dimension(); ++j) row += apg.transition(i, j);
    EXPECT_NEAR(row, 1.0, 1e-9);
  }
}

// Replays the split log with brute-force rescans: the chosen pair is a
// global maximum, both children score exactly zero on the split feature,
// and the replayed partition equals the returned one.
TEST(DivideProperties, SplitLogReplay) {
  for (int i = 0; i < 6; ++i) {
    const double rho = i % 2 ? 0.25 : 0.0;
    const auto fx = solved(generate_domain(7, rho, 17, static_cast<std::uint64_t>(i)));
    Rng rng = Rng::derive(17, "replay", i);
    const auto tuples = sample_transition_set(fx.dom, fx.policy, 0.6, rng);
    const double eps = 1.0;
    DivideStats stats;
    const auto sets = divide_abstract_states(tuples, fx.policy, fx.g, eps, &stats);

    // initial action partition in ascending action order
    std::map<ActionId, std::vector<TransitionTuple>> classes;
    for (const auto& t : filter_on_policy(tuples, fx.policy)) classes[t.a].push_back(t);
    std::vector<std::vector<TransitionTuple>> replay;
    for (auto& [a, ts] : classes) replay.push_back(ts);

    for (const auto& ev : stats.splits) {
      double best = 0.0;
      std::size_t best_set = 0;
      FeatureId best_f = 0;
      for (std::size_t si = 0; si < replay.size(); ++si) {
        for (FeatureId f = 1; f <= fx.dom.m; ++f) {
          const double mag = std::abs(naive_importance(replay[si], f, fx.g));
          if (mag > best + 1e-12) {
            best = mag;
            best_set = si;
            best_f = f;
          }
        }
      }
      ASSERT_NEAR(ev.importance, best, 1e-12);
      ASSERT_GE(ev.importance, eps);
      ASSERT_EQ(ev.set_index, best_set);
      ASSERT_EQ(ev.feature, best_f);

      std::vector<TransitionTuple> zero, one;
      for (const auto& t : replay[ev.set_index]) (t.s[ev.feature] ? one : zero).push_back(t);
      ASSERT_FALSE(zero.empty());
      ASSERT_FALSE(one.empty());
      EXPECT_EQ(naive_importance(zero, ev.feature, fx.g), 0.0);
      EXPECT_EQ(naive_importance(one, ev.feature, fx.g), 0.0);
      replay[ev.set_index] = zero;
      replay.push_back(one);
    }

    ASSERT_EQ(replay.size(), sets.size());
    for (std::size_t si = 0; si < sets.size(); ++si) {
      EXPECT_EQ(replay[si], sets[si].tuples);
    }
  }
}

TEST(DivideProperties, PartitionTerminationAndCounters) {
  for (int i = 0; i < 10; ++i) {
    const double rho = i % 2 ? 0.25 : 0.0;
    const int m = 6 + i % 4;
    const auto fx = solved(generate_domain(m, rho, 23, static_cast<std::uint64_t>(i)));
    Rng rng = Rng::derive(23, "partition", i);
    const auto tuples = sample_trajectories(fx.dom, fx.policy, 400, rng);
    const double eps = 1.0;
    DivideStats stats;
    const auto sets = divide_abstract_states(tuples, fx.policy, fx.g, eps, &stats);

    // partition: multiset union equals the filtered input
    auto filtered = filter_on_policy(tuples, fx.policy);
    std::vector<TransitionTuple> united;
    for (const auto& s : sets) united.insert(united.end(), s.tuples.begin(), s.tuples.end());
    std::sort(filtered.begin(), filtered.end(), tuple_less);
    std::sort(united.begin(), united.end(), tuple_less);
    EXPECT_EQ(united, filtered);

    for (const auto& s : sets) {
      ASSERT_FALSE(s.tuples.empty());
      std::set<FeatureId> seen;
      for (const auto& [f, v] : s.split.constraints) {
        EXPECT_TRUE(seen.insert(f).second) << "feature split twice on one path";
        EXPECT_TRUE(v == 0 || v == 1);
      }
      for (const auto& t : s.tuples) {
        EXPECT_EQ(t.a, s.split.action);
        EXPECT_TRUE(s.split.matches(t.s));
      }
      for (FeatureId f = 1; f <= m; ++f) {
        EXPECT_LT(std::abs(naive_importance(s.tuples, f, fx.g)), eps);
      }
    }
    EXPECT_LE(stats.firm.tuple_visits,
              static_cast<std::uint64_t>(m + 1) * tuples.size());
    EXPECT_EQ(stats.firm.g_evaluations, stats.firm.tuple_visits);
  }
}

TEST(BuildGraph, EmpiricalFrequenciesAndAbsorption) {
  const auto sets = hand_built();
  const Apg apg = Apg::build(sets, hand_policy());
  ASSERT_EQ(apg.num_nodes(), 3u);
  ASSERT_EQ(apg.terminal_index(), 3u);
  // node 0: 10 and 11 fall in node 1 (action 1, f_1=1); 01 -> action 2 node;
  // 00 -> node 0
  EXPECT_DOUBLE_EQ(apg.transition(0, 1), 0.5);
  EXPECT_DOUBLE_EQ(apg.transition(0, 2), 0.25);
  EXPECT_DOUBLE_EQ(apg.transition(0, 0), 0.25);
  EXPECT_DOUBLE_EQ(apg.transition(1, 3), 1.0);
  EXPECT_DOUBLE_EQ(apg.transition(2, 0), 1.0);
  EXPECT_DOUBLE_EQ(apg.transition(3, 3), 1.0);
  for (std::size_t i = 0; i < apg.dimension(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < apg.dimension(); ++j) {
      EXPECT_GE(apg.transition(i, j), 0.0);
      row += apg.transition(i, j);
    }
    EXPECT_NEAR(row, 1.0, 1e-9);
  }
}

TEST(BuildGraph, TwoWaySplitRow) {
  std::vector<AbstractState> sets(3);
  sets[0].split = {1, {}};
  sets[1].split = {2, {}};
  sets[2].split = {3, {}};
  TabularPolicy pi;
  pi.set(st("00"), 1);
  pi.set(st("01"), 2);
  pi.set(st("10"), 3);
  sets[0].tuples = {tup(st("00"), 1, st("01")), tup(st("00"), 1, st("10")),
                    tup(st("00"), 1, st("01")), tup(st("00"), 1, st("10"))};
  sets[1].tuples = {tup(st("01"), 2, st("11"), true)};
  sets[2].tuples = {tup(st("10"), 3, st("11"), true)};
  const Apg apg = Apg::build(sets, pi);
  EXPECT_DOUBLE_EQ(apg.transition(0, 1), 0.5);
  EXPECT_DOUBLE_EQ(apg.transition(0, 2), 0.5);
  EXPECT_DOUBLE_EQ(apg.transition(0, 0), 0.0);
}

TEST(BuildGraph, MissingDestinationClass) {
  std::vector<AbstractState> sets(1);
  sets[0].split = {1, {}};
  sets[0].tuples = {tup(st("00"), 1, st("01"))};
  TabularPolicy pi;
  pi.set(st("00"), 1);
  pi.set(st("01"), 2);  // action 2 has no node
  EXPECT_EQ(error_of([&] { Apg::build(sets, pi); }), ErrorCode::kClassification);
}

TEST(Classifier, MembershipAndInvariance) {
  const Apg apg = Apg::build(hand_built(), hand_policy());
  TabularPolicy pi = hand_policy();
  EXPECT_EQ(classify_state(apg, st("00"), pi), 0u);
  EXPECT_EQ(classify_state(apg, st("10"), pi), 1u);
  EXPECT_EQ(classify_state(apg, st("01"), pi), 2u);
  // same record features, differing only elsewhere -> same node
  EXPECT_EQ(apg.find_node(st("01"), 1), apg.find_node(st("00"), 1));
  // differing on a record feature -> different node
  EXPECT_NE(apg.find_node(st("10"), 1), apg.find_node(st("00"), 1));
  EXPECT_FALSE(apg.find_node(st("00"), 3).has_value());
  pi.set(st("00"), 3);
  EXPECT_EQ(error_of([&] { classify_state(apg, st("00"), pi); }),
            ErrorCode::kClassification);
}

TEST(Classifier, RejectsInconsistentRecords) {
  std::vector<Apg::Node> nodes(2);
  nodes[0].split = {1, {{1, 0}}};
  nodes[1].split = {1, {{2, 1}}};  // not the sibling of (1, 0)
  std::vector<double> matrix(9, 0.0);
  matrix[2] = matrix[5] = matrix[8] = 1.0;
  EXPECT_EQ(error_of([&] { Apg::from_parts(nodes, matrix); }), ErrorCode::kSchema);
  nodes[1].split = {1, {{1, 0}}};  // duplicate leaf
  EXPECT_EQ(error_of([&] { Apg::from_parts(nodes, matrix); }), ErrorCode::kSchema);
  nodes[1].split = {1, {{1, 1}}};
  EXPECT_NO_THROW(Apg::from_parts(nodes, matrix));
}

TEST(FromParts, RejectsMalformedMatrix) {
  std::vector<Apg::Node> nodes(1);
  nodes[0].split = {1, {}};
  EXPECT_EQ(error_of([&] { Apg::from_parts(nodes, {0.0, 1.0, 0.0}); }), ErrorCode::kSchema);
  EXPECT_EQ(error_of([&] { Apg::from_parts(nodes, {0.5, 0.4, 0.0, 1.0}); }),
            ErrorCode::kSchema);
  EXPECT_EQ(error_of([&] { Apg::from_parts(nodes, {1.5, -0.5, 0.0, 1.0}); }),
            ErrorCode::kSchema);
  EXPECT_NO_THROW(Apg::from_parts(nodes, {0.0, 1.0, 0.0, 1.0}));
}

TEST(ClassifierProperties, TotalAndMatchesRecordsExhaustively) {
  for (int i = 0; i < 6; ++i) {
    const int m = 6 + i % 5;
    const auto fx = solved(generate_domain(m, i % 2 ? 0.25 : 0.0, 31, static_cast<std::uint64_t>(i)));
    Rng rng = Rng::derive(31, "classify", i);
    auto tuples = sample_trajectories(fx.dom, fx.policy, std::size_t{1} << (m - 2), rng);
    while (tuples.size() > 1 && !tuples.back().terminal) tuples.pop_back();  // whole episodes
    const auto sets = divide_abstract_states(tuples, fx.policy, fx.g, 1.0);
    const Apg apg = Apg::build(sets, fx.policy);

    for (std::size_t n = 0; n < sets.size(); ++n) {
      for (const auto& t : sets[n].tuples) ASSERT_EQ(classify_state(apg, t.s, fx.policy), n);
    }
    for (std::uint64_t k = 0; k < (std::uint64_t{1} << m); ++k) {
      const State s = State::from_code(k, m);
      if (fx.dom.is_terminal(s)) continue;
      const ActionId a = fx.policy.at(s);
      if (!apg.has_action(a)) continue;
      const auto node = classify_state(apg, s, fx.policy);
      // exactly one node of the action class matches its record
      int matches = 0;
      for (std::size_t n = 0; n < apg.num_nodes(); ++n) {
        const auto summary = summarize_node(apg, n);
        if (summary.action != a) continue;
        bool ok = true;
        for (const auto& [f, v] : summary.constraints) ok = ok && s[f] == v;
        if (ok) {
          ++matches;
          ASSERT_EQ(n, node);
        }
      }
      ASSERT_EQ(matches, 1);
      // flipping a feature outside the record keeps the node
      const auto relevant = relevant_features(apg, s, fx.policy);
      for (FeatureId f = 2; f <= m; ++f) {
        if (std::binary_search(relevant.begin(), relevant.end(), f)) continue;
        ASSERT_EQ(apg.find_node(s.flipped(f), a), node);
      }
    }
  }
}

TEST(Predict, FourItemRollout) {
  const auto fx = solved(example_domain());
  const auto sets = divide_abstract_states(exhaustive(fx, 4), fx.policy, fx.g, 1.0);
  const Apg apg = Apg::build(sets, fx.policy);
  const auto n0 = predict_action_distribution(apg, st("0000"), 0, fx.policy);
  EXPECT_DOUBLE_EQ(n0.probability(4), 1.0);
  const auto n1 = predict_action_distribution(apg, st("0000"), 1, fx.policy);
  EXPECT_DOUBLE_EQ(n1.probability(3), 1.0);
  const auto n3 = predict_action_distribution(apg, st("0000"), 3, fx.policy);
  EXPECT_DOUBLE_EQ(n3.probability(1), 1.0);
  const auto n4 = predict_action_distribution(apg, st("0000"), 4, fx.policy);
  EXPECT_DOUBLE_EQ(n4.probability(kTerminated), 1.0);
  EXPECT_EQ(n4.mode(), kTerminated);

  // every non-terminal start, several horizons: equals the exact chain
  for (std::uint64_t k = 0; k < 8; ++k) {
    const State s = State::from_code(k, 4);
    for (int n = 0; n <= 6; ++n) {
      const auto predicted = predict_action_distribution(apg, s, n, fx.policy);
      const auto truth = true_action_distribution(fx.dom, fx.policy, s, n);
      EXPECT_NEAR(total_variation(predicted, truth), 0.0, 1e-12) << s.to_string() << " n=" << n;
    }
  }
}

TEST(Predict, DistributionsSumToOne) {
  const Apg apg = Apg::build(hand_built(), hand_policy());
  for (std::size_t node = 0; node < apg.num_nodes(); ++node) {
    for (int n = 0; n < 8; ++n) {
      double total = 0.0;
      for (const auto& [a, p] : predict_from_node(apg, node, n).actions) total += p;
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
  const auto d = predict_from_node(apg, 0, 1);
  EXPECT_DOUBLE_EQ(d.probability(1), 0.75);
  EXPECT_DOUBLE_EQ(d.probability(2), 0.25);
}

TEST(Summary, Text) {
  std::vector<Apg::Node> nodes(3);
  nodes[0].split = {1, {{4, 1}, {3, 1}}};
  nodes[0].count = 2;
  nodes[1].split = {1, {{4, 0}}};
  nodes[2].split = {1, {{4, 1}, {3, 0}}};
  std::vector<double> matrix(16, 0.0);
  for (std::size_t i = 0; i < 4; ++i) matrix[i * 4 + 3] = 1.0;
  const Apg apg = Apg::from_parts(nodes, matrix);
  const auto s = summarize_node(apg, 0);
  EXPECT_EQ(s.text, "take a_1 when f_3=1 and f_4=1");
  EXPECT_EQ(s.count, 2u);
  EXPECT_EQ(s.constraints, (std::vector<std::pair<FeatureId, int>>{{3, 1}, {4, 1}}));

  std::vector<Apg::Node> single(1);
  single[0].split = {7, {}};
  const Apg flat = Apg::from_parts(single, {0.0, 1.0, 0.0, 1.0});
  EXPECT_EQ(summarize_node(flat, 0).text, "take a_7 (no feature constraints)");
}
