#include "apg/apg.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>

namespace apg {

bool SplitRecord::matches(const State& s) const {
  return std::all_of(constraints.begin(), constraints.end(),
                     [&](const auto& c) { return s[c.first] == c.second; });
}

std::vector<FeatureId> SplitRecord::features() const {
  std::vector<FeatureId> out;
  out.reserve(constraints.size());
  for (const auto& c : constraints) out.push_back(c.first);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<TransitionTuple> filter_on_policy(
    std::span<const TransitionTuple> tuples, const TabularPolicy& policy) {
  std::vector<TransitionTuple> out;
  out.reserve(tuples.size());
  for (const auto& t : tuples) {
    if (policy.at(t.s) == t.a) out.push_back(t);
  }
  return out;
}

namespace {

struct WorkingSet {
  std::vector<std::uint32_t> members;
  SplitRecord split;
  FeatureId best_feature = 0;
  double best = 0.0;
  std::uint32_t version = 0;
};

struct HeapEntry {
  double best;
  std::size_t index;
  std::uint32_t version;
};

// Largest |I| first; lowest set index among equal keys.
struct HeapOrder {
  bool operator()(const HeapEntry& a, const HeapEntry& b) const {
    if (a.best != b.best) return a.best < b.best;
    return a.index > b.index;
  }
};

void score_set(WorkingSet& set, std::span<const TransitionTuple> tuples,
               std::span<const double> scores, FirmCounters* counters) {
  const auto imp = firm_all_features(tuples, scores, set.members, counters);
  set.best = 0.0;
  set.best_feature = 0;
  for (std::size_t f = 0; f < imp.size(); ++f) {
    const double mag = std::abs(imp[f]);
    if (mag > set.best) {
      set.best = mag;
      set.best_feature = static_cast<FeatureId>(f + 1);
    }
  }
}

}  // namespace

std::vector<AbstractState> divide_abstract_states(
    std::span<const TransitionTuple> tr_samples, const TabularPolicy& policy,
    const ScoreFn& g, double epsilon, DivideStats* stats) {
  if (!(epsilon > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "epsilon must be positive");
  }
  const auto tuples = filter_on_policy(tr_samples, policy);
  if (tuples.empty()) {
    throw Error(ErrorCode::kEmptySet,
                "no transition agrees with the policy after filtering");
  }
  FirmCounters local;
  FirmCounters* counters = stats ? &stats->firm : &local;
  if (stats) {
    stats->input_size = tr_samples.size();
    stats->filtered_size = tuples.size();
  }

  // g memoized once per tuple
  std::vector<double> scores(tuples.size());
  for (std::size_t i = 0; i < tuples.size(); ++i) scores[i] = g(tuples[i].s);

  // separate by action; empty classes produce no set
  ActionId max_action = 0;
  for (const auto& t : tuples) max_action = std::max(max_action, t.a);
  std::vector<std::vector<std::uint32_t>> by_action(max_action + 1);
  for (std::size_t i = 0; i < tuples.size(); ++i) {
    by_action[tuples[i].a].push_back(static_cast<std::uint32_t>(i));
  }
  std::vector<WorkingSet> sets;
  for (ActionId a = 1; a <= max_action; ++a) {
    if (by_action[a].empty()) continue;
    WorkingSet set;
    set.members = std::move(by_action[a]);
    set.split.action = a;
    sets.push_back(std::move(set));
  }

  std::priority_queue<HeapEntry, std::vector<HeapEntry>, HeapOrder> heap;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    score_set(sets[i], tuples, scores, counters);
    heap.push({sets[i].best, i, sets[i].version});
  }

  while (!heap.empty()) {
    const HeapEntry top = heap.top();
    heap.pop();
    if (top.version != sets[top.index].version) continue;  // stale
    if (top.best < epsilon) break;

    const std::size_t idx = top.index;
    const FeatureId f = sets[idx].best_feature;
    if (stats) stats->splits.push_back({idx, f, top.best});

    WorkingSet one;
    std::vector<std::uint32_t> zero;
    for (std::uint32_t t : sets[idx].members) {
      (tuples[t].s[f] == 0 ? zero : one.members).push_back(t);
    }
    one.split = sets[idx].split;
    one.split.constraints.emplace_back(f, 1);
    sets[idx].members = std::move(zero);
    sets[idx].split.constraints.emplace_back(f, 0);
    ++sets[idx].version;

    score_set(sets[idx], tuples, scores, counters);
    score_set(one, tuples, scores, counters);
    heap.push({sets[idx].best, idx, sets[idx].version});
    sets.push_back(std::move(one));
    heap.push({sets.back().best, sets.size() - 1, sets.back().version});
  }

  std::vector<AbstractState> out(sets.size());
  for (std::size_t i = 0; i < sets.size(); ++i) {
    out[i].id = i;
    out[i].split = std::move(sets[i].split);
    out[i].tuples.reserve(sets[i].members.size());
    for (std::uint32_t t : sets[i].members) out[i].tuples.push_back(tuples[t]);
  }
  return out;
}

double ActionDistribution::probability(ActionId a) const {
  auto it = actions.find(a);
  return it == actions.end() ? 0.0 : it->second;
}

ActionId ActionDistribution::mode() const {
  ActionId best = kTerminated;
  double best_p = -1.0;
  for (const auto& [a, p] : actions) {
    if (p > best_p) {
      best = a;
      best_p = p;
    }
  }
  return best;
}

SplitClassifier::SplitClassifier(std::span<const SplitRecord> records) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    if (rec.action < 1) {
      throw Error(ErrorCode::kSchema,
                  "node " + std::to_string(i + 1) + " has no valid action");
    }
    auto [it, inserted] = roots_.try_emplace(rec.action, 0);
    if (inserted) {
      it->second = static_cast<int>(tree_.size());
      tree_.push_back({});
    }
    int cur = it->second;
    for (const auto& [f, v] : rec.constraints) {
      if (v != 0 && v != 1) {
        throw Error(ErrorCode::kSchema, "split value must be 0 or 1");
      }
      if (tree_[cur].leaf >= 0) {
        throw Error(ErrorCode::kSchema,
                    "split records overlap at node " + std::to_string(i + 1));
      }
      if (tree_[cur].feature == 0) {
        tree_[cur].feature = f;
        for (int b = 0; b < 2; ++b) {
          tree_[cur].child[b] = static_cast<int>(tree_.size());
          tree_.push_back({});
        }
      } else if (tree_[cur].feature != f) {
        throw Error(ErrorCode::kSchema,
                    "inconsistent split order in node " + std::to_string(i + 1));
      }
      cur = tree_[cur].child[v];
    }
    if (tree_[cur].feature != 0 || tree_[cur].leaf >= 0) {
      throw Error(ErrorCode::kSchema,
                  "split records overlap at node " + std::to_string(i + 1));
    }
    tree_[cur].leaf = static_cast<int>(i);
  }
  for (const auto& t : tree_) {
    if (t.feature == 0 && t.leaf < 0) {
      throw Error(ErrorCode::kSchema,
                  "split records do not cover their action class");
    }
  }
}

std::optional<std::size_t> SplitClassifier::find(const State& s,
                                                 ActionId action) const {
  auto it = roots_.find(action);
  if (it == roots_.end()) return std::nullopt;
  int cur = it->second;
  while (tree_[cur].feature != 0) cur = tree_[cur].child[s[tree_[cur].feature]];
  return static_cast<std::size_t>(tree_[cur].leaf);
}

void Apg::build_classifier() {
  std::vector<SplitRecord> records;
  records.reserve(nodes_.size());
  for (const auto& n : nodes_) records.push_back(n.split);
  classifier_ = SplitClassifier(records);
}

Apg Apg::build(std::span<const AbstractState> abstract_states,
               const TabularPolicy& policy) {
  Apg apg;
  apg.nodes_.reserve(abstract_states.size());
  for (const auto& a : abstract_states) {
    apg.nodes_.push_back({a.split, a.tuples.size()});
  }
  apg.build_classifier();

  const std::size_t dim = apg.dimension();
  apg.matrix_.assign(dim * dim, 0.0);
  std::vector<std::size_t> counts(dim);
  for (std::size_t i = 0; i < abstract_states.size(); ++i) {
    const auto& set = abstract_states[i].tuples;
    if (set.empty()) {
      throw Error(ErrorCode::kEmptySet,
                  "abstract state " + std::to_string(i + 1) + " is empty");
    }
    std::fill(counts.begin(), counts.end(), 0);
    for (const auto& t : set) {
      std::size_t n = apg.terminal_index();
      if (!t.terminal) {
        const ActionId next_action = policy.at(t.s_next);
        const auto node = apg.find_node(t.s_next, next_action);
        if (!node) {
          throw Error(ErrorCode::kClassification,
                      "successor " + t.s_next.to_string() + " takes a_" +
                          std::to_string(next_action) +
                          ", which has no abstract state");
        }
        n = *node;
      }
      ++counts[n];
    }
    for (std::size_t n = 0; n < dim; ++n) {
      apg.matrix_[i * dim + n] =
          static_cast<double>(counts[n]) / static_cast<double>(set.size());
    }
  }
  apg.matrix_[apg.terminal_index() * dim + apg.terminal_index()] = 1.0;
  return apg;
}

Apg Apg::from_parts(std::vector<Node> nodes, std::vector<double> matrix) {
  Apg apg;
  apg.nodes_ = std::move(nodes);
  const std::size_t dim = apg.dimension();
  if (matrix.size() != dim * dim) {
    throw Error(ErrorCode::kSchema, "matrix has " +
                                        std::to_string(matrix.size()) +
                                        " entries, expected " +
                                        std::to_string(dim * dim));
  }
  for (std::size_t i = 0; i < dim; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double p = matrix[i * dim + j];
      if (!(p >= 0.0) || !std::isfinite(p)) {
        throw Error(ErrorCode::kSchema, "matrix entries must be nonnegative");
      }
      row += p;
    }
    if (std::abs(row - 1.0) > 1e-9) {
      throw Error(ErrorCode::kSchema,
                  "matrix row " + std::to_string(i + 1) + " sums to " +
                      std::to_string(row));
    }
  }
  apg.matrix_ = std::move(matrix);
  apg.build_classifier();
  return apg;
}

std::size_t classify_state(const Apg& apg, const State& s,
                           const TabularPolicy& policy) {
  const ActionId a = policy.at(s);
  const auto node = apg.find_node(s, a);
  if (!node) {
    throw Error(ErrorCode::kClassification,
                "state " + s.to_string() + " takes a_" + std::to_string(a) +
                    ", which has no abstract state");
  }
  return *node;
}

std::vector<FeatureId> relevant_features(const Apg& apg, const State& s,
                                         const TabularPolicy& policy) {
  return apg.nodes()[classify_state(apg, s, policy)].split.features();
}

ActionDistribution predict_from_node(const Apg& apg, std::size_t node, int n) {
  if (n < 0) throw Error(ErrorCode::kInvalidArgument, "n must be >= 0");
  const std::size_t dim = apg.dimension();
  std::vector<double> dist(dim, 0.0);
  std::vector<double> next(dim);
  dist[node] = 1.0;
  for (int step = 0; step < n; ++step) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < dim; ++i) {
      if (dist[i] == 0.0) continue;
      for (std::size_t j = 0; j < dim; ++j) {
        next[j] += dist[i] * apg.transition(i, j);
      }
    }
    dist.swap(next);
  }
  ActionDistribution out;
  for (std::size_t i = 0; i < dim; ++i) {
    if (dist[i] == 0.0) continue;
    const ActionId label =
        i == apg.terminal_index() ? kTerminated : apg.action_of(i);
    out.actions[label] += dist[i];
  }
  return out;
}

ActionDistribution predict_action_distribution(const Apg& apg, const State& s0,
                                               int n,
                                               const TabularPolicy& policy) {
  return predict_from_node(apg, classify_state(apg, s0, policy), n);
}

NodeSummary summarize_node(const Apg& apg, std::size_t node) {
  if (node >= apg.num_nodes()) {
    throw Error(ErrorCode::kInvalidArgument,
                "no node " + std::to_string(node + 1));
  }
  const auto& info = apg.nodes()[node];
  NodeSummary out;
  out.id = node;
  out.action = info.split.action;
  out.constraints = info.split.constraints;
  std::sort(out.constraints.begin(), out.constraints.end());
  out.count = info.count;
  std::ostringstream text;
  text << "take a_" << out.action;
  if (out.constraints.empty()) {
    text << " (no feature constraints)";
  } else {
    text << " when ";
    for (std::size_t i = 0; i < out.constraints.size(); ++i) {
      if (i > 0) text << " and ";
      text << "f_" << out.constraints[i].first << "="
           << out.constraints[i].second;
    }
  }
  out.text = text.str();
  return out;
}

}  // namespace apg
