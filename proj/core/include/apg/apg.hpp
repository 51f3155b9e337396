#pragma once

// Abstracted Policy Graph generation.
//
// Tuples are filtered to those the policy agrees with, grouped by action and
// then split greedily: the (set, feature) pair with the largest |I_f| is
// split on that feature while that importance is at least epsilon. Each
// resulting set is a node of a Markov chain whose edges are the empirical
// frequencies of the abstract successor; terminal successors go to an
// absorbing node b_T.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "apg/firm.hpp"
#include "apg/mdp.hpp"

namespace apg {

// Ordered (feature, value) constraints that define membership of a node
// within its action class.
struct SplitRecord {
  ActionId action = 0;
  std::vector<std::pair<FeatureId, int>> constraints;

  bool matches(const State& s) const;
  std::vector<FeatureId> features() const;  // sorted

  friend bool operator==(const SplitRecord&, const SplitRecord&) = default;
};

struct AbstractState {
  std::size_t id = 0;  // 0-based node index
  std::vector<TransitionTuple> tuples;
  SplitRecord split;
};

struct SplitEvent {
  std::size_t set_index;  // 0-based; the f=0 child keeps it, f=1 is appended
  FeatureId feature;
  double importance;      // |I_f| at selection time
};

struct DivideStats {
  std::size_t input_size = 0;
  std::size_t filtered_size = 0;
  FirmCounters firm;
  std::vector<SplitEvent> splits;
};

// Keeps tuples with policy(t_s) == t_a, preserving order and multiplicity.
// Throws kMissingPolicy.
std::vector<TransitionTuple> filter_on_policy(
    std::span<const TransitionTuple> tuples, const TabularPolicy& policy);

// On return every |I_f| of every set is below epsilon. Throws kEmptySet when
// nothing survives filtering and kInvalidArgument for epsilon <= 0. g is
// evaluated once per filtered tuple.
std::vector<AbstractState> divide_abstract_states(
    std::span<const TransitionTuple> tr_samples, const TabularPolicy& policy,
    const ScoreFn& g, double epsilon, DivideStats* stats = nullptr);

// Label used for probability mass absorbed in b_T.
inline constexpr ActionId kTerminated = 0;

struct ActionDistribution {
  std::map<ActionId, double> actions;  // kTerminated holds absorbed mass
  double probability(ActionId a) const;
  // Most likely label, lowest id (kTerminated first) among ties.
  ActionId mode() const;
};

// Descends the per-action split trees formed by the nodes' split records.
// Every state whose action has a class lands in exactly one leaf.
class SplitClassifier {
 public:
  SplitClassifier() = default;
  // Throws kSchema unless, per action, the records form a full binary
  // partition tree.
  explicit SplitClassifier(std::span<const SplitRecord> records);

  // Node index, or nullopt if `action` has no class.
  std::optional<std::size_t> find(const State& s, ActionId action) const;
  bool has_action(ActionId action) const { return roots_.count(action) != 0; }

 private:
  struct TreeNode {
    FeatureId feature = 0;  // 0 for leaves
    int child[2] = {-1, -1};
    int leaf = -1;          // node index at leaves
  };

  std::vector<TreeNode> tree_;
  std::map<ActionId, int> roots_;
};

struct NodeSummary {
  std::size_t id = 0;  // 0-based
  ActionId action = 0;
  std::vector<std::pair<FeatureId, int>> constraints;  // sorted by feature
  std::size_t count = 0;
  std::string text;
};

class Apg {
 public:
  struct Node {
    SplitRecord split;
    std::size_t count = 0;  // tuples the node was built from
  };

  // Transition matrix from the tuples of each abstract state (destination
  // classified with the split-tree classifier under `policy`).
  // Throws kClassification if a non-terminal destination falls in an action
  // class with no node.
  static Apg build(std::span<const AbstractState> abstract_states,
                   const TabularPolicy& policy);

  // Reassembles a graph from serialized parts. `matrix` is row-major with
  // (nodes + 1)^2 entries. Throws kSchema if the records do not form a
  // partition tree per action or the matrix is malformed.
  static Apg from_parts(std::vector<Node> nodes, std::vector<double> matrix);

  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t terminal_index() const { return nodes_.size(); }
  std::size_t dimension() const { return nodes_.size() + 1; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<double>& matrix() const { return matrix_; }
  double transition(std::size_t from, std::size_t to) const {
    return matrix_[from * dimension() + to];
  }
  ActionId action_of(std::size_t node) const { return nodes_[node].split.action; }

  // Node reached by split-tree descent within `action`'s class, or nullopt if
  // the class has no node.
  std::optional<std::size_t> find_node(const State& s, ActionId action) const {
    return classifier_.find(s, action);
  }
  bool has_action(ActionId action) const {
    return classifier_.has_action(action);
  }
  const SplitClassifier& classifier() const { return classifier_; }

 private:
  void build_classifier();

  std::vector<Node> nodes_;
  std::vector<double> matrix_;
  SplitClassifier classifier_;
};

// Node of s under policy(s). Throws kMissingPolicy, or kClassification when
// the policy's action has no node in the graph.
std::size_t classify_state(const Apg& apg, const State& s,
                           const TabularPolicy& policy);

// Split-record features of s's node, sorted.
std::vector<FeatureId> relevant_features(const Apg& apg, const State& s,
                                         const TabularPolicy& policy);

// e(node(s0)) * M^n, aggregated by node action.
ActionDistribution predict_action_distribution(const Apg& apg, const State& s0,
                                               int n,
                                               const TabularPolicy& policy);
ActionDistribution predict_from_node(const Apg& apg, std::size_t node, int n);

NodeSummary summarize_node(const Apg& apg, std::size_t node);

}  // namespace apg
