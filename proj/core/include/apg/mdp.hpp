#pragma once

// Domain-agnostic MDP types: binary-feature states, transition tuples,
// deterministic tabular policies and value functions.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "apg/error.hpp"

namespace apg {

// 1-based action id, matching a_1..a_m.
using ActionId = int;
// 1-based feature index.
using FeatureId = int;

inline constexpr int kMaxFeatures = 64;

// A grounded state: a fixed-width vector of binary features. Packed into a
// 64-bit word with feature 1 in the most significant used bit, so code()
// read as a binary number prints exactly like the "0011" notation.
class State {
 public:
  State() = default;

  // Throws kInvalidFeature for entries other than 0/1 or width > 64.
  static State from_bits(std::span<const int> bits);
  // Parses "0011"-style strings, feature 1 leftmost.
  static State from_string(std::string_view text);
  static State from_code(std::uint64_t code, int width);

  int width() const { return width_; }
  std::uint64_t code() const { return code_; }

  // Value of feature f (1-based).
  int operator[](FeatureId f) const {
    return static_cast<int>((code_ >> (width_ - f)) & 1u);
  }
  State with(FeatureId f, int value) const;
  State flipped(FeatureId f) const { return with(f, 1 - (*this)[f]); }

  std::vector<int> bits() const;
  std::string to_string() const;

  friend bool operator==(const State&, const State&) = default;
  friend auto operator<=>(const State& a, const State& b) {
    if (auto c = a.width_ <=> b.width_; c != 0) return c;
    return a.code_ <=> b.code_;
  }

 private:
  State(std::uint64_t code, int width) : code_(code), width_(width) {}

  std::uint64_t code_ = 0;
  int width_ = 0;
};

struct StateHash {
  std::size_t operator()(const State& s) const noexcept {
    // splitmix64 finalizer over (code, width)
    std::uint64_t x = s.code() ^ (static_cast<std::uint64_t>(s.width()) << 58);
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return static_cast<std::size_t>(x ^ (x >> 31));
  }
};

// One observed transition (s, a, s', r, terminal). `terminal` refers to s'.
struct TransitionTuple {
  State s;
  ActionId a = 0;
  State s_next;
  double r = 0.0;
  bool terminal = false;

  friend bool operator==(const TransitionTuple&,
                         const TransitionTuple&) = default;
};

// Checks uniform width, action ids >= 1 (and <= num_actions when given).
// Throws kWidthMismatch / kUnknownAction.
void validate_transition_set(std::span<const TransitionTuple> tuples,
                             int num_features,
                             std::optional<int> num_actions = std::nullopt);

// Deterministic policy: exactly one action per state.
class TabularPolicy {
 public:
  void set(const State& s, ActionId a) { table_[s] = a; }
  std::optional<ActionId> find(const State& s) const;
  // Throws kMissingPolicy.
  ActionId at(const State& s) const;
  std::size_t size() const { return table_.size(); }
  const std::unordered_map<State, ActionId, StateHash>& entries() const {
    return table_;
  }

 private:
  std::unordered_map<State, ActionId, StateHash> table_;
};

class TabularValueFunction {
 public:
  void set(const State& s, double v) { table_[s] = v; }
  std::optional<double> find(const State& s) const;
  // Throws kMissingValue.
  double at(const State& s) const;
  std::size_t size() const { return table_.size(); }
  const std::unordered_map<State, double, StateHash>& entries() const {
    return table_;
  }

 private:
  std::unordered_map<State, double, StateHash> table_;
};

// Scoring function g used for interchangeability (V_pi for APG Gen).
using ScoreFn = std::function<double(const State&)>;

}  // namespace apg
