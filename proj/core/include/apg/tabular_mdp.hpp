#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "apg/mdp.hpp"

namespace apg {

// Fully enumerated MDP over all 2^|F| states, indexed by State::code().
// Outcomes for (s, a) are stored contiguously; terminal states carry none.
class TabularMdp {
 public:
  struct Outcome {
    std::uint64_t next;
    double prob;
    double reward;
  };

  TabularMdp(int num_features, int num_actions);

  int num_features() const { return num_features_; }
  int num_actions() const { return num_actions_; }
  std::uint64_t num_states() const { return std::uint64_t{1} << num_features_; }

  bool terminal(std::uint64_t s) const { return terminal_[s] != 0; }
  void set_terminal(std::uint64_t s, bool t) { terminal_[s] = t ? 1 : 0; }

  // Must be called in (s, a) order: s ascending, then a = 1..num_actions.
  // Terminal states are skipped entirely.
  void add_outcomes(std::uint64_t s, ActionId a, std::span<const Outcome> out);
  // Seals the outcome table once every non-terminal (s, a) has been added.
  void finalize();

  std::span<const Outcome> outcomes(std::uint64_t s, ActionId a) const {
    const std::size_t k = slot(s, a);
    return {outcomes_.data() + offsets_[k], offsets_[k + 1] - offsets_[k]};
  }

  State state(std::uint64_t code) const {
    return State::from_code(code, num_features_);
  }

  std::vector<std::uint64_t> non_terminal_states() const;

 private:
  std::size_t slot(std::uint64_t s, ActionId a) const {
    return static_cast<std::size_t>(s) * num_actions_ + (a - 1);
  }

  int num_features_;
  int num_actions_;
  std::vector<std::uint8_t> terminal_;
  std::vector<std::size_t> offsets_;
  std::vector<Outcome> outcomes_;
  std::size_t next_slot_ = 0;
};

}  // namespace apg
