#include "apg/tabular_mdp.hpp"

#include <string>

namespace apg {

TabularMdp::TabularMdp(int num_features, int num_actions)
    : num_features_(num_features), num_actions_(num_actions) {
  if (num_features < 1 || num_features > 30) {
    throw Error(ErrorCode::kInvalidArgument,
                "tabular MDP needs 1..30 features, got " +
                    std::to_string(num_features));
  }
  if (num_actions < 1) {
    throw Error(ErrorCode::kInvalidArgument, "tabular MDP needs actions");
  }
  terminal_.assign(num_states(), 0);
  offsets_.assign(num_states() * num_actions_ + 1, 0);
}

void TabularMdp::add_outcomes(std::uint64_t s, ActionId a,
                              std::span<const Outcome> out) {
  const std::size_t k = slot(s, a);
  if (k < next_slot_) {
    throw Error(ErrorCode::kInvalidArgument, "outcomes added out of order");
  }
  // Slots skipped so far (terminal states) get empty ranges.
  for (; next_slot_ < k; ++next_slot_) {
    offsets_[next_slot_ + 1] = outcomes_.size();
  }
  outcomes_.insert(outcomes_.end(), out.begin(), out.end());
  offsets_[k + 1] = outcomes_.size();
  next_slot_ = k + 1;
}

void TabularMdp::finalize() {
  for (; next_slot_ < offsets_.size() - 1; ++next_slot_) {
    offsets_[next_slot_ + 1] = outcomes_.size();
  }
}

std::vector<std::uint64_t> TabularMdp::non_terminal_states() const {
  std::vector<std::uint64_t> out;
  for (std::uint64_t s = 0; s < num_states(); ++s) {
    if (!terminal(s)) out.push_back(s);
  }
  return out;
}

}  // namespace apg
