#pragma once

// Feature Importance Ranking Measure for binary features.
//
// For a multiset of tuples and a score g over source states,
//   I_f = (q_f0 - q_f1) * sqrt(p_f0 * p_f1)
// where p_fv is the fraction of tuples with t_s[f] = v and q_fv is the mean
// of g(t_s) over that fraction. Features that are constant over the multiset
// get exactly 0. The sign is kept; callers compare |I_f|.

#include <cstdint>
#include <span>
#include <vector>

#include "apg/mdp.hpp"

namespace apg {

using ImportanceVector = std::vector<double>;  // index f - 1 holds I_f

// Instrumentation shared by every FIRM entry point.
struct FirmCounters {
  std::uint64_t g_evaluations = 0;  // calls of g (or memo lookups)
  std::uint64_t tuple_visits = 0;   // tuples scanned
  std::uint64_t calls = 0;
};

// Single pass over `tuples`, one g evaluation per tuple. Throws kEmptySet.
ImportanceVector firm_all_features(std::span<const TransitionTuple> tuples,
                                   const ScoreFn& g,
                                   FirmCounters* counters = nullptr);

// Same measure over a subset of a tuple array whose scores were memoized:
// `members` indexes into `tuples`/`scores`. Each member costs one memo lookup.
ImportanceVector firm_all_features(std::span<const TransitionTuple> tuples,
                                   std::span<const double> scores,
                                   std::span<const std::uint32_t> members,
                                   FirmCounters* counters = nullptr);

// Exactly rounded running sum (Shewchuk partials). The result depends only
// on the multiset of addends, never on their order.
class ExactSum {
 public:
  void add(double x);
  void subtract(const ExactSum& other);
  double value() const;

 private:
  std::vector<double> partials_;
};

}  // namespace apg
