#include "apg/firm.hpp"

#include <cmath>
#include <utility>

namespace apg {

void ExactSum::add(double x) {
  std::size_t i = 0;
  for (double y : partials_) {
    if (std::abs(x) < std::abs(y)) std::swap(x, y);
    const double hi = x + y;
    const double lo = y - (hi - x);
    if (lo != 0.0) partials_[i++] = lo;
    x = hi;
  }
  partials_.resize(i);
  partials_.push_back(x);
}

void ExactSum::subtract(const ExactSum& other) {
  for (double p : other.partials_) add(-p);
}

double ExactSum::value() const {
  std::size_t n = partials_.size();
  if (n == 0) return 0.0;
  double hi = partials_[--n];
  double lo = 0.0;
  while (n > 0) {
    const double x = hi;
    const double y = partials_[--n];
    hi = x + y;
    lo = y - (hi - x);
    if (lo != 0.0) break;
  }
  // Round half to even across the remaining partials.
  if (n > 0 && ((lo < 0.0 && partials_[n - 1] < 0.0) ||
                (lo > 0.0 && partials_[n - 1] > 0.0))) {
    const double y = lo * 2.0;
    const double x = hi + y;
    if (y == x - hi) hi = x;
  }
  return hi;
}

namespace {

// Algorithm core: tally of s[f] = 0 and the sum of g over those tuples per
// feature, plus the total; q_f1 follows from the total.
template <typename Visit>
ImportanceVector firm_impl(std::size_t count, int num_features, Visit visit,
                           FirmCounters* counters) {
  if (count == 0) {
    throw Error(ErrorCode::kEmptySet, "FIRM over an empty tuple multiset");
  }
  ExactSum total;
  std::vector<std::uint64_t> zeros(num_features, 0);
  std::vector<ExactSum> zero_sums(num_features);

  for (std::size_t i = 0; i < count; ++i) {
    const auto [s, g_val] = visit(i);
    total.add(g_val);
    for (int f = 1; f <= num_features; ++f) {
      if ((*s)[f] == 0) {
        ++zeros[f - 1];
        zero_sums[f - 1].add(g_val);
      }
    }
  }
  if (counters) {
    counters->g_evaluations += count;
    counters->tuple_visits += count;
    ++counters->calls;
  }

  const double n = static_cast<double>(count);
  ImportanceVector out(num_features, 0.0);
  for (int f = 0; f < num_features; ++f) {
    const std::uint64_t n0 = zeros[f];
    const std::uint64_t n1 = count - n0;
    if (n0 == 0 || n1 == 0) continue;
    ExactSum ones = total;
    ones.subtract(zero_sums[f]);
    const double q0 = zero_sums[f].value() / static_cast<double>(n0);
    const double q1 = ones.value() / static_cast<double>(n1);
    const double p0 = static_cast<double>(n0) / n;
    const double p1 = static_cast<double>(n1) / n;
    out[f] = (q0 - q1) * std::sqrt(p0 * p1);
  }
  return out;
}

}  // namespace

ImportanceVector firm_all_features(std::span<const TransitionTuple> tuples,
                                   const ScoreFn& g, FirmCounters* counters) {
  const int width = tuples.empty() ? 0 : tuples.front().s.width();
  return firm_impl(
      tuples.size(), width,
      [&](std::size_t i) {
        const State* s = &tuples[i].s;
        return std::pair{s, g(*s)};
      },
      counters);
}

ImportanceVector firm_all_features(std::span<const TransitionTuple> tuples,
                                   std::span<const double> scores,
                                   std::span<const std::uint32_t> members,
                                   FirmCounters* counters) {
  const int width = tuples.empty() ? 0 : tuples.front().s.width();
  return firm_impl(
      members.size(), width,
      [&](std::size_t i) {
        const std::uint32_t idx = members[i];
        return std::pair{&tuples[idx].s, scores[idx]};
      },
      counters);
}

}  // namespace apg
