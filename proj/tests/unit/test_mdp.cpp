#include <gtest/gtest.h>

#include <set>
#include <unordered_set>
#include <vector>

#include "apg/error.hpp"
#include "apg/mdp.hpp"
#include "test_util.hpp"

using namespace apg;
using apg::testing::error_of;

namespace {

TransitionTuple tuple(const char* s, ActionId a, const char* s_next) {
  return {State::from_string(s), a, State::from_string(s_next), -1.0, false};
}

}  // namespace

TEST(State, EncodesBitsFeatureOneFirst) {
  const std::vector<int> zeros = {0, 0, 0, 0};
  EXPECT_EQ(State::from_bits(zeros).to_string(), "0000");

  const std::vector<int> bits = {1, 0, 1, 1};
  const State s = State::from_bits(bits);
  EXPECT_EQ(s.to_string(), "1011");
  EXPECT_EQ(s.width(), 4);
  EXPECT_EQ(s.code(), 0b1011u);
  EXPECT_EQ(s[1], 1);
  EXPECT_EQ(s[2], 0);
  EXPECT_EQ(s[4], 1);
}

TEST(State, RejectsNonBinaryEntries) {
  const std::vector<int> bad = {0, 2, 0};
  EXPECT_EQ(error_of([&] { State::from_bits(bad); }), ErrorCode::kInvalidFeature);
  EXPECT_EQ(error_of([] { State::from_string("01x1"); }), ErrorCode::kInvalidFeature);
}

TEST(State, RoundTripsExhaustivelyUpToTwelveBits) {
  for (int width = 1; width <= 12; ++width) {
    for (std::uint64_t code = 0; code < (std::uint64_t{1} << width); ++code) {
      const State s = State::from_code(code, width);
      const auto bits = s.bits();
      ASSERT_EQ(static_cast<int>(bits.size()), width);
      const State back = State::from_bits(bits);
      ASSERT_EQ(back, s);
      ASSERT_EQ(State::from_string(s.to_string()), s);
      // independent decoding: character i is feature i+1
      const std::string text = s.to_string();
      for (int f = 1; f <= width; ++f) {
        ASSERT_EQ(text[f - 1] - '0', s[f]);
      }
    }
  }
}

TEST(State, FlipAndWith) {
  const State s = State::from_string("0011");
  EXPECT_EQ(s.flipped(1).to_string(), "1011");
  EXPECT_EQ(s.with(4, 0).to_string(), "0010");
  EXPECT_EQ(s.with(4, 1), s);
  EXPECT_EQ(s.flipped(2).flipped(2), s);
}

TEST(State, EqualityHashAndOrderAgree) {
  std::unordered_set<State, StateHash> hashed;
  std::set<State> ordered;
  for (std::uint64_t code = 0; code < 256; ++code) {
    hashed.insert(State::from_code(code, 8));
    ordered.insert(State::from_code(code, 8));
    hashed.insert(State::from_string(State::from_code(code, 8).to_string()));
  }
  EXPECT_EQ(hashed.size(), 256u);
  EXPECT_EQ(ordered.size(), 256u);
  // same code, different width are different states
  EXPECT_NE(State::from_code(1, 3), State::from_code(1, 4));
  EXPECT_LT(State::from_string("0011"), State::from_string("0100"));
}

TEST(ValidateTransitionSet, AcceptsUniformWidthAndKnownActions) {
  const std::vector<TransitionTuple> ok = {tuple("0000", 4, "0001"),
                                           tuple("0001", 3, "0011"),
                                           tuple("0011", 1, "1000")};
  EXPECT_NO_THROW(validate_transition_set(ok, 4));
  EXPECT_NO_THROW(validate_transition_set(ok, 4, 4));
}

TEST(ValidateTransitionSet, RejectsWidthMismatch) {
  const std::vector<TransitionTuple> mixed = {tuple("0000", 4, "0001"),
                                              tuple("000", 1, "001")};
  EXPECT_EQ(error_of([&] { validate_transition_set(mixed, 4); }),
            ErrorCode::kWidthMismatch);
  const std::vector<TransitionTuple> inner = {tuple("0000", 4, "001")};
  EXPECT_EQ(error_of([&] { validate_transition_set(inner, 4); }),
            ErrorCode::kWidthMismatch);
}

TEST(ValidateTransitionSet, RejectsUnknownAction) {
  const std::vector<TransitionTuple> zero = {tuple("0000", 0, "0000")};
  EXPECT_EQ(error_of([&] { validate_transition_set(zero, 4); }),
            ErrorCode::kUnknownAction);
  const std::vector<TransitionTuple> high = {tuple("0000", 5, "0000")};
  EXPECT_EQ(error_of([&] { validate_transition_set(high, 4, 4); }),
            ErrorCode::kUnknownAction);
}

TEST(TabularPolicy, LookupAndMissing) {
  TabularPolicy pi;
  pi.set(State::from_string("01"), 2);
  EXPECT_EQ(pi.at(State::from_string("01")), 2);
  EXPECT_FALSE(pi.find(State::from_string("00")).has_value());
  EXPECT_EQ(error_of([&] { pi.at(State::from_string("00")); }),
            ErrorCode::kMissingPolicy);

  TabularValueFunction v;
  v.set(State::from_string("01"), -3.5);
  EXPECT_DOUBLE_EQ(v.at(State::from_string("01")), -3.5);
  EXPECT_EQ(error_of([&] { v.at(State::from_string("10")); }),
            ErrorCode::kMissingValue);
}
