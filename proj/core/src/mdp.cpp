#include "apg/mdp.hpp"

#include <string>

namespace apg {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidFeature: return "invalid-feature";
    case ErrorCode::kWidthMismatch: return "width-mismatch";
    case ErrorCode::kUnknownAction: return "unknown-action";
    case ErrorCode::kPrecondition: return "precondition";
    case ErrorCode::kEmptySet: return "empty-set";
    case ErrorCode::kMissingPolicy: return "missing-policy";
    case ErrorCode::kMissingValue: return "missing-value";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kGenerationBudget: return "generation-budget-exhausted";
    case ErrorCode::kUndefinedGap: return "undefined-gap";
    case ErrorCode::kClassification: return "classification";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kVersion: return "version";
    case ErrorCode::kSchema: return "schema";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
  }
  return "unknown";
}

State State::from_bits(std::span<const int> bits) {
  if (bits.size() > static_cast<std::size_t>(kMaxFeatures)) {
    throw Error(ErrorCode::kInvalidFeature,
                "state width " + std::to_string(bits.size()) +
                    " exceeds " + std::to_string(kMaxFeatures));
  }
  std::uint64_t code = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] != 0 && bits[i] != 1) {
      throw Error(ErrorCode::kInvalidFeature,
                  "feature " + std::to_string(i + 1) + " has value " +
                      std::to_string(bits[i]) + ", expected 0 or 1");
    }
    code = (code << 1) | static_cast<std::uint64_t>(bits[i]);
  }
  return State(code, static_cast<int>(bits.size()));
}

State State::from_string(std::string_view text) {
  std::vector<int> bits;
  bits.reserve(text.size());
  for (char c : text) {
    if (c != '0' && c != '1') {
      throw Error(ErrorCode::kInvalidFeature,
                  "invalid state string '" + std::string(text) + "'");
    }
    bits.push_back(c - '0');
  }
  return from_bits(bits);
}

State State::from_code(std::uint64_t code, int width) {
  if (width < 0 || width > kMaxFeatures ||
      (width < 64 && (code >> width) != 0)) {
    throw Error(ErrorCode::kInvalidFeature,
                "code does not fit in " + std::to_string(width) + " features");
  }
  return State(code, width);
}

State State::with(FeatureId f, int value) const {
  if (f < 1 || f > width_) {
    throw Error(ErrorCode::kInvalidFeature,
                "feature " + std::to_string(f) + " out of range");
  }
  if (value != 0 && value != 1) {
    throw Error(ErrorCode::kInvalidFeature, "feature value must be 0 or 1");
  }
  const std::uint64_t mask = std::uint64_t{1} << (width_ - f);
  return State(value ? (code_ | mask) : (code_ & ~mask), width_);
}

std::vector<int> State::bits() const {
  std::vector<int> out(width_);
  for (int f = 1; f <= width_; ++f) out[f - 1] = (*this)[f];
  return out;
}

std::string State::to_string() const {
  std::string out(width_, '0');
  for (int f = 1; f <= width_; ++f) {
    if ((*this)[f]) out[f - 1] = '1';
  }
  return out;
}

void validate_transition_set(std::span<const TransitionTuple> tuples,
                             int num_features,
                             std::optional<int> num_actions) {
  for (std::size_t i = 0; i < tuples.size(); ++i) {
    const auto& t = tuples[i];
    if (t.s.width() != num_features || t.s_next.width() != num_features) {
      throw Error(ErrorCode::kWidthMismatch,
                  "tuple " + std::to_string(i) + " has width " +
                      std::to_string(t.s.width()) + "/" +
                      std::to_string(t.s_next.width()) + ", expected " +
                      std::to_string(num_features));
    }
    if (t.a < 1 || (num_actions && t.a > *num_actions)) {
      throw Error(ErrorCode::kUnknownAction,
                  "tuple " + std::to_string(i) + " has unknown action id " +
                      std::to_string(t.a));
    }
  }
}

std::optional<ActionId> TabularPolicy::find(const State& s) const {
  auto it = table_.find(s);
  if (it == table_.end()) return std::nullopt;
  return it->second;
}

ActionId TabularPolicy::at(const State& s) const {
  auto it = table_.find(s);
  if (it == table_.end()) {
    throw Error(ErrorCode::kMissingPolicy,
                "policy undefined at state " + s.to_string());
  }
  return it->second;
}

std::optional<double> TabularValueFunction::find(const State& s) const {
  auto it = table_.find(s);
  if (it == table_.end()) return std::nullopt;
  return it->second;
}

double TabularValueFunction::at(const State& s) const {
  auto it = table_.find(s);
  if (it == table_.end()) {
    throw Error(ErrorCode::kMissingValue,
                "value undefined at state " + s.to_string());
  }
  return it->second;
}

}  // namespace apg
