#pragma once

// File formats: domain / transition / policy / APG / config JSON, results
// CSV, Graphviz DOT export and run manifests.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "apg/apg.hpp"
#include "apg/experiments.hpp"
#include "apg/prereqworld.hpp"

namespace apg {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolVersion = "1.0.0";

// Policy and value tables as written by `solve`.
struct PolicyArtifact {
  int num_features = 0;
  double gamma = 1.0;
  TabularPolicy policy;
  TabularValueFunction values;
  std::optional<double> min_action_gap;
};

std::string read_text_file(const std::string& path);   // throws kIo
void write_text_file(const std::string& path, const std::string& text);

// Each parser throws kParse (with line:column) for malformed JSON, kVersion
// for an unknown schema major and kSchema for structurally invalid content.
std::string domain_to_json(const PrereqWorldDomain& dom);
PrereqWorldDomain domain_from_json(const std::string& text);

std::string transitions_to_json(const std::vector<TransitionTuple>& tuples);
// Accepts a bare array of tuple objects or {"transitions": [...]}.
std::vector<TransitionTuple> transitions_from_json(const std::string& text);

std::string policy_to_json(const PolicyArtifact& artifact);
PolicyArtifact policy_from_json(const std::string& text);

std::string apg_to_json(const Apg& apg);
Apg apg_from_json(const std::string& text);

std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const std::string& text);

// Nodes "b<id>\na<action>", b_T as "END", edges labelled with probabilities
// to three decimals; zero-probability edges are omitted.
std::string export_dot(const Apg& apg);
void export_dot(const Apg& apg, const std::string& path);

struct RunManifest {
  std::string tool_version = kToolVersion;
  std::string command;
  std::string config_digest;
  std::optional<std::uint64_t> seed;
  std::map<std::string, std::string> input_digests;  // path -> sha256
  std::string started_at;
  std::string finished_at;
};

std::string sha256_hex(const std::string& bytes);
std::string file_digest(const std::string& path);
std::string utc_timestamp();

std::string manifest_to_json(const RunManifest& manifest);
// Writes `<artifact_path>.manifest.json`.
void write_manifest(const std::string& artifact_path, const RunManifest& manifest);

}  // namespace apg
