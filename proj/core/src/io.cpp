#include "apg/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"

namespace apg {

using nlohmann::json;

namespace {

[[noreturn]] void schema_error(const std::string& what) {
  throw Error(ErrorCode::kSchema, what);
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // byte offset -> line:column
    std::size_t line = 1;
    std::size_t col = 1;
    const std::size_t end = std::min<std::size_t>(e.byte, text.size());
    for (std::size_t i = 0; i + 1 < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string context = text.substr(end > 20 ? end - 20 : 0, 40);
    std::replace(context.begin(), context.end(), '\n', ' ');
    throw Error(ErrorCode::kParse, "JSON parse error at line " +
                                       std::to_string(line) + ", column " +
                                       std::to_string(col) + " near '" +
                                       context + "'");
  }
}

void check_version(const json& j) {
  if (!j.is_object() || !j.contains("schema_version")) return;
  const auto& v = j.at("schema_version");
  int major = 0;
  if (v.is_number_integer()) {
    major = v.get<int>();
  } else if (v.is_string()) {
    major = std::atoi(v.get<std::string>().c_str());
  } else {
    schema_error("schema_version must be an integer or string");
  }
  if (major != kSchemaVersion) {
    throw Error(ErrorCode::kVersion,
                "unsupported schema_version " + v.dump() + " (expected " +
                    std::to_string(kSchemaVersion) + ")");
  }
}

// Wraps nlohmann type errors into schema errors.
template <typename Fn>
auto guarded(const char* what, Fn fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const json::exception& e) {
    schema_error(std::string("invalid ") + what + ": " + e.what());
  }
}

State state_from(const json& j, int width) {
  const auto text = j.get<std::string>();
  const State s = State::from_string(text);
  if (width >= 0 && s.width() != width) {
    throw Error(ErrorCode::kWidthMismatch,
                "state '" + text + "' has width " + std::to_string(s.width()) +
                    ", expected " + std::to_string(width));
  }
  return s;
}

std::string format_probability(double p) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", p);
  return buf;
}

}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for reading");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "failed writing '" + path + "'");
}

std::string domain_to_json(const PrereqWorldDomain& dom) {
  json prereqs = json::object();
  for (int j = 1; j <= dom.m; ++j) {
    prereqs[std::to_string(j)] = dom.prerequisites(j);
  }
  json out = {{"schema_version", kSchemaVersion},
              {"m", dom.m},
              {"rho", dom.rho},
              {"goal", dom.goal},
              {"prereqs", prereqs}};
  return out.dump(2) + "\n";
}

PrereqWorldDomain domain_from_json(const std::string& text) {
  const json j = parse_json(text);
  check_version(j);
  auto dom = guarded("domain", [&] {
    PrereqWorldDomain d;
    d.m = j.at("m").get<int>();
    d.rho = j.at("rho").get<double>();
    d.goal = j.value("goal", 1);
    d.prereqs.assign(std::max(d.m, 0), {});
    for (const auto& [key, value] : j.at("prereqs").items()) {
      const int item = std::stoi(key);
      if (item < 1 || item > d.m) schema_error("prereqs key " + key + " out of range");
      auto c = value.get<std::vector<int>>();
      std::sort(c.begin(), c.end());
      d.prereqs[item - 1] = std::move(c);
    }
    return d;
  });
  try {
    validate_domain(dom);
  } catch (const Error& e) {
    schema_error(e.what());
  }
  return dom;
}

std::string transitions_to_json(const std::vector<TransitionTuple>& tuples) {
  json arr = json::array();
  for (const auto& t : tuples) {
    arr.push_back({{"s", t.s.to_string()},
                   {"a", t.a},
                   {"s_next", t.s_next.to_string()},
                   {"r", t.r},
                   {"terminal", t.terminal}});
  }
  json out = {{"schema_version", kSchemaVersion}, {"transitions", arr}};
  return out.dump(1) + "\n";
}

std::vector<TransitionTuple> transitions_from_json(const std::string& text) {
  const json j = parse_json(text);
  check_version(j);
  const json& arr = j.is_array() ? j : guarded("transitions", [&]() -> const json& {
    return j.at("transitions");
  });
  if (!arr.is_array()) schema_error("transitions must be an array");
  std::vector<TransitionTuple> out;
  out.reserve(arr.size());
  int width = -1;
  for (const auto& e : arr) {
    out.push_back(guarded("transition", [&] {
      TransitionTuple t;
      t.s = state_from(e.at("s"), width);
      width = t.s.width();
      t.a = e.at("a").get<int>();
      t.s_next = state_from(e.at("s_next"), width);
      t.r = e.at("r").get<double>();
      const auto& term = e.at("terminal");
      if (term.is_boolean()) {
        t.terminal = term.get<bool>();
      } else {
        const int flag = term.get<int>();
        if (flag != 0 && flag != 1) schema_error("terminal flag must be 0 or 1");
        t.terminal = flag == 1;
      }
      return t;
    }));
  }
  if (!out.empty()) validate_transition_set(out, width);
  return out;
}

std::string policy_to_json(const PolicyArtifact& artifact) {
  // ordered by state code so output is byte-stable
  std::vector<std::pair<State, ActionId>> actions(artifact.policy.entries().begin(),
                                                  artifact.policy.entries().end());
  std::sort(actions.begin(), actions.end());
  std::vector<std::pair<State, double>> values(artifact.values.entries().begin(),
                                               artifact.values.entries().end());
  std::sort(values.begin(), values.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  json pol = json::object();
  for (const auto& [s, a] : actions) pol[s.to_string()] = a;
  json val = json::object();
  for (const auto& [s, v] : values) val[s.to_string()] = v;
  json out = {{"schema_version", kSchemaVersion},
              {"num_features", artifact.num_features},
              {"gamma", artifact.gamma},
              {"policy", pol},
              {"value", val}};
  if (artifact.min_action_gap) out["min_action_gap"] = *artifact.min_action_gap;
  return out.dump(1) + "\n";
}

PolicyArtifact policy_from_json(const std::string& text) {
  const json j = parse_json(text);
  check_version(j);
  return guarded("policy", [&] {
    PolicyArtifact a;
    a.num_features = j.at("num_features").get<int>();
    a.gamma = j.value("gamma", 1.0);
    for (const auto& [key, v] : j.at("policy").items()) {
      const int action = v.get<int>();
      if (action < 1) {
        throw Error(ErrorCode::kUnknownAction,
                    "policy action " + std::to_string(action) + " for " + key);
      }
      a.policy.set(state_from(json(key), a.num_features), action);
    }
    if (j.contains("value")) {
      for (const auto& [key, v] : j.at("value").items()) {
        a.values.set(state_from(json(key), a.num_features), v.get<double>());
      }
    }
    if (j.contains("min_action_gap")) {
      a.min_action_gap = j.at("min_action_gap").get<double>();
    }
    return a;
  });
}

std::string apg_to_json(const Apg& apg) {
  json nodes = json::array();
  for (std::size_t i = 0; i < apg.num_nodes(); ++i) {
    const auto& n = apg.nodes()[i];
    json constraints = json::array();
    for (const auto& [f, v] : n.split.constraints) constraints.push_back({f, v});
    nodes.push_back({{"id", i + 1},
                     {"action", n.split.action},
                     {"constraints", constraints},
                     {"count", n.count}});
  }
  json out = {{"schema_version", kSchemaVersion},
              {"nodes", nodes},
              {"terminal_id", apg.terminal_index() + 1},
              {"dimension", apg.dimension()},
              {"matrix", apg.matrix()}};
  return out.dump(1) + "\n";
}

Apg apg_from_json(const std::string& text) {
  const json j = parse_json(text);
  check_version(j);
  auto [nodes, matrix] = guarded("APG", [&] {
    const auto& arr = j.at("nodes");
    std::vector<Apg::Node> nodes(arr.size());
    for (const auto& e : arr) {
      const auto id = e.at("id").get<std::size_t>();
      if (id < 1 || id > arr.size()) schema_error("node id out of range");
      Apg::Node& n = nodes[id - 1];
      if (n.split.action != 0) schema_error("duplicate node id");
      n.split.action = e.at("action").get<int>();
      for (const auto& c : e.at("constraints")) {
        n.split.constraints.emplace_back(c.at(0).get<int>(), c.at(1).get<int>());
      }
      n.count = e.value("count", std::size_t{0});
    }
    if (j.contains("terminal_id") &&
        j.at("terminal_id").get<std::size_t>() != nodes.size() + 1) {
      schema_error("terminal_id must equal the node count plus one");
    }
    std::vector<double> matrix;
    for (const auto& row : j.at("matrix")) {
      if (row.is_array()) {
        for (const auto& x : row) matrix.push_back(x.get<double>());
      } else {
        matrix.push_back(row.get<double>());
      }
    }
    return std::pair{std::move(nodes), std::move(matrix)};
  });
  return Apg::from_parts(std::move(nodes), std::move(matrix));
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json out = {{"schema_version", kSchemaVersion},
              {"m", cfg.m},
              {"rho", cfg.rho},
              {"num_instances", cfg.num_instances},
              {"num_evals", cfg.num_evals},
              {"coverage", cfg.coverage},
              {"sample_fraction", cfg.sample_fraction},
              {"horizon", cfg.horizon},
              {"seed", cfg.seed},
              {"epsilon_mode",
               cfg.epsilon_mode == EpsilonMode::kGap ? "gap" : "explicit"},
              {"epsilon", cfg.epsilon},
              {"m_min", cfg.m_min},
              {"m_max", cfg.m_max},
              {"threads", cfg.threads}};
  return out.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text) {
  const json j = parse_json(text);
  check_version(j);
  auto cfg = guarded("config", [&] {
    ExperimentConfig c;
    c.m = j.value("m", c.m);
    c.rho = j.value("rho", c.rho);
    c.num_instances = j.value("num_instances", c.num_instances);
    c.num_evals = j.value("num_evals", c.num_evals);
    if (j.contains("coverage")) {
      const auto& cov = j.at("coverage");
      c.coverage = cov.is_array() ? cov.get<std::vector<double>>()
                                  : std::vector<double>{cov.get<double>()};
    }
    c.sample_fraction = j.value("sample_fraction", c.sample_fraction);
    c.horizon = j.value("horizon", c.horizon);
    c.seed = j.value("seed", c.seed);
    const auto mode = j.value("epsilon_mode", std::string("explicit"));
    if (mode == "gap") {
      c.epsilon_mode = EpsilonMode::kGap;
    } else if (mode == "explicit") {
      c.epsilon_mode = EpsilonMode::kExplicit;
    } else {
      schema_error("epsilon_mode must be 'gap' or 'explicit'");
    }
    c.epsilon = j.value("epsilon", c.epsilon);
    c.m_min = j.value("m_min", c.m_min);
    c.m_max = j.value("m_max", c.m_max);
    c.threads = j.value("threads", c.threads);
    return c;
  });
  try {
    cfg.validate();
  } catch (const Error& e) {
    schema_error(e.what());
  }
  return cfg;
}

std::string export_dot(const Apg& apg) {
  std::ostringstream os;
  os << "digraph APG {\n";
  os << "  node [shape=ellipse];\n";
  for (std::size_t i = 0; i < apg.num_nodes(); ++i) {
    os << "  b" << i + 1 << " [label=\"b" << i + 1 << "\\na" << apg.action_of(i)
       << "\"];\n";
  }
  os << "  END [label=\"END\", shape=doublecircle];\n";
  auto name = [&](std::size_t i) {
    return i == apg.terminal_index() ? std::string("END")
                                     : "b" + std::to_string(i + 1);
  };
  for (std::size_t i = 0; i < apg.dimension(); ++i) {
    for (std::size_t j = 0; j < apg.dimension(); ++j) {
      const double p = apg.transition(i, j);
      if (p == 0.0) continue;
      os << "  " << name(i) << " -> " << name(j) << " [label=\""
         << format_probability(p) << "\"];\n";
    }
  }
  os << "}\n";
  return os.str();
}

void export_dot(const Apg& apg, const std::string& path) {
  write_text_file(path, export_dot(apg));
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(),
                 nullptr) != 1) {
    throw Error(ErrorCode::kIo, "SHA-256 digest failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0')
       << static_cast<int>(digest[i]);
  }
  return os.str();
}

std::string file_digest(const std::string& path) {
  return sha256_hex(read_text_file(path));
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string manifest_to_json(const RunManifest& manifest) {
  json out = {{"schema_version", kSchemaVersion},
              {"tool_version", manifest.tool_version},
              {"command", manifest.command},
              {"config_digest", manifest.config_digest},
              {"input_digests", manifest.input_digests},
              {"started_at", manifest.started_at},
              {"finished_at", manifest.finished_at}};
  out["seed"] = manifest.seed ? json(*manifest.seed) : json(nullptr);
  return out.dump(2) + "\n";
}

void write_manifest(const std::string& artifact_path,
                    const RunManifest& manifest) {
  write_text_file(artifact_path + ".manifest.json", manifest_to_json(manifest));
}

}  // namespace apg
