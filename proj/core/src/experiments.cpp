#include "apg/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iostream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace apg {

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorCode::kInvalidArgument, "invalid experiment config: " + msg);
  };
  if (m < 2 || m > 24) fail("m must lie in 2..24");
  if (!(rho >= 0.0 && rho <= 1.0)) fail("rho must lie in [0, 1]");
  if (num_instances < 1) fail("num_instances must be >= 1");
  if (num_evals < 1) fail("num_evals must be >= 1");
  if (coverage.empty()) fail("coverage list is empty");
  for (double c : coverage) {
    if (!(c > 0.0 && c <= 1.0)) fail("coverage levels must lie in (0, 1]");
  }
  if (!(sample_fraction > 0.0 && sample_fraction <= 1.0)) {
    fail("sample_fraction must lie in (0, 1]");
  }
  if (horizon < 0) fail("horizon must be >= 0");
  if (epsilon_mode == EpsilonMode::kExplicit && !(epsilon > 0.0)) {
    fail("epsilon must be positive");
  }
  if (m_min < 2 || m_max < m_min || m_max > 24) fail("bad m range");
}

ExperimentConfig ExperimentConfig::full_scale(ExperimentConfig base) {
  base.m = 15;
  base.num_instances = 100;
  base.num_evals = 1000;
  return base;
}

namespace {

// Runs fn(i) for i in [0, count) on a small worker pool; results keep index
// order so output does not depend on scheduling.
template <typename Fn>
auto parallel_map(int count, int threads, Fn fn)
    -> std::vector<decltype(fn(0))> {
  using Result = decltype(fn(0));
  std::vector<std::optional<Result>> slots(count);
  int workers = threads > 0 ? threads
                            : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, std::max(1, count));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&]() {
    for (int i = next++; i < count; i = next++) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  std::vector<Result> out;
  out.reserve(count);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) /
         static_cast<double>(xs.size());
}

double sample_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double mu = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double median_of(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  if (n == 0) return 0.0;
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

std::size_t non_terminal_count(const PrereqWorldDomain& dom) {
  return std::size_t{1} << (dom.m - 1);
}

std::size_t fraction_count(double fraction, std::size_t n) {
  const auto k =
      static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  return std::clamp<std::size_t>(k, 1, n);
}

// Drops the unfinished last episode so every successor was also sampled as a
// source. Kept whole if no episode finished.
void drop_open_episode(std::vector<TransitionTuple>& tuples) {
  std::size_t end = tuples.size();
  while (end > 0 && !tuples[end - 1].terminal) --end;
  if (end > 0) tuples.resize(end);
}

ScoreFn value_score(const SolvedInstance& inst) {
  return [&inst](const State& s) { return inst.value(s); };
}

// Distributions of pi(s_t) for t = 0..horizon on the grounded chain.
std::vector<ActionDistribution> true_action_sequence(
    const TabularMdp& mdp, std::span<const ActionId> actions, const State& s0,
    int horizon) {
  std::vector<double> mass(mdp.num_states(), 0.0);
  std::vector<double> next_mass(mdp.num_states(), 0.0);
  std::vector<std::uint64_t> support{s0.code()};
  std::vector<std::uint64_t> next_support;
  mass[s0.code()] = 1.0;
  double terminated = mdp.terminal(s0.code()) ? 1.0 : 0.0;
  if (terminated > 0.0) {
    mass[s0.code()] = 0.0;
    support.clear();
  }

  std::vector<ActionDistribution> out;
  out.reserve(horizon + 1);
  for (int t = 0;; ++t) {
    ActionDistribution dist;
    std::sort(support.begin(), support.end());
    for (std::uint64_t k : support) dist.actions[actions[k]] += mass[k];
    if (terminated > 0.0) dist.actions[kTerminated] += terminated;
    out.push_back(std::move(dist));
    if (t == horizon) break;

    next_support.clear();
    for (std::uint64_t k : support) {
      for (const auto& o : mdp.outcomes(k, actions[k])) {
        const double p = mass[k] * o.prob;
        if (mdp.terminal(o.next)) {
          terminated += p;
          continue;
        }
        if (next_mass[o.next] == 0.0) next_support.push_back(o.next);
        next_mass[o.next] += p;
      }
      mass[k] = 0.0;
    }
    support.swap(next_support);
    mass.swap(next_mass);
  }
  return out;
}

std::vector<ActionDistribution> predicted_action_sequence(const Apg& apg,
                                                          std::size_t node,
                                                          int horizon) {
  const std::size_t dim = apg.dimension();
  std::vector<double> dist(dim, 0.0);
  std::vector<double> next(dim);
  dist[node] = 1.0;
  std::vector<ActionDistribution> out;
  for (int t = 0;; ++t) {
    ActionDistribution d;
    for (std::size_t i = 0; i < dim; ++i) {
      if (dist[i] == 0.0) continue;
      const ActionId label =
          i == apg.terminal_index() ? kTerminated : apg.action_of(i);
      d.actions[label] += dist[i];
    }
    out.push_back(std::move(d));
    if (t == horizon) break;
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < dim; ++i) {
      if (dist[i] == 0.0) continue;
      for (std::size_t j = 0; j < dim; ++j) {
        next[j] += dist[i] * apg.transition(i, j);
      }
    }
    dist.swap(next);
  }
  return out;
}

std::vector<FeatureId> features_or_empty(const SplitClassifier& classifier,
                                         std::span<const SplitRecord> records,
                                         const State& s, ActionId a,
                                         bool* unclassified) {
  const auto node = classifier.find(s, a);
  if (!node) {
    if (unclassified) *unclassified = true;
    return {};
  }
  return records[*node].features();
}

double feature_agreement(const std::vector<FeatureId>& predicted,
                         const std::vector<FeatureId>& truth, int m) {
  int correct = 0;
  for (FeatureId f = 1; f <= m; ++f) {
    const bool p = std::binary_search(predicted.begin(), predicted.end(), f);
    const bool t = std::binary_search(truth.begin(), truth.end(), f);
    if (p == t) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(m);
}

}  // namespace

SolvedInstance solve_instance(PrereqWorldDomain dom, EpsilonMode mode,
                              double explicit_epsilon) {
  auto mdp = to_tabular(dom);
  auto sol = solve(mdp);
  double eps = explicit_epsilon;
  if (mode == EpsilonMode::kGap) {
    eps = min_action_gap(q_values(mdp, sol.values, sol.gamma));
  }
  auto policy = sol.policy();
  return SolvedInstance{std::move(dom), std::move(mdp), std::move(sol),
                        std::move(policy), eps};
}

PrereqWorldDomain generate_domain(int m, double rho, std::uint64_t seed,
                                  std::uint64_t index) {
  // A draw can paint itself into a corner where every remaining edge
  // overshoots; restart from an empty graph on a fresh stream.
  for (int restart = 0;; ++restart) {
    const std::string stream = "domain/m" + std::to_string(m) +
                               (restart ? "/r" + std::to_string(restart) : "");
    Rng rng = Rng::derive(seed, stream, index);
    try {
      return generate_instance(m, rho, rng);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kGenerationBudget ||
          restart + 1 >= kGenerationRestarts) {
        throw;
      }
    }
  }
}

SolvedInstance make_instance(int m, double rho, std::uint64_t seed,
                             std::uint64_t index, const ExperimentConfig& cfg) {
  return solve_instance(generate_domain(m, rho, seed, index), cfg.epsilon_mode,
                        cfg.epsilon);
}

std::vector<TransitionTuple> sample_transition_set(
    const PrereqWorldDomain& dom, const TabularPolicy& policy, double coverage,
    Rng& rng) {
  if (!(coverage > 0.0 && coverage <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "coverage must lie in (0, 1]");
  }
  std::vector<std::uint64_t> sources;
  for (std::uint64_t k = 0; k < (std::uint64_t{1} << dom.m); ++k) {
    if (!dom.is_terminal(State::from_code(k, dom.m))) sources.push_back(k);
  }
  const std::size_t take = fraction_count(coverage, sources.size());
  // partial Fisher-Yates
  for (std::size_t i = 0; i < take; ++i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(i, sources.size() - 1));
    std::swap(sources[i], sources[j]);
  }
  std::vector<TransitionTuple> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    const State s = State::from_code(sources[i], dom.m);
    out.push_back(sample_step(dom, s, policy.at(s), rng));
  }
  return out;
}

std::vector<TransitionTuple> sample_trajectories(
    const PrereqWorldDomain& dom, const TabularPolicy& policy,
    std::size_t max_tuples, Rng& rng, std::size_t episode_cap) {
  if (max_tuples < 1) {
    throw Error(ErrorCode::kInvalidArgument, "max_tuples must be >= 1");
  }
  std::vector<TransitionTuple> out;
  out.reserve(max_tuples);
  while (out.size() < max_tuples) {
    State s = sample_start_state(dom, rng);
    std::size_t length = 0;
    while (out.size() < max_tuples) {
      if (length == episode_cap) {
        std::cerr << "warning: episode from " << s.to_string()
                  << " exceeded " << episode_cap << " steps; truncated\n";
        break;
      }
      out.push_back(sample_step(dom, s, policy.at(s), rng));
      ++length;
      if (out.back().terminal) break;
      s = out.back().s_next;
    }
  }
  return out;
}

std::map<State, std::vector<FeatureId>> ground_truth_relevant_features(
    const PrereqWorldDomain& dom, const TabularPolicy& policy,
    const TabularValueFunction& values, double epsilon, Rng& rng) {
  const auto tuples = sample_transition_set(dom, policy, 1.0, rng);
  const auto sets = divide_abstract_states(
      tuples, policy, [&](const State& s) { return values.at(s); }, epsilon);
  const Apg apg = Apg::build(sets, policy);
  std::map<State, std::vector<FeatureId>> out;
  for (const auto& t : tuples) out[t.s] = relevant_features(apg, t.s, policy);
  return out;
}

ActionDistribution true_action_distribution(const TabularMdp& mdp,
                                            std::span<const ActionId> actions,
                                            const State& s0, int n) {
  if (n < 0) throw Error(ErrorCode::kInvalidArgument, "n must be >= 0");
  return true_action_sequence(mdp, actions, s0, n).back();
}

ActionDistribution true_action_distribution(const PrereqWorldDomain& dom,
                                            const TabularPolicy& policy,
                                            const State& s0, int n) {
  const auto mdp = to_tabular(dom);
  std::vector<ActionId> actions(mdp.num_states(), 0);
  for (std::uint64_t k = 0; k < mdp.num_states(); ++k) {
    if (!mdp.terminal(k)) actions[k] = policy.at(mdp.state(k));
  }
  return true_action_distribution(mdp, actions, s0, n);
}

double total_variation(const ActionDistribution& a,
                       const ActionDistribution& b) {
  double sum = 0.0;
  for (const auto& [label, p] : a.actions) sum += std::abs(p - b.probability(label));
  for (const auto& [label, p] : b.actions) {
    if (!a.actions.count(label)) sum += p;
  }
  return 0.5 * sum;
}

std::vector<GeneralizationRow> run_generalization(const ExperimentConfig& cfg) {
  cfg.validate();
  struct PerInstance {
    std::vector<double> accuracy;  // per coverage level
    std::vector<double> nodes;
    std::vector<int> unclassified;
  };
  const auto results = parallel_map(cfg.num_instances, cfg.threads, [&](int idx) {
    const auto inst = make_instance(cfg.m, cfg.rho, cfg.seed, idx, cfg);
    const auto g = value_score(inst);

    Rng ref_rng = Rng::derive(cfg.seed, "reference", idx);
    const auto ref_tuples = sample_transition_set(inst.domain, inst.policy, 1.0, ref_rng);
    const auto ref_sets = divide_abstract_states(ref_tuples, inst.policy, g, inst.epsilon);
    std::vector<SplitRecord> ref_records;
    for (const auto& s : ref_sets) ref_records.push_back(s.split);
    const SplitClassifier ref_classifier(ref_records);

    Rng eval_rng = Rng::derive(cfg.seed, "evals", idx);
    std::vector<State> evals;
    for (int e = 0; e < cfg.num_evals; ++e) {
      evals.push_back(sample_start_state(inst.domain, eval_rng));
    }

    PerInstance out;
    for (std::size_t level = 0; level < cfg.coverage.size(); ++level) {
      Rng rng = Rng::derive(cfg.seed, "coverage/" + std::to_string(level), idx);
      const auto tuples =
          sample_transition_set(inst.domain, inst.policy, cfg.coverage[level], rng);
      const auto sets = divide_abstract_states(tuples, inst.policy, g, inst.epsilon);
      std::vector<SplitRecord> records;
      for (const auto& s : sets) records.push_back(s.split);
      const SplitClassifier classifier(records);

      double acc = 0.0;
      int unclassified = 0;
      for (const State& s : evals) {
        const ActionId a = inst.policy.at(s);
        bool missing = false;
        const auto truth = features_or_empty(ref_classifier, ref_records, s, a, nullptr);
        const auto pred = features_or_empty(classifier, records, s, a, &missing);
        unclassified += missing ? 1 : 0;
        acc += feature_agreement(pred, truth, cfg.m);
      }
      out.accuracy.push_back(acc / static_cast<double>(evals.size()));
      out.nodes.push_back(static_cast<double>(sets.size()));
      out.unclassified.push_back(unclassified);
    }
    return out;
  });

  std::vector<GeneralizationRow> rows;
  for (std::size_t level = 0; level < cfg.coverage.size(); ++level) {
    std::vector<double> acc;
    std::vector<double> nodes;
    int unclassified = 0;
    for (const auto& r : results) {
      acc.push_back(r.accuracy[level]);
      nodes.push_back(r.nodes[level]);
      unclassified += r.unclassified[level];
    }
    rows.push_back({cfg.coverage[level], mean_of(acc), sample_std(acc),
                    cfg.num_instances, mean_of(nodes), unclassified});
  }
  return rows;
}

std::vector<NhopRow> run_nhop(const ExperimentConfig& cfg) {
  cfg.validate();
  struct PerInstance {
    std::vector<double> agreement;  // per n
    std::vector<double> tv;
  };
  const auto results = parallel_map(cfg.num_instances, cfg.threads, [&](int idx) {
    const auto inst = make_instance(cfg.m, cfg.rho, cfg.seed, idx, cfg);
    Rng rng = Rng::derive(cfg.seed, "trajectories", idx);
    auto tuples = sample_trajectories(
        inst.domain, inst.policy,
        fraction_count(cfg.sample_fraction, non_terminal_count(inst.domain)), rng);
    drop_open_episode(tuples);
    const auto sets =
        divide_abstract_states(tuples, inst.policy, value_score(inst), inst.epsilon);
    const Apg apg = Apg::build(sets, inst.policy);

    PerInstance out;
    out.agreement.assign(cfg.horizon + 1, 0.0);
    out.tv.assign(cfg.horizon + 1, 0.0);
    Rng eval_rng = Rng::derive(cfg.seed, "nhop-evals", idx);
    for (int e = 0; e < cfg.num_evals; ++e) {
      const State s0 = sample_start_state(inst.domain, eval_rng);
      const auto truth = true_action_sequence(inst.mdp, inst.solution.actions, s0,
                                              cfg.horizon);
      const auto node = apg.find_node(s0, inst.policy.at(s0));
      if (!node) {
        // no prediction possible: counts as disagreement with full TV
        for (int n = 0; n <= cfg.horizon; ++n) out.tv[n] += 1.0;
        continue;
      }
      const auto predicted = predicted_action_sequence(apg, *node, cfg.horizon);
      for (int n = 0; n <= cfg.horizon; ++n) {
        if (predicted[n].mode() == truth[n].mode()) out.agreement[n] += 1.0;
        out.tv[n] += total_variation(predicted[n], truth[n]);
      }
    }
    for (int n = 0; n <= cfg.horizon; ++n) {
      out.agreement[n] /= cfg.num_evals;
      out.tv[n] /= cfg.num_evals;
    }
    return out;
  });

  std::vector<NhopRow> rows;
  for (int n = 0; n <= cfg.horizon; ++n) {
    std::vector<double> agree;
    std::vector<double> tv;
    for (const auto& r : results) {
      agree.push_back(r.agreement[n]);
      tv.push_back(r.tv[n]);
    }
    rows.push_back({n, mean_of(agree), sample_std(agree), mean_of(tv),
                    cfg.num_instances});
  }
  return rows;
}

std::vector<SizeRow> run_size(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<SizeRow> rows;
  for (int m = cfg.m_min; m <= cfg.m_max; ++m) {
    const auto nodes = parallel_map(cfg.num_instances, cfg.threads, [&](int idx) {
      const auto inst = make_instance(m, cfg.rho, cfg.seed, idx, cfg);
      Rng rng = Rng::derive(cfg.seed, "size/m" + std::to_string(m), idx);
      const auto tuples = sample_trajectories(
          inst.domain, inst.policy,
          fraction_count(cfg.sample_fraction, non_terminal_count(inst.domain)), rng);
      const auto sets =
          divide_abstract_states(tuples, inst.policy, value_score(inst), inst.epsilon);
      return static_cast<double>(sets.size());
    });
    rows.push_back({m, std::uint64_t{1} << m, median_of(nodes), mean_of(nodes),
                    sample_std(nodes), cfg.num_instances});
  }
  return rows;
}

namespace {

std::string fmt_double(double x) {
  std::ostringstream os;
  os.precision(10);
  os << x;
  return os.str();
}

}  // namespace

std::string to_csv(const std::vector<GeneralizationRow>& rows,
                   const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "coverage,m,rho,instances,mean_accuracy,std_accuracy,mean_nodes,"
        "unclassified_evals\n";
  for (const auto& r : rows) {
    os << fmt_double(r.coverage) << ',' << cfg.m << ',' << fmt_double(cfg.rho)
       << ',' << r.instances << ',' << fmt_double(r.mean_accuracy) << ','
       << fmt_double(r.std_accuracy) << ',' << fmt_double(r.mean_nodes) << ','
       << r.unclassified << '\n';
  }
  return os.str();
}

std::string to_csv(const std::vector<NhopRow>& rows, const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "n,m,rho,instances,agreement,std_agreement,mean_tv\n";
  for (const auto& r : rows) {
    os << r.n << ',' << cfg.m << ',' << fmt_double(cfg.rho) << ','
       << r.instances << ',' << fmt_double(r.agreement) << ','
       << fmt_double(r.std_agreement) << ',' << fmt_double(r.mean_tv) << '\n';
  }
  return os.str();
}

std::string to_csv(const std::vector<SizeRow>& rows, const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "m,rho,states,instances,median_nodes,mean_nodes,std_nodes,"
        "median_nodes_per_state\n";
  for (const auto& r : rows) {
    os << r.m << ',' << fmt_double(cfg.rho) << ',' << r.states << ','
       << r.instances << ',' << fmt_double(r.median_nodes) << ','
       << fmt_double(r.mean_nodes) << ',' << fmt_double(r.std_nodes) << ','
       << fmt_double(r.median_nodes / static_cast<double>(r.states)) << '\n';
  }
  return os.str();
}

}  // namespace apg
