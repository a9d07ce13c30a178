#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "sgltn/jsonio.hpp"
#include "sgltn/llm.hpp"
#include "sgltn/tensor.hpp"

namespace sgltn {

// Bipartite spatial ontology: n low-level concepts (mesh semantics), m
// high-level concepts (region types), and an m x n binary biadjacency matrix
// with an edge where a low-level concept is located within a high-level one.
struct SpatialOntology {
  std::vector<std::string> low_levels;
  std::vector<std::string> high_levels;
  Tensor omega;  // m x n, entries in {0, 1}

  int num_low() const { return int(low_levels.size()); }
  int num_high() const { return int(high_levels.size()); }

  bool has_edge(int hi, int lo) const { return omega.at(hi, lo) != 0.0; }

  int low_index(const std::string& name) const { return index_of(low_levels, name, "low-level"); }
  int high_index(const std::string& name) const { return index_of(high_levels, name, "high-level"); }

  static SpatialOntology empty(std::vector<std::string> lows, std::vector<std::string> highs) {
    SpatialOntology o;
    o.low_levels = std::move(lows);
    o.high_levels = std::move(highs);
    o.omega = Tensor::zeros({o.num_high(), o.num_low()});
    o.validate();
    return o;
  }

  void validate() const {
    check(!low_levels.empty(), "ontology: empty low-level vocabulary");
    check(!high_levels.empty(), "ontology: empty high-level vocabulary");
    require_unique(low_levels, "low_levels");
    require_unique(high_levels, "high_levels");
    check(omega.rank() == 2 && omega.rows() == num_high() && omega.cols() == num_low(),
          "ontology: omega shape " + Tensor::shape_str(omega.shape) + " does not match " +
              std::to_string(num_high()) + "x" + std::to_string(num_low()));
    for (double v : omega.data)
      check(v == 0.0 || v == 1.0, "ontology: omega entries must be 0 or 1");
  }

 private:
  static int index_of(const std::vector<std::string>& v, const std::string& name,
                      const char* kind) {
    auto it = std::find(v.begin(), v.end(), name);
    check(it != v.end(), std::string("ontology: unknown ") + kind + " concept \"" + name + "\"");
    return int(it - v.begin());
  }

  static void require_unique(const std::vector<std::string>& v, const char* field) {
    std::set<std::string> seen;
    for (const auto& s : v)
      check(seen.insert(s).second,
            std::string("ontology: duplicate concept \"") + s + "\" in " + field);
  }
};

struct ScoringConfig {
  double temperature = 1.0;  // K
  double threshold = 0.5;    // gamma

  void validate() const {
    check(temperature > 0.0, "scoring: temperature must be positive");
    check(threshold > 0.0 && threshold < 1.0, "scoring: threshold must be in (0, 1)");
  }
};

struct CompletionConfig {
  int k = 3;            // edges per high-level concept
  int repeats = 1;      // N query repetitions
  int max_retries = 3;  // attempts per repetition, first query included

  void validate(int vocab_size) const {
    check(k >= 1, "completion: k must be positive");
    check(k <= vocab_size, "completion: k exceeds low-level vocabulary size");
    check(repeats >= 1, "completion: repeats must be >= 1");
    check(max_retries >= 1, "completion: max_retries must be >= 1");
  }
};

// Prompt patterns. Placeholders: {low}, {high}, {k}, {lows}, {other_highs},
// {excluded}. Defaults render the exact query sentences the builders expect.
struct PromptTemplates {
  std::string score_template = "{low} is often found in {high}";
  std::string completion_template =
      "Which {k} items from {lows} are most likely to distinguish {high} from {other_highs}. "
      "Answer with a python list using exact strings in {lows}.";
  std::string exclusion_suffix = " Do not respond with concepts in {excluded}";

  static std::string replace_all(std::string s, const std::string& from, const std::string& to) {
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
      s.replace(pos, from.size(), to);
      pos += to.size();
    }
    return s;
  }

  static std::string render_list(const std::vector<std::string>& items) {
    std::string out = "[";
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", '" : "'") + items[i] + "'";
    return out + "]";
  }

  std::string render_score(const std::string& low, const std::string& high) const {
    return replace_all(replace_all(score_template, "{low}", low), "{high}", high);
  }

  std::string render_completion(const std::string& high, const std::vector<std::string>& lows,
                                const std::vector<std::string>& other_highs, int k) const {
    std::string s = completion_template;
    s = replace_all(s, "{k}", std::to_string(k));
    s = replace_all(s, "{lows}", render_list(lows));
    s = replace_all(s, "{high}", high);
    s = replace_all(s, "{other_highs}", render_list(other_highs));
    return s;
  }

  std::string render_exclusion(const std::vector<std::string>& excluded) const {
    return replace_all(exclusion_suffix, "{excluded}", render_list(excluded));
  }
};

struct RelationJudgment {
  std::string low;
  std::string high;
  std::string label;  // likely | sometimes | rarely

  void validate() const {
    check(label == "likely" || label == "sometimes" || label == "rarely",
          "judgment: label must be likely/sometimes/rarely, got \"" + label + "\"");
  }
};

struct OntologyMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

// Region vocabularies sometimes carry an "unknown" placeholder; it names no
// real concept, so builders drop it before querying.
inline std::vector<std::string> drop_unknown(std::vector<std::string> highs) {
  std::erase(highs, "unknown");
  return highs;
}

// ---------------------------------------------------------------------------
// Text scoring (softmax-rescaled log probabilities, threshold pruning)
// ---------------------------------------------------------------------------

// Per-low-concept edge weights before pruning: softmax over high-level
// concepts of score/K. Exposed for tests of the weight invariants.
inline std::vector<double> scoring_weights(const std::vector<double>& scores, double temperature) {
  double mx = *std::max_element(scores.begin(), scores.end());
  std::vector<double> w(scores.size());
  double total = 0.0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    w[j] = std::exp((scores[j] - mx) / temperature);
    total += w[j];
  }
  for (double& v : w) v /= total;
  return w;
}

inline SpatialOntology build_by_scoring(LmScorer& scorer, std::vector<std::string> low_levels,
                                        std::vector<std::string> high_levels,
                                        const ScoringConfig& config,
                                        const PromptTemplates& templates = {}) {
  config.validate();
  SpatialOntology onto =
      SpatialOntology::empty(std::move(low_levels), drop_unknown(std::move(high_levels)));
  int m = onto.num_high(), n = onto.num_low();
  for (int i = 0; i < n; ++i) {
    std::vector<double> scores(std::size_t(m), 0.0);
    for (int j = 0; j < m; ++j) {
      std::string prompt = templates.render_score(onto.low_levels[std::size_t(i)],
                                                  onto.high_levels[std::size_t(j)]);
      try {
        scores[std::size_t(j)] = scorer.score(prompt);
      } catch (const std::exception& e) {
        throw Error(std::string("scoring failed for prompt \"") + prompt + "\": " + e.what());
      }
    }
    std::vector<double> w = scoring_weights(scores, config.temperature);

    // retain the minimal prefix, in descending weight, whose sum exceeds gamma
    std::vector<int> order(std::size_t(m), 0);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return w[std::size_t(a)] > w[std::size_t(b)]; });
    double cum = 0.0;
    for (int r = 0; r < m; ++r) {
      int j = order[std::size_t(r)];
      onto.omega.at(j, i) = 1.0;
      cum += w[std::size_t(j)];
      if (cum > config.threshold) break;
    }
  }
  onto.validate();
  return onto;
}

// ---------------------------------------------------------------------------
// Text completion (top-k query with hallucination retry)
// ---------------------------------------------------------------------------

// Pulls candidate concept tokens out of a chat response: quoted strings
// first, falling back to comma/newline splitting with bracket noise
// stripped. `unknown` collects tokens that match nothing in the vocabulary.
inline std::vector<std::string> extract_concepts(const std::string& response,
                                                 const std::vector<std::string>& vocab,
                                                 std::vector<std::string>* unknown = nullptr) {
  std::vector<std::string> tokens;
  for (char q : {'\'', '"'}) {
    std::size_t pos = 0;
    while (true) {
      std::size_t a = response.find(q, pos);
      if (a == std::string::npos) break;
      std::size_t b = response.find(q, a + 1);
      if (b == std::string::npos) break;
      tokens.push_back(response.substr(a + 1, b - a - 1));
      pos = b + 1;
    }
    if (!tokens.empty()) break;
  }
  if (tokens.empty()) {
    std::string cur;
    auto flush = [&] {
      std::size_t b = cur.find_first_not_of(" \t\r[](){}.");
      std::size_t e = cur.find_last_not_of(" \t\r[](){}.");
      if (b != std::string::npos) tokens.push_back(cur.substr(b, e - b + 1));
      cur.clear();
    };
    for (char ch : response) {
      if (ch == ',' || ch == '\n')
        flush();
      else
        cur += ch;
    }
    flush();
  }

  std::vector<std::string> valid;
  std::set<std::string> seen;
  for (const auto& t : tokens) {
    if (t.empty()) continue;
    if (!seen.insert(t).second) continue;  // presence semantics per response
    if (std::find(vocab.begin(), vocab.end(), t) != vocab.end())
      valid.push_back(t);
    else if (unknown)
      unknown->push_back(t);
  }
  return valid;
}

inline SpatialOntology build_by_completion(ChatClient& client, std::vector<std::string> low_levels,
                                           std::vector<std::string> high_levels,
                                           const CompletionConfig& config,
                                           const PromptTemplates& templates = {}) {
  SpatialOntology onto =
      SpatialOntology::empty(std::move(low_levels), drop_unknown(std::move(high_levels)));
  config.validate(onto.num_low());
  for (int i = 0; i < onto.num_high(); ++i) {
    const std::string& high = onto.high_levels[std::size_t(i)];
    std::vector<std::string> others;
    for (int j = 0; j < onto.num_high(); ++j)
      if (j != i) others.push_back(onto.high_levels[std::size_t(j)]);
    std::string base = templates.render_completion(high, onto.low_levels, others, config.k);

    std::map<std::string, int> tally;
    std::vector<std::string> excluded;  // accumulated hallucinations for this concept
    for (int rep = 0; rep < config.repeats; ++rep) {
      bool accepted = false;
      for (int attempt = 0; attempt < config.max_retries; ++attempt) {
        std::string prompt = base;
        if (!excluded.empty()) prompt += templates.render_exclusion(excluded);
        std::string response = client.complete(prompt);
        std::vector<std::string> unknown;
        std::vector<std::string> valid = extract_concepts(response, onto.low_levels, &unknown);
        for (const auto& u : unknown)
          if (std::find(excluded.begin(), excluded.end(), u) == excluded.end())
            excluded.push_back(u);
        if (!unknown.empty() || valid.empty()) continue;  // re-query
        for (const auto& v : valid) tally[v] += 1;
        accepted = true;
        break;
      }
      if (!accepted) {
        std::string what = excluded.empty() ? "no valid concepts parsed"
                                            : "unresolved concepts " +
                                                  PromptTemplates::render_list(excluded);
        throw Error("completion builder: query for \"" + high + "\" failed after " +
                    std::to_string(config.max_retries) + " attempts: " + what);
      }
    }
    check(int(tally.size()) >= config.k,
          "completion builder: only " + std::to_string(tally.size()) +
              " distinct concepts returned for \"" + high + "\", need k=" +
              std::to_string(config.k));

    // top k by frequency, ties broken lexicographically (std::map iterates
    // in lexical order, so stable_sort on count keeps that order for ties)
    std::vector<std::pair<std::string, int>> ranked(tally.begin(), tally.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    for (int r = 0; r < config.k; ++r)
      onto.omega.at(i, onto.low_index(ranked[std::size_t(r)].first)) = 1.0;
  }
  onto.validate();
  return onto;
}

// ---------------------------------------------------------------------------

// Column-normalized biadjacency (l1). All-zero columns stay zero, so
// disconnected low-level concepts contribute nothing downstream.
inline Tensor normalized_biadjacency(const SpatialOntology& onto) {
  Tensor out = onto.omega;
  int m = onto.num_high(), n = onto.num_low();
  for (int j = 0; j < n; ++j) {
    double s = 0.0;
    for (int i = 0; i < m; ++i) s += out.at(i, j);
    if (s == 0.0) continue;
    for (int i = 0; i < m; ++i) out.at(i, j) /= s;
  }
  return out;
}

// Binary metrics against human judgments; edge presence is the prediction
// and "likely" is the positive class. Empty denominators count as perfect
// (no wrong claims were made).
inline OntologyMetrics evaluate_against_reference(const SpatialOntology& onto,
                                                  const std::vector<RelationJudgment>& judgments) {
  check(!judgments.empty(), "ontology evaluation: no judgments");
  int tp = 0, fp = 0, fn = 0, tn = 0;
  for (const RelationJudgment& j : judgments) {
    j.validate();
    bool predicted = onto.has_edge(onto.high_index(j.high), onto.low_index(j.low));
    bool actual = j.label == "likely";
    if (predicted && actual) ++tp;
    if (predicted && !actual) ++fp;
    if (!predicted && actual) ++fn;
    if (!predicted && !actual) ++tn;
  }
  OntologyMetrics m;
  m.accuracy = double(tp + tn) / double(tp + fp + fn + tn);
  m.precision = (tp + fp) ? double(tp) / double(tp + fp) : 1.0;
  m.recall = (tp + fn) ? double(tp) / double(tp + fn) : 1.0;
  return m;
}

// ---------------------------------------------------------------------------
// Serialization: {"low_levels": [...], "high_levels": [...],
//                 "edges": [[high_idx, low_idx], ...]}
// ---------------------------------------------------------------------------

inline nlohmann::json ontology_to_json(const SpatialOntology& onto) {
  nlohmann::json j;
  j["low_levels"] = onto.low_levels;
  j["high_levels"] = onto.high_levels;
  auto edges = nlohmann::json::array();
  for (int i = 0; i < onto.num_high(); ++i)
    for (int k = 0; k < onto.num_low(); ++k)
      if (onto.has_edge(i, k)) edges.push_back({i, k});
  j["edges"] = edges;
  return j;
}

inline SpatialOntology ontology_from_json(const nlohmann::json& j, const std::string& where) {
  reject_unknown_keys(j, {"low_levels", "high_levels", "edges"}, where);
  check(j.contains("low_levels") && j.contains("high_levels") && j.contains("edges"),
        where + ": required keys low_levels, high_levels, edges");
  SpatialOntology onto;
  onto.low_levels = j["low_levels"].get<std::vector<std::string>>();
  onto.high_levels = j["high_levels"].get<std::vector<std::string>>();
  onto.omega = Tensor::zeros({onto.num_high(), onto.num_low()});
  for (const auto& e : j["edges"]) {
    check(e.is_array() && e.size() == 2 && e[0].is_number_integer() && e[1].is_number_integer(),
          where + ": edges must be [high_idx, low_idx] pairs");
    int hi = e[0].get<int>(), lo = e[1].get<int>();
    check(hi >= 0 && hi < onto.num_high(),
          where + ": edge high index " + std::to_string(hi) + " out of range");
    check(lo >= 0 && lo < onto.num_low(),
          where + ": edge low index " + std::to_string(lo) + " out of range");
    onto.omega.at(hi, lo) = 1.0;
  }
  onto.validate();
  return onto;
}

inline void save_ontology(const SpatialOntology& onto, const std::string& path) {
  onto.validate();
  write_json_file(path, ontology_to_json(onto));
}

inline SpatialOntology load_ontology(const std::string& path) {
  return ontology_from_json(read_json_file(path), path);
}

inline std::vector<RelationJudgment> load_judgments(const std::string& path) {
  nlohmann::json j = read_json_file(path);
  check(j.is_array(), path + ": expected an array of judgments");
  std::vector<RelationJudgment> out;
  for (const auto& item : j) {
    reject_unknown_keys(item, {"low", "high", "label"}, path);
    check(item.contains("low") && item.contains("high") && item.contains("label"),
          path + ": judgment requires low, high, label");
    RelationJudgment r{item["low"].get<std::string>(), item["high"].get<std::string>(),
                       item["label"].get<std::string>()};
    r.validate();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace sgltn
