#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sgltn/jsonio.hpp"
#include "sgltn/ontology.hpp"
#include "sgltn/rng.hpp"
#include "sgltn/tensor.hpp"

namespace sgltn {

enum class Split { Train, Val, Test };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    default: return "test";
  }
}

inline Split split_from_name(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw Error("split must be train/val/test, got \"" + s + "\"");
}

struct PlaceNode {
  std::array<double, 3> position{0, 0, 0};  // meters
  std::vector<int> histogram;               // basis-point label counts over the low-level vocab
  std::optional<int> label;                 // index into the high-level vocab
  Split split = Split::Train;
};

// Places layer of a 3D scene graph: nodes with positions and semantic
// histograms, undirected edges, and the concept vocabularies they index.
struct SceneGraph {
  std::vector<PlaceNode> nodes;
  std::vector<std::pair<int, int>> edges;  // undirected, no self loops stored
  std::vector<std::string> low_level_vocab;
  std::vector<std::string> high_level_vocab;

  int num_nodes() const { return int(nodes.size()); }
  int num_low() const { return int(low_level_vocab.size()); }
  int num_high() const { return int(high_level_vocab.size()); }

  void validate() const {
    check(!low_level_vocab.empty() && !high_level_vocab.empty(), "scene graph: empty vocabulary");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const PlaceNode& n = nodes[i];
      if (int(n.histogram.size()) != num_low())
        throw Error("scene graph: node " + std::to_string(i) + " histogram length " +
                    std::to_string(n.histogram.size()) + " != " + std::to_string(num_low()));
      for (int c : n.histogram)
        if (c < 0)
          throw Error("scene graph: node " + std::to_string(i) + " has a negative histogram count");
      if (n.label && (*n.label < 0 || *n.label >= num_high()))
        throw Error("scene graph: node " + std::to_string(i) + " label " +
                    std::to_string(*n.label) + " out of range");
    }
    for (std::size_t e = 0; e < edges.size(); ++e) {
      auto [u, v] = edges[e];
      if (u < 0 || u >= num_nodes() || v < 0 || v >= num_nodes())
        throw Error("scene graph: edge " + std::to_string(e) + " endpoint out of range");
      if (u == v) throw Error("scene graph: edge " + std::to_string(e) + " is a self loop");
    }
  }

  std::vector<int> split_indices(Split s) const {
    std::vector<int> out;
    for (int i = 0; i < num_nodes(); ++i)
      if (nodes[std::size_t(i)].split == s) out.push_back(i);
    return out;
  }
};

// ---------------------------------------------------------------------------
// Feature encoding: min-max scaled position concatenated with a seeded
// +-1/sqrt(d) random projection of the l1-normalized histogram. The
// projection stands in for a pretrained word embedding of the aggregated
// semantics; swap the encoder to use a real embedding table.
// ---------------------------------------------------------------------------

struct FeatureEncoder {
  int embed_dim = 16;
  std::uint64_t projection_seed = 0;
  int vocab_size = 0;
  std::array<double, 3> pos_min{0, 0, 0};
  std::array<double, 3> pos_max{1, 1, 1};
  bool fitted = false;

  int feature_dim() const { return 3 + embed_dim; }

  static FeatureEncoder fit(const SceneGraph& graph, int embed_dim, std::uint64_t seed) {
    check(embed_dim >= 1, "encoder: embed_dim must be positive");
    FeatureEncoder enc;
    enc.embed_dim = embed_dim;
    enc.projection_seed = seed;
    enc.vocab_size = graph.num_low();
    auto train = graph.split_indices(Split::Train);
    check(!train.empty(), "encoder: training split is empty");
    for (int a = 0; a < 3; ++a) {
      enc.pos_min[std::size_t(a)] = std::numeric_limits<double>::infinity();
      enc.pos_max[std::size_t(a)] = -std::numeric_limits<double>::infinity();
    }
    for (int i : train)
      for (int a = 0; a < 3; ++a) {
        double p = graph.nodes[std::size_t(i)].position[std::size_t(a)];
        enc.pos_min[std::size_t(a)] = std::min(enc.pos_min[std::size_t(a)], p);
        enc.pos_max[std::size_t(a)] = std::max(enc.pos_max[std::size_t(a)], p);
      }
    enc.fitted = true;
    return enc;
  }

  // d x n projection with entries +-1/sqrt(d), fixed by the seed
  Tensor projection_matrix() const {
    Tensor p = Tensor::zeros({embed_dim, vocab_size});
    Rng rng(projection_seed);
    double scale = 1.0 / std::sqrt(double(embed_dim));
    for (auto& v : p.data) v = rng.uniform() < 0.5 ? -scale : scale;
    return p;
  }

  // |V| x (3 + d)
  Tensor encode(const SceneGraph& graph) const {
    check(fitted, "encoder: not fitted");
    check(graph.num_low() == vocab_size, "encoder: vocabulary size changed since fit");
    Tensor proj = projection_matrix();
    int v = graph.num_nodes();
    Tensor out = Tensor::zeros({v, feature_dim()});
    for (int i = 0; i < v; ++i) {
      const PlaceNode& node = graph.nodes[std::size_t(i)];
      for (int a = 0; a < 3; ++a) {
        double lo = pos_min[std::size_t(a)], hi = pos_max[std::size_t(a)];
        double x = node.position[std::size_t(a)];
        out.at(i, a) = (hi - lo > 1e-12) ? (x - lo) / (hi - lo) : 0.5;
      }
      double total = 0.0;
      for (int c : node.histogram) total += c;
      if (total > 0.0) {
        for (int j = 0; j < vocab_size; ++j) {
          double q = double(node.histogram[std::size_t(j)]) / total;
          if (q == 0.0) continue;
          for (int d = 0; d < embed_dim; ++d) out.at(i, 3 + d) += proj.at(d, j) * q;
        }
      }
    }
    return out;
  }

  nlohmann::json to_json() const {
    return nlohmann::json{{"embed_dim", embed_dim},
                          {"projection_seed", projection_seed},
                          {"vocab_size", vocab_size},
                          {"pos_min", pos_min},
                          {"pos_max", pos_max}};
  }

  static FeatureEncoder from_json(const nlohmann::json& j) {
    reject_unknown_keys(j, {"embed_dim", "projection_seed", "vocab_size", "pos_min", "pos_max"},
                        "encoder");
    FeatureEncoder enc;
    enc.embed_dim = j.at("embed_dim").get<int>();
    enc.projection_seed = j.at("projection_seed").get<std::uint64_t>();
    enc.vocab_size = j.at("vocab_size").get<int>();
    enc.pos_min = j.at("pos_min").get<std::array<double, 3>>();
    enc.pos_max = j.at("pos_max").get<std::array<double, 3>>();
    enc.fitted = true;
    return enc;
  }
};

// ---------------------------------------------------------------------------
// Synthetic generator: planted regions in a unit box with histograms drawn
// from a known ontology. Desk-scale stand-in for real captures.
// ---------------------------------------------------------------------------

struct SynthConfig {
  SpatialOntology ontology;  // planted ground truth
  int num_nodes = 500;
  int num_regions_per_class = 2;
  int knn_k = 6;
  int histogram_draws = 30;
  double noise_rate = 0.0;  // probability a draw ignores the ontology
  std::uint64_t seed = 1;

  void validate() const {
    ontology.validate();
    check(num_nodes >= 1, "synth: num_nodes must be positive");
    check(num_regions_per_class >= 1, "synth: num_regions_per_class must be positive");
    check(knn_k >= 1, "synth: knn_k must be >= 1");
    check(knn_k < num_nodes, "synth: knn_k must be smaller than num_nodes");
    check(histogram_draws >= 1, "synth: histogram_draws must be positive");
    check(noise_rate >= 0.0 && noise_rate <= 1.0, "synth: noise_rate must be in [0, 1]");
  }
};

namespace detail {

inline std::vector<std::pair<int, int>> knn_edges(const std::vector<std::array<double, 3>>& pos,
                                                  int k) {
  int n = int(pos.size());
  std::set<std::pair<int, int>> dedup;
  std::vector<std::pair<double, int>> dist;
  for (int i = 0; i < n; ++i) {
    dist.clear();
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      double d2 = 0.0;
      for (int a = 0; a < 3; ++a) {
        double dd = pos[std::size_t(i)][std::size_t(a)] - pos[std::size_t(j)][std::size_t(a)];
        d2 += dd * dd;
      }
      dist.push_back({d2, j});
    }
    int kk = std::min(k, int(dist.size()));
    std::partial_sort(dist.begin(), dist.begin() + kk, dist.end());
    for (int t = 0; t < kk; ++t) {
      int j = dist[std::size_t(t)].second;
      dedup.insert({std::min(i, j), std::max(i, j)});
    }
  }
  return {dedup.begin(), dedup.end()};
}

}  // namespace detail

inline SceneGraph generate_synthetic(const SynthConfig& config) {
  config.validate();
  const SpatialOntology& onto = config.ontology;
  int m = onto.num_high(), n = onto.num_low();

  // planted low-level support per class
  std::vector<std::vector<int>> class_lows;
  class_lows.resize(std::size_t(m));
  for (int c = 0; c < m; ++c) {
    for (int j = 0; j < n; ++j)
      if (onto.has_edge(c, j)) class_lows[std::size_t(c)].push_back(j);
    check(!class_lows[std::size_t(c)].empty(),
          "synth: planted ontology has no edges for \"" + onto.high_levels[std::size_t(c)] + "\"");
  }

  Rng rng(config.seed);
  int regions = m * config.num_regions_per_class;
  std::vector<std::array<double, 3>> region_seed;
  region_seed.resize(std::size_t(regions));
  for (auto& s : region_seed) s = {rng.uniform(), rng.uniform(), rng.uniform()};

  SceneGraph g;
  g.low_level_vocab = onto.low_levels;
  g.high_level_vocab = onto.high_levels;

  const double blob_sigma = 0.05;
  std::vector<std::array<double, 3>> positions;
  for (int i = 0; i < config.num_nodes; ++i) {
    int region = i % regions;
    int cls = region % m;
    PlaceNode node;
    for (int a = 0; a < 3; ++a)
      node.position[std::size_t(a)] =
          region_seed[std::size_t(region)][std::size_t(a)] + blob_sigma * rng.normal();
    node.label = cls;
    node.histogram.assign(std::size_t(n), 0);
    for (int d = 0; d < config.histogram_draws; ++d) {
      int low;
      if (rng.uniform() < config.noise_rate) {
        low = rng.uniform_int(n);
      } else {
        const auto& pool = class_lows[std::size_t(cls)];
        low = pool[std::size_t(rng.uniform_int(int(pool.size())))];
      }
      node.histogram[std::size_t(low)] += 1;
    }
    positions.push_back(node.position);
    g.nodes.push_back(std::move(node));
  }

  g.edges = detail::knn_edges(positions, config.knn_k);

  // 70/15/15 split by seeded shuffle
  std::vector<int> order(std::size_t(config.num_nodes), 0);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  int n_train = int(std::lround(0.70 * config.num_nodes));
  int n_val = int(std::lround(0.15 * config.num_nodes));
  for (int r = 0; r < config.num_nodes; ++r) {
    Split s = r < n_train ? Split::Train : (r < n_train + n_val ? Split::Val : Split::Test);
    g.nodes[std::size_t(order[std::size_t(r)])].split = s;
  }
  g.validate();
  return g;
}

// ---------------------------------------------------------------------------
// Label masking
// ---------------------------------------------------------------------------

// Keeps a seeded uniform sample of ceil(keep_fraction * labeled-train-count)
// training labels and removes the rest. Val/test labels are untouched.
inline SceneGraph mask_labels(const SceneGraph& graph, double keep_fraction, std::uint64_t seed) {
  check(keep_fraction >= 0.0 && keep_fraction <= 1.0, "mask_labels: keep_fraction in [0,1]");
  if (keep_fraction == 1.0) return graph;
  std::vector<int> labeled;
  for (int i = 0; i < graph.num_nodes(); ++i) {
    const PlaceNode& n = graph.nodes[std::size_t(i)];
    if (n.split == Split::Train && n.label) labeled.push_back(i);
  }
  check(!labeled.empty(), "mask_labels: no labeled training nodes");
  int keep = keep_fraction > 0.0 ? int(std::ceil(keep_fraction * double(labeled.size()))) : 0;
  Rng rng(seed);
  rng.shuffle(labeled);
  SceneGraph out = graph;
  for (std::size_t r = std::size_t(keep); r < labeled.size(); ++r)
    out.nodes[std::size_t(labeled[r])].label.reset();
  return out;
}

// Removes training labels belonging to the given classes; other splits keep
// theirs (the zero-shot protocol).
inline SceneGraph mask_classes(const SceneGraph& graph, const std::vector<int>& classes) {
  std::set<int> masked;
  for (int c : classes) {
    check(c >= 0 && c < graph.num_high(), "mask_classes: class index " + std::to_string(c) +
                                              " out of range");
    masked.insert(c);
  }
  check(int(masked.size()) < graph.num_high(), "mask_classes: cannot mask every class");
  SceneGraph out = graph;
  for (auto& n : out.nodes)
    if (n.split == Split::Train && n.label && masked.count(*n.label)) n.label.reset();
  return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline nlohmann::json graph_to_json(const SceneGraph& g) {
  nlohmann::json j;
  j["low_levels"] = g.low_level_vocab;
  j["high_levels"] = g.high_level_vocab;
  auto nodes = nlohmann::json::array();
  for (const PlaceNode& n : g.nodes) {
    nlohmann::json nj;
    nj["pos"] = n.position;
    nj["hist"] = n.histogram;
    if (n.label)
      nj["label"] = *n.label;
    else
      nj["label"] = nullptr;
    nj["split"] = split_name(n.split);
    nodes.push_back(std::move(nj));
  }
  j["nodes"] = nodes;
  auto edges = nlohmann::json::array();
  for (auto [u, v] : g.edges) edges.push_back({u, v});
  j["edges"] = edges;
  return j;
}

inline SceneGraph graph_from_json(const nlohmann::json& j, const std::string& where) {
  reject_unknown_keys(j, {"low_levels", "high_levels", "nodes", "edges"}, where);
  check(j.contains("low_levels") && j.contains("high_levels") && j.contains("nodes") &&
            j.contains("edges"),
        where + ": required keys low_levels, high_levels, nodes, edges");
  SceneGraph g;
  g.low_level_vocab = j["low_levels"].get<std::vector<std::string>>();
  g.high_level_vocab = j["high_levels"].get<std::vector<std::string>>();
  for (std::size_t i = 0; i < j["nodes"].size(); ++i) {
    const auto& nj = j["nodes"][i];
    std::string at = where + ": node " + std::to_string(i);
    reject_unknown_keys(nj, {"pos", "hist", "label", "split"}, at);
    check(nj.contains("pos") && nj.contains("hist") && nj.contains("split"),
          at + ": required keys pos, hist, split");
    PlaceNode n;
    check(nj["pos"].is_array() && nj["pos"].size() == 3, at + ": pos must have 3 coordinates");
    n.position = nj["pos"].get<std::array<double, 3>>();
    n.histogram = nj["hist"].get<std::vector<int>>();
    if (nj.contains("label") && !nj["label"].is_null()) n.label = nj["label"].get<int>();
    n.split = split_from_name(nj["split"].get<std::string>());
    g.nodes.push_back(std::move(n));
  }
  for (const auto& e : j["edges"]) {
    check(e.is_array() && e.size() == 2, where + ": edges must be [u, v] pairs");
    g.edges.push_back({e[0].get<int>(), e[1].get<int>()});
  }
  g.validate();
  return g;
}

inline void save_graph(const SceneGraph& g, const std::string& path) {
  g.validate();
  write_json_file(path, graph_to_json(g));
}

inline SceneGraph load_graph(const std::string& path) {
  return graph_from_json(read_json_file(path), path);
}

}  // namespace sgltn
