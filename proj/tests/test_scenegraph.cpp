#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <set>

#include "sgltn/scenegraph.hpp"

using namespace sgltn;

namespace {

SpatialOntology planted_ontology(int m, int n, int k, std::uint64_t seed) {
  std::vector<std::string> lows, highs;
  for (int i = 0; i < n; ++i) lows.push_back("low" + std::to_string(i));
  for (int i = 0; i < m; ++i) highs.push_back("high" + std::to_string(i));
  auto onto = SpatialOntology::empty(lows, highs);
  Rng rng(seed);
  for (int c = 0; c < m; ++c) {
    std::vector<int> pool(std::size_t(n), 0);
    std::iota(pool.begin(), pool.end(), 0);
    rng.shuffle(pool);
    for (int e = 0; e < k; ++e) onto.omega.at(c, pool[std::size_t(e)]) = 1.0;
  }
  return onto;
}

SynthConfig small_config(double noise, std::uint64_t seed = 7) {
  SynthConfig cfg;
  cfg.ontology = planted_ontology(3, 8, 2, 5);
  cfg.num_nodes = 120;
  cfg.num_regions_per_class = 2;
  cfg.knn_k = 4;
  cfg.histogram_draws = 20;
  cfg.noise_rate = noise;
  cfg.seed = seed;
  return cfg;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("zero noise keeps histograms on the planted support") {
  SynthConfig cfg = small_config(0.0);
  SceneGraph g = generate_synthetic(cfg);
  for (const PlaceNode& n : g.nodes) {
    REQUIRE(n.label.has_value());
    for (int j = 0; j < g.num_low(); ++j)
      if (n.histogram[std::size_t(j)] > 0) CHECK(cfg.ontology.has_edge(*n.label, j));
  }
}

TEST_CASE("full noise draws uniformly over the vocabulary") {
  SynthConfig cfg = small_config(1.0);
  cfg.num_nodes = 1000;
  cfg.histogram_draws = 100;  // 1e5 draws total
  SceneGraph g = generate_synthetic(cfg);
  int n = g.num_low();
  std::vector<double> counts(std::size_t(n), 0.0);
  double total = 0.0;
  for (const PlaceNode& node : g.nodes)
    for (int j = 0; j < n; ++j) {
      counts[std::size_t(j)] += node.histogram[std::size_t(j)];
      total += node.histogram[std::size_t(j)];
    }
  double expected = total / n;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(chi2 < 50.0);  // df = 7, far beyond any sane quantile means a bug
}

TEST_CASE("generation is deterministic in the seed") {
  SceneGraph a = generate_synthetic(small_config(0.3, 42));
  SceneGraph b = generate_synthetic(small_config(0.3, 42));
  CHECK(graph_to_json(a) == graph_to_json(b));
  SceneGraph c = generate_synthetic(small_config(0.3, 43));
  CHECK(graph_to_json(a) != graph_to_json(c));
}

TEST_CASE("knn edges are unique undirected pairs") {
  SceneGraph g = generate_synthetic(small_config(0.2));
  std::set<std::pair<int, int>> seen;
  for (auto [u, v] : g.edges) {
    CHECK(u < v);  // normalized storage
    CHECK(seen.insert({u, v}).second);
  }
  // every node keeps at least k incident edges
  std::vector<int> degree(std::size_t(g.num_nodes()), 0);
  for (auto [u, v] : g.edges) {
    degree[std::size_t(u)]++;
    degree[std::size_t(v)]++;
  }
  for (int d : degree) CHECK(d >= 4);
}

TEST_CASE("split proportions are within one node of 70/15/15") {
  SceneGraph g = generate_synthetic(small_config(0.2));
  int n = g.num_nodes();
  auto count = [&](Split s) { return int(g.split_indices(s).size()); };
  CHECK(std::abs(count(Split::Train) - int(std::lround(0.70 * n))) <= 1);
  CHECK(std::abs(count(Split::Val) - int(std::lround(0.15 * n))) <= 1);
  CHECK(count(Split::Train) + count(Split::Val) + count(Split::Test) == n);
}

TEST_CASE("degenerate configs are rejected") {
  SynthConfig cfg = small_config(0.0);
  cfg.num_nodes = 0;
  CHECK_THROWS_AS(generate_synthetic(cfg), Error);
  cfg = small_config(0.0);
  cfg.knn_k = cfg.num_nodes;
  CHECK_THROWS_AS(generate_synthetic(cfg), Error);
  cfg = small_config(0.0);
  cfg.ontology.omega = Tensor::zeros(cfg.ontology.omega.shape);  // no edges at all
  CHECK_THROWS_AS(generate_synthetic(cfg), Error);
}

TEST_CASE("feature encoding") {
  SceneGraph g = generate_synthetic(small_config(0.2));
  FeatureEncoder enc = FeatureEncoder::fit(g, 8, 11);
  Tensor feats = enc.encode(g);
  CHECK(feats.rows() == g.num_nodes());
  CHECK(feats.cols() == 3 + 8);

  // zero histogram -> zero embedding block
  SceneGraph z = g;
  z.nodes[0].histogram.assign(std::size_t(g.num_low()), 0);
  Tensor fz = enc.encode(z);
  for (int d = 0; d < 8; ++d) CHECK(fz.at(0, 3 + d) == 0.0);

  // proportional histograms embed identically
  SceneGraph p = g;
  p.nodes[1].histogram = p.nodes[0].histogram;
  for (auto& c : p.nodes[1].histogram) c *= 2;
  Tensor fp = enc.encode(p);
  for (int d = 0; d < 8; ++d)
    CHECK(fp.at(0, 3 + d) == doctest::Approx(fp.at(1, 3 + d)).epsilon(1e-12));

  // basis-vector histogram reproduces a projection column
  SceneGraph b = g;
  b.nodes[2].histogram.assign(std::size_t(g.num_low()), 0);
  b.nodes[2].histogram[0] = 5;
  Tensor fb = enc.encode(b);
  Tensor proj = enc.projection_matrix();
  for (int d = 0; d < 8; ++d) CHECK(fb.at(2, 3 + d) == doctest::Approx(proj.at(d, 0)));

  // histogram length mismatch
  SceneGraph bad = g;
  bad.nodes[0].histogram.push_back(1);
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("mask_labels") {
  SceneGraph g = generate_synthetic(small_config(0.2));

  CHECK(graph_to_json(mask_labels(g, 1.0, 3)) == graph_to_json(g));

  SceneGraph none = mask_labels(g, 0.0, 3);
  for (const PlaceNode& n : none.nodes)
    if (n.split == Split::Train) CHECK(!n.label.has_value());

  // ceiling rule: 0.1% of 84 train labels -> 1 kept
  SceneGraph one = mask_labels(g, 0.001, 3);
  int kept = 0;
  for (const PlaceNode& n : one.nodes)
    if (n.split == Split::Train && n.label) ++kept;
  CHECK(kept == 1);

  // val/test untouched
  for (int i = 0; i < g.num_nodes(); ++i)
    if (g.nodes[std::size_t(i)].split != Split::Train)
      CHECK(one.nodes[std::size_t(i)].label == g.nodes[std::size_t(i)].label);

  // determinism and prefix nesting under one seed
  CHECK(graph_to_json(mask_labels(g, 0.1, 7)) == graph_to_json(mask_labels(g, 0.1, 7)));
}

TEST_CASE("mask_labels ceiling with exactly 1000 labels") {
  SynthConfig cfg = small_config(0.0);
  cfg.num_nodes = 1429;  // ~1000 train nodes
  cfg.knn_k = 3;
  SceneGraph g = generate_synthetic(cfg);
  int train_labels = 0;
  for (const PlaceNode& n : g.nodes)
    if (n.split == Split::Train && n.label) ++train_labels;
  REQUIRE(train_labels == 1000);
  SceneGraph masked = mask_labels(g, 0.001, 5);
  int kept = 0;
  for (const PlaceNode& n : masked.nodes)
    if (n.split == Split::Train && n.label) ++kept;
  CHECK(kept == 1);
}

TEST_CASE("mask_classes") {
  SceneGraph g = generate_synthetic(small_config(0.2));

  CHECK(graph_to_json(mask_classes(g, {})) == graph_to_json(g));

  int before = 0;
  for (const PlaceNode& n : g.nodes)
    if (n.split == Split::Train && n.label == 1) ++before;
  REQUIRE(before > 0);

  SceneGraph masked = mask_classes(g, {1});
  for (std::size_t i = 0; i < masked.nodes.size(); ++i) {
    const PlaceNode& n = masked.nodes[i];
    if (n.split == Split::Train)
      CHECK(n.label != std::optional<int>(1));
    else
      CHECK(n.label == g.nodes[i].label);
  }

  CHECK_THROWS_AS(mask_classes(g, {0, 1, 2}), Error);
  CHECK_THROWS_AS(mask_classes(g, {99}), Error);
}

TEST_CASE("scene graph JSON round trip and validation") {
  SceneGraph g = generate_synthetic(small_config(0.4, 21));
  auto path = temp_file("graph_roundtrip.json");
  save_graph(g, path.string());
  SceneGraph loaded = load_graph(path.string());
  CHECK(graph_to_json(loaded) == graph_to_json(g));

  nlohmann::json bad = graph_to_json(g);
  bad["edges"].push_back({0, 10000});
  auto bad_path = temp_file("graph_bad_edge.json");
  write_json_file(bad_path.string(), bad);
  CHECK_THROWS_AS(load_graph(bad_path.string()), Error);

  nlohmann::json bad_label = graph_to_json(g);
  bad_label["nodes"][0]["label"] = 999;
  write_json_file(bad_path.string(), bad_label);
  CHECK_THROWS_AS(load_graph(bad_path.string()), Error);
}
