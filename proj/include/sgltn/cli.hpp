#pragma once

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sgltn/grounding.hpp"
#include "sgltn/jsonio.hpp"
#include "sgltn/llm.hpp"
#include "sgltn/llm_http.hpp"
#include "sgltn/model.hpp"
#include "sgltn/ontology.hpp"
#include "sgltn/scenegraph.hpp"

namespace sgltn::cli {

// exit 3; everything else sgltn::Error-shaped exits 1
struct ConfigError : Error {
  using Error::Error;
};

namespace detail {

// config-assembly failures exit 3 rather than 1
template <typename F>
auto as_config(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

inline std::string fmt(double v, int prec = 6) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

inline void require_input(const std::string& path, const std::string& what) {
  if (!std::filesystem::exists(path))
    throw ConfigError(what + ": no such file: " + path);
}

inline void require_output(const std::string& path, const std::string& what) {
  auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty() && !std::filesystem::exists(parent))
    throw ConfigError(what + ": output directory does not exist: " + parent.string());
}

inline std::string env_value(const char* name) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : std::string();
}

inline std::vector<std::string> load_vocab(const std::string& path) {
  nlohmann::json j = read_json_file(path);
  check(j.is_array(), path + ": expected a JSON array of concept strings");
  auto v = j.get<std::vector<std::string>>();
  check(!v.empty(), path + ": vocabulary is empty");
  return v;
}

// Every command logs its post-override settings next to its primary output
// so a result directory alone reproduces the run.
inline void log_resolved(const std::string& primary_out, const nlohmann::json& resolved) {
  write_json_file(primary_out + ".config.json", resolved);
}

// ----- config file sections -----

inline nlohmann::json config_section(const nlohmann::json& cfg, const std::string& name) {
  if (cfg.is_null() || !cfg.contains(name)) return nlohmann::json::object();
  return cfg.at(name);
}

inline nlohmann::json load_config_file(const std::string& path) {
  if (path.empty()) return nlohmann::json();
  require_input(path, "config");
  nlohmann::json j = read_json_file(path);
  reject_unknown_keys(j, {"scoring", "completion", "synth", "model", "train", "ablate"}, path);
  return j;
}

inline ScoringConfig scoring_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j, {"temperature", "threshold"}, "scoring config");
  ScoringConfig c;
  if (j.contains("temperature")) c.temperature = j["temperature"].get<double>();
  if (j.contains("threshold")) c.threshold = j["threshold"].get<double>();
  return c;
}

inline CompletionConfig completion_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j, {"k", "repeats", "max_retries"}, "completion config");
  CompletionConfig c;
  if (j.contains("k")) c.k = j["k"].get<int>();
  if (j.contains("repeats")) c.repeats = j["repeats"].get<int>();
  if (j.contains("max_retries")) c.max_retries = j["max_retries"].get<int>();
  return c;
}

struct SynthSection {
  std::string ontology_path;
  SynthConfig cfg;
};

inline SynthSection synth_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j,
                      {"ontology_path", "num_nodes", "num_regions_per_class", "knn_k",
                       "histogram_draws", "noise_rate", "seed"},
                      "synth config");
  SynthSection s;
  if (j.contains("ontology_path")) s.ontology_path = j["ontology_path"].get<std::string>();
  if (j.contains("num_nodes")) s.cfg.num_nodes = j["num_nodes"].get<int>();
  if (j.contains("num_regions_per_class"))
    s.cfg.num_regions_per_class = j["num_regions_per_class"].get<int>();
  if (j.contains("knn_k")) s.cfg.knn_k = j["knn_k"].get<int>();
  if (j.contains("histogram_draws")) s.cfg.histogram_draws = j["histogram_draws"].get<int>();
  if (j.contains("noise_rate")) s.cfg.noise_rate = j["noise_rate"].get<double>();
  if (j.contains("seed")) s.cfg.seed = j["seed"].get<std::uint64_t>();
  return s;
}

inline ModelConfig model_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j, {"hidden_dim", "gat_layers", "heads", "dropout", "leaky_slope"},
                      "model config");
  ModelConfig m;
  if (j.contains("hidden_dim")) m.hidden_dim = j["hidden_dim"].get<int>();
  if (j.contains("gat_layers")) m.gat_layers = j["gat_layers"].get<int>();
  if (j.contains("heads")) m.heads = j["heads"].get<int>();
  if (j.contains("dropout")) m.dropout = j["dropout"].get<double>();
  if (j.contains("leaky_slope")) m.leaky_slope = j["leaky_slope"].get<double>();
  return m;
}

inline TrainConfig train_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j,
                      {"loss", "learning_rate", "weight_decay", "max_epochs", "convergence_delta",
                       "convergence_patience", "keep_fraction", "masked_classes", "embed_dim",
                       "seed", "p_forall_equiv", "p_forall_incl", "p_satagg", "incl_covers_test"},
                      "train config");
  TrainConfig c;
  if (j.contains("loss")) c.loss_kind = loss_kind_from_name(j["loss"].get<std::string>());
  if (j.contains("learning_rate")) c.learning_rate = j["learning_rate"].get<double>();
  if (j.contains("weight_decay")) c.weight_decay = j["weight_decay"].get<double>();
  if (j.contains("max_epochs")) c.max_epochs = j["max_epochs"].get<int>();
  if (j.contains("convergence_delta")) c.convergence_delta = j["convergence_delta"].get<double>();
  if (j.contains("convergence_patience"))
    c.convergence_patience = j["convergence_patience"].get<int>();
  if (j.contains("keep_fraction")) c.keep_fraction = j["keep_fraction"].get<double>();
  if (j.contains("masked_classes")) c.masked_classes = j["masked_classes"].get<std::vector<int>>();
  if (j.contains("embed_dim")) c.embed_dim = j["embed_dim"].get<int>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("p_forall_equiv")) c.aggregator.p_forall_equiv = j["p_forall_equiv"].get<double>();
  if (j.contains("p_forall_incl")) c.aggregator.p_forall_incl = j["p_forall_incl"].get<double>();
  if (j.contains("p_satagg")) c.aggregator.p_satagg = j["p_satagg"].get<double>();
  if (j.contains("incl_covers_test")) c.incl_covers_test = j["incl_covers_test"].get<bool>();
  return c;
}

struct AblateSection {
  std::vector<LossKind> losses = {LossKind::CrossEntropy, LossKind::SatEquiv, LossKind::SatIncl,
                                  LossKind::SatBoth};
  std::vector<double> fractions = {1.0, 0.1, 0.01, 0.004, 0.002, 0.001};
  int trials = 10;
  bool reproducible = false;
};

inline AblateSection ablate_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j, {"loss_kinds", "keep_fractions", "trials", "reproducible"},
                      "ablate config");
  AblateSection a;
  if (j.contains("loss_kinds")) {
    a.losses.clear();
    for (const auto& s : j["loss_kinds"]) a.losses.push_back(loss_kind_from_name(s.get<std::string>()));
  }
  if (j.contains("keep_fractions")) a.fractions = j["keep_fractions"].get<std::vector<double>>();
  if (j.contains("trials")) a.trials = j["trials"].get<int>();
  if (j.contains("reproducible")) a.reproducible = j["reproducible"].get<bool>();
  return a;
}

inline nlohmann::json train_to_json(const TrainConfig& c) {
  return nlohmann::json{{"loss", loss_kind_name(c.loss_kind)},
                        {"learning_rate", c.learning_rate},
                        {"weight_decay", c.weight_decay},
                        {"max_epochs", c.max_epochs},
                        {"convergence_delta", c.convergence_delta},
                        {"convergence_patience", c.convergence_patience},
                        {"keep_fraction", c.keep_fraction},
                        {"masked_classes", c.masked_classes},
                        {"embed_dim", c.embed_dim},
                        {"seed", c.seed},
                        {"p_forall_equiv", c.aggregator.p_forall_equiv},
                        {"p_forall_incl", c.aggregator.p_forall_incl},
                        {"p_satagg", c.aggregator.p_satagg},
                        {"incl_covers_test", c.incl_covers_test}};
}

inline nlohmann::json model_to_json_cfg(const ModelConfig& m) {
  return nlohmann::json{{"hidden_dim", m.hidden_dim},
                        {"gat_layers", m.gat_layers},
                        {"heads", m.heads},
                        {"dropout", m.dropout},
                        {"leaky_slope", m.leaky_slope}};
}

inline nlohmann::json metrics_to_json(const Metrics& m, bool include_timings) {
  nlohmann::json per_class = nlohmann::json::array();
  for (double v : m.per_class_accuracy)
    per_class.push_back(std::isnan(v) ? nlohmann::json() : nlohmann::json(v));
  return nlohmann::json{
      {"accuracy", m.accuracy},
      {"per_class_accuracy", per_class},
      {"masked_class_accuracy",
       std::isnan(m.masked_class_accuracy) ? nlohmann::json() : nlohmann::json(m.masked_class_accuracy)},
      {"confusion", m.confusion},
      {"evaluated", m.evaluated},
      {"infer_seconds", include_timings ? m.infer_seconds : 0.0}};
}

}  // namespace detail

// Writes results.csv (one row per trial) and summary.json (per-cell mean and
// std). Refuses to write anything when there are no rows; reruns overwrite
// byte-identically when timings are excluded.
inline void emit_report(const AblationReport& report, const std::string& out_dir,
                        bool include_timings) {
  check(!report.rows.empty(), "emit_report: no ablation rows");
  std::filesystem::create_directories(out_dir);
  std::filesystem::path csv_path = std::filesystem::path(out_dir) / "results.csv";
  std::ofstream csv(csv_path);
  check(bool(csv), "emit_report: cannot write " + csv_path.string());
  csv << "loss_kind,keep_fraction,trial,seed,accuracy,masked_class_accuracy,epochs,"
         "train_seconds,infer_seconds_per_graph\n";
  for (const AblationRow& r : report.rows) {
    csv << r.loss_kind << ',' << detail::fmt(r.keep_fraction) << ',' << r.trial << ',' << r.seed
        << ',' << detail::fmt(r.accuracy) << ',' << detail::fmt(r.masked_class_accuracy) << ','
        << r.epochs << ',' << detail::fmt(include_timings ? r.train_seconds : 0.0) << ','
        << detail::fmt(include_timings ? r.infer_seconds_per_graph : 0.0) << '\n';
  }
  csv.close();

  nlohmann::json cells = nlohmann::json::array();
  for (const AblationCell& c : report.cells) {
    cells.push_back(nlohmann::json{
        {"loss_kind", c.loss_kind},
        {"keep_fraction", c.keep_fraction},
        {"trials", c.trials},
        {"complete", c.complete},
        {"mean_accuracy", std::isnan(c.mean_accuracy) ? nlohmann::json() : nlohmann::json(c.mean_accuracy)},
        {"std_accuracy", std::isnan(c.std_accuracy) ? nlohmann::json() : nlohmann::json(c.std_accuracy)},
        {"mean_masked_class_accuracy", std::isnan(c.mean_masked_class_accuracy)
                                           ? nlohmann::json()
                                           : nlohmann::json(c.mean_masked_class_accuracy)},
        {"std_masked_class_accuracy", std::isnan(c.std_masked_class_accuracy)
                                          ? nlohmann::json()
                                          : nlohmann::json(c.std_masked_class_accuracy)}});
  }
  nlohmann::json errors = nlohmann::json::array();
  for (const AblationRow& r : report.rows)
    if (!r.complete)
      errors.push_back(nlohmann::json{{"loss_kind", r.loss_kind},
                                      {"keep_fraction", r.keep_fraction},
                                      {"trial", r.trial},
                                      {"error", r.error}});
  write_json_file((std::filesystem::path(out_dir) / "summary.json").string(),
                  nlohmann::json{{"cells", cells}, {"errors", errors}});
}

namespace detail {

// ----- command implementations -----

struct OntologyScoreArgs {
  std::string lows, highs, out, config, scores_file;
  bool mock = false;
  std::uint64_t mock_seed = 0;
  double temperature = -1.0;  // <0 = not overridden
  double threshold = -1.0;
};

inline void cmd_ontology_score(const OntologyScoreArgs& a) {
  require_input(a.lows, "ontology score");
  require_input(a.highs, "ontology score");
  require_output(a.out, "ontology score");
  nlohmann::json cfg_file = as_config([&] { return load_config_file(a.config); });
  ScoringConfig cfg =
      as_config([&] { return scoring_from_json(config_section(cfg_file, "scoring")); });
  if (a.temperature >= 0.0) cfg.temperature = a.temperature;
  if (a.threshold >= 0.0) cfg.threshold = a.threshold;
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }

  std::unique_ptr<LmScorer> scorer;
  if (a.mock)
    scorer = std::make_unique<SeededMockScorer>(a.mock_seed);
  else if (!a.scores_file.empty()) {
    require_input(a.scores_file, "ontology score");
    scorer = std::make_unique<TableScorer>(TableScorer::from_file(a.scores_file));
  } else {
    throw ConfigError(
        "ontology score: pass --mock or --scores FILE (chat endpoints expose no log "
        "probabilities to score with)");
  }

  auto onto = build_by_scoring(*scorer, load_vocab(a.lows), load_vocab(a.highs), cfg);
  save_ontology(onto, a.out);
  log_resolved(a.out, nlohmann::json{{"command", "ontology score"},
                                     {"lows", a.lows},
                                     {"highs", a.highs},
                                     {"temperature", cfg.temperature},
                                     {"threshold", cfg.threshold},
                                     {"mock", a.mock},
                                     {"mock_seed", a.mock_seed},
                                     {"scores_file", a.scores_file}});
  std::cout << "wrote " << a.out << " (" << onto.num_high() << " high, " << onto.num_low()
            << " low concepts)\n";
}

struct OntologyCompleteArgs {
  std::string lows, highs, out, config, cache_dir;
  bool mock = false;
  std::uint64_t mock_seed = 0;
  int k = -1, repeats = -1, max_retries = -1;
};

inline void cmd_ontology_complete(const OntologyCompleteArgs& a) {
  require_input(a.lows, "ontology complete");
  require_input(a.highs, "ontology complete");
  require_output(a.out, "ontology complete");
  nlohmann::json cfg_file = as_config([&] { return load_config_file(a.config); });
  CompletionConfig cfg =
      as_config([&] { return completion_from_json(config_section(cfg_file, "completion")); });
  if (a.k > 0) cfg.k = a.k;
  if (a.repeats > 0) cfg.repeats = a.repeats;
  if (a.max_retries > 0) cfg.max_retries = a.max_retries;

  auto lows = load_vocab(a.lows);
  auto highs = load_vocab(a.highs);

  std::shared_ptr<ChatClient> client;
  if (a.mock) {
    client = std::make_shared<SeededMockChatClient>(lows, cfg.k, a.mock_seed);
  } else {
    std::string key = env_value("ONTO_LLM_API_KEY");
    std::string endpoint = env_value("ONTO_LLM_ENDPOINT");
    if (key.empty())
      throw ConfigError("ontology complete: ONTO_LLM_API_KEY is not set (or pass --mock)");
    if (endpoint.empty())
      throw ConfigError("ontology complete: ONTO_LLM_ENDPOINT is not set (or pass --mock)");
    HttpChatConfig http;
    http.endpoint = endpoint;
    http.api_key = key;
    client = std::make_shared<HttpChatClient>(http);
  }
  if (!a.cache_dir.empty()) client = std::make_shared<CachingChatClient>(client, a.cache_dir);

  auto onto = build_by_completion(*client, lows, highs, cfg);
  save_ontology(onto, a.out);
  log_resolved(a.out, nlohmann::json{{"command", "ontology complete"},
                                     {"lows", a.lows},
                                     {"highs", a.highs},
                                     {"k", cfg.k},
                                     {"repeats", cfg.repeats},
                                     {"max_retries", cfg.max_retries},
                                     {"mock", a.mock},
                                     {"mock_seed", a.mock_seed},
                                     {"cache_dir", a.cache_dir}});
  std::cout << "wrote " << a.out << " (" << cfg.k << " edges per high-level concept)\n";
}

struct OntologyEvalArgs {
  std::string ontology, judgments, out;
};

inline void cmd_ontology_eval(const OntologyEvalArgs& a) {
  require_input(a.ontology, "ontology eval");
  require_input(a.judgments, "ontology eval");
  auto onto = load_ontology(a.ontology);
  auto js = load_judgments(a.judgments);
  OntologyMetrics m = evaluate_against_reference(onto, js);
  nlohmann::json out{{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall}};
  if (!a.out.empty()) {
    require_output(a.out, "ontology eval");
    write_json_file(a.out, out);
    log_resolved(a.out, nlohmann::json{{"command", "ontology eval"},
                                       {"ontology", a.ontology},
                                       {"judgments", a.judgments}});
  }
  std::cout << out.dump() << "\n";
}

struct SynthArgs {
  std::string config, ontology, out;
  std::int64_t seed = -1;
};

inline void cmd_synth(const SynthArgs& a) {
  nlohmann::json cfg_file = as_config([&] { return load_config_file(a.config); });
  SynthSection s = as_config([&] { return synth_from_json(config_section(cfg_file, "synth")); });
  if (!a.ontology.empty()) s.ontology_path = a.ontology;
  if (a.seed >= 0) s.cfg.seed = std::uint64_t(a.seed);
  if (s.ontology_path.empty())
    throw ConfigError("synth: an ontology is required (synth.ontology_path or --ontology)");
  require_input(s.ontology_path, "synth");
  require_output(a.out, "synth");
  s.cfg.ontology = load_ontology(s.ontology_path);
  SceneGraph g = generate_synthetic(s.cfg);
  save_graph(g, a.out);
  log_resolved(a.out, nlohmann::json{{"command", "synth"},
                                     {"ontology_path", s.ontology_path},
                                     {"num_nodes", s.cfg.num_nodes},
                                     {"num_regions_per_class", s.cfg.num_regions_per_class},
                                     {"knn_k", s.cfg.knn_k},
                                     {"histogram_draws", s.cfg.histogram_draws},
                                     {"noise_rate", s.cfg.noise_rate},
                                     {"seed", s.cfg.seed}});
  std::cout << "wrote " << a.out << " (" << g.num_nodes() << " nodes, " << g.edges.size()
            << " edges)\n";
}

struct TrainArgs {
  std::vector<std::string> graphs;
  std::string ontology, config, out_model, out_metrics;
  std::string loss;
  double keep_fraction = -1.0;
  std::int64_t seed = -1;
  bool reproducible = false;
};

inline void cmd_train(const TrainArgs& a) {
  for (const auto& g : a.graphs) require_input(g, "train");
  require_input(a.ontology, "train");
  require_output(a.out_model, "train");
  if (!a.out_metrics.empty()) require_output(a.out_metrics, "train");

  nlohmann::json cfg_file = as_config([&] { return load_config_file(a.config); });
  TrainConfig cfg = as_config([&] { return train_from_json(config_section(cfg_file, "train")); });
  ModelConfig arch = as_config([&] { return model_from_json(config_section(cfg_file, "model")); });
  if (!a.loss.empty()) cfg.loss_kind = as_config([&] { return loss_kind_from_name(a.loss); });
  if (a.keep_fraction >= 0.0) cfg.keep_fraction = a.keep_fraction;
  if (a.seed >= 0) cfg.seed = std::uint64_t(a.seed);
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }

  std::vector<SceneGraph> graphs;
  for (const auto& path : a.graphs) graphs.push_back(load_graph(path));
  SpatialOntology onto = load_ontology(a.ontology);

  TrainResult res = train(graphs, onto, arch, cfg);
  TrainedArtifact artifact{std::move(res.model), res.encoder, onto.low_levels, onto.high_levels};
  save_artifact(artifact, a.out_model);

  nlohmann::json history = nlohmann::json::array();
  for (const EpochRecord& r : res.history) {
    nlohmann::json h{{"epoch", r.epoch}, {"loss", r.loss}, {"val_accuracy", r.val_accuracy}};
    if (r.equiv_truth) h["equiv_truth"] = *r.equiv_truth;
    if (r.incl_truth) h["incl_truth"] = *r.incl_truth;
    history.push_back(std::move(h));
  }
  nlohmann::json tests = nlohmann::json::array();
  for (const SceneGraph& g : graphs) {
    Metrics m = evaluate(artifact.model, artifact.encoder, g, Split::Test, cfg.masked_classes);
    tests.push_back(metrics_to_json(m, !a.reproducible));
  }
  nlohmann::json metrics{{"best_epoch", res.best_epoch},
                         {"best_val_accuracy", res.best_val_accuracy},
                         {"epochs_run", res.epochs_run},
                         {"train_seconds", a.reproducible ? 0.0 : res.train_seconds},
                         {"history", history},
                         {"test", tests}};
  if (!a.out_metrics.empty()) write_json_file(a.out_metrics, metrics);

  nlohmann::json resolved{{"command", "train"},        {"graphs", a.graphs},
                          {"ontology", a.ontology},    {"train", train_to_json(cfg)},
                          {"model", model_to_json_cfg(arch)}, {"reproducible", a.reproducible}};
  log_resolved(a.out_model, resolved);
  std::cout << "best_val_accuracy=" << fmt(res.best_val_accuracy) << " epochs=" << res.epochs_run
            << " -> " << a.out_model << "\n";
}

struct EvalArgs {
  std::string model, graph, out, split = "test";
  std::vector<int> masked_classes;
  bool reproducible = false;
};

inline void cmd_eval(const EvalArgs& a) {
  require_input(a.model, "eval");
  require_input(a.graph, "eval");
  TrainedArtifact artifact = load_artifact(a.model);
  SceneGraph g = load_graph(a.graph);
  check(g.low_level_vocab == artifact.low_levels && g.high_level_vocab == artifact.high_levels,
        "eval: graph vocabularies do not match the model checkpoint");
  Metrics m = evaluate(artifact.model, artifact.encoder, g, split_from_name(a.split),
                       a.masked_classes);
  nlohmann::json out = metrics_to_json(m, !a.reproducible);
  if (!a.out.empty()) {
    require_output(a.out, "eval");
    write_json_file(a.out, out);
    log_resolved(a.out, nlohmann::json{{"command", "eval"},
                                       {"model", a.model},
                                       {"graph", a.graph},
                                       {"split", a.split},
                                       {"masked_classes", a.masked_classes},
                                       {"reproducible", a.reproducible}});
  }
  std::cout << out.dump() << "\n";
}

struct AblateArgs {
  std::vector<std::string> graphs;
  std::string ontology, config, out_dir;
  int jobs = 1;
  int trials = -1;
  bool reproducible = false;
};

inline void cmd_ablate(const AblateArgs& a) {
  for (const auto& g : a.graphs) require_input(g, "ablate");
  require_input(a.ontology, "ablate");
  nlohmann::json cfg_file = as_config([&] { return load_config_file(a.config); });
  TrainConfig base = as_config([&] { return train_from_json(config_section(cfg_file, "train")); });
  ModelConfig arch = as_config([&] { return model_from_json(config_section(cfg_file, "model")); });
  AblateSection ab = as_config([&] { return ablate_from_json(config_section(cfg_file, "ablate")); });
  if (a.trials > 0) ab.trials = a.trials;
  if (a.reproducible) ab.reproducible = true;

  std::vector<SceneGraph> graphs;
  for (const auto& path : a.graphs) graphs.push_back(load_graph(path));
  SpatialOntology onto = load_ontology(a.ontology);

  AblationReport report =
      run_ablation(graphs, onto, arch, base, ab.losses, ab.fractions, ab.trials, a.jobs);
  emit_report(report, a.out_dir, !ab.reproducible);

  nlohmann::json losses = nlohmann::json::array();
  for (LossKind l : ab.losses) losses.push_back(loss_kind_name(l));
  log_resolved((std::filesystem::path(a.out_dir) / "resolved").string(),
               nlohmann::json{{"command", "ablate"},
                              {"graphs", a.graphs},
                              {"ontology", a.ontology},
                              {"train", train_to_json(base)},
                              {"model", model_to_json_cfg(arch)},
                              {"loss_kinds", losses},
                              {"keep_fractions", ab.fractions},
                              {"trials", ab.trials},
                              {"reproducible", ab.reproducible},
                              {"jobs", a.jobs}});
  for (const AblationCell& c : report.cells)
    std::cout << c.loss_kind << " keep=" << fmt(c.keep_fraction, 4) << " acc=" << fmt(c.mean_accuracy)
              << " +- " << fmt(c.std_accuracy) << (c.complete ? "" : " [incomplete]") << "\n";
}

struct PredictArgs {
  std::string model, graph, out;
};

inline void cmd_predict(const PredictArgs& a) {
  require_input(a.model, "predict");
  require_input(a.graph, "predict");
  require_output(a.out, "predict");
  TrainedArtifact artifact = load_artifact(a.model);
  SceneGraph g = load_graph(a.graph);
  check(g.low_level_vocab == artifact.low_levels && g.high_level_vocab == artifact.high_levels,
        "predict: graph vocabularies do not match the model checkpoint");
  Tensor probs = artifact.model.predict_probs(artifact.encoder.encode(g), g.edges);
  for (int i = 0; i < g.num_nodes(); ++i) {
    int pred = 0;
    for (int j = 1; j < probs.cols(); ++j)
      if (probs.at(i, j) > probs.at(i, pred)) pred = j;
    g.nodes[std::size_t(i)].label = pred;
  }
  save_graph(g, a.out);
  log_resolved(a.out, nlohmann::json{{"command", "predict"}, {"model", a.model}, {"graph", a.graph}});
  std::cout << "wrote " << a.out << "\n";
}

struct ExportDotArgs {
  std::string graph, out;
};

inline void cmd_export_dot(const ExportDotArgs& a) {
  require_input(a.graph, "export-dot");
  require_output(a.out, "export-dot");
  SceneGraph g = load_graph(a.graph);
  static const char* palette[] = {"#e41a1c", "#377eb8", "#4daf4a", "#984ea3", "#ff7f00",
                                  "#ffff33", "#a65628", "#f781bf", "#999999", "#66c2a5",
                                  "#fc8d62", "#8da0cb"};
  std::ofstream out(a.out);
  check(bool(out), "export-dot: cannot write " + a.out);
  out << "graph places {\n  node [shape=circle style=filled width=0.15 label=\"\"];\n";
  for (int i = 0; i < g.num_nodes(); ++i) {
    const PlaceNode& n = g.nodes[std::size_t(i)];
    const char* color = "#dddddd";
    std::string tooltip = "unlabeled";
    if (n.label) {
      color = palette[std::size_t(*n.label) % 12];
      tooltip = g.high_level_vocab[std::size_t(*n.label)];
    }
    out << "  n" << i << " [fillcolor=\"" << color << "\" tooltip=\"" << tooltip << "\" pos=\""
        << fmt(n.position[0] * 10, 3) << ',' << fmt(n.position[1] * 10, 3) << "!\"];\n";
  }
  for (auto [u, v] : g.edges) out << "  n" << u << " -- n" << v << ";\n";
  out << "}\n";
  check(bool(out), "export-dot: write failed for " + a.out);
  log_resolved(a.out, nlohmann::json{{"command", "export-dot"}, {"graph", a.graph}});
  std::cout << "wrote " << a.out << "\n";
}

}  // namespace detail

// Entry point shared by the binary and the tests. Exit codes: 0 success,
// 1 runtime failure, 2 usage/unknown subcommand, 3 invalid configuration.
inline int dispatch(std::vector<std::string> args) {
  CLI::App app{"spatial-ontology region classification for 3D scene graphs", "sgltn"};
  app.require_subcommand(1);

  auto* onto_cmd = app.add_subcommand("ontology", "build or evaluate spatial ontologies");
  onto_cmd->require_subcommand(1);

  detail::OntologyScoreArgs score_args;
  auto* score = onto_cmd->add_subcommand("score", "build an ontology by text scoring");
  score->add_option("--lows", score_args.lows, "low-level vocabulary JSON")->required();
  score->add_option("--highs", score_args.highs, "high-level vocabulary JSON")->required();
  score->add_option("--out", score_args.out, "output ontology JSON")->required();
  score->add_option("--config", score_args.config, "config file");
  score->add_option("--scores", score_args.scores_file, "score table JSON (text -> logprob)");
  score->add_flag("--mock", score_args.mock, "use the seeded mock scorer");
  score->add_option("--mock-seed", score_args.mock_seed, "seed for the mock scorer");
  score->add_option("--temperature", score_args.temperature, "softmax temperature K");
  score->add_option("--threshold", score_args.threshold, "pruning threshold gamma");
  score->callback([&] { detail::cmd_ontology_score(score_args); });

  detail::OntologyCompleteArgs complete_args;
  auto* complete = onto_cmd->add_subcommand("complete", "build an ontology by text completion");
  complete->add_option("--lows", complete_args.lows)->required();
  complete->add_option("--highs", complete_args.highs)->required();
  complete->add_option("--out", complete_args.out)->required();
  complete->add_option("--config", complete_args.config);
  complete->add_flag("--mock", complete_args.mock, "use the seeded mock chat client");
  complete->add_option("--mock-seed", complete_args.mock_seed);
  complete->add_option("--k", complete_args.k, "edges per high-level concept");
  complete->add_option("--repeats", complete_args.repeats, "query repetitions N");
  complete->add_option("--max-retries", complete_args.max_retries);
  complete->add_option("--cache-dir", complete_args.cache_dir, "response cache directory");
  complete->callback([&] { detail::cmd_ontology_complete(complete_args); });

  detail::OntologyEvalArgs oeval_args;
  auto* oeval = onto_cmd->add_subcommand("eval", "score an ontology against judgments");
  oeval->add_option("--ontology", oeval_args.ontology)->required();
  oeval->add_option("--judgments", oeval_args.judgments)->required();
  oeval->add_option("--out", oeval_args.out, "metrics JSON output");
  oeval->callback([&] { detail::cmd_ontology_eval(oeval_args); });

  detail::SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "generate a synthetic scene graph");
  synth->add_option("--config", synth_args.config);
  synth->add_option("--ontology", synth_args.ontology, "planted ontology JSON");
  synth->add_option("--out", synth_args.out)->required();
  synth->add_option("--seed", synth_args.seed);
  synth->callback([&] { detail::cmd_synth(synth_args); });

  detail::TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train the region classifier");
  train_cmd->add_option("--graph", train_args.graphs, "scene graph JSON (repeatable)")->required();
  train_cmd->add_option("--ontology", train_args.ontology)->required();
  train_cmd->add_option("--config", train_args.config);
  train_cmd->add_option("--out-model", train_args.out_model)->required();
  train_cmd->add_option("--out-metrics", train_args.out_metrics);
  train_cmd->add_option("--loss", train_args.loss,
                        "cross_entropy | sat_equiv | sat_incl | sat_both");
  train_cmd->add_option("--keep-fraction", train_args.keep_fraction);
  train_cmd->add_option("--seed", train_args.seed);
  train_cmd->add_flag("--reproducible", train_args.reproducible,
                      "write 0 for wall-clock fields so reports are byte-stable");
  train_cmd->callback([&] { detail::cmd_train(train_args); });

  detail::EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a trained model on a graph");
  eval_cmd->add_option("--model", eval_args.model)->required();
  eval_cmd->add_option("--graph", eval_args.graph)->required();
  eval_cmd->add_option("--split", eval_args.split, "train | val | test");
  eval_cmd->add_option("--out", eval_args.out);
  eval_cmd->add_option("--masked-classes", eval_args.masked_classes);
  eval_cmd->add_flag("--reproducible", eval_args.reproducible);
  eval_cmd->callback([&] { detail::cmd_eval(eval_args); });

  detail::AblateArgs ablate_args;
  auto* ablate = app.add_subcommand("ablate", "loss-vs-label-budget ablation study");
  ablate->add_option("--graph", ablate_args.graphs, "scene graph JSON (repeatable)")->required();
  ablate->add_option("--ontology", ablate_args.ontology)->required();
  ablate->add_option("--config", ablate_args.config);
  ablate->add_option("--out-dir", ablate_args.out_dir)->required();
  ablate->add_option("--jobs", ablate_args.jobs, "parallel trials");
  ablate->add_option("--trials", ablate_args.trials);
  ablate->add_flag("--reproducible", ablate_args.reproducible);
  ablate->callback([&] { detail::cmd_ablate(ablate_args); });

  detail::PredictArgs predict_args;
  auto* predict = app.add_subcommand("predict", "write predicted labels into a scene graph");
  predict->add_option("--model", predict_args.model)->required();
  predict->add_option("--graph", predict_args.graph)->required();
  predict->add_option("--out", predict_args.out)->required();
  predict->callback([&] { detail::cmd_predict(predict_args); });

  detail::ExportDotArgs dot_args;
  auto* dot = app.add_subcommand("export-dot", "emit a colored DOT rendering of a scene graph");
  dot->add_option("--graph", dot_args.graph)->required();
  dot->add_option("--out", dot_args.out)->required();
  dot->callback([&] { detail::cmd_export_dot(dot_args); });

  auto one_line = [](std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
  };

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
    return 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints contextual help, exits 0
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: {\"exit\": 2, \"kind\": \"usage\", \"message\": \""
              << one_line(e.what()) << "\"}\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: {\"exit\": 3, \"kind\": \"config\", \"message\": \""
              << one_line(e.what()) << "\"}\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: {\"exit\": 1, \"kind\": \"runtime\", \"message\": \""
              << one_line(e.what()) << "\"}\n";
    return 1;
  }
}

}  // namespace sgltn::cli
