#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "sgltn/adam.hpp"
#include "sgltn/fuzzy.hpp"
#include "sgltn/model.hpp"
#include "sgltn/ontology.hpp"
#include "sgltn/scenegraph.hpp"

namespace sgltn {

struct AxiomSet {
  bool use_equiv = true;
  bool use_incl = true;
  AggregatorConfig aggregator;

  void validate() const {
    check(use_equiv || use_incl, "axioms: at least one of equiv/incl must be active");
    aggregator.validate();
  }
};

enum class LossKind { CrossEntropy, SatEquiv, SatIncl, SatBoth };

inline const char* loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::CrossEntropy: return "cross_entropy";
    case LossKind::SatEquiv: return "sat_equiv";
    case LossKind::SatIncl: return "sat_incl";
    default: return "sat_both";
  }
}

inline LossKind loss_kind_from_name(const std::string& s) {
  if (s == "cross_entropy") return LossKind::CrossEntropy;
  if (s == "sat_equiv") return LossKind::SatEquiv;
  if (s == "sat_incl") return LossKind::SatIncl;
  if (s == "sat_both") return LossKind::SatBoth;
  throw Error("loss must be cross_entropy/sat_equiv/sat_incl/sat_both, got \"" + s + "\"");
}

struct TrainConfig {
  LossKind loss_kind = LossKind::SatBoth;
  double learning_rate = 0.001;
  double weight_decay = 5e-5;
  int max_epochs = 1000;
  double convergence_delta = 1e-6;
  int convergence_patience = 10;
  double keep_fraction = 1.0;
  std::vector<int> masked_classes;
  AggregatorConfig aggregator;
  bool incl_covers_test = false;  // inclusion axiom spans train+val unless set
  int embed_dim = 16;
  std::uint64_t seed = 1;  // trial seed: masking, init, dropout stream

  void validate() const {
    check(learning_rate > 0.0, "train: learning_rate must be positive");
    check(weight_decay >= 0.0, "train: weight_decay must be nonnegative");
    check(max_epochs >= 1, "train: max_epochs must be positive");
    check(convergence_delta >= 0.0, "train: convergence_delta must be nonnegative");
    check(convergence_patience >= 1, "train: convergence_patience must be >= 1");
    check(keep_fraction >= 0.0 && keep_fraction <= 1.0, "train: keep_fraction in [0, 1]");
    check(embed_dim >= 1, "train: embed_dim must be positive");
    aggregator.validate();
  }
};

struct Metrics {
  double accuracy = 0.0;
  std::vector<double> per_class_accuracy;            // nan where a class has no nodes
  double masked_class_accuracy = std::nan("");       // nan when no masked-class nodes
  std::vector<std::vector<int>> confusion;           // [true][predicted]
  double infer_seconds = 0.0;
  int evaluated = 0;
};

// ---------------------------------------------------------------------------
// Predicates (Real Logic interpretations)
// ---------------------------------------------------------------------------

// Agreement between a predicted distribution and a one-hot label: y^T * probs.
inline TruthTensor is_class_of(Tape& tp, Tape::Id probs_row, const Tensor& label_onehot) {
  const Tensor& p = tp.value(probs_row);
  check(p.rank() == 2 && p.rows() == 1, "is_class_of: probs_row must be {1, m}");
  check(label_onehot.numel() == std::size_t(p.cols()), "is_class_of: label length mismatch");
  int ones = 0;
  for (double v : label_onehot.data) {
    check(v == 0.0 || v == 1.0, "is_class_of: label must be one-hot");
    ones += v == 1.0 ? 1 : 0;
  }
  check(ones == 1, "is_class_of: label must have exactly one active class");
  Tensor row = label_onehot;
  row.shape = {1, p.cols()};
  return TruthTensor::wrap(tp, row_sums(tp, mul(tp, probs_row, tp.leaf(row))));
}

// Fraction of histogram mass on low-level concepts with at least one
// ontology edge: sum(omega_hat * q_hat). Constants only, so a plain number.
inline double is_valid(const Tensor& omega_hat, const Tensor& q_hat) {
  check(omega_hat.rank() == 2, "is_valid: omega_hat must be a matrix");
  check(q_hat.numel() == std::size_t(omega_hat.cols()), "is_valid: histogram length mismatch");
  double out = 0.0;
  for (int i = 0; i < omega_hat.rows(); ++i)
    for (int j = 0; j < omega_hat.cols(); ++j) out += omega_hat.at(i, j) * q_hat.data[std::size_t(j)];
  return out;
}

// Similarity between predicted distribution and the ontology's expected
// high-level mix: probs^T * (omega_hat * q_hat).
inline TruthTensor is_similar(Tape& tp, Tape::Id probs_row, const Tensor& omega_hat,
                              const Tensor& q_hat) {
  const Tensor& p = tp.value(probs_row);
  check(p.rank() == 2 && p.rows() == 1, "is_similar: probs_row must be {1, m}");
  check(p.cols() == omega_hat.rows(), "is_similar: class count mismatch");
  check(q_hat.numel() == std::size_t(omega_hat.cols()), "is_similar: histogram length mismatch");
  Tensor target = Tensor::zeros({1, omega_hat.rows()});
  for (int i = 0; i < omega_hat.rows(); ++i) {
    double s = 0.0;
    for (int j = 0; j < omega_hat.cols(); ++j) s += omega_hat.at(i, j) * q_hat.data[std::size_t(j)];
    target.at(0, i) = s;
  }
  return TruthTensor::wrap(tp, row_sums(tp, mul(tp, probs_row, tp.leaf(target))));
}

// l1-normalized histogram of one node (zero histogram stays zero).
inline Tensor normalized_histogram(const PlaceNode& node) {
  Tensor q = Tensor::zeros({int(node.histogram.size())});
  double total = 0.0;
  for (int c : node.histogram) total += c;
  if (total > 0.0)
    for (std::size_t j = 0; j < node.histogram.size(); ++j)
      q.data[j] = double(node.histogram[j]) / total;
  return q;
}

// Rows of omega_hat * q_hat for the selected nodes: {R, m}. Row sums give
// IsValid, dotted with predictions give IsSimilar.
inline Tensor ontology_targets(const SceneGraph& graph, const Tensor& omega_hat,
                               const std::vector<int>& rows) {
  int m = omega_hat.rows(), n = omega_hat.cols();
  check(graph.num_low() == n, "ontology_targets: vocabulary size mismatch");
  Tensor t = Tensor::zeros({int(rows.size()), m});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    Tensor q = normalized_histogram(graph.nodes[std::size_t(rows[r])]);
    for (int i = 0; i < m; ++i) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += omega_hat.at(i, j) * q.data[std::size_t(j)];
      t.at(int(r), i) = s;
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Axioms (diagonal quantification: row i pairs with label/target i)
// ---------------------------------------------------------------------------

inline TruthTensor equivalence_axiom(Tape& tp, Tape::Id probs, const std::vector<int>& labeled_rows,
                                     const Tensor& onehots, double p) {
  check(!labeled_rows.empty(), "equivalence axiom: no labeled nodes");
  check(onehots.rank() == 2 && onehots.rows() == int(labeled_rows.size()),
        "equivalence axiom: one-hot row count mismatch");
  Tape::Id selected = gather_rows(tp, probs, labeled_rows);
  Tape::Id truths = row_sums(tp, mul(tp, selected, tp.leaf(onehots)));
  return forall_pme(TruthTensor::wrap(tp, truths), p);
}

inline TruthTensor inclusion_axiom(Tape& tp, Tape::Id probs, const std::vector<int>& rows,
                                   const Tensor& targets, double p) {
  check(!rows.empty(), "inclusion axiom: no nodes");
  check(targets.rank() == 2 && targets.rows() == int(rows.size()),
        "inclusion axiom: target row count mismatch");
  check(targets.cols() == tp.value(probs).cols(), "inclusion axiom: class count mismatch");
  Tensor valid = Tensor::zeros({int(rows.size()), 1});
  for (int r = 0; r < targets.rows(); ++r) {
    double s = 0.0;
    for (int j = 0; j < targets.cols(); ++j) s += targets.at(r, j);
    valid.data[std::size_t(r)] = s;
  }
  TruthTensor valid_t = TruthTensor::constant(tp, valid);
  Tape::Id sim = row_sums(tp, mul(tp, gather_rows(tp, probs, rows), tp.leaf(targets)));
  TruthTensor similar_t = TruthTensor::wrap(tp, sim);
  return forall_pme(implies_goguen(valid_t, similar_t), p);
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

struct LossParts {
  Tape::Id loss = -1;
  std::optional<double> equiv_truth;
  std::optional<double> incl_truth;
};

struct GraphBatch {
  const SceneGraph* graph = nullptr;
  Tensor features;
  std::vector<int> labeled_rows;  // train-split nodes with labels
  Tensor onehots;                 // {L, m}
  std::vector<int> incl_rows;     // nodes covered by the inclusion axiom
  Tensor incl_targets;            // {R, m}
};

inline GraphBatch make_batch(const SceneGraph& graph, const FeatureEncoder& encoder,
                             const Tensor& omega_hat, bool incl_covers_test) {
  GraphBatch b;
  b.graph = &graph;
  b.features = encoder.encode(graph);
  int m = graph.num_high();
  for (int i = 0; i < graph.num_nodes(); ++i) {
    const PlaceNode& n = graph.nodes[std::size_t(i)];
    if (n.split == Split::Train && n.label) b.labeled_rows.push_back(i);
    if (incl_covers_test || n.split != Split::Test) b.incl_rows.push_back(i);
  }
  b.onehots = Tensor::zeros({int(b.labeled_rows.size()), m});
  for (std::size_t r = 0; r < b.labeled_rows.size(); ++r)
    b.onehots.at(int(r), *graph.nodes[std::size_t(b.labeled_rows[r])].label) = 1.0;
  b.incl_targets = ontology_targets(graph, omega_hat, b.incl_rows);
  return b;
}

inline LossParts compute_loss(Tape& tp, LossKind kind, Tape::Id probs, const GraphBatch& batch,
                              const AggregatorConfig& agg) {
  LossParts out;
  if (kind == LossKind::CrossEntropy) {
    check(!batch.labeled_rows.empty(), "cross_entropy: no labeled training nodes");
    Tape::Id selected = gather_rows(tp, probs, batch.labeled_rows);
    Tape::Id p_true = row_sums(tp, mul(tp, selected, tp.leaf(batch.onehots)));
    Tape::Id logp = log(tp, clamp(tp, p_true, TruthTensor::kEps, 1.0));
    out.loss = mul(tp, sum(tp, logp), constant(tp, -1.0 / double(batch.labeled_rows.size())));
    return out;
  }

  AxiomSet axioms;
  axioms.use_equiv = kind == LossKind::SatEquiv || kind == LossKind::SatBoth;
  axioms.use_incl = kind == LossKind::SatIncl || kind == LossKind::SatBoth;
  axioms.aggregator = agg;
  axioms.validate();
  std::vector<TruthTensor> formulas;
  if (axioms.use_equiv) {
    check(!batch.labeled_rows.empty(),
          "sat loss: equivalence axiom active but no labeled training nodes");
    TruthTensor t = equivalence_axiom(tp, probs, batch.labeled_rows, batch.onehots,
                                      agg.p_forall_equiv);
    out.equiv_truth = t.item();
    formulas.push_back(t);
  }
  if (axioms.use_incl) {
    TruthTensor t = inclusion_axiom(tp, probs, batch.incl_rows, batch.incl_targets,
                                    agg.p_forall_incl);
    out.incl_truth = t.item();
    formulas.push_back(t);
  }
  check(!formulas.empty(), "sat loss: no active axioms");
  TruthTensor sat = sat_agg(formulas, agg.p_satagg);
  out.loss = sub(tp, constant(tp, 1.0), sat.id);
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

// Metrics from a per-node probability matrix; argmax ties resolve to the
// lowest class index.
inline Metrics metrics_from_probs(const Tensor& probs, const SceneGraph& graph, Split split,
                                  const std::vector<int>& masked_classes = {}) {
  check(probs.rank() == 2 && probs.rows() == graph.num_nodes() && probs.cols() == graph.num_high(),
        "metrics: probs must be |V| x m");
  int m = graph.num_high();
  Metrics out;
  out.confusion.assign(std::size_t(m), std::vector<int>(std::size_t(m), 0));
  std::vector<int> class_total(std::size_t(m), 0), class_correct(std::size_t(m), 0);
  int correct = 0, masked_total = 0, masked_correct = 0;
  std::vector<bool> masked(std::size_t(m), false);
  for (int c : masked_classes) {
    check(c >= 0 && c < m, "evaluate: masked class out of range");
    masked[std::size_t(c)] = true;
  }

  for (int i = 0; i < graph.num_nodes(); ++i) {
    const PlaceNode& n = graph.nodes[std::size_t(i)];
    if (n.split != split || !n.label) continue;
    int truth = *n.label;
    int pred = 0;  // argmax, ties to the lowest class index
    for (int j = 1; j < m; ++j)
      if (probs.at(i, j) > probs.at(i, pred)) pred = j;
    out.evaluated += 1;
    out.confusion[std::size_t(truth)][std::size_t(pred)] += 1;
    class_total[std::size_t(truth)] += 1;
    bool hit = pred == truth;
    correct += hit ? 1 : 0;
    class_correct[std::size_t(truth)] += hit ? 1 : 0;
    if (masked[std::size_t(truth)]) {
      masked_total += 1;
      masked_correct += hit ? 1 : 0;
    }
  }
  out.accuracy = out.evaluated ? double(correct) / out.evaluated : std::nan("");
  for (int c = 0; c < m; ++c)
    out.per_class_accuracy.push_back(
        class_total[std::size_t(c)] ? double(class_correct[std::size_t(c)]) / class_total[std::size_t(c)]
                                    : std::nan(""));
  if (masked_total) out.masked_class_accuracy = double(masked_correct) / masked_total;
  return out;
}

// Eval-mode inference on the graph, timed, followed by metric computation.
inline Metrics evaluate(const RegionClassifier& model, const FeatureEncoder& encoder,
                        const SceneGraph& graph, Split split,
                        const std::vector<int>& masked_classes = {}) {
  Tensor features = encoder.encode(graph);
  auto t0 = std::chrono::steady_clock::now();
  Tensor probs = model.predict_probs(features, graph.edges);
  auto t1 = std::chrono::steady_clock::now();
  Metrics out = metrics_from_probs(probs, graph, split, masked_classes);
  out.infer_seconds = std::chrono::duration<double>(t1 - t0).count();
  return out;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  std::optional<double> equiv_truth;
  std::optional<double> incl_truth;
  double val_accuracy = 0.0;
};

struct TrainResult {
  RegionClassifier model;  // best-validation snapshot
  FeatureEncoder encoder;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_val_accuracy = 0.0;
  int epochs_run = 0;
  double train_seconds = 0.0;
};

inline FeatureEncoder fit_encoder(const std::vector<SceneGraph>& graphs, int embed_dim,
                                  std::uint64_t seed) {
  check(!graphs.empty(), "train: no graphs");
  FeatureEncoder enc = FeatureEncoder::fit(graphs[0], embed_dim, seed);
  for (std::size_t g = 1; g < graphs.size(); ++g) {
    check(graphs[g].low_level_vocab == graphs[0].low_level_vocab,
          "train: graphs disagree on the low-level vocabulary");
    FeatureEncoder other = FeatureEncoder::fit(graphs[g], embed_dim, seed);
    for (int a = 0; a < 3; ++a) {
      enc.pos_min[std::size_t(a)] = std::min(enc.pos_min[std::size_t(a)], other.pos_min[std::size_t(a)]);
      enc.pos_max[std::size_t(a)] = std::max(enc.pos_max[std::size_t(a)], other.pos_max[std::size_t(a)]);
    }
  }
  return enc;
}

// Full-batch Adam on the satisfiability (or cross-entropy) objective, one
// step per graph per epoch. Stops when the loss moves less than
// convergence_delta for convergence_patience consecutive epochs or at
// max_epochs; the parameter snapshot with the best validation accuracy wins.
// Epoch 1 has no predecessor to diff against, so a constant-loss run stops
// after patience + 1 epochs.
inline TrainResult train(const std::vector<SceneGraph>& input_graphs, const SpatialOntology& onto,
                         const ModelConfig& arch_in, const TrainConfig& cfg) {
  cfg.validate();
  check(!input_graphs.empty(), "train: no graphs");
  onto.validate();

  std::vector<SceneGraph> graphs;
  for (const SceneGraph& g : input_graphs) {
    check(g.low_level_vocab == onto.low_levels && g.high_level_vocab == onto.high_levels,
          "train: graph vocabularies do not match the ontology");
    check(!g.split_indices(Split::Train).empty(), "train: empty training split");
    SceneGraph masked = mask_labels(g, cfg.keep_fraction, cfg.seed);
    if (!cfg.masked_classes.empty()) masked = mask_classes(masked, cfg.masked_classes);
    graphs.push_back(std::move(masked));
  }

  auto t_start = std::chrono::steady_clock::now();
  FeatureEncoder encoder = fit_encoder(graphs, cfg.embed_dim, cfg.seed);
  Tensor omega_hat = normalized_biadjacency(onto);
  std::vector<GraphBatch> batches;
  for (const SceneGraph& g : graphs)
    batches.push_back(make_batch(g, encoder, omega_hat, cfg.incl_covers_test));

  ModelConfig arch = arch_in;
  arch.in_dim = encoder.feature_dim();
  arch.num_classes = onto.num_high();
  RegionClassifier model = RegionClassifier::init(arch, cfg.seed);
  std::vector<Tensor*> params = model.parameters();
  AdamState adam = AdamState::init(params, cfg.learning_rate, cfg.weight_decay);

  TrainResult result;
  result.best_val_accuracy = -1.0;
  std::vector<std::vector<double>> best_params;

  Rng dropout_stream(cfg.seed);
  double prev_loss = std::numeric_limits<double>::quiet_NaN();
  int streak = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    double loss_total = 0.0;
    for (std::size_t g = 0; g < batches.size(); ++g) {
      Tape tp;
      Tape::Id features = tp.leaf(batches[g].features);
      std::uint64_t seed =
          dropout_stream.split(std::uint64_t(epoch) * batches.size() + g).next_u64();
      auto fw = model.forward(tp, features, graphs[g].edges, /*training=*/true, seed);
      LossParts parts = compute_loss(tp, cfg.loss_kind, fw.probs, batches[g], cfg.aggregator);
      double loss = tp.value(parts.loss).item();
      if (!std::isfinite(loss))
        throw Error("train: non-finite loss at epoch " + std::to_string(epoch));
      loss_total += loss;
      if (parts.equiv_truth) rec.equiv_truth = parts.equiv_truth;
      if (parts.incl_truth) rec.incl_truth = parts.incl_truth;
      tp.backward(parts.loss);
      std::vector<Tensor> grads;
      grads.reserve(params.size());
      for (Tape::Id id : fw.param_ids) grads.push_back(tp.grad(id));
      adam_step(adam, params, grads);
    }
    rec.loss = loss_total / double(batches.size());

    int val_correct = 0, val_total = 0;
    for (std::size_t g = 0; g < batches.size(); ++g) {
      Tensor probs = model.predict_probs(batches[g].features, graphs[g].edges);
      for (int i = 0; i < graphs[g].num_nodes(); ++i) {
        const PlaceNode& n = graphs[g].nodes[std::size_t(i)];
        if (n.split != Split::Val || !n.label) continue;
        int pred = 0;
        for (int j = 1; j < probs.cols(); ++j)
          if (probs.at(i, j) > probs.at(i, pred)) pred = j;
        val_total += 1;
        val_correct += pred == *n.label ? 1 : 0;
      }
    }
    rec.val_accuracy = val_total ? double(val_correct) / val_total : 0.0;
    result.history.push_back(rec);

    if (rec.val_accuracy > result.best_val_accuracy) {
      result.best_val_accuracy = rec.val_accuracy;
      result.best_epoch = epoch;
      best_params.clear();
      for (Tensor* p : params) best_params.push_back(p->data);
    }

    if (epoch > 1 && std::abs(rec.loss - prev_loss) < cfg.convergence_delta) {
      streak += 1;
    } else {
      streak = 0;
    }
    prev_loss = rec.loss;
    result.epochs_run = epoch;
    if (streak >= cfg.convergence_patience) break;
  }

  if (!best_params.empty())
    for (std::size_t k = 0; k < params.size(); ++k) params[k]->data = best_params[k];
  result.model = std::move(model);
  result.encoder = encoder;
  result.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

// ---------------------------------------------------------------------------
// Trained artifact (model + encoder + vocabularies)
// ---------------------------------------------------------------------------

struct TrainedArtifact {
  RegionClassifier model;
  FeatureEncoder encoder;
  std::vector<std::string> low_levels;
  std::vector<std::string> high_levels;
};

inline void save_artifact(const TrainedArtifact& a, const std::string& path) {
  nlohmann::json j;
  j["model"] = a.model.to_json();
  j["encoder"] = a.encoder.to_json();
  j["low_levels"] = a.low_levels;
  j["high_levels"] = a.high_levels;
  write_json_file(path, j);
}

inline TrainedArtifact load_artifact(const std::string& path) {
  nlohmann::json j = read_json_file(path);
  reject_unknown_keys(j, {"model", "encoder", "low_levels", "high_levels"}, path);
  TrainedArtifact a;
  a.model = RegionClassifier::from_json(j.at("model"), path);
  a.encoder = FeatureEncoder::from_json(j.at("encoder"));
  a.low_levels = j.at("low_levels").get<std::vector<std::string>>();
  a.high_levels = j.at("high_levels").get<std::vector<std::string>>();
  return a;
}

// ---------------------------------------------------------------------------
// Ablation
// ---------------------------------------------------------------------------

struct AblationRow {
  std::string loss_kind;
  double keep_fraction = 1.0;
  int trial = 0;
  std::uint64_t seed = 0;
  double accuracy = std::nan("");
  double masked_class_accuracy = std::nan("");
  int epochs = 0;
  double train_seconds = 0.0;
  double infer_seconds_per_graph = 0.0;
  bool complete = false;
  std::string error;
};

struct AblationCell {
  std::string loss_kind;
  double keep_fraction = 1.0;
  int trials = 0;
  double mean_accuracy = std::nan("");
  double std_accuracy = std::nan("");
  double mean_masked_class_accuracy = std::nan("");
  double std_masked_class_accuracy = std::nan("");
  bool complete = false;
};

struct AblationReport {
  std::vector<AblationRow> rows;
  std::vector<AblationCell> cells;
};

// Paired design: the masking seed is the trial seed, identical across loss
// kinds within a cell, so every loss kind sees the same retained labels
// ("trial 1 is seeded as 1"). Trials run independently and may fan out over
// jobs; results merge by (loss, fraction, trial) index, not completion order.
inline AblationReport run_ablation(const std::vector<SceneGraph>& graphs,
                                   const SpatialOntology& onto, const ModelConfig& arch,
                                   const TrainConfig& base, const std::vector<LossKind>& losses,
                                   const std::vector<double>& fractions, int trials, int jobs = 1) {
  check(!losses.empty(), "ablation: no loss kinds");
  check(!fractions.empty(), "ablation: no keep fractions");
  check(trials >= 1, "ablation: trials must be >= 1");

  struct Task {
    LossKind loss;
    double fraction;
    int trial;
  };
  std::vector<Task> tasks;
  for (LossKind l : losses)
    for (double f : fractions)
      for (int t = 1; t <= trials; ++t) tasks.push_back({l, f, t});

  AblationReport report;
  report.rows.resize(tasks.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    while (true) {
      std::size_t k = next.fetch_add(1);
      if (k >= tasks.size()) return;
      const Task& task = tasks[k];
      AblationRow& row = report.rows[k];
      row.loss_kind = loss_kind_name(task.loss);
      row.keep_fraction = task.fraction;
      row.trial = task.trial;
      row.seed = std::uint64_t(task.trial);
      try {
        TrainConfig cfg = base;
        cfg.loss_kind = task.loss;
        cfg.keep_fraction = task.fraction;
        cfg.seed = std::uint64_t(task.trial);
        TrainResult res = train(graphs, onto, arch, cfg);
        int correct = 0, total = 0, mcorrect = 0, mtotal = 0;
        double infer = 0.0;
        for (const SceneGraph& g : graphs) {
          Metrics m = evaluate(res.model, res.encoder, g, Split::Test, base.masked_classes);
          infer += m.infer_seconds;
          for (std::size_t c = 0; c < m.confusion.size(); ++c)
            for (std::size_t d = 0; d < m.confusion.size(); ++d) {
              total += m.confusion[c][d];
              if (c == d) correct += m.confusion[c][d];
              bool is_masked = false;
              for (int mc : base.masked_classes) is_masked = is_masked || std::size_t(mc) == c;
              if (is_masked) {
                mtotal += m.confusion[c][d];
                if (c == d) mcorrect += m.confusion[c][d];
              }
            }
        }
        row.accuracy = total ? double(correct) / total : std::nan("");
        if (mtotal) row.masked_class_accuracy = double(mcorrect) / mtotal;
        row.epochs = res.epochs_run;
        row.train_seconds = res.train_seconds;
        row.infer_seconds_per_graph = infer / double(graphs.size());
        row.complete = true;
      } catch (const std::exception& e) {
        row.complete = false;
        row.error = e.what();
      }
    }
  };

  int nworkers = std::max(1, std::min<int>(jobs, int(tasks.size())));
  if (nworkers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < nworkers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (LossKind l : losses)
    for (double f : fractions) {
      AblationCell cell;
      cell.loss_kind = loss_kind_name(l);
      cell.keep_fraction = f;
      cell.complete = true;
      std::vector<double> accs, maccs;
      for (const AblationRow& row : report.rows) {
        if (row.loss_kind != cell.loss_kind || row.keep_fraction != f) continue;
        cell.trials += 1;
        if (!row.complete) {
          cell.complete = false;
          continue;
        }
        accs.push_back(row.accuracy);
        if (!std::isnan(row.masked_class_accuracy)) maccs.push_back(row.masked_class_accuracy);
      }
      auto mean_std = [](const std::vector<double>& v) -> std::pair<double, double> {
        if (v.empty()) return {std::nan(""), std::nan("")};
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= double(v.size());
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        return {mean, std::sqrt(var / double(v.size()))};
      };
      std::tie(cell.mean_accuracy, cell.std_accuracy) = mean_std(accs);
      std::tie(cell.mean_masked_class_accuracy, cell.std_masked_class_accuracy) = mean_std(maccs);
      report.cells.push_back(cell);
    }
  return report;
}

}  // namespace sgltn
