#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sgltn/jsonio.hpp"
#include "sgltn/rng.hpp"
#include "sgltn/tape.hpp"

namespace sgltn {

struct ModelConfig {
  int in_dim = 0;
  int hidden_dim = 32;
  int num_classes = 0;
  int gat_layers = 3;
  int heads = 4;
  double dropout = 0.25;
  double leaky_slope = 0.2;

  void validate() const {
    check(in_dim >= 1, "model: in_dim must be positive");
    check(hidden_dim >= 1, "model: hidden_dim must be positive");
    check(num_classes >= 2, "model: need at least two classes");
    check(gat_layers >= 1, "model: need at least one message-passing layer");
    check(heads >= 1, "model: heads must be positive");
    check(hidden_dim % heads == 0, "model: heads must divide hidden_dim");
    check(dropout >= 0.0 && dropout < 1.0, "model: dropout must be in [0, 1)");
  }
};

// One attention head: shared linear transform plus additive attention
// vectors for source and destination (GAT v1).
struct GatHead {
  Tensor weight;  // {out, in}
  Tensor a_src;   // {out, 1}
  Tensor a_dst;   // {out, 1}
};

// Per-layer attention coefficients captured for inspection: one vector per
// head, aligned with the directed edge list (undirected edges expanded both
// ways, then one self loop per node).
struct ForwardTrace {
  std::vector<int> edge_src;
  std::vector<int> edge_dst;
  std::vector<std::vector<Tensor>> attention;  // [layer][head] -> {E, 1}
};

// GAT message-passing stack with an MLP softmax head on top.
class RegionClassifier {
 public:
  ModelConfig config;
  std::vector<std::vector<GatHead>> gat;  // [layer][head]
  Tensor mlp_w1;                          // {hidden, hidden}
  Tensor mlp_b1;                          // {1, hidden}
  Tensor mlp_w2;                          // {hidden, m}
  Tensor mlp_b2;                          // {1, m}

  static RegionClassifier init(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    RegionClassifier model;
    model.config = cfg;
    Rng rng(seed);
    int head_out = cfg.hidden_dim / cfg.heads;
    for (int l = 0; l < cfg.gat_layers; ++l) {
      int in = l == 0 ? cfg.in_dim : cfg.hidden_dim;
      std::vector<GatHead> heads;
      for (int h = 0; h < cfg.heads; ++h) {
        GatHead head;
        head.weight = glorot({head_out, in}, in, head_out, rng);
        head.a_src = glorot({head_out, 1}, head_out, 1, rng);
        head.a_dst = glorot({head_out, 1}, head_out, 1, rng);
        heads.push_back(std::move(head));
      }
      model.gat.push_back(std::move(heads));
    }
    model.mlp_w1 = glorot({cfg.hidden_dim, cfg.hidden_dim}, cfg.hidden_dim, cfg.hidden_dim, rng);
    model.mlp_b1 = Tensor::zeros({1, cfg.hidden_dim});
    model.mlp_w2 = glorot({cfg.hidden_dim, cfg.num_classes}, cfg.hidden_dim, cfg.num_classes, rng);
    model.mlp_b2 = Tensor::zeros({1, cfg.num_classes});
    for (Tensor* p : model.parameters()) p->requires_grad = true;
    return model;
  }

  std::vector<Tensor*> parameters() {
    std::vector<Tensor*> out;
    for (auto& layer : gat)
      for (auto& head : layer) {
        out.push_back(&head.weight);
        out.push_back(&head.a_src);
        out.push_back(&head.a_dst);
      }
    out.push_back(&mlp_w1);
    out.push_back(&mlp_b1);
    out.push_back(&mlp_w2);
    out.push_back(&mlp_b2);
    return out;
  }

  std::vector<const Tensor*> parameters() const {
    std::vector<const Tensor*> out;
    for (const auto& layer : gat)
      for (const auto& head : layer) {
        out.push_back(&head.weight);
        out.push_back(&head.a_src);
        out.push_back(&head.a_dst);
      }
    out.push_back(&mlp_w1);
    out.push_back(&mlp_b1);
    out.push_back(&mlp_w2);
    out.push_back(&mlp_b2);
    return out;
  }

  std::vector<std::string> parameter_names() const {
    std::vector<std::string> out;
    for (std::size_t l = 0; l < gat.size(); ++l)
      for (std::size_t h = 0; h < gat[l].size(); ++h) {
        std::string base = "gat" + std::to_string(l) + ".head" + std::to_string(h) + ".";
        out.push_back(base + "weight");
        out.push_back(base + "a_src");
        out.push_back(base + "a_dst");
      }
    out.push_back("mlp.w1");
    out.push_back("mlp.b1");
    out.push_back("mlp.w2");
    out.push_back("mlp.b2");
    return out;
  }

  struct Forward {
    Tape::Id probs = -1;
    std::vector<Tape::Id> param_ids;  // aligned with parameters()
  };

  // Full forward pass on the tape: per layer, per-head linear transform,
  // additive attention with leaky ReLU, softmax over each node's
  // in-neighborhood (self loop included), weighted aggregation, heads
  // concatenated; ReLU+dropout between message-passing layers; MLP head and
  // row softmax. Dropout draws from dropout_seed only when training.
  Forward forward(Tape& tp, Tape::Id features, const std::vector<std::pair<int, int>>& edges,
                  bool training, std::uint64_t dropout_seed, ForwardTrace* trace = nullptr) const {
    const Tensor& feat = tp.value(features);
    check(feat.rank() == 2 && feat.cols() == config.in_dim,
          "model: feature matrix must be |V| x " + std::to_string(config.in_dim) + ", got " +
              Tensor::shape_str(feat.shape));
    int num_nodes = feat.rows();

    std::vector<int> src, dst;
    src.reserve(edges.size() * 2 + std::size_t(num_nodes));
    dst.reserve(src.capacity());
    for (auto [u, v] : edges) {
      if (u < 0 || u >= num_nodes || v < 0 || v >= num_nodes)
        throw Error("model: edge endpoint out of range");
      src.push_back(u);
      dst.push_back(v);
      src.push_back(v);
      dst.push_back(u);
    }
    for (int i = 0; i < num_nodes; ++i) {
      src.push_back(i);
      dst.push_back(i);
    }
    if (trace) {
      trace->edge_src = src;
      trace->edge_dst = dst;
      trace->attention.clear();
    }

    Forward out;
    // registering parameters in parameters() order keeps grads addressable
    for (const Tensor* p : parameters()) out.param_ids.push_back(tp.leaf(*p));

    Rng drop_rng(dropout_seed);
    std::size_t pid = 0;
    Tape::Id h = features;
    for (int l = 0; l < config.gat_layers; ++l) {
      std::vector<Tape::Id> head_outs;
      if (trace) trace->attention.emplace_back();
      for (int k = 0; k < config.heads; ++k) {
        Tape::Id w = out.param_ids[pid++];
        Tape::Id a_src = out.param_ids[pid++];
        Tape::Id a_dst = out.param_ids[pid++];
        Tape::Id transformed = matmul(tp, h, transpose(tp, w));  // {V, head_out}
        Tape::Id score_src = matmul(tp, transformed, a_src);     // {V, 1}
        Tape::Id score_dst = matmul(tp, transformed, a_dst);
        Tape::Id logits = add(tp, gather_rows(tp, score_src, src), gather_rows(tp, score_dst, dst));
        Tape::Id alpha = segment_softmax(tp, leaky_relu(tp, logits, config.leaky_slope), dst,
                                         num_nodes);
        if (trace) trace->attention.back().push_back(tp.value(alpha));
        Tape::Id messages = scale_rows(tp, gather_rows(tp, transformed, src), alpha);
        head_outs.push_back(scatter_add_rows(tp, messages, dst, num_nodes));
      }
      h = config.heads == 1 ? head_outs[0] : concat_cols(tp, head_outs);
      if (l + 1 < config.gat_layers)
        h = relu_dropout(tp, h, config.dropout, training, drop_rng.split(std::uint64_t(l)).next_u64());
    }

    Tape::Id w1 = out.param_ids[pid++];
    Tape::Id b1 = out.param_ids[pid++];
    Tape::Id w2 = out.param_ids[pid++];
    Tape::Id b2 = out.param_ids[pid++];
    Tape::Id hidden = max_const(tp, add_rowvec(tp, matmul(tp, h, w1), b1), 0.0);
    Tape::Id logits = add_rowvec(tp, matmul(tp, hidden, w2), b2);
    out.probs = softmax_rows(tp, logits);
    return out;
  }

  // Convenience eval-mode forward returning plain probabilities.
  Tensor predict_probs(const Tensor& features, const std::vector<std::pair<int, int>>& edges) const {
    Tape tp;
    Tensor feat = features;
    feat.requires_grad = false;
    Tape::Id fid = tp.leaf(feat);
    Forward f = forward(tp, fid, edges, /*training=*/false, /*dropout_seed=*/0);
    return tp.value(f.probs);
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["format_version"] = 1;
    j["config"] = {{"in_dim", config.in_dim},       {"hidden_dim", config.hidden_dim},
                   {"num_classes", config.num_classes}, {"gat_layers", config.gat_layers},
                   {"heads", config.heads},         {"dropout", config.dropout},
                   {"leaky_slope", config.leaky_slope}};
    auto params = nlohmann::json::array();
    auto names = parameter_names();
    auto ptrs = parameters();
    for (std::size_t i = 0; i < ptrs.size(); ++i)
      params.push_back({{"name", names[i]}, {"shape", ptrs[i]->shape}, {"data", ptrs[i]->data}});
    j["params"] = params;
    return j;
  }

  static RegionClassifier from_json(const nlohmann::json& j, const std::string& where) {
    reject_unknown_keys(j, {"format_version", "config", "params"}, where);
    check(j.contains("format_version") && j["format_version"].get<int>() == 1,
          where + ": unsupported checkpoint format");
    const auto& cj = j.at("config");
    reject_unknown_keys(cj, {"in_dim", "hidden_dim", "num_classes", "gat_layers", "heads",
                             "dropout", "leaky_slope"},
                        where + ": config");
    ModelConfig cfg;
    cfg.in_dim = cj.at("in_dim").get<int>();
    cfg.hidden_dim = cj.at("hidden_dim").get<int>();
    cfg.num_classes = cj.at("num_classes").get<int>();
    cfg.gat_layers = cj.at("gat_layers").get<int>();
    cfg.heads = cj.at("heads").get<int>();
    cfg.dropout = cj.at("dropout").get<double>();
    cfg.leaky_slope = cj.at("leaky_slope").get<double>();
    RegionClassifier model = init(cfg, 0);
    auto names = model.parameter_names();
    auto ptrs = model.parameters();
    check(j.at("params").size() == ptrs.size(), where + ": expected " +
                                                    std::to_string(ptrs.size()) + " parameters");
    for (std::size_t i = 0; i < ptrs.size(); ++i) {
      const auto& pj = j["params"][i];
      check(pj.at("name").get<std::string>() == names[i],
            where + ": parameter " + std::to_string(i) + " name mismatch");
      auto shape = pj.at("shape").get<std::vector<int>>();
      check(shape == ptrs[i]->shape, where + ": shape mismatch for " + names[i]);
      auto data = pj.at("data").get<std::vector<double>>();
      check(data.size() == ptrs[i]->data.size(), where + ": data length mismatch for " + names[i]);
      ptrs[i]->data = std::move(data);
    }
    return model;
  }

 private:
  static Tensor glorot(std::vector<int> shape, int fan_in, int fan_out, Rng& rng) {
    double limit = std::sqrt(6.0 / double(fan_in + fan_out));
    Tensor t = Tensor::zeros(std::move(shape));
    for (auto& v : t.data) v = limit * (2.0 * rng.uniform() - 1.0);
    return t;
  }
};

inline void save_model(const RegionClassifier& model, const std::string& path) {
  write_json_file(path, model.to_json());
}

inline RegionClassifier load_model(const std::string& path) {
  return RegionClassifier::from_json(read_json_file(path), path);
}

}  // namespace sgltn
