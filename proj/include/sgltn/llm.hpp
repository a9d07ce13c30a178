#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "sgltn/rng.hpp"
#include "sgltn/tensor.hpp"

namespace sgltn {

// Auto-regressive scorer: maps a text string to (an approximation of) its
// log probability under the backend model.
struct LmScorer {
  virtual ~LmScorer() = default;
  virtual double score(const std::string& text) = 0;
};

// Chat-completion backend: prompt in, response text out.
struct ChatClient {
  virtual ~ChatClient() = default;
  virtual std::string complete(const std::string& prompt) = 0;
};

// Deterministic hash-based scorer for offline runs. Scores are stable
// functions of (seed, text) in [-8, 0].
class SeededMockScorer : public LmScorer {
 public:
  explicit SeededMockScorer(std::uint64_t seed) : seed_(seed) {}

  double score(const std::string& text) override {
    std::uint64_t h = 1469598103934665603ull ^ seed_;
    for (unsigned char ch : text) {
      h ^= ch;
      h *= 1099511628211ull;
    }
    Rng rng(h);
    return -8.0 * rng.uniform();
  }

 private:
  std::uint64_t seed_;
};

// Scores loaded from a JSON object {"text": logprob, ...}; missing entries
// are an error so silently-wrong prompts cannot slip through.
class TableScorer : public LmScorer {
 public:
  explicit TableScorer(std::map<std::string, double> table) : table_(std::move(table)) {}

  static TableScorer from_file(const std::string& path) {
    std::ifstream in(path);
    check(bool(in), "score table: cannot open " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const std::exception& e) {
      throw Error("score table " + path + ": " + e.what());
    }
    check(j.is_object(), "score table " + path + ": expected an object of text -> logprob");
    std::map<std::string, double> t;
    for (auto it = j.begin(); it != j.end(); ++it) {
      check(it.value().is_number(), "score table " + path + ": value for \"" + it.key() +
                                        "\" is not a number");
      t[it.key()] = it.value().get<double>();
    }
    return TableScorer(std::move(t));
  }

  double score(const std::string& text) override {
    auto it = table_.find(text);
    check(it != table_.end(), "score table has no entry for \"" + text + "\"");
    return it->second;
  }

 private:
  std::map<std::string, double> table_;
};

// Replays a fixed list of responses in order, recording every prompt it saw.
// Test scaffolding for exercising the retry protocol.
class ScriptedChatClient : public ChatClient {
 public:
  explicit ScriptedChatClient(std::vector<std::string> responses)
      : responses_(std::move(responses)) {}

  std::string complete(const std::string& prompt) override {
    prompts.push_back(prompt);
    check(next_ < responses_.size(), "scripted chat client: no response left for prompt \"" +
                                         prompt + "\"");
    return responses_[next_++];
  }

  std::vector<std::string> prompts;

 private:
  std::vector<std::string> responses_;
  std::size_t next_ = 0;
};

// Answers completion queries from a planted concept map: whichever
// high-level concept the prompt asks to distinguish gets its planted list,
// rendered as a python-style list.
class PlantedChatClient : public ChatClient {
 public:
  explicit PlantedChatClient(std::map<std::string, std::vector<std::string>> planted)
      : planted_(std::move(planted)) {}

  std::string complete(const std::string& prompt) override {
    prompts.push_back(prompt);
    for (const auto& [high, lows] : planted_) {
      if (prompt.find("distinguish " + high + " from") != std::string::npos)
        return render(lows);
    }
    throw Error("planted chat client: prompt matches no planted concept: \"" + prompt + "\"");
  }

  static std::string render(const std::vector<std::string>& items) {
    std::string out = "[";
    for (std::size_t i = 0; i < items.size(); ++i)
      out += (i ? ", '" : "'") + items[i] + "'";
    return out + "]";
  }

  std::vector<std::string> prompts;

 private:
  std::map<std::string, std::vector<std::string>> planted_;
};

// Offline stand-in for a live model: picks k pseudo-random low-level
// concepts per high-level concept, stable under the seed.
class SeededMockChatClient : public ChatClient {
 public:
  SeededMockChatClient(std::vector<std::string> lows, int k, std::uint64_t seed)
      : lows_(std::move(lows)), k_(k), seed_(seed) {}

  std::string complete(const std::string& prompt) override {
    std::uint64_t h = 1469598103934665603ull ^ seed_;
    for (unsigned char ch : prompt) {
      h ^= ch;
      h *= 1099511628211ull;
    }
    Rng rng(h);
    std::vector<std::string> pool = lows_;
    rng.shuffle(pool);
    pool.resize(std::size_t(std::min<int>(k_, int(pool.size()))));
    return PlantedChatClient::render(pool);
  }

 private:
  std::vector<std::string> lows_;
  int k_;
  std::uint64_t seed_;
};

inline std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Disk cache keyed by prompt hash; reruns against a live endpoint are free
// and reproducible.
class CachingChatClient : public ChatClient {
 public:
  CachingChatClient(std::shared_ptr<ChatClient> inner, std::filesystem::path dir)
      : inner_(std::move(inner)), dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  std::string complete(const std::string& prompt) override {
    std::filesystem::path file = dir_ / (fnv1a_hex(prompt) + ".json");
    if (std::filesystem::exists(file)) {
      std::ifstream in(file);
      nlohmann::json j;
      in >> j;
      if (j.contains("prompt") && j["prompt"] == prompt) return j["response"].get<std::string>();
    }
    std::string response = inner_->complete(prompt);
    nlohmann::json j{{"prompt", prompt}, {"response", response}};
    std::ofstream out(file);
    out << j.dump(2) << "\n";
    return response;
  }

 private:
  std::shared_ptr<ChatClient> inner_;
  std::filesystem::path dir_;
};

struct HttpChatConfig {
  std::string endpoint;  // e.g. http://host:port/v1/chat/completions
  std::string api_key;
  std::string model = "gpt-4";
  double temperature = 1.0;
  int timeout_seconds = 60;
  int transport_retries = 3;  // transport failures only, distinct from hallucination retries
};

// Live client speaking the common chat-completions JSON schema. Declared
// here, defined in llm_http.hpp to keep the HTTP dependency out of tests
// that never touch the network.
class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(HttpChatConfig cfg) : cfg_(std::move(cfg)) {
    check(!cfg_.endpoint.empty(), "http chat client: empty endpoint");
    check(!cfg_.api_key.empty(), "http chat client: empty api key");
  }

  std::string complete(const std::string& prompt) override;

 private:
  HttpChatConfig cfg_;
};

}  // namespace sgltn
