#pragma once

#include <atomic>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "s3ap/errors.hpp"

namespace s3ap {

enum class BackendKind { HttpChat, ScriptedMock, OracleBacked };

struct Message {
  std::string role;  // system | user | assistant
  std::string content;
};

struct CompletionRequest {
  std::string model_id;
  std::vector<Message> messages;
  std::optional<double> temperature;
  std::optional<std::string> constrained_schema;
};

class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;

  virtual std::string complete(const CompletionRequest& request) = 0;
  virtual BackendKind kind() const = 0;
  // Stable name used for metadata and cache keys.
  virtual const std::string& identity() const = 0;
  virtual std::string default_model() const { return identity(); }
  virtual bool supports_constrained_output() const { return false; }
};

// SHA-256 hex digest over the backend identity and a canonicalized request.
std::string cache_key(const std::string& identity,
                      const CompletionRequest& request);

std::string sha256_hex(const std::string& bytes);

// Replays a fixed list of responses in order; counts calls.
class ScriptedMockBackend : public CompletionBackend {
 public:
  explicit ScriptedMockBackend(std::vector<std::string> script,
                               std::string identity = "scripted-mock");

  std::string complete(const CompletionRequest& request) override;
  BackendKind kind() const override { return BackendKind::ScriptedMock; }
  const std::string& identity() const override { return identity_; }

  int calls() const { return calls_.load(); }
  const std::vector<CompletionRequest>& seen_requests() const { return seen_; }

 private:
  std::vector<std::string> script_;
  std::string identity_;
  std::atomic<int> calls_{0};
  std::vector<CompletionRequest> seen_;
};

struct HttpChatConfig {
  std::string base_url;   // e.g. https://api.openai.com/v1
  std::string api_key;
  std::string model;
  bool reasoning = false;  // reasoning profiles omit temperature
  int max_retries = 3;
  int backoff_base_ms = 250;
  int max_concurrency = 4;
  int timeout_seconds = 120;
};

// Loads S3AP_API_KEY / S3AP_BASE_URL plus optional per-profile overrides
// from a JSON config file ({"profiles": {name: {base_url, model, reasoning}}}).
HttpChatConfig http_config_from_env(const std::string& profile,
                                    const std::string& config_path = "");

class HttpChatBackend : public CompletionBackend {
 public:
  explicit HttpChatBackend(HttpChatConfig config);
  ~HttpChatBackend() override;

  std::string complete(const CompletionRequest& request) override;
  BackendKind kind() const override { return BackendKind::HttpChat; }
  const std::string& identity() const override { return identity_; }
  std::string default_model() const override { return config_.model; }
  bool supports_constrained_output() const override { return true; }

  int network_calls() const { return network_calls_.load(); }

 private:
  HttpChatConfig config_;
  std::string identity_;
  std::atomic<int> network_calls_{0};
  struct Gate;
  std::unique_ptr<Gate> gate_;
};

// One file per entry under dir, named by digest; atomic writes.
class ResponseCache {
 public:
  explicit ResponseCache(std::string dir);

  std::optional<std::string> get(const std::string& key) const;
  void put(const std::string& key, const std::string& request_json,
           const std::string& response) const;
  const std::string& dir() const { return dir_; }

 private:
  std::string dir_;
};

// Wraps a backend with the response cache; hits never touch the inner
// backend.
class CachedBackend : public CompletionBackend {
 public:
  CachedBackend(std::shared_ptr<CompletionBackend> inner, ResponseCache cache);

  std::string complete(const CompletionRequest& request) override;
  BackendKind kind() const override { return inner_->kind(); }
  const std::string& identity() const override { return inner_->identity(); }
  std::string default_model() const override { return inner_->default_model(); }
  bool supports_constrained_output() const override {
    return inner_->supports_constrained_output();
  }

  int hits() const { return hits_.load(); }
  int misses() const { return misses_.load(); }

 private:
  std::shared_ptr<CompletionBackend> inner_;
  ResponseCache cache_;
  std::atomic<int> hits_{0};
  std::atomic<int> misses_{0};
};

}  // namespace s3ap
