#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "s3ap/backend.hpp"

#include <openssl/evp.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <random>
#include <semaphore>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace s3ap {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw S3apError("EVP_MD_CTX_new failed");
  if (EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw S3apError("SHA-256 digest failed");
  }
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xF];
  }
  return out;
}

namespace {

ordered_json canonical_request_json(const std::string& identity,
                                    const CompletionRequest& request) {
  ordered_json doc;
  doc["identity"] = identity;
  doc["model"] = request.model_id;
  ordered_json msgs = ordered_json::array();
  for (const Message& m : request.messages) {
    msgs.push_back(ordered_json{{"role", m.role}, {"content", m.content}});
  }
  doc["messages"] = std::move(msgs);
  if (request.temperature.has_value()) {
    doc["temperature"] = *request.temperature;
  } else {
    doc["temperature"] = nullptr;
  }
  if (request.constrained_schema.has_value()) {
    doc["constrained_schema"] = *request.constrained_schema;
  } else {
    doc["constrained_schema"] = nullptr;
  }
  return doc;
}

}  // namespace

std::string cache_key(const std::string& identity,
                      const CompletionRequest& request) {
  return sha256_hex(canonical_request_json(identity, request).dump());
}

ScriptedMockBackend::ScriptedMockBackend(std::vector<std::string> script,
                                         std::string identity)
    : script_(std::move(script)), identity_(std::move(identity)) {}

std::string ScriptedMockBackend::complete(const CompletionRequest& request) {
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  std::size_t index = static_cast<std::size_t>(calls_.fetch_add(1));
  seen_.push_back(request);
  if (index >= script_.size()) {
    throw ScriptExhaustedError("scripted mock '" + identity_ + "' exhausted after " +
                               std::to_string(script_.size()) + " responses");
  }
  return script_[index];
}

HttpChatConfig http_config_from_env(const std::string& profile,
                                    const std::string& config_path) {
  HttpChatConfig cfg;
  if (const char* key = std::getenv("S3AP_API_KEY")) cfg.api_key = key;
  if (const char* url = std::getenv("S3AP_BASE_URL")) cfg.base_url = url;
  cfg.model = profile;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw S3apError("cannot read config file '" + config_path + "'");
    ordered_json doc = ordered_json::parse(in, nullptr, false);
    if (doc.is_discarded()) {
      throw S3apError("config file '" + config_path + "' is not valid JSON");
    }
    if (doc.contains("profiles") && doc["profiles"].contains(profile)) {
      const ordered_json& p = doc["profiles"][profile];
      if (p.contains("base_url")) cfg.base_url = p["base_url"].get<std::string>();
      if (p.contains("model")) cfg.model = p["model"].get<std::string>();
      if (p.contains("reasoning")) cfg.reasoning = p["reasoning"].get<bool>();
      if (p.contains("max_retries")) cfg.max_retries = p["max_retries"].get<int>();
      if (p.contains("max_concurrency")) {
        cfg.max_concurrency = p["max_concurrency"].get<int>();
      }
    }
  }
  return cfg;
}

struct HttpChatBackend::Gate {
  explicit Gate(int n) : sem(n > 0 ? n : 1) {}
  std::counting_semaphore<64> sem;
};

HttpChatBackend::HttpChatBackend(HttpChatConfig config)
    : config_(std::move(config)),
      identity_("http:" + config_.model),
      gate_(std::make_unique<Gate>(std::min(config_.max_concurrency, 64))) {}

HttpChatBackend::~HttpChatBackend() = default;

std::string HttpChatBackend::complete(const CompletionRequest& request) {
  if (config_.api_key.empty()) {
    throw BackendError(BackendError::Kind::Auth,
                       "no API key configured (set S3AP_API_KEY)");
  }
  if (config_.base_url.empty()) {
    throw BackendError(BackendError::Kind::Transport,
                       "no base URL configured (set S3AP_BASE_URL)");
  }
  if (request.messages.empty()) {
    throw BackendError(BackendError::Kind::BadResponse,
                       "completion request has no messages");
  }

  // Split base_url into scheme://host[:port] and a path prefix.
  std::string root = config_.base_url;
  std::string prefix;
  std::size_t scheme = root.find("://");
  std::size_t slash = root.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (slash != std::string::npos) {
    prefix = root.substr(slash);
    root = root.substr(0, slash);
  }
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

  ordered_json body;
  body["model"] = request.model_id.empty() ? config_.model : request.model_id;
  ordered_json msgs = ordered_json::array();
  for (const Message& m : request.messages) {
    msgs.push_back(ordered_json{{"role", m.role}, {"content", m.content}});
  }
  body["messages"] = std::move(msgs);
  if (!config_.reasoning) {
    body["temperature"] = request.temperature.value_or(0.0);
  }
  if (request.constrained_schema.has_value()) {
    body["response_format"] = ordered_json{{"type", "json_object"}};
  }
  const std::string payload = body.dump();

  httplib::Headers headers = {
      {"Authorization", "Bearer " + config_.api_key},
  };

  std::string last_error = "no attempt made";
  BackendError::Kind last_kind = BackendError::Kind::Transport;

  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(
          config_.backoff_base_ms * (1 << (attempt - 1))));
    }
    httplib::Client client(root);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    client.set_read_timeout(config_.timeout_seconds, 0);

    gate_->sem.acquire();
    network_calls_.fetch_add(1);
    httplib::Result res = client.Post(prefix + "/chat/completions", headers,
                                      payload, "application/json");
    gate_->sem.release();

    if (!res) {
      last_error = "transport failure: " + httplib::to_string(res.error());
      last_kind = BackendError::Kind::Transport;
      continue;
    }
    if (res->status == 401 || res->status == 403) {
      throw BackendError(BackendError::Kind::Auth,
                         "authentication rejected (HTTP " +
                             std::to_string(res->status) + ")");
    }
    if (res->status == 429) {
      last_error = "rate limited (HTTP 429)";
      last_kind = BackendError::Kind::RateLimited;
      continue;
    }
    if (res->status >= 500) {
      last_error = "server error (HTTP " + std::to_string(res->status) + ")";
      last_kind = BackendError::Kind::Transport;
      continue;
    }
    if (res->status != 200) {
      throw BackendError(BackendError::Kind::BadResponse,
                         "unexpected HTTP " + std::to_string(res->status) +
                             ": " + res->body.substr(0, 400));
    }
    ordered_json doc = ordered_json::parse(res->body, nullptr, false);
    if (doc.is_discarded() || !doc.contains("choices") ||
        !doc["choices"].is_array() || doc["choices"].empty() ||
        !doc["choices"][0].contains("message") ||
        !doc["choices"][0]["message"].contains("content") ||
        !doc["choices"][0]["message"]["content"].is_string()) {
      throw BackendError(BackendError::Kind::BadResponse,
                         "response lacks choices[0].message.content: " +
                             res->body.substr(0, 400));
    }
    return doc["choices"][0]["message"]["content"].get<std::string>();
  }
  throw BackendError(last_kind, last_error + " after " +
                                    std::to_string(config_.max_retries + 1) +
                                    " attempts");
}

ResponseCache::ResponseCache(std::string dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw CacheIoError("cannot create cache directory '" + dir_ + "': " + ec.message());
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
  fs::path path = fs::path(dir_) / (key + ".json");
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream buf;
  buf << in.rdbuf();
  ordered_json doc = ordered_json::parse(buf.str(), nullptr, false);
  if (doc.is_discarded() || !doc.contains("response") ||
      !doc["response"].is_string()) {
    return std::nullopt;
  }
  return doc["response"].get<std::string>();
}

void ResponseCache::put(const std::string& key, const std::string& request_json,
                        const std::string& response) const {
  ordered_json doc;
  doc["key"] = key;
  ordered_json req = ordered_json::parse(request_json, nullptr, false);
  doc["request"] = req.is_discarded() ? ordered_json(request_json) : req;
  doc["response"] = response;

  static std::atomic<unsigned> counter{0};
  fs::path final_path = fs::path(dir_) / (key + ".json");
  fs::path tmp_path = fs::path(dir_) / (key + ".tmp." +
                                        std::to_string(::getpid()) + "." +
                                        std::to_string(counter.fetch_add(1)));
  {
    std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
    if (!out) throw CacheIoError("cannot write cache temp file '" + tmp_path.string() + "'");
    out << doc.dump(2) << "\n";
    if (!out.good()) throw CacheIoError("short write to '" + tmp_path.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp_path, final_path, ec);
  if (ec) {
    fs::remove(tmp_path, ec);
    throw CacheIoError("cannot finalize cache entry '" + final_path.string() + "'");
  }
}

CachedBackend::CachedBackend(std::shared_ptr<CompletionBackend> inner,
                             ResponseCache cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

std::string CachedBackend::complete(const CompletionRequest& request) {
  const std::string key = cache_key(inner_->identity(), request);
  if (std::optional<std::string> hit = cache_.get(key)) {
    hits_.fetch_add(1);
    return *hit;
  }
  std::string response = inner_->complete(request);
  cache_.put(key, canonical_request_json(inner_->identity(), request).dump(),
             response);
  misses_.fetch_add(1);
  return response;
}

}  // namespace s3ap
