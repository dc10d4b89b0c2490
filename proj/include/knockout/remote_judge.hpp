#pragma once

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <memory>
#include <semaphore>
#include <string>
#include <thread>
#include <utility>

#include <httplib.h>
#include <json.hpp>

#include "knockout/errors.hpp"
#include "knockout/judge.hpp"

namespace knockout {

namespace detail {

// "https://host:port/v1" -> {"https://host:port", "/v1"}.
inline std::pair<std::string, std::string> split_endpoint(
    const std::string& url) {
  std::string normalized = url;
  if (normalized.find("://") == std::string::npos) {
    normalized = "http://" + normalized;
  }
  std::size_t scheme_end = normalized.find("://") + 3;
  std::size_t path_start = normalized.find('/', scheme_end);
  if (path_start == std::string::npos) {
    return {normalized, ""};
  }
  std::string origin = normalized.substr(0, path_start);
  std::string path = normalized.substr(path_start);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {origin, path};
}

}  // namespace detail

// Chat-completion client for an OpenAI-compatible endpoint. The rendered
// prompt travels as a single user message; transport failures and 5xx
// responses are retried with exponential backoff, other non-success statuses
// are surfaced immediately.
class RemoteJudge final : public JudgeBackend {
 public:
  explicit RemoteJudge(JudgeConfig config)
      : config_(std::move(config)),
        inflight_(config_.max_in_flight) {
    config_.validate();
    if (config_.backend != BackendKind::Remote) {
      throw InvalidArgument("RemoteJudge needs backend = Remote");
    }
    auto [origin, path] = detail::split_endpoint(config_.endpoint_url);
    origin_ = origin;
    base_path_ = path;
  }

  std::string complete(const std::string& rendered_prompt,
                       const MatchContext& /*context*/) override {
    inflight_.acquire();
    struct Release {
      std::counting_semaphore<>& sem;
      ~Release() { sem.release(); }
    } release{inflight_};

    nlohmann::json body = {
        {"model", config_.model_id},
        {"messages",
         nlohmann::json::array(
             {{{"role", "user"}, {"content", rendered_prompt}}})},
        {"temperature", config_.temperature},
    };
    const std::string payload = body.dump();
    const std::string path = base_path_ + "/chat/completions";

    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(backoff_delay(attempt - 1));
      }
      calls_.fetch_add(1, std::memory_order_relaxed);

      httplib::Client client(origin_);
      client.set_connection_timeout(10, 0);
      client.set_read_timeout(600, 0);
      httplib::Headers headers;
      if (const char* key = std::getenv("LLM_API_KEY");
          key != nullptr && *key != '\0') {
        headers.emplace("Authorization", std::string("Bearer ") + key);
      }

      auto res = client.Post(path, headers, payload, "application/json");
      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;
      }
      if (res->status >= 200 && res->status < 300) {
        return extract_message(res->body, res->status);
      }
      if (res->status >= 500) {
        last_error = "status " + std::to_string(res->status);
        continue;
      }
      throw EndpointRejected(res->status, res->body);
    }
    throw TransportError("chat completion failed after " +
                         std::to_string(config_.max_retries + 1) +
                         " attempt(s): " + last_error);
  }

  std::uint64_t calls_issued() const override {
    return calls_.load(std::memory_order_relaxed);
  }

  std::string model_id() const override { return config_.model_id; }

 private:
  std::chrono::milliseconds backoff_delay(int retry_index) const {
    long long ms = config_.backoff_base_ms;
    for (int i = 0; i < retry_index && ms < 30000; ++i) ms *= 2;
    return std::chrono::milliseconds(std::min<long long>(ms, 30000));
  }

  std::string extract_message(const std::string& body, int status) const {
    try {
      auto payload = nlohmann::json::parse(body);
      return payload.at("choices").at(0).at("message").at("content")
          .get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw EndpointRejected(status, body);
    }
  }

  JudgeConfig config_;
  std::string origin_;
  std::string base_path_;
  std::counting_semaphore<> inflight_;
  std::atomic<std::uint64_t> calls_{0};
};

}  // namespace knockout
