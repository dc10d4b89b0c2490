#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>

#include <json.hpp>

#include "knockout/errors.hpp"
#include "knockout/judge.hpp"
#include "knockout/util.hpp"

namespace knockout {

// File-backed store of raw judge completions, keyed by a stable hash of
// (model_id, rendered prompt bytes). One file per key, body = raw text, plus
// an append-only index.jsonl mapping key -> (model_id, created_at). A warm
// cache replays an entire run without touching the backend.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec || !std::filesystem::is_directory(dir_)) {
      throw CacheIoError("cannot create cache directory: " + dir_.string());
    }
  }

  static std::string key_for(std::string_view model_id,
                             std::string_view prompt) {
    std::uint64_t h1 = fnv1a64(prompt, fnv1a64(model_id));
    std::uint64_t h2 = fnv1a64(prompt, fnv1a64(model_id, h1 ^ kKeySalt));
    return to_hex(h1) + to_hex(h2);
  }

  std::optional<std::string> get(const std::string& key) const {
    std::ifstream in(dir_ / key, std::ios::binary);
    if (!in) {
      misses_.fetch_add(1, std::memory_order_relaxed);
      return std::nullopt;
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) {
      warn("cache read failed for key " + key + ", treating as miss");
      misses_.fetch_add(1, std::memory_order_relaxed);
      return std::nullopt;
    }
    hits_.fetch_add(1, std::memory_order_relaxed);
    return buffer.str();
  }

  void put(const std::string& key, std::string_view raw_text,
           std::string_view model_id) {
    auto target = dir_ / key;
    auto tmp = dir_ / (key + ".tmp");
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) {
        warn("cache write failed for key " + key + ", continuing uncached");
        return;
      }
      out.write(raw_text.data(),
                static_cast<std::streamsize>(raw_text.size()));
      if (!out) {
        warn("cache write failed for key " + key + ", continuing uncached");
        return;
      }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, target, ec);
    if (ec) {
      warn("cache rename failed for key " + key + ": " + ec.message());
      std::filesystem::remove(tmp, ec);
      return;
    }
    append_index(key, model_id);
  }

  std::string get_or_complete(JudgeBackend& backend,
                              const std::string& rendered_prompt,
                              const MatchContext& context) {
    const std::string key = key_for(backend.model_id(), rendered_prompt);
    if (auto cached = get(key)) {
      return *cached;
    }
    std::string live = backend.complete(rendered_prompt, context);
    put(key, live, backend.model_id());
    return live;
  }

  std::uint64_t hits() const { return hits_.load(std::memory_order_relaxed); }
  std::uint64_t misses() const {
    return misses_.load(std::memory_order_relaxed);
  }

  struct Stats {
    std::size_t entries = 0;
    std::uintmax_t total_bytes = 0;
    std::filesystem::path dir;
  };

  Stats inspect() const {
    Stats stats;
    stats.dir = dir_;
    std::error_code ec;
    for (const auto& entry :
         std::filesystem::directory_iterator(dir_, ec)) {
      if (!entry.is_regular_file()) continue;
      auto name = entry.path().filename().string();
      if (name == "index.jsonl" || name.ends_with(".tmp")) continue;
      ++stats.entries;
      stats.total_bytes += entry.file_size(ec);
    }
    return stats;
  }

  std::size_t clear() {
    std::size_t removed = 0;
    std::error_code ec;
    for (const auto& entry :
         std::filesystem::directory_iterator(dir_, ec)) {
      if (!entry.is_regular_file()) continue;
      if (std::filesystem::remove(entry.path(), ec)) ++removed;
    }
    return removed;
  }

  const std::filesystem::path& dir() const { return dir_; }

  void set_warn_handler(std::function<void(const std::string&)> handler) {
    warn_ = std::move(handler);
  }

 private:
  static constexpr std::uint64_t kKeySalt = 0x9e3779b97f4a7c15ull;

  void warn(const std::string& message) const {
    if (warn_) {
      warn_(message);
    } else {
      std::cerr << "warning: " << message << "\n";
    }
  }

  void append_index(const std::string& key, std::string_view model_id) {
    nlohmann::json line = {
        {"key", key},
        {"model_id", std::string(model_id)},
        {"created_at", iso8601_utc_now()},
    };
    std::lock_guard<std::mutex> lock(index_mutex_);
    std::ofstream out(dir_ / "index.jsonl", std::ios::app);
    if (!out) {
      warn("cache index append failed");
      return;
    }
    out << line.dump() << "\n";
  }

  std::filesystem::path dir_;
  mutable std::atomic<std::uint64_t> hits_{0};
  mutable std::atomic<std::uint64_t> misses_{0};
  std::function<void(const std::string&)> warn_;
  std::mutex index_mutex_;
};

inline std::string cache_get_or_complete(ResponseCache& cache,
                                         JudgeBackend& backend,
                                         const std::string& rendered_prompt,
                                         const MatchContext& context) {
  return cache.get_or_complete(backend, rendered_prompt, context);
}

// Judge decorator that serves completions from a ResponseCache and only
// forwards misses. calls_issued() reports the inner backend's live calls, so
// a fully warm cache shows zero.
class CachingJudge final : public JudgeBackend {
 public:
  CachingJudge(std::shared_ptr<JudgeBackend> inner,
               std::shared_ptr<ResponseCache> cache)
      : inner_(std::move(inner)), cache_(std::move(cache)) {
    if (!inner_ || !cache_) {
      throw InvalidArgument("CachingJudge needs a backend and a cache");
    }
  }

  std::string complete(const std::string& rendered_prompt,
                       const MatchContext& context) override {
    return cache_->get_or_complete(*inner_, rendered_prompt, context);
  }

  std::uint64_t calls_issued() const override {
    return inner_->calls_issued();
  }

  std::string model_id() const override { return inner_->model_id(); }

  const ResponseCache& cache() const { return *cache_; }

 private:
  std::shared_ptr<JudgeBackend> inner_;
  std::shared_ptr<ResponseCache> cache_;
};

}  // namespace knockout
