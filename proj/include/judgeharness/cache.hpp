#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

#include "judgeharness/digest.hpp"
#include "judgeharness/error.hpp"
#include "judgeharness/jsonl.hpp"

namespace judgeharness {

struct CacheEntry {
  std::string key;
  std::string prompt_digest;
  std::string text;
  std::string created_at;
  int attempts = 0;
};

inline std::string record_digest(const CacheEntry& e) {
  return Sha256().field(e.key).field(e.prompt_digest).field(e.text).hex();
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Append-only JSONL completion cache. Each line carries a digest over its
/// payload; any unparsable or mismatching line fails the open with
/// CacheCorruption. Reads share a lock, appends are exclusive.
class ResponseCache {
 public:
  enum class Mode { ReadWrite, ReadOnly };

  ResponseCache(std::filesystem::path path, Mode mode) : path_(std::move(path)), mode_(mode) {
    if (std::filesystem::exists(path_)) load();
    else if (mode_ == Mode::ReadOnly)
      throw Error(Errc::IoError, "cache file " + path_.string() + " does not exist");
  }

  std::optional<std::string> get(const std::string& key) const {
    std::shared_lock lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second.text;
  }

  /// First write for a key wins; later puts for the same key are ignored.
  void put(CacheEntry entry) {
    if (mode_ == Mode::ReadOnly) throw Error(Errc::IoError, "cache opened read-only");
    std::unique_lock lock(mu_);
    if (entries_.count(entry.key)) return;
    if (entry.created_at.empty()) entry.created_at = utc_timestamp();
    Json j{{"key", entry.key},
           {"prompt_digest", entry.prompt_digest},
           {"text", entry.text},
           {"created_at", entry.created_at},
           {"attempts", entry.attempts},
           {"record_digest", record_digest(entry)}};
    const std::string line = j.dump() + "\n";
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    out.flush();
    if (!out) throw Error(Errc::IoError, "append to " + path_.string() + " failed");
    entries_.emplace(entry.key, std::move(entry));
  }

  std::size_t size() const {
    std::shared_lock lock(mu_);
    return entries_.size();
  }

  Mode mode() const { return mode_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  void load() {
    const std::string text = read_file(path_);
    if (!text.empty() && text.back() != '\n')
      throw Error(Errc::CacheCorruption, path_.string() + ": truncated final record");
    std::vector<Json> rows;
    try {
      rows = parse_jsonl(text, path_.string());
    } catch (const Error& e) {
      throw Error(Errc::CacheCorruption, e.what());
    }
    for (const auto& j : rows) {
      CacheEntry e;
      try {
        e.key = j.at("key").get<std::string>();
        e.prompt_digest = j.at("prompt_digest").get<std::string>();
        e.text = j.at("text").get<std::string>();
        e.created_at = j.value("created_at", std::string{});
        e.attempts = j.value("attempts", 0);
        if (j.at("record_digest").get<std::string>() != record_digest(e))
          throw Error(Errc::CacheCorruption, path_.string() + ": digest mismatch for " + e.key);
      } catch (const nlohmann::json::exception& ex) {
        throw Error(Errc::CacheCorruption, path_.string() + ": " + ex.what());
      }
      entries_.emplace(e.key, std::move(e));
    }
  }

  std::filesystem::path path_;
  Mode mode_;
  mutable std::shared_mutex mu_;
  std::map<std::string, CacheEntry> entries_;
};

}  // namespace judgeharness
