#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "judgeharness/cache.hpp"
#include "judgeharness/digest.hpp"
#include "judgeharness/error.hpp"
#include "judgeharness/jsonl.hpp"

namespace judgeharness {

enum class BackendKind { RemoteCompletion, ScriptedOracle, Replay };

inline BackendKind backend_kind_from(std::string_view s) {
  if (s == "remote") return BackendKind::RemoteCompletion;
  if (s == "scripted") return BackendKind::ScriptedOracle;
  if (s == "replay") return BackendKind::Replay;
  throw Error(Errc::ConfigError, "unknown backend kind '" + std::string(s) + "'");
}

inline std::string_view to_string(BackendKind k) {
  switch (k) {
    case BackendKind::RemoteCompletion: return "remote";
    case BackendKind::ScriptedOracle: return "scripted";
    case BackendKind::Replay: return "replay";
  }
  return "remote";
}

struct Decoding {
  int max_tokens = 512;
  double temperature = 0.0;
  std::vector<std::string> stop;
};

struct Limits {
  int max_concurrent = 4;
  std::chrono::milliseconds timeout{60000};
  int max_retries = 3;
  std::chrono::milliseconds backoff_base{500};
};

struct BackendDescriptor {
  std::string backend_id;  // a trailing '*' matches any id with that prefix
  BackendKind kind = BackendKind::ScriptedOracle;
  std::string endpoint_url;
  Json request_template;
  std::string response_extraction_path;
  std::map<std::string, std::string> headers;  // may hold secrets, never persisted
  Decoding decoding;
  Limits limits;
  Json oracle;                // ScriptedOracle policy
  std::string replay_source;  // Replay: id whose cache entries are served

  bool matches(std::string_view id) const {
    if (!backend_id.empty() && backend_id.back() == '*')
      return id.substr(0, backend_id.size() - 1) == std::string_view(backend_id).substr(0, backend_id.size() - 1);
    return id == backend_id;
  }
};

inline void validate_backend(const BackendDescriptor& b) {
  if (b.backend_id.empty()) throw Error(Errc::ConfigError, "backend without id");
  if (b.kind == BackendKind::RemoteCompletion &&
      (b.endpoint_url.empty() || b.request_template.is_null() ||
       b.response_extraction_path.empty()))
    throw Error(Errc::ConfigError, "remote backend '" + b.backend_id +
                                       "' needs endpoint_url, request_template and "
                                       "response_extraction_path");
  if (b.limits.max_concurrent < 1)
    throw Error(Errc::ConfigError, b.backend_id + ": max_concurrent must be >= 1");
  if (b.limits.max_retries < 0)
    throw Error(Errc::ConfigError, b.backend_id + ": max_retries must be >= 0");
}

/// Digest over (backend id, prompt, decoding parameters).
inline std::string cache_key(std::string_view backend_id, std::string_view prompt,
                             const Decoding& d) {
  Sha256 h;
  h.field("judgeharness.cache.v1").field(backend_id).field(prompt);
  h.field(std::to_string(d.max_tokens));
  char temp[32];
  std::snprintf(temp, sizeof temp, "%.17g", d.temperature);
  h.field(temp);
  h.field(std::to_string(d.stop.size()));
  for (const auto& s : d.stop) h.field(s);
  return h.hex();
}

/// Replaces `${NAME}` with the environment variable NAME (empty if unset).
inline std::string interpolate_env(std::string_view s) {
  std::string out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    const auto open = s.find("${", pos);
    if (open == std::string_view::npos) break;
    const auto close = s.find('}', open + 2);
    if (close == std::string_view::npos) break;
    out.append(s.substr(pos, open - pos));
    const std::string name(s.substr(open + 2, close - open - 2));
    if (const char* v = std::getenv(name.c_str())) out += v;
    pos = close + 1;
  }
  out.append(s.substr(pos));
  return out;
}

inline BackendDescriptor backend_from_json(const Json& j) {
  BackendDescriptor b;
  try {
    b.backend_id = j.at("id").get<std::string>();
    b.kind = backend_kind_from(j.value("kind", std::string("remote")));
    b.endpoint_url = interpolate_env(j.value("endpoint_url", std::string{}));
    if (j.contains("request_template")) b.request_template = j.at("request_template");
    b.response_extraction_path = j.value("response_extraction_path", std::string{});
    if (j.contains("headers"))
      for (const auto& [k, v] : j.at("headers").items())
        b.headers[k] = interpolate_env(v.get<std::string>());
    if (j.contains("decoding")) {
      const auto& d = j.at("decoding");
      b.decoding.max_tokens = d.value("max_tokens", b.decoding.max_tokens);
      b.decoding.temperature = d.value("temperature", b.decoding.temperature);
      if (d.contains("stop")) b.decoding.stop = d.at("stop").get<std::vector<std::string>>();
    }
    if (j.contains("limits")) {
      const auto& l = j.at("limits");
      b.limits.max_concurrent = l.value("max_concurrent", b.limits.max_concurrent);
      b.limits.timeout = std::chrono::milliseconds(
          l.value("timeout_ms", static_cast<long>(b.limits.timeout.count())));
      b.limits.max_retries = l.value("max_retries", b.limits.max_retries);
      b.limits.backoff_base = std::chrono::milliseconds(
          l.value("backoff_base_ms", static_cast<long>(b.limits.backoff_base.count())));
    }
    if (j.contains("oracle")) b.oracle = j.at("oracle");
    b.replay_source = j.value("replay_source", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ConfigError, std::string("backend entry: ") + e.what());
  }
  validate_backend(b);
  return b;
}

/// Descriptor snapshot for manifests. Headers are left out because they carry secrets.
inline Json to_json(const BackendDescriptor& b) {
  Json j{{"id", b.backend_id}, {"kind", std::string(to_string(b.kind))}};
  if (b.kind == BackendKind::RemoteCompletion) {
    j["endpoint_url"] = b.endpoint_url;
    j["request_template"] = b.request_template;
    j["response_extraction_path"] = b.response_extraction_path;
  }
  j["decoding"] = {{"max_tokens", b.decoding.max_tokens},
                   {"temperature", b.decoding.temperature},
                   {"stop", b.decoding.stop}};
  j["limits"] = {{"max_concurrent", b.limits.max_concurrent},
                 {"timeout_ms", b.limits.timeout.count()},
                 {"max_retries", b.limits.max_retries},
                 {"backoff_base_ms", b.limits.backoff_base.count()}};
  if (!b.oracle.is_null()) j["oracle"] = b.oracle;
  if (!b.replay_source.empty()) j["replay_source"] = b.replay_source;
  return j;
}

/// Builds the request body: string values are scanned for {prompt},
/// {backend_id}, {max_tokens}, {temperature}; a string that is exactly one
/// numeric placeholder becomes a number, exactly "{stop}" becomes an array.
inline Json render_request(const Json& tmpl, std::string_view backend_id, std::string_view prompt,
                           const Decoding& d) {
  if (tmpl.is_string()) {
    const auto s = tmpl.get<std::string>();
    if (s == "{max_tokens}") return d.max_tokens;
    if (s == "{temperature}") return d.temperature;
    if (s == "{stop}") return d.stop;
    std::string out;
    std::size_t pos = 0;
    while (pos < s.size()) {
      const auto open = s.find('{', pos);
      if (open == std::string::npos) break;
      const auto close = s.find('}', open);
      if (close == std::string::npos) break;
      const auto name = s.substr(open + 1, close - open - 1);
      out += s.substr(pos, open - pos);
      if (name == "prompt") out += prompt;
      else if (name == "backend_id") out += backend_id;
      else if (name == "max_tokens") out += std::to_string(d.max_tokens);
      else if (name == "temperature") out += Json(d.temperature).dump();
      else out += s.substr(open, close - open + 1);
      pos = close + 1;
    }
    out += s.substr(pos);
    return out;
  }
  if (tmpl.is_object()) {
    Json out = Json::object();
    for (const auto& [k, v] : tmpl.items()) out[k] = render_request(v, backend_id, prompt, d);
    return out;
  }
  if (tmpl.is_array()) {
    Json out = Json::array();
    for (const auto& v : tmpl) out.push_back(render_request(v, backend_id, prompt, d));
    return out;
  }
  return tmpl;
}

/// Follows a dot path such as "choices.0.text"; numeric segments index arrays.
inline std::string extract_path(const Json& body, std::string_view path) {
  const Json* cur = &body;
  std::size_t pos = 0;
  while (pos <= path.size()) {
    auto end = path.find('.', pos);
    if (end == std::string_view::npos) end = path.size();
    const std::string seg(path.substr(pos, end - pos));
    if (cur->is_array()) {
      char* stop = nullptr;
      const auto idx = std::strtoul(seg.c_str(), &stop, 10);
      if (seg.empty() || *stop != '\0' || idx >= cur->size())
        throw Error(Errc::ExtractionError, "no element '" + seg + "' at " + std::string(path));
      cur = &(*cur)[idx];
    } else if (cur->is_object() && cur->contains(seg)) {
      cur = &(*cur)[seg];
    } else {
      throw Error(Errc::ExtractionError, "no field '" + seg + "' at " + std::string(path));
    }
    pos = end + 1;
  }
  if (!cur->is_string()) throw Error(Errc::ExtractionError, std::string(path) + " is not text");
  return cur->get<std::string>();
}

/// status < 0 signals a transport failure (no HTTP response at all).
struct HttpResult {
  int status = -1;
  std::string body;
  std::string error;
};

using HttpPost = std::function<HttpResult(const BackendDescriptor&, const std::string& body)>;
using OracleFn = std::function<std::string(const std::string& backend_id, const std::string& prompt)>;
using OracleFactory = std::function<OracleFn(const Json& spec)>;
using Sleeper = std::function<void(std::chrono::milliseconds)>;

struct Completion {
  std::string text;
  int attempts = 0;
  bool from_cache = false;
  std::chrono::milliseconds latency{0};
  std::vector<std::chrono::milliseconds> backoff_delays;
};

/// Uniform completion access over remote endpoints, scripted oracles and the
/// replay cache. Per-backend admission goes through a bounded permit count.
class Gateway {
 public:
  explicit Gateway(std::vector<BackendDescriptor> backends, HttpPost transport = {},
                   Sleeper sleeper = {})
      : transport_(std::move(transport)), sleeper_(std::move(sleeper)) {
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    for (auto& b : backends) add_backend(std::move(b));
  }

  void add_backend(BackendDescriptor b) {
    validate_backend(b);
    std::lock_guard lock(mu_);
    permits_.emplace(b.backend_id, std::make_unique<Permits>(b.limits.max_concurrent));
    backends_.push_back(std::move(b));
  }

  void set_oracle_factory(OracleFactory f) { oracle_factory_ = std::move(f); }
  void register_oracle(const std::string& backend_id, OracleFn fn) {
    std::lock_guard lock(mu_);
    oracles_[backend_id] = std::move(fn);
  }
  void set_cache(ResponseCache* cache) { cache_ = cache; }
  /// Every call must be answered from the cache; misses raise CacheMiss.
  void set_replay_only(bool on) { replay_only_ = on; }

  const BackendDescriptor& backend(std::string_view id) const {
    for (const auto& b : backends_)
      if (b.backend_id == id) return b;
    for (const auto& b : backends_)
      if (b.matches(id)) return b;
    throw Error(Errc::ConfigError, "unknown backend '" + std::string(id) + "'");
  }

  bool has_backend(std::string_view id) const {
    for (const auto& b : backends_)
      if (b.matches(id)) return true;
    return false;
  }

  const std::deque<BackendDescriptor>& backends() const { return backends_; }

  /// Completes through the cache when one is attached.
  Completion complete(const std::string& backend_id, const std::string& prompt) {
    const auto& b = backend(backend_id);
    const bool replay = replay_only_ || b.kind == BackendKind::Replay;
    const std::string key_id =
        b.kind == BackendKind::Replay && !b.replay_source.empty() ? b.replay_source : backend_id;
    const std::string key = cache_key(key_id, prompt, b.decoding);
    if (cache_ != nullptr) {
      if (auto hit = cache_->get(key)) {
        Completion c;
        c.text = std::move(*hit);
        c.from_cache = true;
        return c;
      }
    }
    if (replay)
      throw Error(Errc::CacheMiss, "no cached completion for backend '" + key_id + "'");
    Completion c = complete_uncached(b, backend_id, prompt);
    if (cache_ != nullptr && cache_->mode() == ResponseCache::Mode::ReadWrite)
      cache_->put({key, sha256_hex(prompt), c.text, {}, c.attempts});
    return c;
  }

  /// Bypasses the cache entirely.
  Completion complete_uncached(const BackendDescriptor& b, const std::string& backend_id,
                               const std::string& prompt) {
    Permits& permits = permits_for(b.backend_id);
    PermitGuard guard(permits);
    const auto start = std::chrono::steady_clock::now();
    Completion c;
    switch (b.kind) {
      case BackendKind::ScriptedOracle: {
        c.text = oracle_for(b, backend_id)(backend_id, prompt);
        c.attempts = 1;
        break;
      }
      case BackendKind::Replay:
        throw Error(Errc::CacheMiss, "replay backend '" + backend_id + "' has no live source");
      case BackendKind::RemoteCompletion:
        c = remote(b, backend_id, prompt);
        break;
    }
    c.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - start);
    return c;
  }

  /// Calls that reached a live backend (oracle or network), not the cache.
  long live_calls() const { return live_calls_; }

 private:
  struct Permits {
    explicit Permits(int n) : available(n) {}
    std::mutex mu;
    std::condition_variable cv;
    int available;
  };

  struct PermitGuard {
    explicit PermitGuard(Permits& p) : p_(p) {
      std::unique_lock lock(p_.mu);
      p_.cv.wait(lock, [&] { return p_.available > 0; });
      --p_.available;
    }
    ~PermitGuard() {
      {
        std::lock_guard lock(p_.mu);
        ++p_.available;
      }
      p_.cv.notify_one();
    }
    Permits& p_;
  };

  Permits& permits_for(const std::string& id) {
    std::lock_guard lock(mu_);
    return *permits_.at(id);
  }

  OracleFn oracle_for(const BackendDescriptor& b, const std::string& backend_id) {
    ++live_calls_;
    std::lock_guard lock(mu_);
    if (auto it = oracles_.find(backend_id); it != oracles_.end()) return it->second;
    if (auto it = oracles_.find(b.backend_id); it != oracles_.end()) return it->second;
    if (!oracle_factory_ || b.oracle.is_null())
      throw Error(Errc::ConfigError, "scripted backend '" + backend_id + "' has no oracle");
    auto fn = oracle_factory_(b.oracle);
    oracles_[b.backend_id] = fn;
    return fn;
  }

  static bool retryable(const HttpResult& r) { return r.status < 0 || r.status >= 500 || r.status == 429; }

  Completion remote(const BackendDescriptor& b, const std::string& backend_id,
                    const std::string& prompt) {
    if (!transport_)
      throw Error(Errc::BackendUnavailable, "no HTTP transport configured for " + backend_id);
    const std::string body = render_request(b.request_template, backend_id, prompt, b.decoding).dump();
    Completion c;
    std::string last_error;
    for (int attempt = 0; attempt <= b.limits.max_retries; ++attempt) {
      if (attempt > 0) {
        const auto delay = b.limits.backoff_base * (1L << std::min(attempt - 1, 20));
        c.backoff_delays.push_back(delay);
        sleeper_(delay);
      }
      ++c.attempts;
      ++live_calls_;
      const HttpResult r = transport_(b, body);
      if (r.status >= 200 && r.status < 300) {
        Json parsed;
        try {
          parsed = Json::parse(r.body);
        } catch (const nlohmann::json::exception& e) {
          throw Error(Errc::ExtractionError, backend_id + ": response is not JSON");
        }
        c.text = extract_path(parsed, b.response_extraction_path);
        return c;
      }
      last_error = r.status < 0 ? r.error : "HTTP " + std::to_string(r.status);
      if (!retryable(r)) break;
    }
    throw Error(Errc::BackendUnavailable, backend_id + " after " + std::to_string(c.attempts) +
                                              " attempt(s): " + last_error);
  }

  HttpPost transport_;
  Sleeper sleeper_;
  OracleFactory oracle_factory_;
  std::deque<BackendDescriptor> backends_;
  std::map<std::string, std::unique_ptr<Permits>> permits_;
  std::map<std::string, OracleFn> oracles_;
  ResponseCache* cache_ = nullptr;
  bool replay_only_ = false;
  std::atomic<long> live_calls_{0};
  mutable std::mutex mu_;
};

}  // namespace judgeharness
