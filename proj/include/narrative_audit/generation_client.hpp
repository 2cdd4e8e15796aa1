#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "narrative_audit/corpus.hpp"
#include "narrative_audit/jsonl.hpp"
#include "narrative_audit/prompt_forge.hpp"

namespace naudit {

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds base_backoff{500};
  double jitter = 0.2;  // fraction of the backoff, applied symmetrically
};

struct ClientConfig {
  // Scheme, host, optional port and path prefix; requests go to
  // <base_url>/chat/completions.
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key_source = "NARRATIVE_AUDIT_API_KEY";
  std::string model;
  int max_in_flight = 4;
  int requests_per_minute = 60;
  // Length of the rate-limit window; one minute outside of tests.
  std::chrono::milliseconds rate_window{60'000};
  RetryPolicy retry;
  std::chrono::milliseconds timeout{60'000};
  // Decoding parameters forwarded verbatim in the request body and recorded
  // in each record's metadata (temperature, max_tokens, ...).
  Json params = Json::object();
  std::uint64_t jitter_seed = 0;
};

void validate(const ClientConfig& cfg);
std::string resolve_api_key(const ClientConfig& cfg);

// Admits at most `limit` acquisitions in any window of length `window`.
class SlidingWindowLimiter {
 public:
  SlidingWindowLimiter(int limit, std::chrono::milliseconds window);
  void acquire();

 private:
  using Clock = std::chrono::steady_clock;
  std::mutex mu_;
  std::deque<Clock::time_point> issued_;
  int limit_;
  std::chrono::milliseconds window_;
};

struct AttemptLog {
  std::string key;
  int attempt = 0;
  int http_status = 0;  // 0 for transport errors
  std::string outcome;  // "ok", "retry", "failed", "auth"
};

struct CompletionTask {
  std::string key;
  std::string prompt;
};

struct CompletionOutcome {
  std::string key;
  bool ok = false;
  std::string content;
  int attempts = 0;
  std::string error;
};

// Bounded worker pool that sends chat-completion requests under a shared rate
// limiter with retry and exponential backoff. An authentication failure stops
// the pool and makes run() throw RuntimeFailure after in-flight work drains.
class ChatCompletionPool {
 public:
  explicit ChatCompletionPool(ClientConfig cfg);

  // `on_result` is invoked from worker threads, serialized by the pool.
  std::vector<AttemptLog> run(const std::vector<CompletionTask>& tasks,
                              const std::function<void(const CompletionOutcome&)>& on_result);

 private:
  ClientConfig cfg_;
  std::string api_key_;
  SlidingWindowLimiter limiter_;
};

struct GenerationSummary {
  std::size_t requested = 0;
  std::size_t completed = 0;
  std::size_t failed = 0;
  std::size_t skipped_existing = 0;
  std::vector<AttemptLog> attempts;
};

GenerationSummary run_generation(const std::vector<PromptInstance>& instances, int samples,
                                 const ClientConfig& cfg, const std::filesystem::path& out);

// Extracts choices[0].message.content from a chat-completion response body.
std::optional<std::string> parse_chat_content(const std::string& body);

}  // namespace naudit
