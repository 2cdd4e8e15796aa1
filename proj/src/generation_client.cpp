#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "narrative_audit/generation_client.hpp"

#include <spdlog/spdlog.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <random>
#include <unordered_map>
#include <thread>

#include "narrative_audit/error.hpp"
#include "narrative_audit/hashing.hpp"

namespace naudit {
namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // request path
};

Endpoint parse_endpoint(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw ValidationError("base_url must include a scheme: " + base_url);
  }
  const auto path_start = base_url.find('/', scheme_end + 3);
  Endpoint e;
  e.origin = base_url.substr(0, path_start);
  std::string prefix = path_start == std::string::npos ? "" : base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  e.path = prefix + "/chat/completions";
  return e;
}

enum class Verdict { Ok, Retry, Fail, Auth };

struct AttemptResult {
  Verdict verdict = Verdict::Fail;
  int status = 0;
  std::string content;
  std::string error;
  std::optional<std::chrono::milliseconds> retry_after;
};

AttemptResult attempt_once(httplib::Client& client, const Endpoint& ep, const ClientConfig& cfg,
                           const std::string& api_key, const std::string& prompt) {
  Json body = cfg.params;
  body["model"] = cfg.model;
  body["messages"] = Json::array({Json{{"role", "user"}, {"content", prompt}}});
  httplib::Headers headers{{"Authorization", "Bearer " + api_key}};
  auto res = client.Post(ep.path, headers, body.dump(), "application/json");

  AttemptResult r;
  if (!res) {
    r.verdict = Verdict::Retry;
    r.error = "transport error: " + httplib::to_string(res.error());
    return r;
  }
  r.status = res->status;
  if (res->status == 200) {
    if (auto content = parse_chat_content(res->body)) {
      r.verdict = Verdict::Ok;
      r.content = std::move(*content);
    } else {
      r.verdict = Verdict::Fail;
      r.error = "malformed API response";
    }
    return r;
  }
  if (res->status == 401 || res->status == 403) {
    r.verdict = Verdict::Auth;
    r.error = "authentication failed (HTTP " + std::to_string(res->status) + ")";
    return r;
  }
  if (res->status == 429 || res->status >= 500) {
    r.verdict = Verdict::Retry;
    r.error = "HTTP " + std::to_string(res->status);
    if (res->has_header("Retry-After")) {
      try {
        const double seconds = std::stod(res->get_header_value("Retry-After"));
        r.retry_after = std::chrono::milliseconds(static_cast<long>(seconds * 1000.0));
      } catch (const std::exception&) {
      }
    }
    return r;
  }
  r.verdict = Verdict::Fail;
  r.error = "HTTP " + std::to_string(res->status);
  return r;
}

}  // namespace

void validate(const ClientConfig& cfg) {
  if (cfg.model.empty()) throw ValidationError("client config: model is required");
  if (cfg.max_in_flight < 1) throw ValidationError("client config: max_in_flight must be >= 1");
  if (cfg.requests_per_minute < 1) {
    throw ValidationError("client config: requests_per_minute must be >= 1");
  }
  if (cfg.retry.max_attempts < 1) throw ValidationError("client config: max_attempts must be >= 1");
  if (cfg.retry.jitter < 0.0 || cfg.retry.jitter >= 1.0) {
    throw ValidationError("client config: jitter must lie in [0, 1)");
  }
  if (cfg.rate_window.count() <= 0) throw ValidationError("client config: rate window must be positive");
  parse_endpoint(cfg.base_url);
}

std::string resolve_api_key(const ClientConfig& cfg) {
  const char* value = std::getenv(cfg.api_key_source.c_str());
  if (value == nullptr || *value == '\0') {
    throw ValidationError("API key not found in environment variable " + cfg.api_key_source);
  }
  return value;
}

SlidingWindowLimiter::SlidingWindowLimiter(int limit, std::chrono::milliseconds window)
    : limit_(limit), window_(window) {}

void SlidingWindowLimiter::acquire() {
  std::unique_lock<std::mutex> lock(mu_);
  for (;;) {
    const auto now = Clock::now();
    while (!issued_.empty() && now - issued_.front() >= window_) issued_.pop_front();
    if (static_cast<int>(issued_.size()) < limit_) {
      issued_.push_back(now);
      return;
    }
    const auto wake = issued_.front() + window_;
    lock.unlock();
    std::this_thread::sleep_until(wake);
    lock.lock();
  }
}

std::optional<std::string> parse_chat_content(const std::string& body) {
  try {
    const Json j = Json::parse(body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) return std::nullopt;
    return content.get<std::string>();
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

ChatCompletionPool::ChatCompletionPool(ClientConfig cfg)
    : cfg_(std::move(cfg)),
      api_key_((validate(cfg_), resolve_api_key(cfg_))),
      limiter_(cfg_.requests_per_minute, cfg_.rate_window) {}

std::vector<AttemptLog> ChatCompletionPool::run(
    const std::vector<CompletionTask>& tasks,
    const std::function<void(const CompletionOutcome&)>& on_result) {
  const Endpoint ep = parse_endpoint(cfg_.base_url);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::mutex out_mu;
  std::vector<AttemptLog> log;
  std::string auth_error;

  auto worker = [&](std::size_t worker_index) {
    httplib::Client client(ep.origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    std::mt19937_64 rng(mix_seed(cfg_.jitter_seed, worker_index));
    std::uniform_real_distribution<double> unit(-1.0, 1.0);

    for (;;) {
      if (abort.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const CompletionTask& task = tasks[i];
      CompletionOutcome outcome{task.key, false, {}, 0, {}};

      for (int attempt = 1; attempt <= cfg_.retry.max_attempts; ++attempt) {
        if (abort.load()) return;
        limiter_.acquire();
        AttemptResult r = attempt_once(client, ep, cfg_, api_key_, task.prompt);
        outcome.attempts = attempt;
        const bool last = attempt == cfg_.retry.max_attempts;
        std::string label;
        switch (r.verdict) {
          case Verdict::Ok: label = "ok"; break;
          case Verdict::Auth: label = "auth"; break;
          case Verdict::Fail: label = "failed"; break;
          case Verdict::Retry: label = last ? "failed" : "retry"; break;
        }
        {
          std::lock_guard<std::mutex> lock(out_mu);
          log.push_back({task.key, attempt, r.status, label});
        }
        if (r.verdict == Verdict::Ok) {
          outcome.ok = true;
          outcome.content = std::move(r.content);
          break;
        }
        outcome.error = r.error;
        if (r.verdict == Verdict::Auth) {
          std::lock_guard<std::mutex> lock(out_mu);
          if (!abort.exchange(true)) auth_error = r.error;
          spdlog::error("aborting generation: {}", r.error);
          return;
        }
        if (r.verdict == Verdict::Fail || last) {
          spdlog::warn("request {} failed after {} attempt(s): {}", task.key, attempt, r.error);
          break;
        }
        auto delay = r.retry_after.value_or(std::chrono::milliseconds(
            static_cast<long>(static_cast<double>(cfg_.retry.base_backoff.count()) *
                              std::pow(2.0, attempt - 1) * (1.0 + cfg_.retry.jitter * unit(rng)))));
        spdlog::info("request {} attempt {} got {}; retrying in {} ms", task.key, attempt, r.error,
                     delay.count());
        std::this_thread::sleep_for(delay);
      }
      std::lock_guard<std::mutex> lock(out_mu);
      on_result(outcome);
    }
  };

  const std::size_t n_workers =
      std::min<std::size_t>(static_cast<std::size_t>(cfg_.max_in_flight),
                            std::max<std::size_t>(tasks.size(), 1));
  {
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < n_workers; ++w) workers.emplace_back(worker, w);
  }
  if (abort.load()) throw RuntimeFailure(auth_error);
  return log;
}

GenerationSummary run_generation(const std::vector<PromptInstance>& instances, int samples,
                                 const ClientConfig& cfg, const std::filesystem::path& out) {
  if (samples < 1) throw ValidationError("samples must be positive");
  validate(cfg);
  const auto existing = existing_record_ids(out);

  struct Pending {
    const PromptInstance* instance;
    int sample;
  };
  std::vector<CompletionTask> tasks;
  std::unordered_map<std::string, Pending> pending;
  GenerationSummary summary;
  summary.requested = instances.size() * static_cast<std::size_t>(samples);
  for (const auto& inst : instances) {
    for (int s = 0; s < samples; ++s) {
      std::string id = record_id(cfg.model, inst.text, s);
      if (existing.count(id) != 0) {
        ++summary.skipped_existing;
        ++summary.completed;
        continue;
      }
      if (pending.emplace(id, Pending{&inst, s}).second) tasks.push_back({id, inst.text});
    }
  }
  spdlog::info("generation: {} requested, {} already present, {} to issue", summary.requested,
               summary.skipped_existing, tasks.size());

  ChatCompletionPool pool(cfg);
  CorpusWriter writer(out);
  summary.attempts = pool.run(tasks, [&](const CompletionOutcome& o) {
    const Pending& p = pending.at(o.key);
    if (!o.ok || o.content.empty()) {
      ++summary.failed;
      return;
    }
    NarrativeRecord r;
    r.id = o.key;
    r.model = cfg.model;
    r.scenario_id = p.instance->scenario_id;
    r.power_condition = p.instance->power_condition;
    r.input_country = p.instance->input_country;
    r.prompt_text = p.instance->text;
    r.story_text = o.content;
    r.created_at = utc_timestamp_now();
    r.sample_index = p.sample;
    r.params = cfg.params;
    writer.append(r);
    ++summary.completed;
  });
  return summary;
}

}  // namespace naudit
