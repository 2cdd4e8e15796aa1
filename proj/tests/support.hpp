#pragma once

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "narrative_audit/jsonl.hpp"

namespace naudit::testing {

inline std::filesystem::path fixture(const std::string& rel) {
  return std::filesystem::path(NAUDIT_FIXTURE_DIR) / rel;
}

inline std::filesystem::path data_file(const std::string& rel) {
  return std::filesystem::path(NAUDIT_DATA_DIR) / rel;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("naudit-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

struct MockReply {
  int status = 200;
  std::string content;  // assistant message for 200, raw body otherwise
  std::string retry_after;
};

// Chat-completion endpoint on 127.0.0.1 driven by a per-request script. Records
// arrival times, per-prompt call counts and the peak number of requests being
// served at once.
class MockChatServer {
 public:
  using Script = std::function<MockReply(const std::string& prompt, int call_for_prompt)>;

  explicit MockChatServer(Script script,
                          std::chrono::milliseconds latency = std::chrono::milliseconds(0))
      : script_(std::move(script)), latency_(latency) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const int now_in_flight = ++in_flight_;
      int seen = peak_.load();
      while (now_in_flight > seen && !peak_.compare_exchange_weak(seen, now_in_flight)) {
      }
      std::string prompt;
      try {
        prompt = Json::parse(req.body).at("messages").at(0).at("content").get<std::string>();
      } catch (const std::exception&) {
      }
      int call = 0;
      {
        std::lock_guard<std::mutex> lock(mu_);
        arrivals_.push_back(std::chrono::steady_clock::now());
        call = ++calls_[prompt];
        auth_headers_.push_back(req.get_header_value("Authorization"));
      }
      if (latency_.count() > 0) std::this_thread::sleep_for(latency_);
      const MockReply reply = script_(prompt, call);
      res.status = reply.status;
      if (!reply.retry_after.empty()) res.set_header("Retry-After", reply.retry_after);
      if (reply.status == 200) {
        Json body{{"id", "mock"},
                  {"choices", Json::array({Json{{"index", 0},
                                                {"message", {{"role", "assistant"}, {"content", reply.content}}}}})}};
        res.set_content(body.dump(), "application/json");
      } else {
        res.set_content(reply.content, "application/json");
      }
      --in_flight_;
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~MockChatServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  int peak_in_flight() const { return peak_.load(); }

  std::vector<std::chrono::steady_clock::time_point> arrivals() const {
    std::lock_guard<std::mutex> lock(mu_);
    return arrivals_;
  }
  std::map<std::string, int> calls() const {
    std::lock_guard<std::mutex> lock(mu_);
    return calls_;
  }
  std::size_t total_calls() const {
    std::lock_guard<std::mutex> lock(mu_);
    return arrivals_.size();
  }
  std::vector<std::string> auth_headers() const {
    std::lock_guard<std::mutex> lock(mu_);
    return auth_headers_;
  }

 private:
  Script script_;
  std::chrono::milliseconds latency_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::atomic<int> in_flight_{0};
  std::atomic<int> peak_{0};
  mutable std::mutex mu_;
  std::vector<std::chrono::steady_clock::time_point> arrivals_;
  std::map<std::string, int> calls_;
  std::vector<std::string> auth_headers_;
};

// Largest number of arrivals inside any half-open interval of length
// `window`.
inline std::size_t max_in_window(std::vector<std::chrono::steady_clock::time_point> t,
                                 std::chrono::milliseconds window) {
  std::sort(t.begin(), t.end());
  std::size_t best = 0, lo = 0;
  for (std::size_t hi = 0; hi < t.size(); ++hi) {
    while (t[hi] - t[lo] >= window) ++lo;
    best = std::max(best, hi - lo + 1);
  }
  return best;
}

}  // namespace naudit::testing
