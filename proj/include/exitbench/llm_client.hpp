#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <string>

#include "exitbench/errors.hpp"

namespace exitbench::agents {

struct EndpointUnreachableError : Error {
    using Error::Error;
};

struct NonSuccessStatusError : Error {
    NonSuccessStatusError(int status_code, const std::string& excerpt)
        : Error("endpoint returned status " + std::to_string(status_code) + ": " +
                excerpt),
          status(status_code),
          body_excerpt(excerpt) {}
    int status;
    std::string body_excerpt;
};

struct CacheCorruptError : Error {
    using Error::Error;
};

struct ClientConfig {
    std::string base_url;  // scheme://host[:port], http only
    std::string completions_path = "/v1/chat/completions";
    std::string model_name;
    double temperature = 0.0;
    std::filesystem::path cache_dir;
    int max_attempts = 3;  // total tries on transient failures
    int backoff_initial_ms = 100;
    int max_in_flight = 4;
    double requests_per_second = 0.0;  // 0 = unthrottled
    int connect_timeout_ms = 2000;
    int read_timeout_ms = 30000;
    std::string api_key_env = "EXITBENCH_API_KEY";  // value is never logged
    bool offline = false;  // serve from cache only; a miss is EndpointUnreachable
};

struct ClientStats {
    uint64_t cache_hits = 0;
    uint64_t cache_misses = 0;
    uint64_t http_requests = 0;
    uint64_t retries = 0;
};

// Chat-completion client with a content-addressed response cache. Safe to
// call from many threads; the in-flight bound and rate limit are enforced
// internally, and cache writes are atomic (temp file + rename).
class LlmClient {
public:
    explicit LlmClient(ClientConfig config);
    ~LlmClient();

    LlmClient(const LlmClient&) = delete;
    LlmClient& operator=(const LlmClient&) = delete;

    // Cache hit: returns the stored bytes, no network. Miss: POSTs the chat
    // request, caches the response text, returns it. Transient failures
    // (connect errors, 429/5xx) retry with exponential backoff up to
    // max_attempts, then raise EndpointUnreachable. Other non-2xx statuses
    // raise NonSuccessStatus at once.
    std::string complete_with_cache(const std::string& prompt);

    static std::string cache_key(const std::string& model_name, double temperature,
                                 const std::string& prompt);

    ClientStats stats() const;
    const ClientConfig& config() const { return config_; }

private:
    struct Impl;
    ClientConfig config_;
    std::unique_ptr<Impl> impl_;
};

// One-shot convenience over a throwaway client.
std::string complete_with_cache(const ClientConfig& config, const std::string& prompt);

}  // namespace exitbench::agents
