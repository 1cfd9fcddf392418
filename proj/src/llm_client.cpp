#include "exitbench/llm_client.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <semaphore>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "exitbench/digest.hpp"

namespace exitbench::agents {

namespace {

std::string format_temperature(double temperature) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", temperature);
    return buf;
}

std::string excerpt_of(const std::string& body) {
    constexpr size_t kMax = 200;
    if (body.size() <= kMax) return body;
    return body.substr(0, kMax) + "...";
}

bool is_transient_status(int status) {
    return status == 429 || (status >= 500 && status < 600);
}

}  // namespace

struct LlmClient::Impl {
    explicit Impl(const ClientConfig& config)
        : in_flight(config.max_in_flight > 0 ? config.max_in_flight : 1) {}

    std::counting_semaphore<4096> in_flight;
    std::mutex rate_mutex;
    std::chrono::steady_clock::time_point next_slot = std::chrono::steady_clock::now();

    std::atomic<uint64_t> cache_hits{0};
    std::atomic<uint64_t> cache_misses{0};
    std::atomic<uint64_t> http_requests{0};
    std::atomic<uint64_t> retries{0};
    std::atomic<uint64_t> temp_counter{0};
};

LlmClient::LlmClient(ClientConfig config)
    : config_(std::move(config)), impl_(std::make_unique<Impl>(config_)) {
    if (!config_.cache_dir.empty()) {
        std::filesystem::create_directories(config_.cache_dir);
    }
}

LlmClient::~LlmClient() = default;

std::string LlmClient::cache_key(const std::string& model_name, double temperature,
                                 const std::string& prompt) {
    return sha256_hex(model_name + '\x1f' + format_temperature(temperature) + '\x1f' +
                      prompt);
}

ClientStats LlmClient::stats() const {
    ClientStats s;
    s.cache_hits = impl_->cache_hits.load();
    s.cache_misses = impl_->cache_misses.load();
    s.http_requests = impl_->http_requests.load();
    s.retries = impl_->retries.load();
    return s;
}

namespace {

// Cache entries are JSON envelopes so corruption and key mixups are
// detectable on read.
std::string read_cache_entry(const std::filesystem::path& path,
                             const std::string& prompt_digest) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw CacheCorruptError("cache entry unreadable: " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    nlohmann::json entry = nlohmann::json::parse(buf.str(), nullptr, false);
    if (entry.is_discarded() || !entry.is_object() || !entry.contains("response") ||
        !entry["response"].is_string() || !entry.contains("prompt_sha256") ||
        entry["prompt_sha256"] != prompt_digest) {
        throw CacheCorruptError("cache entry corrupt: " + path.string());
    }
    return entry["response"].get<std::string>();
}

}  // namespace

std::string LlmClient::complete_with_cache(const std::string& prompt) {
    const std::string key = cache_key(config_.model_name, config_.temperature, prompt);
    const std::string prompt_digest = sha256_hex(prompt);
    const std::filesystem::path entry_path = config_.cache_dir / key;

    if (std::filesystem::exists(entry_path)) {
        impl_->cache_hits.fetch_add(1);
        return read_cache_entry(entry_path, prompt_digest);
    }
    impl_->cache_misses.fetch_add(1);
    if (config_.offline) {
        throw EndpointUnreachableError("cache miss in offline mode (key " + key + ")");
    }
    if (config_.base_url.empty()) {
        throw EndpointUnreachableError("no endpoint base URL configured");
    }
    if (config_.base_url.rfind("https://", 0) == 0) {
        throw InputError("https endpoints are not supported; use an http proxy");
    }

    nlohmann::json request = {
        {"model", config_.model_name},
        {"temperature", config_.temperature},
        {"messages", nlohmann::json::array({nlohmann::json{
                         {"role", "user"}, {"content", prompt}}})},
    };
    const std::string request_body = request.dump();

    impl_->in_flight.acquire();
    struct Release {
        Impl* impl;
        ~Release() { impl->in_flight.release(); }
    } release{impl_.get()};

    std::string response_text;
    std::string last_failure = "no attempt made";
    bool got_response = false;
    for (int attempt = 0; attempt < config_.max_attempts; ++attempt) {
        if (attempt > 0) {
            impl_->retries.fetch_add(1);
            const auto delay =
                std::chrono::milliseconds(config_.backoff_initial_ms) * (1 << (attempt - 1));
            std::this_thread::sleep_for(delay);
        }
        if (config_.requests_per_second > 0.0) {
            std::chrono::steady_clock::time_point slot;
            {
                std::lock_guard<std::mutex> lock(impl_->rate_mutex);
                const auto now = std::chrono::steady_clock::now();
                slot = std::max(now, impl_->next_slot);
                impl_->next_slot =
                    slot + std::chrono::microseconds(
                               static_cast<long>(1e6 / config_.requests_per_second));
            }
            std::this_thread::sleep_until(slot);
        }

        httplib::Client client(config_.base_url);
        client.set_connection_timeout(0, config_.connect_timeout_ms * 1000);
        client.set_read_timeout(config_.read_timeout_ms / 1000,
                                (config_.read_timeout_ms % 1000) * 1000);
        if (const char* key_value = std::getenv(config_.api_key_env.c_str())) {
            client.set_default_headers(
                {{"Authorization", std::string("Bearer ") + key_value}});
        }

        impl_->http_requests.fetch_add(1);
        auto result = client.Post(config_.completions_path, request_body,
                                  "application/json");
        if (!result) {
            last_failure = "connect/transport error (" +
                           std::string(httplib::to_string(result.error())) + ")";
            continue;
        }
        if (result->status >= 200 && result->status < 300) {
            nlohmann::json body = nlohmann::json::parse(result->body, nullptr, false);
            if (body.is_discarded() || !body.contains("choices") ||
                !body["choices"].is_array() || body["choices"].empty()) {
                throw NonSuccessStatusError(result->status,
                                            "malformed completion body: " +
                                                excerpt_of(result->body));
            }
            const auto& choice = body["choices"][0];
            if (!choice.contains("message") || !choice["message"].contains("content") ||
                !choice["message"]["content"].is_string()) {
                throw NonSuccessStatusError(result->status,
                                            "missing message content: " +
                                                excerpt_of(result->body));
            }
            response_text = choice["message"]["content"].get<std::string>();
            got_response = true;
            break;
        }
        if (is_transient_status(result->status)) {
            last_failure = "status " + std::to_string(result->status);
            continue;
        }
        throw NonSuccessStatusError(result->status, excerpt_of(result->body));
    }
    if (!got_response) {
        throw EndpointUnreachableError("endpoint unreachable after " +
                                       std::to_string(config_.max_attempts) +
                                       " attempts; last failure: " + last_failure);
    }

    nlohmann::json entry = {
        {"model", config_.model_name},
        {"temperature", format_temperature(config_.temperature)},
        {"prompt_sha256", prompt_digest},
        {"response", response_text},
    };
    const auto temp_path =
        entry_path.string() + ".tmp" + std::to_string(impl_->temp_counter.fetch_add(1));
    {
        std::ofstream out(temp_path, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error("cannot write cache entry: " + temp_path);
        }
        out << entry.dump();
    }
    std::filesystem::rename(temp_path, entry_path);  // atomic on POSIX
    return response_text;
}

std::string complete_with_cache(const ClientConfig& config, const std::string& prompt) {
    LlmClient client(config);
    return client.complete_with_cache(prompt);
}

}  // namespace exitbench::agents
