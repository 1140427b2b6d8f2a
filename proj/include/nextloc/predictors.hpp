// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nextloc/fileio.hpp"
#include "nextloc/instances.hpp"
#include "nextloc/prompts.hpp"

namespace nextloc {

enum class BackendKind { RemoteChat, FrequencyOracle, RecencyOracle, Markov1Oracle };

std::string to_string(BackendKind kind);
BackendKind parse_backend_kind(std::string_view s);

/// Generation settings sent with every request. Unset optionals are omitted
/// from the wire payload.
struct SamplingParams {
    double temperature = 0.01;
    std::optional<int> max_new_tokens = 200;
    std::optional<int> max_tokens;  // provider-side total budget, recorded only
    std::optional<int> max_length;
    std::optional<double> top_p;
    std::optional<int> top_k;
    std::optional<double> length_penalty;
    std::optional<double> presence_penalty;

    Json to_json() const;
    /// Token cap placed in the request: max_new_tokens, else max_length.
    std::optional<int> generation_cap() const;
};

/// Sampling defaults for a model family, matched case-insensitively against
/// the model name (e.g. "gpt-4o-2024-05-13", "meta-llama/Meta-Llama-3-70B-Instruct").
struct ModelProfile {
    std::string family;
    SamplingParams sampling;
};

std::optional<ModelProfile> profile_for_model(std::string_view model);
const std::vector<ModelProfile>& model_profiles();

struct BackendConfig {
    BackendKind kind = BackendKind::FrequencyOracle;
    std::string endpoint = "https://api.openai.com";
    std::string path = "/v1/chat/completions";
    std::string model = "frequency-oracle";
    SamplingParams sampling;
    std::chrono::milliseconds timeout{60000};
    int max_retries = 5;
    double requests_per_minute = 60.0;  // 0 disables the cap
    std::chrono::milliseconds backoff_base{500};
    std::chrono::milliseconds backoff_max{30000};
    std::string api_key_env = "OPENAI_API_KEY";

    bool is_oracle() const { return kind != BackendKind::RemoteChat; }
    /// Throws ConfigError on a negative temperature, retry count or rate.
    void validate() const;
    Json to_json() const;
};

struct RawResponse {
    std::string instance_id;
    std::string model;
    int run_index = 1;
    std::string text;
    std::chrono::milliseconds latency{0};
    bool from_cache = false;
    std::string request_hash;
    bool failed = false;
    std::string error;
};

std::string request_hash(const std::string& model, const std::string& content_hash, int run_index,
                         const SamplingParams& sampling);

/// Stable fields only (no latency, no cache flag) so reruns compare byte for byte.
Json response_to_json(const RawResponse& r);
RawResponse response_from_json(const Json& j);

/// Append-only JSON-lines store of successful responses keyed by request hash.
class ResponseCache {
public:
    ResponseCache() = default;  // in memory only
    explicit ResponseCache(std::filesystem::path path);

    std::optional<std::string> lookup(const std::string& hash) const;
    /// First write wins; later writes for the same hash are ignored.
    void store(const RawResponse& response);
    std::size_t size() const;

private:
    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, std::string> entries_;
};

/// Spaces request starts at least 60/rpm seconds apart across all threads.
class RateLimiter {
public:
    explicit RateLimiter(double requests_per_minute);
    void acquire();

private:
    std::mutex mutex_;
    std::chrono::steady_clock::duration interval_{};
    std::chrono::steady_clock::time_point next_{};
};

/// Ranked ids an offline oracle would answer with, computed from H then C.
std::vector<std::string> oracle_ranking(BackendKind kind, const PredictionInstance& instance);

/// Oracle answer in the same JSON shape the prompts ask models for.
std::string oracle_text(BackendKind kind, const PredictionInstance& instance);

struct BackendStats {
    std::size_t requests = 0;
    std::size_t cache_hits = 0;
    std::size_t cache_misses = 0;
    std::size_t network_calls = 0;
    std::size_t retries = 0;
    std::size_t failures = 0;
    Json to_json() const;
};

class Backend {
public:
    /// For the remote kind the API key is resolved here, so a missing key
    /// fails before any request is made.
    explicit Backend(BackendConfig config, ResponseCache* cache = nullptr);

    const BackendConfig& config() const { return config_; }

    /// Never throws for transport problems (the response is marked failed);
    /// throws AuthError when the endpoint rejects the credentials.
    RawResponse predict(const RenderedPrompt& prompt, const PredictionInstance& instance, int run_index);

    BackendStats stats() const;

private:
    std::string call_remote(const RenderedPrompt& prompt, bool& failed, std::string& error);

    BackendConfig config_;
    ResponseCache* cache_;
    std::string api_key_;
    std::optional<RateLimiter> limiter_;
    std::atomic<std::size_t> requests_{0}, hits_{0}, misses_{0}, calls_{0}, retries_{0}, failures_{0};
};

struct BatchJob {
    const PredictionInstance* instance = nullptr;
    RenderedPrompt prompt;
};

/// Runs every job with at most `concurrency` in flight. Results come back in
/// job order. An AuthError stops the batch and is rethrown.
std::vector<RawResponse> run_batch(Backend& backend, const std::vector<BatchJob>& jobs, int run_index,
                                   std::size_t concurrency);

}  // namespace nextloc
