// SPDX-License-Identifier: Apache-2.0
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "nextloc/predictors.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <thread>

#include "nextloc/error.hpp"
#include "nextloc/hash.hpp"
#include "nextloc/ranking.hpp"

namespace nextloc {
namespace {

std::string normalise_model(std::string_view model) {
    std::string out;
    for (char c : model) {
        const auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u) || c == '.') out.push_back(static_cast<char>(std::tolower(u)));
    }
    return out;
}

SamplingParams openai_family() {
    SamplingParams p;
    p.max_new_tokens = 150;
    p.max_tokens = 1000;
    return p;
}

SamplingParams llama_base_family(int max_new, double top_p, int top_k) {
    SamplingParams p;
    p.max_new_tokens = max_new;
    p.top_p = top_p;
    p.top_k = top_k;
    p.length_penalty = 1.0;
    p.presence_penalty = 0.0;
    return p;
}

SamplingParams capped(int max_new) {
    SamplingParams p;
    p.max_new_tokens = max_new;
    return p;
}

SamplingParams length_capped(int max_length) {
    SamplingParams p;
    p.max_new_tokens.reset();
    p.max_length = max_length;
    return p;
}

struct ProfileRule {
    std::vector<std::string> needles;
    ModelProfile profile;
};

const std::vector<ProfileRule>& profile_rules() {
    static const std::vector<ProfileRule> rules = {
        {{"gpt4o"}, {"GPT-4o", openai_family()}},
        {{"gpt4"}, {"GPT-4", openai_family()}},
        {{"gpt3.5"}, {"GPT-3.5", openai_family()}},
        {{"llama3.1"}, {"Llama 3.1", llama_base_family(200, 0.95, 250)}},
        {{"llama3", "instruct"}, {"Llama 3 Instruct", capped(200)}},
        {{"llama3"}, {"Llama 3", llama_base_family(200, 0.95, 250)}},
        {{"llama2", "chat"}, {"Llama 2 Chat", capped(200)}},
        {{"llama2"}, {"Llama 2", llama_base_family(200, 0.95, 250)}},
        {{"mistral"}, {"Mistral 7B", llama_base_family(128, 0.95, 50)}},
        {{"gemma"}, {"Gemma", capped(200)}},
        {{"phi"}, {"Phi", length_capped(500)}},
        {{"gptj"}, {"GPT-J", capped(200)}},
        {{"dolly"}, {"Dolly", capped(200)}},
    };
    return rules;
}

template <typename T>
void put_optional(Json& j, const char* key, const std::optional<T>& v) {
    if (v) j[key] = *v;
}

bool retryable_status(int status) { return status == 429 || status >= 500; }

std::chrono::milliseconds backoff_delay(const BackendConfig& cfg, int attempt, const httplib::Result* res) {
    std::chrono::milliseconds delay = cfg.backoff_base * (1LL << std::min(attempt, 20));
    if (res && *res && (*res)->has_header("Retry-After")) {
        char* end = nullptr;
        const auto header = (*res)->get_header_value("Retry-After");
        const double seconds = std::strtod(header.c_str(), &end);
        if (end != header.c_str() && seconds >= 0) {
            delay = std::max(delay, std::chrono::milliseconds(static_cast<long long>(seconds * 1000)));
        }
    }
    return std::min(delay, cfg.backoff_max);
}

}  // namespace

std::string to_string(BackendKind kind) {
    switch (kind) {
        case BackendKind::RemoteChat: return "remote-chat";
        case BackendKind::FrequencyOracle: return "frequency-oracle";
        case BackendKind::RecencyOracle: return "recency-oracle";
        case BackendKind::Markov1Oracle: return "markov1-oracle";
    }
    return "frequency-oracle";
}

BackendKind parse_backend_kind(std::string_view s) {
    if (s == "remote-chat" || s == "remote") return BackendKind::RemoteChat;
    if (s == "frequency-oracle" || s == "frequency") return BackendKind::FrequencyOracle;
    if (s == "recency-oracle" || s == "recency") return BackendKind::RecencyOracle;
    if (s == "markov1-oracle" || s == "markov1") return BackendKind::Markov1Oracle;
    throw ConfigError("unknown backend '" + std::string(s) +
                      "' (expected remote-chat, frequency-oracle, recency-oracle or markov1-oracle)");
}

Json SamplingParams::to_json() const {
    Json j = {{"temperature", temperature}};
    put_optional(j, "max_new_tokens", max_new_tokens);
    put_optional(j, "max_tokens", max_tokens);
    put_optional(j, "max_length", max_length);
    put_optional(j, "top_p", top_p);
    put_optional(j, "top_k", top_k);
    put_optional(j, "length_penalty", length_penalty);
    put_optional(j, "presence_penalty", presence_penalty);
    return j;
}

std::optional<int> SamplingParams::generation_cap() const { return max_new_tokens ? max_new_tokens : max_length; }

std::optional<ModelProfile> profile_for_model(std::string_view model) {
    const auto name = normalise_model(model);
    for (const auto& rule : profile_rules()) {
        const bool all = std::all_of(rule.needles.begin(), rule.needles.end(),
                                     [&](const std::string& n) { return name.find(n) != std::string::npos; });
        if (all) return rule.profile;
    }
    return std::nullopt;
}

const std::vector<ModelProfile>& model_profiles() {
    static const std::vector<ModelProfile> all = [] {
        std::vector<ModelProfile> out;
        for (const auto& r : profile_rules()) out.push_back(r.profile);
        return out;
    }();
    return all;
}

void BackendConfig::validate() const {
    if (!(sampling.temperature >= 0)) throw ConfigError("temperature must be >= 0");
    if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
    if (!(requests_per_minute >= 0)) throw ConfigError("requests_per_minute must be >= 0");
    if (kind == BackendKind::RemoteChat) {
        if (endpoint.empty()) throw ConfigError("remote backend needs an endpoint");
        if (model.empty()) throw ConfigError("remote backend needs a model name");
        if (api_key_env.empty()) throw ConfigError("remote backend needs api_key_env");
    }
}

Json BackendConfig::to_json() const {
    Json j = {{"kind", to_string(kind)}, {"model", model}};
    if (!is_oracle()) {
        j["endpoint"] = endpoint;
        j["path"] = path;
        j["sampling"] = sampling.to_json();
        j["timeout_ms"] = timeout.count();
        j["max_retries"] = max_retries;
        j["requests_per_minute"] = requests_per_minute;
        j["backoff_base_ms"] = backoff_base.count();
        j["backoff_max_ms"] = backoff_max.count();
        j["api_key_env"] = api_key_env;
    }
    return j;
}

std::string request_hash(const std::string& model, const std::string& content_hash, int run_index,
                         const SamplingParams& sampling) {
    const Json key = {{"model", model}, {"content_hash", content_hash}, {"run_index", run_index},
                      {"sampling", sampling.to_json()}};
    return sha256_hex(key.dump());
}

Json response_to_json(const RawResponse& r) {
    Json j = {{"instance_id", r.instance_id}, {"model", r.model},         {"run_index", r.run_index},
              {"text", r.text},               {"request_hash", r.request_hash}, {"failed", r.failed}};
    if (r.failed) j["error"] = r.error;
    return j;
}

RawResponse response_from_json(const Json& j) {
    RawResponse r;
    r.instance_id = j.at("instance_id").get<std::string>();
    r.model = j.value("model", "");
    r.run_index = j.value("run_index", 1);
    r.text = j.value("text", "");
    r.request_hash = j.value("request_hash", "");
    r.failed = j.value("failed", false);
    r.error = j.value("error", "");
    return r;
}

ResponseCache::ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
    if (!std::filesystem::exists(path_)) return;
    for (const auto& j : read_jsonl(path_)) {
        entries_.emplace(j.at("request_hash").get<std::string>(), j.at("text").get<std::string>());
    }
}

std::optional<std::string> ResponseCache::lookup(const std::string& hash) const {
    std::lock_guard lock(mutex_);
    const auto it = entries_.find(hash);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void ResponseCache::store(const RawResponse& response) {
    std::lock_guard lock(mutex_);
    if (!entries_.emplace(response.request_hash, response.text).second) return;
    if (path_.empty()) return;
    const Json line = {{"request_hash", response.request_hash},
                       {"instance_id", response.instance_id},
                       {"model", response.model},
                       {"run_index", response.run_index},
                       {"text", response.text}};
    append_line(path_, line.dump(-1, ' ', false, Json::error_handler_t::replace));
}

std::size_t ResponseCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

RateLimiter::RateLimiter(double requests_per_minute) {
    if (requests_per_minute > 0) {
        interval_ = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(60.0 / requests_per_minute));
    }
}

void RateLimiter::acquire() {
    std::chrono::steady_clock::time_point slot;
    {
        std::lock_guard lock(mutex_);
        const auto now = std::chrono::steady_clock::now();
        slot = std::max(now, next_);
        next_ = slot + interval_;
    }
    std::this_thread::sleep_until(slot);
}

std::vector<std::string> oracle_ranking(BackendKind kind, const PredictionInstance& instance) {
    std::vector<Visit> seq = instance.historical;
    seq.insert(seq.end(), instance.contextual.begin(), instance.contextual.end());
    switch (kind) {
        case BackendKind::FrequencyOracle: return rank_by_frequency(seq);
        case BackendKind::RecencyOracle: return rank_by_recency(seq);
        case BackendKind::Markov1Oracle: return rank_by_markov1(seq);
        case BackendKind::RemoteChat: break;
    }
    throw ConfigError("remote-chat is not an oracle");
}

std::string oracle_text(BackendKind kind, const PredictionInstance& instance) {
    static const std::unordered_map<int, std::string> reasons = {
        {static_cast<int>(BackendKind::FrequencyOracle), "Most frequently visited places in the historical and contextual stays."},
        {static_cast<int>(BackendKind::RecencyOracle), "Most recently visited places."},
        {static_cast<int>(BackendKind::Markov1Oracle), "Places most often visited right after the current place."},
    };
    const Json j = {{"prediction", oracle_ranking(kind, instance)}, {"reason", reasons.at(static_cast<int>(kind))}};
    return j.dump();
}

Json BackendStats::to_json() const {
    return {{"requests", requests},           {"cache_hits", cache_hits}, {"cache_misses", cache_misses},
            {"network_calls", network_calls}, {"retries", retries},       {"failures", failures}};
}

Backend::Backend(BackendConfig config, ResponseCache* cache) : config_(std::move(config)), cache_(cache) {
    config_.validate();
    if (config_.is_oracle()) return;
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (!key || !*key) {
        throw ConfigError("environment variable " + config_.api_key_env + " is not set; it must hold the API key");
    }
    api_key_ = key;
    limiter_.emplace(config_.requests_per_minute);
}

BackendStats Backend::stats() const {
    BackendStats s;
    s.requests = requests_;
    s.cache_hits = hits_;
    s.cache_misses = misses_;
    s.network_calls = calls_;
    s.retries = retries_;
    s.failures = failures_;
    return s;
}

RawResponse Backend::predict(const RenderedPrompt& prompt, const PredictionInstance& instance, int run_index) {
    ++requests_;
    RawResponse r;
    r.instance_id = instance.instance_id;
    r.model = config_.model;
    r.run_index = run_index;
    r.request_hash = request_hash(config_.model, prompt.content_hash, run_index,
                                  config_.is_oracle() ? SamplingParams{} : config_.sampling);

    if (config_.is_oracle()) {
        r.text = oracle_text(config_.kind, instance);
        return r;
    }
    if (prompt.text.empty()) throw ConfigError("empty prompt for instance " + instance.instance_id);

    if (cache_) {
        if (auto hit = cache_->lookup(r.request_hash)) {
            ++hits_;
            r.text = std::move(*hit);
            r.from_cache = true;
            return r;
        }
    }
    ++misses_;

    const auto start = std::chrono::steady_clock::now();
    r.text = call_remote(prompt, r.failed, r.error);
    r.latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
    if (r.failed) {
        ++failures_;
        r.text.clear();
    } else if (cache_) {
        cache_->store(r);
    }
    return r;
}

std::string Backend::call_remote(const RenderedPrompt& prompt, bool& failed, std::string& error) {
    Json body = {{"model", config_.model},
                 {"messages", Json::array({{{"role", "user"}, {"content", prompt.text}}})},
                 {"temperature", config_.sampling.temperature}};
    if (auto cap = config_.sampling.generation_cap()) body["max_tokens"] = *cap;
    put_optional(body, "top_p", config_.sampling.top_p);
    put_optional(body, "top_k", config_.sampling.top_k);
    put_optional(body, "length_penalty", config_.sampling.length_penalty);
    put_optional(body, "presence_penalty", config_.sampling.presence_penalty);
    const std::string payload = body.dump(-1, ' ', false, Json::error_handler_t::replace);
    const httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};

    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);

    for (int attempt = 0;; ++attempt) {
        if (attempt > 0) ++retries_;
        limiter_->acquire();
        ++calls_;

        httplib::Client client(config_.endpoint);
        client.set_connection_timeout(secs.count(), usecs.count());
        client.set_read_timeout(secs.count(), usecs.count());
        client.set_write_timeout(secs.count(), usecs.count());
        auto res = client.Post(config_.path, headers, payload, "application/json");

        bool retry = false;
        if (!res) {
            error = "transport error: " + httplib::to_string(res.error());
            retry = true;
        } else if (res->status == 401 || res->status == 403) {
            throw AuthError("endpoint rejected credentials from " + config_.api_key_env + " (HTTP " +
                            std::to_string(res->status) + ")");
        } else if (res->status == 200) {
            const auto j = Json::parse(res->body, nullptr, false);
            const Json* content = nullptr;
            if (!j.is_discarded() && j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
                const auto& choice = j["choices"][0];
                if (choice.contains("message") && choice["message"].contains("content") &&
                    choice["message"]["content"].is_string()) {
                    content = &choice["message"]["content"];
                } else if (choice.contains("text") && choice["text"].is_string()) {
                    content = &choice["text"];
                }
            }
            if (content) {
                failed = false;
                error.clear();
                return content->get<std::string>();
            }
            error = "unrecognised response body";
            retry = true;
        } else {
            error = "HTTP " + std::to_string(res->status);
            retry = retryable_status(res->status);
        }

        if (!retry || attempt >= config_.max_retries) {
            failed = true;
            return {};
        }
        std::this_thread::sleep_for(backoff_delay(config_, attempt, &res));
    }
}

std::vector<RawResponse> run_batch(Backend& backend, const std::vector<BatchJob>& jobs, int run_index,
                                   std::size_t concurrency) {
    std::vector<RawResponse> out(jobs.size());
    if (jobs.empty()) return out;
    const std::size_t width = std::clamp<std::size_t>(concurrency, 1, jobs.size());

    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&] {
        while (!stop) {
            const std::size_t i = next++;
            if (i >= jobs.size()) return;
            try {
                out[i] = backend.predict(jobs[i].prompt, *jobs[i].instance, run_index);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                stop = true;
            }
        }
    };

    if (width == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(width);
        for (std::size_t t = 0; t < width; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);
    return out;
}

}  // namespace nextloc
