#pragma once

// Client for OpenAI-style completion endpoints that echo prompt logprobs.
//
// Scoring sends prefix + continuation as the prompt with echo enabled and
// reads back per-token text offsets, chosen-token logprobs and the top-k
// alternatives. Token ids are interned per backend instance from the token
// strings the server returns.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "atc/backend.hpp"
#include "atc/error.hpp"
#include "atc/rng.hpp"

namespace atc {

enum class EndpointKind { completions, chat };

struct HttpBackendConfig {
    std::string base_url = "http://localhost:8000/v1";  // scheme://host[:port][/path]
    std::string model;
    int top_k = 20;
    double timeout_s = 60.0;
    int max_retries = 3;
    std::string api_key_env;  // name of the environment variable holding the key
    EndpointKind endpoint = EndpointKind::completions;
    int max_in_flight = 4;
    std::optional<std::uint64_t> jitter_seed;
    double backoff_base_s = 0.5;
};

namespace detail {

class Semaphore {
public:
    explicit Semaphore(int permits) : permits_(std::max(1, permits)) {}

    void acquire() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return permits_ > 0; });
        --permits_;
    }
    void release() {
        {
            std::lock_guard lock(mu_);
            ++permits_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    int permits_;
};

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;    // without trailing slash
};

inline SplitUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error("invalid_config", "base URL needs a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    SplitUrl out;
    out.origin = url.substr(0, path_start);
    out.path = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
    return out;
}

}  // namespace detail

class HttpBackend final : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig cfg)
        : cfg_(std::move(cfg)), url_(detail::split_url(cfg_.base_url)), in_flight_(cfg_.max_in_flight),
          jitter_(cfg_.jitter_seed.value_or(std::random_device{}())) {
        if (cfg_.top_k < 1) throw Error("invalid_config", "top_k must be >= 1");
    }

    const HttpBackendConfig& config() const { return cfg_; }

    std::string id() const override { return "http:" + cfg_.model; }

    ScoredSequence score_continuation(std::string_view prefix, std::string_view continuation) const override {
        if (cfg_.endpoint == EndpointKind::chat) {
            throw Error("backend_incapable", "chat endpoints do not return continuation logprobs");
        }
        if (continuation.empty()) throw Error("empty_continuation", "nothing to score");
        const std::string full = std::string(prefix) + std::string(continuation);
        nlohmann::json body = {
            {"model", cfg_.model}, {"prompt", full},      {"echo", true},
            {"logprobs", cfg_.top_k}, {"max_tokens", 1}, {"temperature", 0.0},
        };
        const auto response = post("/completions", body);
        return parse_echo_response(response, prefix.size(), full);
    }

    Generation generate(const Prompt& prompt, const SamplingConfig& cfg) const override {
        cfg.validate();
        const auto started = std::chrono::steady_clock::now();
        nlohmann::json body = {
            {"model", cfg_.model},
            {"temperature", cfg.temperature},
            {"top_p", cfg.top_p},
            {"max_tokens", cfg.max_tokens},
            {"seed", cfg.seed},
        };
        if (!cfg.stop.empty()) body["stop"] = cfg.stop;
        std::string path;
        if (cfg_.endpoint == EndpointKind::chat) {
            nlohmann::json messages = nlohmann::json::array();
            if (!prompt.system.empty()) messages.push_back({{"role", "system"}, {"content", prompt.system}});
            messages.push_back({{"role", "user"}, {"content", prompt.user}});
            body["messages"] = std::move(messages);
            path = "/chat/completions";
        } else {
            body["prompt"] = render_completion_prompt(prompt);
            path = "/completions";
        }
        const auto response = post(path, body);
        Generation g;
        try {
            const auto& choice = response.at("choices").at(0);
            if (cfg_.endpoint == EndpointKind::chat) {
                g.text = choice.at("message").at("content").get<std::string>();
            } else {
                g.text = choice.at("text").get<std::string>();
            }
            g.truncated = choice.value("finish_reason", std::string()) == "length";
            if (response.contains("usage") && response["usage"].contains("completion_tokens")) {
                g.generated_tokens = response["usage"]["completion_tokens"].get<int>();
            }
        } catch (const nlohmann::json::exception& e) {
            throw Error("bad_response", e.what());
        }
        g.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
        return g;
    }

    std::string token_text(TokenId id) const override {
        std::lock_guard lock(vocab_mu_);
        if (id < 0 || static_cast<std::size_t>(id) >= id_to_text_.size()) return "<unk>";
        return id_to_text_[static_cast<std::size_t>(id)];
    }

    /// Turns an echoed completion response into a ScoredSequence covering
    /// `full.substr(prefix_len)`. Exposed for tests.
    ScoredSequence parse_echo_response(const nlohmann::json& response, std::size_t prefix_len,
                                       std::string_view full) const {
        const nlohmann::json* lp = nullptr;
        try {
            lp = &response.at("choices").at(0).at("logprobs");
        } catch (const nlohmann::json::exception&) {
            throw Error("backend_incapable", "response carries no logprobs");
        }
        if (lp->is_null() || !lp->contains("tokens") || !lp->contains("token_logprobs") ||
            !lp->contains("top_logprobs") || !lp->contains("text_offset")) {
            throw Error("backend_incapable", "response lacks echoed per-token logprobs");
        }
        const auto& tokens = (*lp)["tokens"];
        const auto& chosen = (*lp)["token_logprobs"];
        const auto& tops = (*lp)["top_logprobs"];
        const auto& offsets = (*lp)["text_offset"];

        ScoredSequence seq;
        std::size_t expected = prefix_len;
        for (std::size_t t = 0; t < tokens.size(); ++t) {
            const auto text = tokens[t].get<std::string>();
            const auto offset = offsets[t].get<std::size_t>();
            if (offset >= full.size()) break;  // generated, not echoed
            if (offset + text.size() <= prefix_len) continue;
            if (offset != expected || full.compare(offset, text.size(), text) != 0) {
                throw Error("alignment_failure", "first mismatching offset " + std::to_string(std::min(offset, expected)));
            }
            if (chosen[t].is_null() || tops[t].is_null()) {
                throw Error("backend_incapable", "no logprob for token at offset " + std::to_string(offset) +
                                                     " (use a non-empty prefix)");
            }
            Distribution d;
            d.exact = false;
            d.actual_token_id = intern(text);
            d.actual_log_prob = std::min(0.0, chosen[t].get<double>());
            for (const auto& [alt, value] : tops[t].items()) {
                d.entries.push_back({intern(alt), std::min(0.0, value.get<double>())});
            }
            std::sort(d.entries.begin(), d.entries.end(), [](const TokenLogProb& a, const TokenLogProb& b) {
                return a.log_prob != b.log_prob ? a.log_prob > b.log_prob : a.id < b.id;
            });
            const double tail = 1.0 - d.covered_mass();
            d.tail_mass = std::clamp(tail, 0.0, std::nextafter(1.0, 0.0));
            const std::size_t rel = offset - prefix_len;
            seq.tokens.push_back({d.actual_token_id, text, {rel, rel + text.size()}});
            seq.distributions.push_back(std::move(d));
            expected = offset + text.size();
        }
        if (expected != full.size()) {
            throw Error("alignment_failure", "first mismatching offset " + std::to_string(expected));
        }
        return seq;
    }

private:
    TokenId intern(const std::string& text) const {
        std::lock_guard lock(vocab_mu_);
        const auto [it, inserted] = text_to_id_.try_emplace(text, static_cast<TokenId>(id_to_text_.size()));
        if (inserted) id_to_text_.push_back(text);
        return it->second;
    }

    double backoff_seconds(int attempt) const {
        std::lock_guard lock(jitter_mu_);
        return cfg_.backoff_base_s * std::ldexp(1.0, attempt) * (0.5 + jitter_.uniform());
    }

    nlohmann::json post(const std::string& path, const nlohmann::json& body) const {
        in_flight_.acquire();
        struct Release {
            detail::Semaphore& s;
            ~Release() { s.release(); }
        } release{in_flight_};

        httplib::Headers headers;
        if (!cfg_.api_key_env.empty()) {
            if (const char* key = std::getenv(cfg_.api_key_env.c_str())) {
                headers.emplace("Authorization", std::string("Bearer ") + key);
            }
        }
        const std::string payload = body.dump();
        const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
            std::chrono::duration<double>(cfg_.timeout_s));
        std::string last_error;
        const int attempts = std::max(1, cfg_.max_retries + 1);
        for (int attempt = 0; attempt < attempts; ++attempt) {
            if (attempt > 0) std::this_thread::sleep_for(std::chrono::duration<double>(backoff_seconds(attempt - 1)));
            httplib::Client client(url_.origin);
            client.set_connection_timeout(timeout);
            client.set_read_timeout(timeout);
            client.set_write_timeout(timeout);
            auto res = client.Post(url_.path + path, headers, payload, "application/json");
            if (!res) {
                last_error = httplib::to_string(res.error());
                continue;
            }
            if (res->status == 429 || res->status >= 500) {
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200) {
                throw Error("backend_http_error", "HTTP " + std::to_string(res->status) + ": " + res->body);
            }
            try {
                return nlohmann::json::parse(res->body);
            } catch (const nlohmann::json::exception& e) {
                throw Error("bad_response", e.what());
            }
        }
        throw TransportError(last_error, attempts);
    }

    HttpBackendConfig cfg_;
    detail::SplitUrl url_;
    mutable detail::Semaphore in_flight_;
    mutable std::mutex jitter_mu_;
    mutable Lcg64 jitter_;
    mutable std::mutex vocab_mu_;
    mutable std::unordered_map<std::string, TokenId> text_to_id_;
    mutable std::vector<std::string> id_to_text_;
};

}  // namespace atc
