#pragma once

#include <string>
#include <string_view>

#include "atc/distribution.hpp"
#include "atc/sampling.hpp"

namespace atc {

/// A generation request. Completion-style backends see
/// `render_completion_prompt`; chat backends send system/user messages.
struct Prompt {
    std::string system;
    std::string user;
};

inline std::string render_completion_prompt(const Prompt& p) {
    if (p.system.empty()) return p.user;
    return p.system + "\n\n" + p.user + "\n\n";
}

struct Generation {
    std::string text;
    bool truncated = false;  // max_tokens hit before a terminator
    int generated_tokens = 0;
    double latency_ms = 0.0;
};

/// Language-model backend: scoring with per-position distributions, and
/// sampled generation. Implementations must be safe for concurrent calls.
class Backend {
public:
    virtual ~Backend() = default;

    virtual std::string id() const = 0;

    /// Distributions over every token of `continuation`, conditioned on
    /// `prefix` and the preceding continuation tokens. An empty prefix means
    /// the unconditional setting (begin-of-sequence only).
    virtual ScoredSequence score_continuation(std::string_view prefix, std::string_view continuation) const = 0;

    virtual Generation generate(const Prompt& prompt, const SamplingConfig& cfg) const = 0;

    /// Surface text of a token id, for exports.
    virtual std::string token_text(TokenId id) const = 0;
};

}  // namespace atc
