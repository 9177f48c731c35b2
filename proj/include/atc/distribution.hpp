#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "atc/lexer.hpp"

namespace atc {

using TokenId = std::int64_t;

struct TokenLogProb {
    TokenId id = 0;
    double log_prob = 0.0;
};

/// Next-token law at one position. `entries` holds the top-k (or the full
/// vocabulary when `exact`) sorted by log_prob descending, ties by id.
struct Distribution {
    std::vector<TokenLogProb> entries;
    TokenId actual_token_id = 0;
    double actual_log_prob = 0.0;
    double tail_mass = 0.0;
    bool exact = false;

    double covered_mass() const {
        double m = 0.0;
        for (const auto& e : entries) m += std::exp(e.log_prob);
        return m;
    }
};

struct ScoredToken {
    TokenId id = 0;
    std::string text;
    ByteSpan span;  // relative to the continuation
};

/// Continuation tokens and one distribution per token. Token texts tile the
/// continuation exactly.
struct ScoredSequence {
    std::vector<ScoredToken> tokens;
    std::vector<Distribution> distributions;
};

}  // namespace atc
