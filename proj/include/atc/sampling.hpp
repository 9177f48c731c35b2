#pragma once

// Temperature softmax and nucleus (top-p) sampling over a logit vector.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "atc/error.hpp"
#include "atc/rng.hpp"

namespace atc {

struct SamplingConfig {
    double top_p = 0.95;
    double temperature = 0.7;
    int max_tokens = 128;
    std::uint64_t seed = 0;
    /// Generation stops before the first occurrence of any of these.
    std::vector<std::string> stop;

    void validate() const {
        if (!(top_p > 0.0 && top_p <= 1.0)) throw Error("invalid_config", "top_p must be in (0, 1]");
        if (!(temperature > 0.0)) throw Error("invalid_config", "temperature must be > 0");
        if (max_tokens <= 0) throw Error("invalid_config", "max_tokens must be positive");
    }
};

/// softmax(z / T), computed with the max-logit shift. Entries equal to -inf
/// get probability 0.
inline std::vector<double> temperature_softmax(std::span<const double> logits, double temperature) {
    std::vector<double> probs(logits.size(), 0.0);
    double max_z = -std::numeric_limits<double>::infinity();
    for (double z : logits) max_z = std::max(max_z, z / temperature);
    if (!std::isfinite(max_z)) return probs;
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] / temperature - max_z);
        total += probs[i];
    }
    for (auto& p : probs) p /= total;
    return probs;
}

/// Token ids of the nucleus: the shortest prefix of tokens sorted by
/// probability (descending, ties by id ascending) whose cumulative mass
/// reaches `top_p`. The token that crosses the threshold is kept.
inline std::vector<std::size_t> nucleus_set(std::span<const double> probs, double top_p) {
    std::vector<std::size_t> order(probs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
    double cumulative = 0.0;
    std::size_t keep = 0;
    while (keep < order.size()) {
        if (probs[order[keep]] <= 0.0) break;
        cumulative += probs[order[keep]];
        ++keep;
        if (cumulative >= top_p) break;
    }
    order.resize(std::max<std::size_t>(keep, 1));
    return order;
}

/// Draws one token: temperature softmax, nucleus truncation, renormalise,
/// inverse-CDF with a single uniform from `rng`.
inline std::size_t sample_token(std::span<const double> logits, double temperature, double top_p, Lcg64& rng) {
    if (logits.empty()) throw Error("invalid_argument", "empty logit vector");
    const auto probs = temperature_softmax(logits, temperature);
    const auto nucleus = nucleus_set(probs, top_p);
    double mass = 0.0;
    for (auto id : nucleus) mass += probs[id];
    const double u = rng.uniform() * mass;
    double cumulative = 0.0;
    for (auto id : nucleus) {
        cumulative += probs[id];
        if (u < cumulative) return id;
    }
    return nucleus.back();
}

}  // namespace atc
