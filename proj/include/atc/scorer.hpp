#pragma once

// Per-token statistics and the detection scores built on them: mean code
// token entropy under task conditioning, and the zero-shot baselines
// (mean log-likelihood, mean log-rank, likelihood/log-rank ratio).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "atc/backend.hpp"
#include "atc/distribution.hpp"
#include "atc/error.hpp"
#include "atc/lexer.hpp"
#include "atc/sampling.hpp"

namespace atc {

/// Placed between the task text and the code when scoring.
inline constexpr std::string_view kTaskSeparator = "\n\n";

/// Sentinel for LRR when every scored token has rank 1.
inline constexpr double kLrrSentinel = std::numeric_limits<double>::infinity();

enum class ScoreKind { entropy, log_p, log_rank, lrr };

inline std::string_view to_string(ScoreKind k) {
    switch (k) {
        case ScoreKind::entropy: return "entropy";
        case ScoreKind::log_p: return "logp";
        case ScoreKind::log_rank: return "logrank";
        case ScoreKind::lrr: return "lrr";
    }
    return "unknown";
}

inline ScoreKind parse_score_kind(std::string_view s) {
    if (s == "entropy") return ScoreKind::entropy;
    if (s == "logp" || s == "log_p") return ScoreKind::log_p;
    if (s == "logrank" || s == "log_rank") return ScoreKind::log_rank;
    if (s == "lrr") return ScoreKind::lrr;
    throw Error("invalid_config", "unknown score kind '" + std::string(s) + "'");
}

/// Entropy in nats. Truncated distributions count the tail as one extra
/// symbol of mass `tail_mass`.
inline double distribution_entropy(const Distribution& d) {
    double h = 0.0;
    for (const auto& e : d.entries) {
        const double p = std::exp(e.log_prob);
        if (p > 0.0) h -= p * e.log_prob;
    }
    if (d.tail_mass > 0.0) h -= d.tail_mass * std::log(d.tail_mass);
    return h;
}

struct TokenRank {
    std::int64_t rank = 1;
    bool is_lower_bound = false;
};

/// 1 + entries strictly more likely than the actual token + equally likely
/// entries with a smaller id. Absent from the top-k: k + 1, lower bound.
inline TokenRank token_rank(const Distribution& d) {
    bool present = false;
    std::int64_t ahead = 0;
    for (const auto& e : d.entries) {
        if (e.id == d.actual_token_id) {
            present = true;
            continue;
        }
        if (e.log_prob > d.actual_log_prob || (e.log_prob == d.actual_log_prob && e.id < d.actual_token_id)) ++ahead;
    }
    if (!present) return {static_cast<std::int64_t>(d.entries.size()) + 1, true};
    return {ahead + 1, false};
}

struct TokenRecord {
    TokenId token_id = 0;
    ByteSpan byte_span;  // relative to the code
    TokenClass cls = TokenClass::code;
    double log_prob = 0.0;
    double entropy = 0.0;
    std::int64_t rank = 1;
    bool rank_is_lower_bound = false;
    bool exact = true;
};

enum class RecordField { entropy, log_prob, log_rank };

/// Mean of `field` over code tokens (and comment tokens when
/// `include_comments`). Conditioning tokens never count.
inline double masked_mean(std::span<const TokenRecord> records, RecordField field, bool include_comments) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : records) {
        if (r.cls == TokenClass::conditioning) continue;
        if (r.cls == TokenClass::comment && !include_comments) continue;
        switch (field) {
            case RecordField::entropy: sum += r.entropy; break;
            case RecordField::log_prob: sum += r.log_prob; break;
            case RecordField::log_rank: sum += std::log(static_cast<double>(r.rank)); break;
        }
        ++n;
    }
    if (n == 0) throw Error("no_scoreable_tokens", "no tokens left after masking");
    return sum / static_cast<double>(n);
}

inline std::size_t count_scored(std::span<const TokenRecord> records, bool include_comments) {
    std::size_t n = 0;
    for (const auto& r : records) {
        if (r.cls == TokenClass::code || (include_comments && r.cls == TokenClass::comment)) ++n;
    }
    return n;
}

/// Scores `code` after `prefix` and attaches per-token statistics and
/// classes. Record spans are relative to `code`.
inline std::vector<TokenRecord> score_tokens(std::string_view code, Language lang, const Backend& backend,
                                             std::string_view prefix) {
    const ScoredSequence seq = backend.score_continuation(prefix, code);
    if (seq.tokens.size() != seq.distributions.size()) {
        throw Error("alignment_failure", "token/distribution count mismatch");
    }
    std::vector<ByteSpan> spans;
    spans.reserve(seq.tokens.size());
    std::size_t cursor = 0;
    for (const auto& tok : seq.tokens) {
        if (tok.span.start != cursor || code.compare(tok.span.start, tok.text.size(), tok.text) != 0 ||
            tok.span.end != tok.span.start + tok.text.size()) {
            throw Error("alignment_failure", "first mismatching offset " + std::to_string(cursor));
        }
        cursor = tok.span.end;
        spans.push_back({tok.span.start + prefix.size(), tok.span.end + prefix.size()});
    }
    if (cursor != code.size()) throw Error("alignment_failure", "first mismatching offset " + std::to_string(cursor));

    const auto comments = find_comment_spans(code, lang);
    const auto classes = classify_tokens(code, spans, comments.spans, prefix.size());

    std::vector<TokenRecord> records;
    records.reserve(seq.tokens.size());
    for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
        const auto& d = seq.distributions[i];
        const auto rank = token_rank(d);
        records.push_back({seq.tokens[i].id, seq.tokens[i].span, classes[i], d.actual_log_prob,
                           distribution_entropy(d), rank.rank, rank.is_lower_bound, d.exact});
    }
    return records;
}

struct BaselineScores {
    double entropy = 0.0;
    double log_p = 0.0;
    double log_rank = 0.0;
    double lrr = 0.0;
};

inline BaselineScores baselines_from_records(std::span<const TokenRecord> records, bool include_comments,
                                             std::vector<std::string>* diagnostics = nullptr) {
    BaselineScores b;
    b.entropy = masked_mean(records, RecordField::entropy, include_comments);
    b.log_p = masked_mean(records, RecordField::log_prob, include_comments);
    b.log_rank = masked_mean(records, RecordField::log_rank, include_comments);
    if (b.log_rank == 0.0) {
        b.lrr = kLrrSentinel;
        if (diagnostics) diagnostics->push_back("lrr undefined: every scored token has rank 1");
    } else {
        b.lrr = -b.log_p / b.log_rank;
    }
    return b;
}

inline double select_score(const BaselineScores& b, ScoreKind kind) {
    switch (kind) {
        case ScoreKind::entropy: return b.entropy;
        case ScoreKind::log_p: return b.log_p;
        case ScoreKind::log_rank: return b.log_rank;
        case ScoreKind::lrr: return b.lrr;
    }
    return b.entropy;
}

inline std::string conditioning_prefix(std::string_view task) {
    return std::string(task) + std::string(kTaskSeparator);
}

/// Baselines for `code`. Without a conditioning text this is the
/// unconditional setting.
inline BaselineScores baseline_scores(std::string_view code, Language lang, const Backend& backend,
                                      const std::optional<std::string>& conditioning = std::nullopt,
                                      bool include_comments = false, std::vector<std::string>* diagnostics = nullptr) {
    const std::string prefix = conditioning ? conditioning_prefix(*conditioning) : std::string();
    const auto records = score_tokens(code, lang, backend, prefix);
    return baselines_from_records(records, include_comments, diagnostics);
}

/// Higher always means more likely LLM-generated.
inline double orient_score(ScoreKind kind, double value) {
    switch (kind) {
        case ScoreKind::entropy: return -value;
        case ScoreKind::log_p: return value;
        case ScoreKind::log_rank: return -value;
        case ScoreKind::lrr: return value;
    }
    return value;
}

struct DetectorConfig {
    int n_tasks = 1;
    std::optional<double> epsilon;
    std::string prompt_style = "regular";
    SamplingConfig sampling;
    ScoreKind score_kind = ScoreKind::entropy;
    bool include_comments_in_score = false;
    bool strip_comments_first = false;

    void validate() const {
        if (n_tasks < 1) throw Error("invalid_config", "n_tasks must be >= 1");
        sampling.validate();
    }
};

enum class Decision { llm_generated, human_written };

inline std::string_view to_string(Decision d) {
    return d == Decision::llm_generated ? "llm_generated" : "human_written";
}

struct DetectionResult {
    std::string sample_id;
    std::vector<double> per_task_scores;
    double atc_score = 0.0;
    BaselineScores baseline;
    std::size_t m_code_tokens = 0;
    std::optional<Decision> decision;
    bool approximate = false;
    std::vector<std::string> diagnostics;

    bool failed = false;
    std::string failure;

    std::vector<std::string> tasks;
    int generated_tokens = 0;
    double generation_latency_ms = 0.0;
};

/// Decision rule generalised to every score kind through orientation; for
/// entropy this is "human_written iff score > epsilon".
inline Decision decide(ScoreKind kind, double score, double epsilon) {
    return orient_score(kind, score) < orient_score(kind, epsilon) ? Decision::human_written
                                                                    : Decision::llm_generated;
}

namespace detail {

inline double score_records(std::span<const TokenRecord> records, ScoreKind kind, bool include_comments,
                            std::vector<std::string>& diagnostics) {
    switch (kind) {
        case ScoreKind::entropy: return masked_mean(records, RecordField::entropy, include_comments);
        case ScoreKind::log_p: return masked_mean(records, RecordField::log_prob, include_comments);
        case ScoreKind::log_rank: return masked_mean(records, RecordField::log_rank, include_comments);
        case ScoreKind::lrr: return baselines_from_records(records, include_comments, &diagnostics).lrr;
    }
    return 0.0;
}

// Mean anchored at the first value, so identical inputs return that value
// bit for bit.
inline double anchored_mean(std::span<const double> xs) {
    double delta = 0.0;
    for (double x : xs) delta += x - xs.front();
    return xs.front() + delta / static_cast<double>(xs.size());
}

inline bool any_inexact(std::span<const TokenRecord> records) {
    for (const auto& r : records) {
        if (!r.exact) return true;
    }
    return false;
}

inline void finish(DetectionResult& res, const DetectorConfig& cfg, std::span<const TokenRecord> uncond) {
    res.atc_score = anchored_mean(res.per_task_scores);
    res.baseline = baselines_from_records(uncond, cfg.include_comments_in_score, &res.diagnostics);
    if (any_inexact(uncond)) res.approximate = true;
    if (res.approximate) res.diagnostics.push_back("entropy approximated from top-k distributions");
    if (cfg.epsilon) res.decision = decide(cfg.score_kind, res.atc_score, *cfg.epsilon);
}

}  // namespace detail

/// Scores `code` under each task in turn and averages. Comment tokens stay
/// in the context but are left out of the mean. Baselines are computed in the
/// unconditional setting. Backend or masking failures mark the result failed.
inline DetectionResult atc_score(std::string_view code, Language lang, std::span<const std::string> tasks,
                                 const DetectorConfig& cfg, const Backend& backend, std::string sample_id = {}) {
    DetectionResult res;
    res.sample_id = std::move(sample_id);
    res.tasks.assign(tasks.begin(), tasks.end());
    try {
        cfg.validate();
        if (tasks.empty() || static_cast<int>(tasks.size()) != cfg.n_tasks) {
            throw Error("invalid_argument", "expected " + std::to_string(cfg.n_tasks) + " tasks, got " +
                                                std::to_string(tasks.size()));
        }
        const std::string scored = cfg.strip_comments_first ? strip_comments(code, lang) : std::string(code);
        for (const auto& task : tasks) {
            const auto records = score_tokens(scored, lang, backend, conditioning_prefix(task));
            res.per_task_scores.push_back(
                detail::score_records(records, cfg.score_kind, cfg.include_comments_in_score, res.diagnostics));
            res.m_code_tokens = count_scored(records, cfg.include_comments_in_score);
            if (detail::any_inexact(records)) res.approximate = true;
        }
        const auto uncond = score_tokens(scored, lang, backend, "");
        detail::finish(res, cfg, uncond);
    } catch (const Error& e) {
        res.failed = true;
        res.failure = e.what();
    }
    return res;
}

/// Unconditional counterpart of atc_score: a single pass with no prefix.
inline DetectionResult unconditional_score(std::string_view code, Language lang, const DetectorConfig& cfg,
                                           const Backend& backend, std::string sample_id = {}) {
    DetectionResult res;
    res.sample_id = std::move(sample_id);
    try {
        cfg.validate();
        const std::string scored = cfg.strip_comments_first ? strip_comments(code, lang) : std::string(code);
        const auto records = score_tokens(scored, lang, backend, "");
        res.per_task_scores.push_back(
            detail::score_records(records, cfg.score_kind, cfg.include_comments_in_score, res.diagnostics));
        res.m_code_tokens = count_scored(records, cfg.include_comments_in_score);
        detail::finish(res, cfg, records);
    } catch (const Error& e) {
        res.failed = true;
        res.failure = e.what();
    }
    return res;
}

// Line-delimited JSON form. Non-finite scores are written as strings.

inline nlohmann::ordered_json score_to_json(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
    return v;
}

inline double score_from_json(const nlohmann::ordered_json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "+inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        return std::numeric_limits<double>::quiet_NaN();
    }
    return j.get<double>();
}

inline nlohmann::ordered_json to_json(const DetectionResult& r) {
    nlohmann::ordered_json j;
    j["sample_id"] = r.sample_id;
    nlohmann::ordered_json scores;
    scores["atc"] = score_to_json(r.atc_score);
    auto per_task = nlohmann::ordered_json::array();
    for (double s : r.per_task_scores) per_task.push_back(score_to_json(s));
    scores["per_task"] = per_task;
    scores["entropy"] = score_to_json(r.baseline.entropy);
    scores["log_p"] = score_to_json(r.baseline.log_p);
    scores["log_rank"] = score_to_json(r.baseline.log_rank);
    scores["lrr"] = score_to_json(r.baseline.lrr);
    j["scores"] = scores;
    j["m_code_tokens"] = r.m_code_tokens;
    j["decision"] = r.decision ? nlohmann::ordered_json(std::string(to_string(*r.decision))) : nullptr;
    j["approximate"] = r.approximate;
    j["diagnostics"] = r.diagnostics;
    j["failed"] = r.failed;
    if (r.failed) j["failure"] = r.failure;
    j["tasks"] = r.tasks;
    j["generated_tokens"] = r.generated_tokens;
    return j;
}

inline DetectionResult detection_result_from_json(const nlohmann::ordered_json& j) {
    DetectionResult r;
    r.sample_id = j.at("sample_id").get<std::string>();
    const auto& s = j.at("scores");
    r.atc_score = score_from_json(s.at("atc"));
    for (const auto& v : s.at("per_task")) r.per_task_scores.push_back(score_from_json(v));
    r.baseline = {score_from_json(s.at("entropy")), score_from_json(s.at("log_p")),
                  score_from_json(s.at("log_rank")), score_from_json(s.at("lrr"))};
    r.m_code_tokens = j.at("m_code_tokens").get<std::size_t>();
    if (!j.at("decision").is_null()) {
        r.decision = j["decision"] == "human_written" ? Decision::human_written : Decision::llm_generated;
    }
    r.approximate = j.at("approximate").get<bool>();
    r.diagnostics = j.at("diagnostics").get<std::vector<std::string>>();
    r.failed = j.at("failed").get<bool>();
    if (r.failed) r.failure = j.value("failure", std::string());
    r.tasks = j.at("tasks").get<std::vector<std::string>>();
    r.generated_tokens = j.value("generated_tokens", 0);
    return r;
}

inline std::string to_json_line(const DetectionResult& r) {
    return to_json(r).dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
}

}  // namespace atc
