#pragma once

// Threshold-free and operating-point metrics over labeled detection scores.
// Scores are oriented: higher means more likely LLM-generated. A sample is
// flagged as LLM-generated when its score is >= the threshold.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "atc/error.hpp"

namespace atc {

enum class Label { llm, human };

struct LabeledScore {
    std::string sample_id;
    std::string source;  // generator name or "human"
    Label label = Label::human;
    double detection_score = 0.0;
    std::size_t code_chars = 0;
};

namespace detail {

struct SplitScores {
    std::vector<double> llm;
    std::vector<double> human;  // both sorted ascending
};

inline SplitScores split_scores(std::span<const LabeledScore> scores) {
    SplitScores s;
    for (const auto& x : scores) {
        if (std::isnan(x.detection_score)) continue;
        (x.label == Label::llm ? s.llm : s.human).push_back(x.detection_score);
    }
    if (s.llm.empty() || s.human.empty()) throw Error("degenerate_labels", "need at least one llm and one human score");
    std::sort(s.llm.begin(), s.llm.end());
    std::sort(s.human.begin(), s.human.end());
    return s;
}

inline std::size_t count_at_least(const std::vector<double>& sorted, double tau) {
    return static_cast<std::size_t>(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), tau));
}

// Observed scores ascending, then a "reject everything" threshold.
struct Candidate {
    double tau;
    bool reject_all;
};

inline std::vector<Candidate> candidate_thresholds(const SplitScores& s) {
    std::vector<double> all;
    all.reserve(s.llm.size() + s.human.size());
    all.insert(all.end(), s.llm.begin(), s.llm.end());
    all.insert(all.end(), s.human.begin(), s.human.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    std::vector<Candidate> out;
    out.reserve(all.size() + 1);
    for (double v : all) out.push_back({v, false});
    out.push_back({std::numeric_limits<double>::infinity(), true});
    return out;
}

inline std::size_t count_flagged(const std::vector<double>& sorted, const Candidate& c) {
    return c.reject_all ? 0 : count_at_least(sorted, c.tau);
}

}  // namespace detail

/// Mann-Whitney AUROC: fraction of (llm, human) pairs where the llm sample
/// scores higher, ties counting one half. Computed from mid-ranks.
inline double auroc(std::span<const LabeledScore> scores) {
    const auto s = detail::split_scores(scores);
    struct Item {
        double v;
        bool llm;
    };
    std::vector<Item> items;
    items.reserve(s.llm.size() + s.human.size());
    for (double v : s.llm) items.push_back({v, true});
    for (double v : s.human) items.push_back({v, false});
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.v < b.v; });
    double rank_sum = 0.0;  // llm mid-ranks
    std::size_t i = 0;
    while (i < items.size()) {
        std::size_t j = i;
        while (j < items.size() && items[j].v == items[i].v) ++j;
        const double mid_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) {
            if (items[k].llm) rank_sum += mid_rank;
        }
        i = j;
    }
    const double n1 = static_cast<double>(s.llm.size());
    const double n0 = static_cast<double>(s.human.size());
    const double u = rank_sum - n1 * (n1 + 1.0) / 2.0;
    return u / (n1 * n0);
}

struct RecallAtFpr {
    double recall = 0.0;
    double threshold = 0.0;  // +inf when nothing is flagged
    double fpr = 0.0;
};

/// Picks the smallest candidate threshold whose human false-positive rate is
/// <= `fpr_target` and reports the llm recall there.
inline RecallAtFpr recall_at_fpr(std::span<const LabeledScore> scores, double fpr_target) {
    if (!(fpr_target > 0.0 && fpr_target < 1.0)) throw Error("invalid_argument", "fpr_target must be in (0, 1)");
    const auto s = detail::split_scores(scores);
    const double nh = static_cast<double>(s.human.size());
    const double nl = static_cast<double>(s.llm.size());
    for (const auto& c : detail::candidate_thresholds(s)) {
        const double fpr = static_cast<double>(detail::count_flagged(s.human, c)) / nh;
        if (fpr <= fpr_target) {
            return {static_cast<double>(detail::count_flagged(s.llm, c)) / nl, c.tau, fpr};
        }
    }
    return {0.0, std::numeric_limits<double>::infinity(), 0.0};  // unreachable: reject-all has fpr 0
}

struct F1AtRecall {
    double f1 = 0.0;
    double threshold = 0.0;
    double recall = 0.0;
    double precision = 0.0;
    bool flagged = false;  // no threshold reached the recall target
};

/// Best F1 (positive class: llm) over candidate thresholds whose recall is at
/// least `recall_target`. Falls back to the maximal-recall threshold, flagged.
inline F1AtRecall f1_at_recall(std::span<const LabeledScore> scores, double recall_target) {
    const auto s = detail::split_scores(scores);
    const double nl = static_cast<double>(s.llm.size());
    auto evaluate = [&](const detail::Candidate& c) {
        const double tp = static_cast<double>(detail::count_flagged(s.llm, c));
        const double fp = static_cast<double>(detail::count_flagged(s.human, c));
        const double fn = nl - tp;
        F1AtRecall r;
        r.threshold = c.tau;
        r.recall = tp / nl;
        r.precision = tp + fp > 0.0 ? tp / (tp + fp) : 0.0;
        r.f1 = tp > 0.0 ? 2.0 * tp / (2.0 * tp + fp + fn) : 0.0;
        return r;
    };
    const auto candidates = detail::candidate_thresholds(s);
    std::optional<F1AtRecall> best;
    for (const auto& c : candidates) {
        const auto r = evaluate(c);
        if (r.recall >= recall_target && (!best || r.f1 > best->f1)) best = r;
    }
    if (best) return *best;
    auto r = evaluate(candidates.front());
    r.flagged = true;
    return r;
}

/// Number of UTF-8 code points.
inline std::size_t char_count(std::string_view s) {
    std::size_t n = 0;
    for (unsigned char c : s) {
        if ((c & 0xC0) != 0x80) ++n;
    }
    return n;
}

/// First `max_chars` code points of `s`.
inline std::string truncate_chars(std::string_view s, std::size_t max_chars) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) {
            if (n == max_chars) return std::string(s.substr(0, i));
            ++n;
        }
    }
    return std::string(s);
}

struct BucketAuroc {
    std::size_t lo = 0;
    std::optional<std::size_t> hi;  // exclusive; nullopt = unbounded
    std::size_t n_llm = 0;
    std::size_t n_human = 0;
    std::optional<double> auroc;  // nullopt: insufficient (a class is missing)

    std::string label() const {
        return "[" + std::to_string(lo) + "," + (hi ? std::to_string(*hi) : std::string("inf")) + ")";
    }
};

/// Buckets samples by code length in characters using ascending `edges`
/// ([0,e0), [e0,e1), ..., [e_last, inf)) and computes AUROC per bucket.
inline std::vector<BucketAuroc> length_bucket_analysis(std::span<const LabeledScore> scores,
                                                       std::span<const std::size_t> edges) {
    if (!std::is_sorted(edges.begin(), edges.end()) ||
        std::adjacent_find(edges.begin(), edges.end()) != edges.end()) {
        throw Error("invalid_argument", "bucket edges must be strictly ascending");
    }
    std::vector<BucketAuroc> buckets;
    std::size_t lo = 0;
    for (std::size_t e : edges) {
        if (e == 0) continue;
        buckets.push_back({lo, e, 0, 0, std::nullopt});
        lo = e;
    }
    buckets.push_back({lo, std::nullopt, 0, 0, std::nullopt});

    std::vector<std::vector<LabeledScore>> members(buckets.size());
    for (const auto& s : scores) {
        const auto it = std::upper_bound(edges.begin(), edges.end(), s.code_chars);
        std::size_t b = static_cast<std::size_t>(it - edges.begin());
        if (!edges.empty() && edges.front() == 0) --b;
        members[b].push_back(s);
        (s.label == Label::llm ? buckets[b].n_llm : buckets[b].n_human)++;
    }
    for (std::size_t b = 0; b < buckets.size(); ++b) {
        if (buckets[b].n_llm > 0 && buckets[b].n_human > 0) buckets[b].auroc = auroc(members[b]);
    }
    return buckets;
}

inline std::vector<BucketAuroc> length_bucket_analysis(std::span<const LabeledScore> scores,
                                                       std::span<const std::string> codes,
                                                       std::span<const std::size_t> edges) {
    if (codes.size() != scores.size()) throw Error("invalid_argument", "scores and codes differ in length");
    std::vector<LabeledScore> with_len(scores.begin(), scores.end());
    for (std::size_t i = 0; i < codes.size(); ++i) with_len[i].code_chars = char_count(codes[i]);
    return length_bucket_analysis(with_len, edges);
}

}  // namespace atc
