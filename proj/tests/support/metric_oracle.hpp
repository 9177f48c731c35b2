#pragma once

// Brute-force metric oracles over (score, is_llm) pairs. Deliberately naive:
// pair counting and direct threshold enumeration, no ranks or sorting tricks.

#include <cmath>
#include <limits>
#include <set>
#include <vector>

namespace oracle {

struct Scored {
    double score;
    bool llm;
};

inline double auroc(const std::vector<Scored>& xs) {
    double wins = 0.0;
    double pairs = 0.0;
    for (const auto& a : xs) {
        if (!a.llm) continue;
        for (const auto& b : xs) {
            if (b.llm) continue;
            pairs += 1.0;
            if (a.score > b.score) wins += 1.0;
            else if (a.score == b.score) wins += 0.5;
        }
    }
    return wins / pairs;
}

struct Counts {
    double tp = 0, fp = 0, nl = 0, nh = 0;
};

inline Counts count(const std::vector<Scored>& xs, double tau) {
    Counts c;
    for (const auto& x : xs) {
        (x.llm ? c.nl : c.nh) += 1;
        if (x.score >= tau) (x.llm ? c.tp : c.fp) += 1;
    }
    return c;
}

inline std::vector<double> thresholds(const std::vector<Scored>& xs) {
    std::set<double> s;
    for (const auto& x : xs) s.insert(x.score);
    std::vector<double> out(s.begin(), s.end());
    out.push_back(std::numeric_limits<double>::infinity());
    return out;
}

// Recall at the smallest threshold whose false-positive rate fits.
inline double recall_at_fpr(const std::vector<Scored>& xs, double target) {
    for (double tau : thresholds(xs)) {
        const auto c = count(xs, tau);
        if (c.fp / c.nh <= target) return c.tp / c.nl;
    }
    return 0.0;
}

// Best F1 among thresholds reaching the recall target; first one wins ties.
inline double f1_at_recall(const std::vector<Scored>& xs, double target) {
    double best = -1.0;
    for (double tau : thresholds(xs)) {
        const auto c = count(xs, tau);
        if (c.tp / c.nl < target) continue;
        const double f1 = c.tp > 0 ? 2.0 * c.tp / (2.0 * c.tp + c.fp + (c.nl - c.tp)) : 0.0;
        if (f1 > best) best = f1;
    }
    return best;
}

}  // namespace oracle
