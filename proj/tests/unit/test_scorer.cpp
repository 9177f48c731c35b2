#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "atc/ngram.hpp"
#include "atc/rng.hpp"
#include "atc/scorer.hpp"

namespace {

using atc::Distribution;
using atc::TokenLogProb;

// One token per byte; every position gets the law returned by `law`.
class ScriptedBackend final : public atc::Backend {
public:
    using Law = std::function<Distribution(std::size_t position, unsigned char byte)>;
    explicit ScriptedBackend(Law law) : law_(std::move(law)) {}

    std::string id() const override { return "scripted"; }

    atc::ScoredSequence score_continuation(std::string_view prefix, std::string_view cont) const override {
        atc::ScoredSequence seq;
        for (std::size_t i = 0; i < cont.size(); ++i) {
            const auto c = static_cast<unsigned char>(cont[i]);
            seq.tokens.push_back({c, std::string(1, cont[i]), {i, i + 1}});
            seq.distributions.push_back(law_(prefix.size() + i, c));
        }
        return seq;
    }

    atc::Generation generate(const atc::Prompt&, const atc::SamplingConfig&) const override { return {}; }
    std::string token_text(atc::TokenId id) const override { return std::string(1, static_cast<char>(id)); }

private:
    Law law_;
};

Distribution exact_law(std::vector<double> probs, atc::TokenId actual) {
    Distribution d;
    d.exact = true;
    for (std::size_t i = 0; i < probs.size(); ++i) d.entries.push_back({static_cast<atc::TokenId>(i), std::log(probs[i])});
    d.actual_token_id = actual;
    d.actual_log_prob = std::log(probs[static_cast<std::size_t>(actual)]);
    return d;
}

std::shared_ptr<const atc::ReferenceModel> small_model() {
    static const auto model = std::make_shared<const atc::ReferenceModel>(atc::ReferenceModel::train(
        std::vector<std::string>{"Sum a list\n\ntotal = sum(xs)  # add\nprint(total)\n",
                                 "Reverse text\n\nr = s[::-1]\nprint(r)\n", "def f(x):\n    \"\"\"doc\"\"\"\n    return x\n"},
        3));
    return model;
}

const std::vector<std::string> kSnippets = {
    "total = sum(xs)  # add\nprint(total)\n",
    "def f(x):\n    \"\"\"doc\"\"\"\n    return x  # id\n",
    "r = s[::-1]\nprint(r)\n",
    "# header\nx = 1\n",
};

atc::DetectorConfig cfg_for(int n) {
    atc::DetectorConfig c;
    c.n_tasks = n;
    return c;
}

}  // namespace

TEST(Entropy, DyadicExample) {
    EXPECT_NEAR(atc::distribution_entropy(exact_law({0.5, 0.25, 0.125, 0.125}, 0)), 1.2130075659799042, 1e-15);
}

TEST(Entropy, TailCountsAsOneSymbol) {
    Distribution d;
    d.entries = {{0, std::log(0.5)}, {1, std::log(0.25)}};
    d.tail_mass = 0.25;
    EXPECT_NEAR(atc::distribution_entropy(d), 1.0397207708399179, 1e-15);
}

TEST(Entropy, UniformOverVocabulary) {
    const atc::ReferenceBackend backend(std::make_shared<const atc::ReferenceModel>(
        atc::ReferenceModel::train(std::vector<std::string>{"zz"}, 3)));
    const auto d = backend.score_continuation("qq", "a").distributions[0];
    EXPECT_NEAR(atc::distribution_entropy(d), 5.552959584921617, 1e-12);
}

TEST(TokenRank, StrictAndTieOrdering) {
    Distribution d = exact_law({0.4, 0.3, 0.3}, 2);
    EXPECT_EQ(atc::token_rank(d).rank, 3);  // id 1 ties and has the smaller id
    d.actual_token_id = 1;
    d.actual_log_prob = std::log(0.3);
    EXPECT_EQ(atc::token_rank(d).rank, 2);
    EXPECT_FALSE(atc::token_rank(d).is_lower_bound);
}

TEST(TokenRank, AbsentFromTopKIsLowerBound) {
    Distribution d;
    d.entries = {{0, std::log(0.5)}, {1, std::log(0.2)}};
    d.actual_token_id = 9;
    d.actual_log_prob = std::log(0.01);
    const auto r = atc::token_rank(d);
    EXPECT_EQ(r.rank, 3);
    EXPECT_TRUE(r.is_lower_bound);
}

TEST(Baselines, LikelihoodLogRankRatio) {
    std::vector<atc::TokenRecord> records(3);
    for (auto& r : records) {
        r.log_prob = -3.0 * std::log(2.0);
        r.rank = 2;
    }
    const auto b = atc::baselines_from_records(records, false);
    EXPECT_NEAR(b.lrr, 3.0, 1e-12);
    EXPECT_NEAR(b.log_rank, std::log(2.0), 1e-15);
}

TEST(Baselines, AllRankOneGivesSentinel) {
    std::vector<atc::TokenRecord> records(2);
    records[0].log_prob = -0.1;
    records[1].log_prob = -0.2;
    std::vector<std::string> diag;
    const auto b = atc::baselines_from_records(records, false, &diag);
    EXPECT_TRUE(std::isinf(b.lrr) && b.lrr > 0);
    EXPECT_EQ(diag.size(), 1u);
}

TEST(Baselines, ConditioningTokensNeverCount) {
    std::vector<atc::TokenRecord> records(2);
    records[0].cls = atc::TokenClass::conditioning;
    records[0].entropy = 100.0;
    records[1].entropy = 2.0;
    EXPECT_EQ(atc::masked_mean(records, atc::RecordField::entropy, true), 2.0);
}

TEST(Baselines, NothingLeftAfterMasking) {
    std::vector<atc::TokenRecord> records(2);
    for (auto& r : records) r.cls = atc::TokenClass::comment;
    EXPECT_THROW(atc::masked_mean(records, atc::RecordField::entropy, false), atc::Error);
    EXPECT_EQ(atc::masked_mean(records, atc::RecordField::entropy, true), 0.0);
}

TEST(Orientation, HigherMeansGenerated) {
    EXPECT_EQ(atc::orient_score(atc::ScoreKind::entropy, 2.0), -2.0);
    EXPECT_EQ(atc::orient_score(atc::ScoreKind::log_p, -2.0), -2.0);
    EXPECT_EQ(atc::orient_score(atc::ScoreKind::log_rank, 1.5), -1.5);
    EXPECT_EQ(atc::orient_score(atc::ScoreKind::lrr, 3.0), 3.0);
}

TEST(Decision, EntropyThreshold) {
    EXPECT_EQ(atc::decide(atc::ScoreKind::entropy, 0.3, 0.5), atc::Decision::llm_generated);
    EXPECT_EQ(atc::decide(atc::ScoreKind::entropy, 0.7, 0.5), atc::Decision::human_written);
    EXPECT_EQ(atc::decide(atc::ScoreKind::entropy, 0.5, 0.5), atc::Decision::llm_generated);
    EXPECT_EQ(atc::decide(atc::ScoreKind::log_p, -0.3, -0.5), atc::Decision::llm_generated);
    EXPECT_EQ(atc::decide(atc::ScoreKind::log_p, -0.7, -0.5), atc::Decision::human_written);
}

TEST(ScoreKind, Parsing) {
    EXPECT_EQ(atc::parse_score_kind("logp"), atc::ScoreKind::log_p);
    EXPECT_EQ(atc::parse_score_kind("log_rank"), atc::ScoreKind::log_rank);
    EXPECT_THROW(atc::parse_score_kind("perplexity"), atc::Error);
}

TEST(AtcScore, HandComputedWithScriptedLaw) {
    // Positions inside "T\n\n" are conditioning; the law varies by position.
    const ScriptedBackend backend([](std::size_t pos, unsigned char c) {
        return pos % 2 == 0 ? exact_law({0.5, 0.5}, c % 2) : exact_law({0.5, 0.25, 0.125, 0.125}, c % 4);
    });
    const std::vector<std::string> tasks = {"T"};
    atc::DetectorConfig c = cfg_for(1);
    c.epsilon = 0.5;
    const auto r = atc::atc_score("ab", atc::Language::python, tasks, c, backend, "s1");
    ASSERT_FALSE(r.failed) << r.failure;
    // Prefix is 3 bytes: code byte 0 sits at odd position 3, byte 1 at 4.
    EXPECT_NEAR(r.atc_score, (1.2130075659799042 + std::log(2.0)) / 2.0, 1e-15);
    EXPECT_EQ(r.m_code_tokens, 2u);
    ASSERT_TRUE(r.decision);
    EXPECT_EQ(*r.decision, atc::Decision::human_written);
    EXPECT_EQ(r.sample_id, "s1");
}

TEST(AtcScore, TaskCountMustMatch) {
    const atc::ReferenceBackend backend(small_model());
    const std::vector<std::string> tasks = {"a", "b"};
    const auto r = atc::atc_score("x = 1\n", atc::Language::python, tasks, cfg_for(3), backend);
    EXPECT_TRUE(r.failed);
    EXPECT_NE(r.failure.find("invalid_argument"), std::string::npos);
}

TEST(AtcScore, AllCommentCodeFails) {
    const atc::ReferenceBackend backend(small_model());
    const std::vector<std::string> tasks = {"a"};
    const auto r = atc::atc_score("# only a comment", atc::Language::python, tasks, cfg_for(1), backend);
    EXPECT_TRUE(r.failed);
    EXPECT_NE(r.failure.find("no_scoreable_tokens"), std::string::npos);
}

TEST(AtcScore, MisalignedBackendFails) {
    class Broken final : public atc::Backend {
    public:
        std::string id() const override { return "broken"; }
        atc::ScoredSequence score_continuation(std::string_view, std::string_view cont) const override {
            atc::ScoredSequence s;
            s.tokens.push_back({1, std::string(cont.substr(1)), {1, cont.size()}});
            s.distributions.push_back(exact_law({1.0}, 0));
            return s;
        }
        atc::Generation generate(const atc::Prompt&, const atc::SamplingConfig&) const override { return {}; }
        std::string token_text(atc::TokenId) const override { return ""; }
    } backend;
    const std::vector<std::string> tasks = {"a"};
    const auto r = atc::atc_score("xy", atc::Language::python, tasks, cfg_for(1), backend);
    EXPECT_TRUE(r.failed);
    EXPECT_NE(r.failure.find("alignment_failure"), std::string::npos);
}

TEST(AtcScore, AveragesPerTaskScores) {
    const atc::ReferenceBackend backend(small_model());
    const std::vector<std::string> tasks = {"Sum a list", "Reverse text", "Something else", "x"};
    for (const auto& code : kSnippets) {
        const auto all = atc::atc_score(code, atc::Language::python, tasks, cfg_for(4), backend);
        ASSERT_FALSE(all.failed) << all.failure;
        double sum = 0.0;
        for (const auto& t : tasks) {
            const std::vector<std::string> one = {t};
            sum += atc::atc_score(code, atc::Language::python, one, cfg_for(1), backend).atc_score;
        }
        EXPECT_NEAR(all.atc_score, sum / 4.0, 1e-12);
    }
}

TEST(AtcScore, DuplicateTasksCollapse) {
    const atc::ReferenceBackend backend(small_model());
    for (const auto& code : kSnippets) {
        const std::vector<std::string> one = {"Sum a list"};
        const std::vector<std::string> five(5, "Sum a list");
        const double a = atc::atc_score(code, atc::Language::python, one, cfg_for(1), backend).atc_score;
        const double b = atc::atc_score(code, atc::Language::python, five, cfg_for(5), backend).atc_score;
        EXPECT_EQ(a, b);
    }
}

TEST(AtcScore, TrailingCommentLeavesScoreUnchanged) {
    const atc::ReferenceBackend backend(small_model());
    const std::vector<std::string> tasks = {"Sum a list"};
    const std::string code = "total = sum(xs)\n";
    const auto a = atc::atc_score(code, atc::Language::python, tasks, cfg_for(1), backend);
    const auto b = atc::atc_score(code + "# trailing note", atc::Language::python, tasks, cfg_for(1), backend);
    EXPECT_EQ(a.atc_score, b.atc_score);
    EXPECT_EQ(a.m_code_tokens, b.m_code_tokens);
    atc::DetectorConfig with = cfg_for(1);
    with.include_comments_in_score = true;
    const auto c = atc::atc_score(code + "# trailing note", atc::Language::python, tasks, with, backend);
    EXPECT_GT(c.m_code_tokens, b.m_code_tokens);
}

TEST(AtcScore, StripFirstEqualsScoringStrippedText) {
    const atc::ReferenceBackend backend(small_model());
    const std::vector<std::string> tasks = {"Sum a list", "x"};
    for (const auto& code : kSnippets) {
        atc::DetectorConfig strip = cfg_for(2);
        strip.strip_comments_first = true;
        const auto a = atc::atc_score(code, atc::Language::python, tasks, strip, backend);
        const auto b = atc::atc_score(atc::strip_comments(code, atc::Language::python), atc::Language::python, tasks,
                                      cfg_for(2), backend);
        EXPECT_EQ(a.atc_score, b.atc_score);
        EXPECT_EQ(a.m_code_tokens, b.m_code_tokens);
    }
}

TEST(AtcScore, BaselinesAreUnconditional) {
    const atc::ReferenceBackend backend(small_model());
    const std::vector<std::string> tasks = {"Sum a list"};
    const std::string code = kSnippets[0];
    const auto r = atc::atc_score(code, atc::Language::python, tasks, cfg_for(1), backend);
    const auto u = atc::unconditional_score(code, atc::Language::python, cfg_for(1), backend);
    const auto b = atc::baseline_scores(code, atc::Language::python, backend);
    EXPECT_EQ(r.baseline.entropy, b.entropy);
    EXPECT_EQ(r.baseline.log_p, b.log_p);
    EXPECT_EQ(u.atc_score, b.entropy);
    EXPECT_NE(r.atc_score, u.atc_score);
}

TEST(DetectionResultJson, RoundTrip) {
    atc::DetectionResult r;
    r.sample_id = "a\"b";
    r.per_task_scores = {0.25, 1.5};
    r.atc_score = 0.875;
    r.baseline = {1.0, -2.0, 0.5, atc::kLrrSentinel};
    r.m_code_tokens = 12;
    r.decision = atc::Decision::human_written;
    r.approximate = true;
    r.diagnostics = {"note"};
    r.tasks = {"t1", "t2"};
    r.generated_tokens = 7;
    const std::string line = atc::to_json_line(r);
    EXPECT_EQ(line.find('\n'), std::string::npos);
    const auto back = atc::detection_result_from_json(nlohmann::ordered_json::parse(line));
    EXPECT_EQ(back.sample_id, r.sample_id);
    EXPECT_EQ(back.per_task_scores, r.per_task_scores);
    EXPECT_EQ(back.atc_score, r.atc_score);
    EXPECT_TRUE(std::isinf(back.baseline.lrr));
    EXPECT_EQ(back.baseline.log_p, -2.0);
    EXPECT_EQ(back.m_code_tokens, 12u);
    EXPECT_EQ(*back.decision, atc::Decision::human_written);
    EXPECT_TRUE(back.approximate);
    EXPECT_EQ(back.tasks, r.tasks);
    EXPECT_EQ(back.generated_tokens, 7);
    EXPECT_EQ(atc::to_json_line(back), line);
}

TEST(DetectionResultJson, FailedRecordKeepsReason) {
    atc::DetectionResult r;
    r.sample_id = "x";
    r.failed = true;
    r.failure = "backend_incapable: nope";
    const auto j = atc::to_json(r);
    EXPECT_EQ(j["failure"], "backend_incapable: nope");
    EXPECT_TRUE(j["decision"].is_null());
    EXPECT_TRUE(atc::detection_result_from_json(j).failed);
}
