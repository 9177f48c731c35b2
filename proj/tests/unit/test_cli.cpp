#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
    int exit_code = -1;
    std::string out;
};

std::string quote(const std::string& s) {
    std::string q = "'";
    for (char c : s) {
        if (c == '\'') q += "'\\''";
        else q += c;
    }
    return q + "'";
}

Run atc(const std::vector<std::string>& args, const std::string& env = "") {
    std::string cmd = env + " " + quote(ATC_CLI);
    for (const auto& a : args) cmd += " " + quote(a);
    cmd += " 2>/dev/null";
    Run r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    std::size_t n = 0;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
    const int status = ::pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string l;
    while (std::getline(in, l)) out.push_back(l);
    return out;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("atc_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
        code_ = write("snippet.py", "total = sum(nums)  # add them\nprint(result)\n");
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string write(const std::string& name, const std::string& content) {
        std::ofstream(dir_ / name, std::ios::binary) << content;
        return (dir_ / name).string();
    }

    fs::path dir_;
    std::string code_;
};

}  // namespace

TEST_F(Cli, NoSubcommandIsUsageError) {
    EXPECT_EQ(atc({}).exit_code, 1);
    EXPECT_EQ(atc({"frobnicate"}).exit_code, 1);
    EXPECT_EQ(atc({"score", "--mode", "sideways", code_}).exit_code, 1);
}

TEST_F(Cli, ScoreEmitsOneJsonLinePerInput) {
    const auto other = write("other.py", "rev = txt[::-1]\n");
    const auto r = atc({"score", "--n", "2", "--seed", "3", code_, other});
    ASSERT_EQ(r.exit_code, 0);
    const auto ls = lines(r.out);
    ASSERT_EQ(ls.size(), 2u);
    const auto j = nlohmann::json::parse(ls[0]);
    EXPECT_EQ(j["sample_id"], code_);
    EXPECT_EQ(j["failed"], false);
    EXPECT_EQ(j["scores"]["per_task"].size(), 2u);
    EXPECT_EQ(j["tasks"].size(), 2u);
    EXPECT_TRUE(j["decision"].is_null());
}

TEST_F(Cli, ScoreIsReproducible) {
    const std::vector<std::string> args = {"score", "--n", "3", "--seed", "11", "--epsilon", "0.9", code_};
    const auto a = atc(args);
    const auto b = atc(args);
    ASSERT_EQ(a.exit_code, 0);
    EXPECT_EQ(a.out, b.out);
    EXPECT_FALSE(nlohmann::json::parse(a.out)["decision"].is_null());
}

TEST_F(Cli, ConditionalAndUnconditionalModes) {
    EXPECT_EQ(atc({"score", "--mode", "conditional", code_}).exit_code, 1);
    const auto c = atc({"score", "--mode", "conditional", "--task", "Sum the numbers in a list", code_});
    ASSERT_EQ(c.exit_code, 0);
    EXPECT_EQ(nlohmann::json::parse(c.out)["tasks"][0], "Sum the numbers in a list");
    const auto u = atc({"score", "--mode", "unconditional", code_});
    ASSERT_EQ(u.exit_code, 0);
    const auto j = nlohmann::json::parse(u.out);
    EXPECT_EQ(j["scores"]["atc"], j["scores"]["entropy"]);
}

TEST_F(Cli, InputErrorsAreUsageErrors) {
    EXPECT_EQ(atc({"score", write("empty.py", "")}).exit_code, 1);
    EXPECT_EQ(atc({"score", write("header.h", "int x;\n")}).exit_code, 1);
    EXPECT_EQ(atc({"score", "--lang", "cpp", write("header2.h", "int x;\n")}).exit_code, 0);
    EXPECT_EQ(atc({"score", "--lang", "rust", code_}).exit_code, 1);
    EXPECT_EQ(atc({"score", (dir_ / "missing.py").string()}).exit_code, 1);
    EXPECT_EQ(atc({"score", "--style", "verbose", code_}).exit_code, 1);
    EXPECT_EQ(atc({"score", "--top-p", "1.5", code_}).exit_code, 1);
}

TEST_F(Cli, AllCommentInputFailsWithTwo) {
    const auto r = atc({"score", write("c.py", "# nothing but a comment")});
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_EQ(nlohmann::json::parse(r.out)["failed"], true);
}

TEST_F(Cli, UnreachableServerFailsWithTwo) {
    const auto r = atc({"score", "--backend", "http", "--url", "http://127.0.0.1:9/v1", "--max-retries", "0",
                        "--timeout", "0.5", code_});
    EXPECT_EQ(r.exit_code, 2);
}

TEST_F(Cli, StripCommentsMatchesScoringStrippedFile) {
    const auto stripped = atc({"strip", code_});
    ASSERT_EQ(stripped.exit_code, 0);
    EXPECT_EQ(stripped.out, "total = sum(nums)\nprint(result)\n");
    const auto plain = write("plain.py", stripped.out);
    const auto a = atc({"score", "--strip-comments", "--seed", "2", code_});
    const auto b = atc({"score", "--seed", "2", plain});
    ASSERT_EQ(a.exit_code, 0);
    ASSERT_EQ(b.exit_code, 0);
    EXPECT_EQ(nlohmann::json::parse(a.out)["scores"], nlohmann::json::parse(b.out)["scores"]);
}

TEST_F(Cli, StripSpans) {
    const auto r = atc({"strip", "--spans", code_});
    ASSERT_EQ(r.exit_code, 0);
    EXPECT_EQ(r.out, "19 29 line_comment\n");
}

TEST_F(Cli, ApproxProducesNReproducibleTasks) {
    const std::vector<std::string> args = {"approx", "--n", "4", "--seed", "8", code_};
    const auto a = atc(args);
    ASSERT_EQ(a.exit_code, 0);
    EXPECT_EQ(lines(a.out).size(), 4u);
    EXPECT_EQ(atc(args).out, a.out);
    const auto j = atc({"approx", "--n", "2", "--style", "critical", "--json", code_});
    ASSERT_EQ(j.exit_code, 0);
    const auto ls = lines(j.out);
    ASSERT_EQ(ls.size(), 2u);
    const auto first = nlohmann::json::parse(ls[0]);
    EXPECT_EQ(first["style"], "critical");
    EXPECT_EQ(first["seed"], 0);
    EXPECT_EQ(nlohmann::json::parse(ls[1])["seed"], 1);
}

TEST_F(Cli, DryRunPrintsResolvedConfigOnly) {
    const auto r = atc({"score", "--dry-run", "--n", "5", "--style", "short", code_});
    ASSERT_EQ(r.exit_code, 0);
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["command"], "score");
    EXPECT_EQ(j["detector"]["n_tasks"], 5);
    EXPECT_EQ(j["detector"]["style"], "short");
    EXPECT_EQ(j["sampling"]["top_p"], 0.95);
    EXPECT_EQ(j["sampling"]["temperature"], 0.7);
    EXPECT_EQ(atc({"bench", "--dry-run", (dir_ / "nothing.jsonl").string()}).exit_code, 0);
}

TEST_F(Cli, SnapshotReplayIsByteIdentical) {
    const auto first = dir_ / "run1";
    const auto second = dir_ / "run2";
    ASSERT_EQ(atc({"score", "--n", "2", "--seed", "4", code_, "--out", first.string()}).exit_code, 0);
    ASSERT_TRUE(fs::exists(first / "config.json"));
    ASSERT_EQ(atc({"replay", (first / "config.json").string(), "--out", second.string()}).exit_code, 0);
    EXPECT_EQ(slurp(first / "results.jsonl"), slurp(second / "results.jsonl"));
    EXPECT_EQ(slurp(first / "config.json"), slurp(second / "config.json"));
}

TEST_F(Cli, ApiKeyValueNeverWritten) {
    const auto out = dir_ / "keyed";
    atc({"score", "--backend", "http", "--url", "http://127.0.0.1:9/v1", "--max-retries", "0", "--timeout", "0.5",
         "--api-key-env", "ATC_CLI_TEST_KEY", code_, "--out", out.string()},
        "ATC_CLI_TEST_KEY=very-secret-value");
    const auto config = slurp(out / "config.json");
    EXPECT_NE(config.find("ATC_CLI_TEST_KEY"), std::string::npos);
    EXPECT_EQ(config.find("very-secret-value"), std::string::npos);
}

TEST_F(Cli, TrainThenScoreWithModel) {
    const auto corpus = write("corpus.txt", "x = 1\ny = 2\n");
    const auto model = (dir_ / "m.atcm").string();
    ASSERT_EQ(atc({"train", "--order", "3", corpus, "--out", model}).exit_code, 0);
    EXPECT_TRUE(fs::exists(model));
    EXPECT_EQ(atc({"train", "--order", "9", corpus, "--out", model}).exit_code, 1);
    EXPECT_EQ(atc({"score", "--ref-model", model, "--mode", "unconditional", code_}).exit_code, 0);
    EXPECT_EQ(atc({"score", "--ref-model", corpus, code_}).exit_code, 1);
}

TEST_F(Cli, BenchOnFixture) {
    const auto out = dir_ / "bench";
    const auto r = atc({"bench", std::string(ATC_FIXTURES_DIR) + "/tiny.jsonl", "--mode", "conditional", "--jobs", "2",
                        "--buckets", "60", "--out", out.string()});
    ASSERT_EQ(r.exit_code, 0);
    EXPECT_NE(r.out.find("conditional (entropy)"), std::string::npos);
    EXPECT_TRUE(fs::exists(out / "metrics.json"));
    EXPECT_TRUE(fs::exists(out / "boxplot.csv"));
    EXPECT_EQ(atc({"bench", write("bad.jsonl", "{oops\n")}).exit_code, 1);
}

TEST_F(Cli, HeatmapRows) {
    const auto r = atc({"heatmap", "--top-r", "2", "--task", "Sum the numbers in a list", code_});
    ASSERT_EQ(r.exit_code, 0);
    const auto ls = lines(r.out);
    ASSERT_FALSE(ls.empty());
    const auto j = nlohmann::json::parse(ls[0]);
    EXPECT_EQ(j["position"], 0);
    EXPECT_EQ(j["top"].size(), 2u);
}
