// atc: command-line front end for scoring, task approximation, benchmarks
// and analysis exports. Data goes to stdout or --out; logs go to stderr.
//
// Exit codes: 0 success, 1 usage error, 2 a sample or run failed.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "atc/bench.hpp"
#include "atc/http_backend.hpp"
#include "atc/ngram.hpp"
#include "atc/synthetic.hpp"
#include "atc/task_approx.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Options {
    std::vector<std::string> inputs;
    std::string out;
    std::string lang;
    std::string task;
    std::string log_level = "warn";
    bool dry_run = false;

    std::string backend = "ref";
    std::string ref_model;
    std::string model;
    std::string url = "http://localhost:8000/v1";
    std::string endpoint = "completions";
    std::string api_key_env;
    int top_k = 20;
    double timeout_s = 60.0;
    int max_retries = 3;
    int max_in_flight = 4;

    std::string mode = "atc";
    int n = 1;
    std::string style = "regular";
    std::string styles_dir;
    bool fence = false;
    std::string score = "entropy";
    double epsilon = 0.0;
    bool epsilon_given = false;
    bool strip_comments = false;
    bool include_comments = false;

    double top_p = 0.95;
    double temperature = 0.7;
    int max_tokens = 0;  // 0: backend default
    std::vector<std::string> stop;
    bool stop_given = false;
    std::uint64_t seed = 0;

    int jobs = 1;
    std::vector<double> fpr = {0.05, 0.10, 0.20};
    double recall_target = 0.90;
    std::vector<std::size_t> buckets;
    std::vector<std::string> generators;
    std::size_t length_filter = 0;
    bool resume = false;

    std::size_t top_r = 5;
    bool spans = false;
    bool json_lines = false;
    int order = 5;
};

bool is_usage_code(const std::string& code) {
    static const std::set<std::string> codes = {
        "unsupported_language", "invalid_config", "invalid_argument", "unknown_style", "io_error",
        "malformed_dataset",    "duplicate_id",   "bad_style_file",   "empty_corpus",  "invalid_order",
        "bad_model_file",
    };
    return codes.count(code) > 0;
}

std::string read_input(const std::string& path) {
    if (path.empty() || path == "-") {
        return {std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>()};
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

atc::Language resolve_language(const Options& o, const std::string& path) {
    if (!o.lang.empty()) return atc::parse_language(o.lang);
    if (path.empty() || path == "-") throw UsageError("--lang is required when reading standard input");
    const auto lang = atc::language_from_extension(path);
    if (!lang) throw UsageError("cannot infer the language of '" + path + "'; pass --lang");
    return *lang;
}

std::unique_ptr<atc::Backend> make_backend(const Options& o) {
    if (o.backend == "http") {
        atc::HttpBackendConfig c;
        c.base_url = o.url;
        c.model = o.model;
        c.top_k = o.top_k;
        c.timeout_s = o.timeout_s;
        c.max_retries = o.max_retries;
        c.api_key_env = o.api_key_env;
        c.endpoint = o.endpoint == "chat" ? atc::EndpointKind::chat : atc::EndpointKind::completions;
        c.max_in_flight = std::max(o.max_in_flight, o.jobs);
        c.jitter_seed = o.seed;
        return std::make_unique<atc::HttpBackend>(c);
    }
    std::shared_ptr<const atc::ReferenceModel> model;
    if (!o.ref_model.empty()) {
        model = std::make_shared<const atc::ReferenceModel>(atc::ReferenceModel::load_file(o.ref_model));
    } else {
        spdlog::info("no --ref-model given; training the built-in synthetic reference model");
        const atc::synthetic::Config cfg;
        const auto corpus = atc::synthetic::build_corpus_a(cfg);
        model = std::make_shared<const atc::ReferenceModel>(atc::ReferenceModel::train(corpus, cfg.order));
    }
    return std::make_unique<atc::ReferenceBackend>(model);
}

atc::SamplingConfig sampling_of(const Options& o) {
    const bool ref = o.backend == "ref";
    atc::SamplingConfig s;
    s.top_p = o.top_p;
    s.temperature = o.temperature;
    s.seed = o.seed;
    s.max_tokens = o.max_tokens > 0 ? o.max_tokens : (ref ? 64 : 128);
    // The n-gram model has no chat turn structure; one line is one task.
    if (o.stop_given) {
        s.stop = o.stop;
    } else if (ref) {
        s.stop = {"\n"};
    }
    return s;
}

atc::PromptStyle style_of(const Options& o) {
    atc::StyleRegistry registry;
    if (!o.styles_dir.empty()) registry.load_directory(o.styles_dir);
    return registry.get(o.style);
}

atc::ExperimentConfig experiment_of(const Options& o) {
    atc::ExperimentConfig cfg;
    cfg.mode = atc::parse_mode(o.mode);
    cfg.detector.n_tasks = o.n;
    cfg.detector.prompt_style = o.style;
    cfg.detector.sampling = sampling_of(o);
    cfg.detector.score_kind = atc::parse_score_kind(o.score);
    cfg.detector.include_comments_in_score = o.include_comments;
    cfg.detector.strip_comments_first = o.strip_comments;
    if (o.epsilon_given) cfg.detector.epsilon = o.epsilon;
    cfg.detector.validate();
    cfg.style = style_of(o);
    cfg.fence_code = o.fence;
    cfg.generators = o.generators;
    cfg.jobs = std::max(1, o.jobs);
    cfg.length_filter_chars = o.length_filter;
    cfg.resume = o.resume;
    return cfg;
}

json resolved_config(const Options& o, const std::string& command) {
    const auto s = sampling_of(o);
    json j;
    j["command"] = command;
    j["inputs"] = o.inputs;
    json backend;
    backend["kind"] = o.backend;
    if (o.backend == "ref") {
        backend["ref_model"] = o.ref_model.empty() ? json(nullptr) : json(o.ref_model);
    } else {
        backend["model"] = o.model;
        backend["url"] = o.url;
        backend["endpoint"] = o.endpoint;
        backend["top_k"] = o.top_k;
        backend["timeout_s"] = o.timeout_s;
        backend["max_retries"] = o.max_retries;
        backend["api_key_env"] = o.api_key_env;  // the variable name, never its value
    }
    j["backend"] = backend;
    j["detector"] = {{"mode", o.mode},
                     {"n_tasks", o.n},
                     {"style", o.style},
                     {"score_kind", o.score},
                     {"epsilon", o.epsilon_given ? json(o.epsilon) : json(nullptr)},
                     {"strip_comments", o.strip_comments},
                     {"include_comments_in_score", o.include_comments},
                     {"fence_code", o.fence}};
    j["sampling"] = {{"top_p", s.top_p},
                     {"temperature", s.temperature},
                     {"max_tokens", s.max_tokens},
                     {"seed", s.seed},
                     {"stop", s.stop}};
    j["jobs"] = o.jobs;
    j["log_level"] = o.log_level;
    if (command == "bench") {
        j["report"] = {{"fpr", o.fpr},
                       {"recall_target", o.recall_target},
                       {"buckets", o.buckets},
                       {"generators", o.generators},
                       {"length_filter", o.length_filter}};
    }
    return j;
}

// Command-line arguments with the output location and run-control flags
// removed, so a snapshot replays into any directory.
std::vector<std::string> replayable_args(const std::vector<std::string>& args) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const auto& a = args[i];
        if (a == "--out") {
            ++i;
            continue;
        }
        if (a.rfind("--out=", 0) == 0 || a == "--dry-run" || a == "--resume") continue;
        out.push_back(a);
    }
    return out;
}

void write_snapshot(const fs::path& dir, const Options& o, const std::string& command,
                    const std::vector<std::string>& args) {
    fs::create_directories(dir);
    json j;
    j["argv"] = replayable_args(args);
    j["resolved"] = resolved_config(o, command);
    std::ofstream(dir / "config.json", std::ios::binary | std::ios::trunc) << j.dump(2) << "\n";
}

int cmd_score(Options& o, const std::vector<std::string>& args) {
    auto cfg = experiment_of(o);
    if (cfg.mode == atc::ExperimentMode::conditional && o.task.empty()) {
        throw UsageError("--mode conditional needs --task");
    }
    if (o.inputs.empty()) o.inputs.push_back("-");
    std::vector<std::pair<std::string, atc::Language>> inputs;
    for (const auto& p : o.inputs) inputs.emplace_back(p, resolve_language(o, p));
    if (o.dry_run) {
        std::cout << resolved_config(o, "score").dump(2) << "\n";
        return 0;
    }
    const auto backend = make_backend(o);
    std::ofstream results;
    if (!o.out.empty()) {
        write_snapshot(o.out, o, "score", args);
        results.open(fs::path(o.out) / "results.jsonl", std::ios::binary | std::ios::trunc);
    }
    bool any_failed = false;
    for (const auto& [path, lang] : inputs) {
        const std::string code = read_input(path);
        if (code.empty()) throw UsageError("empty input: " + (path == "-" ? std::string("stdin") : path));
        const std::string id = path == "-" ? "stdin" : path;
        const auto res = atc::score_code(code, lang, o.task, id, cfg, *backend);
        if (res.failed) {
            any_failed = true;
            spdlog::error("{}: {}", id, res.failure);
        }
        const std::string line = atc::to_json_line(res);
        std::cout << line << std::endl;
        if (results.is_open()) results << line << std::endl;
    }
    return any_failed ? 2 : 0;
}

int cmd_approx(Options& o, const std::vector<std::string>& args) {
    const std::string path = o.inputs.empty() ? "-" : o.inputs.front();
    const auto lang = resolve_language(o, path);
    const auto style = style_of(o);
    const auto sampling = sampling_of(o);
    sampling.validate();
    if (o.n < 1) throw UsageError("--n must be >= 1");
    if (o.dry_run) {
        std::cout << resolved_config(o, "approx").dump(2) << "\n";
        return 0;
    }
    const std::string code = read_input(path);
    if (code.empty()) throw UsageError("empty input: " + path);
    const auto backend = make_backend(o);
    if (!o.out.empty()) write_snapshot(o.out, o, "approx", args);
    const auto approx = atc::approximate_tasks(code, lang, o.n, style, sampling, *backend, o.fence);
    std::ofstream tasks_file;
    if (!o.out.empty()) tasks_file.open(fs::path(o.out) / "tasks.jsonl", std::ios::binary | std::ios::trunc);
    bool failed = false;
    for (std::size_t i = 0; i < approx.slots.size(); ++i) {
        const auto& slot = approx.slots[i];
        if (!slot.task) {
            failed = true;
            spdlog::error("slot {}: {}", i, slot.failure);
            continue;
        }
        json j = {{"slot", i},
                  {"text", slot.task->text},
                  {"style", slot.task->style},
                  {"seed", slot.task->seed},
                  {"backend", slot.task->backend_id},
                  {"truncated", slot.task->truncated},
                  {"generated_tokens", slot.generated_tokens}};
        const std::string line = j.dump(-1, ' ', false, json::error_handler_t::replace);
        if (o.json_lines) {
            std::cout << line << std::endl;
        } else {
            std::string text = slot.task->text;
            std::replace(text.begin(), text.end(), '\n', ' ');
            std::cout << text << std::endl;
        }
        if (tasks_file.is_open()) tasks_file << line << "\n";
    }
    spdlog::info("generated {} tokens for {} task(s)", approx.generated_tokens(), o.n);
    return failed ? 2 : 0;
}

int cmd_bench(Options& o, const std::vector<std::string>& args) {
    if (o.inputs.size() != 1) throw UsageError("bench takes exactly one dataset path");
    auto cfg = experiment_of(o);
    atc::ReportOptions report;
    report.fpr_targets = o.fpr;
    report.recall_targets = {o.recall_target};
    report.bucket_edges = o.buckets;
    for (double t : o.fpr) {
        if (!(t > 0.0 && t < 1.0)) throw UsageError("--fpr targets must be in (0, 1)");
    }
    if (!(o.recall_target > 0.0 && o.recall_target <= 1.0)) throw UsageError("--recall-target must be in (0, 1]");
    if (!std::is_sorted(o.buckets.begin(), o.buckets.end()) ||
        std::adjacent_find(o.buckets.begin(), o.buckets.end()) != o.buckets.end()) {
        throw UsageError("--buckets must be strictly ascending");
    }
    if (o.dry_run) {
        std::cout << resolved_config(o, "bench").dump(2) << "\n";
        return 0;
    }
    const auto dataset = atc::load_dataset(o.inputs.front());
    spdlog::info("loaded {} records from {}", dataset.size(), o.inputs.front());
    const auto backend = make_backend(o);
    if (!o.out.empty()) {
        write_snapshot(o.out, o, "bench", args);
        cfg.checkpoint = fs::path(o.out) / "checkpoint.jsonl";
    }
    const auto out = atc::run_experiment(dataset, cfg, *backend);
    std::size_t failed = 0;
    for (const auto& s : out.outcomes) {
        if (s.result.failed) {
            ++failed;
            spdlog::warn("{}: {}", s.sample_id, s.result.failure);
        }
    }
    if (!o.out.empty()) {
        atc::write_experiment_outputs(o.out, out, cfg, report);
        fs::remove(cfg.checkpoint);
    }
    const auto metrics = atc::metrics_report(out, cfg, report);
    std::cout << atc::summary_table(metrics);
    if (metrics.contains("mean_generated_tokens")) {
        std::cout << "mean generated tokens per sample: " << metrics["mean_generated_tokens"].get<double>() << "\n";
    }
    if (failed > 0) spdlog::warn("{} sample(s) failed; see failures.jsonl", failed);
    if (out.partial) {
        spdlog::error("run aborted early; partial results only");
        return 2;
    }
    return 0;
}

int cmd_heatmap(Options& o, const std::vector<std::string>& args) {
    const std::string path = o.inputs.empty() ? "-" : o.inputs.front();
    const auto lang = resolve_language(o, path);
    if (o.top_r < 1) throw UsageError("--top-r must be >= 1");
    if (o.dry_run) {
        std::cout << resolved_config(o, "heatmap").dump(2) << "\n";
        return 0;
    }
    const std::string code = read_input(path);
    if (code.empty()) throw UsageError("empty input: " + path);
    const auto backend = make_backend(o);
    const std::optional<std::string> task = o.task.empty() ? std::nullopt : std::optional<std::string>(o.task);
    const auto rows = atc::export_token_heatmap(code, lang, task, *backend, o.top_r);
    std::ofstream file;
    if (!o.out.empty()) {
        write_snapshot(o.out, o, "heatmap", args);
        file.open(fs::path(o.out) / "heatmap.jsonl", std::ios::binary | std::ios::trunc);
    }
    for (const auto& row : rows) {
        const std::string line = atc::to_json_line(row);
        std::cout << line << "\n";
        if (file.is_open()) file << line << "\n";
    }
    return 0;
}

int cmd_strip(Options& o) {
    const std::string path = o.inputs.empty() ? "-" : o.inputs.front();
    const auto lang = resolve_language(o, path);
    if (o.dry_run) return 0;
    const std::string code = read_input(path);
    if (o.spans) {
        const auto scan = atc::find_comment_spans(code, lang);
        for (const auto& s : scan.spans) std::cout << s.start << " " << s.end << " " << atc::to_string(s.kind) << "\n";
        for (const auto& w : scan.warnings) spdlog::warn("{}", w);
    } else {
        std::cout << atc::strip_comments(code, lang);
    }
    return 0;
}

int cmd_train(Options& o) {
    if (o.inputs.empty()) throw UsageError("train needs at least one corpus file");
    if (o.out.empty()) throw UsageError("train needs --out MODEL_FILE");
    if (o.order < 1 || o.order > atc::kMaxOrder) throw UsageError("--order must be in [1, 5]");
    if (o.dry_run) return 0;
    std::vector<std::string> docs;
    for (const auto& p : o.inputs) {
        if (fs::path(p).extension() == ".jsonl") {
            // Datasets contribute "task, blank line, generated code" documents.
            for (const auto& r : atc::load_dataset(p)) {
                for (const auto& [gen, code] : r.generations) docs.push_back(atc::conditioning_prefix(r.task) + code);
            }
        } else {
            docs.push_back(read_input(p));
        }
    }
    const auto model = atc::ReferenceModel::train(docs, o.order);
    model.save_file(o.out);
    spdlog::info("trained order-{} model on {} document(s) -> {}", o.order, docs.size(), o.out);
    return 0;
}

int cmd_synth(Options& o) {
    if (o.out.empty()) throw UsageError("synth needs --out DIR");
    if (o.dry_run) return 0;
    atc::synthetic::Config cfg;
    cfg.seed = o.seed == 0 ? cfg.seed : o.seed;
    const auto bench = atc::synthetic::make_benchmark(cfg);
    fs::create_directories(o.out);
    std::ofstream data(fs::path(o.out) / "dataset.jsonl", std::ios::binary | std::ios::trunc);
    for (const auto& r : bench.records) data << atc::dataset_line(r) << "\n";
    bench.model->save_file((fs::path(o.out) / "reference.atcm").string());
    spdlog::info("wrote {} records and the reference model to {}", bench.records.size(), o.out);
    return 0;
}

void add_backend_options(CLI::App* app, Options& o) {
    app->add_option("--backend", o.backend, "Language model backend")->check(CLI::IsMember({"ref", "http"}));
    app->add_option("--ref-model", o.ref_model, "Reference model file (default: built-in synthetic model)");
    app->add_option("--model", o.model, "Model name sent to the HTTP endpoint");
    app->add_option("--url", o.url, "Base URL of the OpenAI-style API");
    app->add_option("--endpoint", o.endpoint, "Generation endpoint")->check(CLI::IsMember({"completions", "chat"}));
    app->add_option("--top-k", o.top_k, "Alternatives requested per position")->check(CLI::PositiveNumber);
    app->add_option("--timeout", o.timeout_s, "Request timeout in seconds");
    app->add_option("--max-retries", o.max_retries, "Retries per request");
    app->add_option("--max-in-flight", o.max_in_flight, "Concurrent HTTP requests");
    app->add_option("--api-key-env", o.api_key_env, "Environment variable holding the API key");
}

void add_sampling_options(CLI::App* app, Options& o) {
    app->add_option("--style", o.style, "Task-approximation prompt style");
    app->add_option("--styles-dir", o.styles_dir, "Directory of <style>.txt templates");
    app->add_flag("--fence", o.fence, "Wrap code in a fenced block inside the prompt");
    app->add_option("--n", o.n, "Number of approximated tasks")->check(CLI::PositiveNumber);
    app->add_option("--top-p", o.top_p, "Nucleus threshold");
    app->add_option("--temperature", o.temperature, "Sampling temperature");
    app->add_option("--max-tokens", o.max_tokens, "Generation budget per task");
    app->add_option("--stop", o.stop, "Stop string (repeatable)")->each([&o](const std::string&) { o.stop_given = true; });
    app->add_option("--seed", o.seed, "Base seed");
}

void add_detector_options(CLI::App* app, Options& o) {
    app->add_option("--mode", o.mode, "Conditioning mode")->check(CLI::IsMember({"atc", "conditional", "unconditional"}));
    app->add_option("--score", o.score, "Score kind")->check(CLI::IsMember({"entropy", "logp", "logrank", "lrr"}));
    app->add_option("--epsilon", o.epsilon, "Decision threshold")->each([&o](const std::string&) {
        o.epsilon_given = true;
    });
    app->add_flag("--strip-comments", o.strip_comments, "Remove comments before scoring");
    app->add_flag("--include-comments-in-score", o.include_comments, "Average over comment tokens too");
    app->add_option("--jobs", o.jobs, "Parallel samples")->check(CLI::PositiveNumber);
}

void add_common(CLI::App* app, Options& o) {
    app->add_option("--log-level", o.log_level, "Log level")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));
    app->add_flag("--dry-run", o.dry_run, "Validate options and print the resolved configuration");
    app->add_option("--lang", o.lang, "Language (python, cpp, java); inferred from the extension otherwise");
}

int run(const std::vector<std::string>& args);

int cmd_replay(const std::string& snapshot, const std::string& out, bool dry_run) {
    std::ifstream in(snapshot, std::ios::binary);
    if (!in) throw UsageError("cannot read " + snapshot);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw UsageError(std::string("bad snapshot: ") + e.what());
    }
    auto args = j.at("argv").get<std::vector<std::string>>();
    if (!out.empty()) {
        args.push_back("--out");
        args.push_back(out);
    }
    if (dry_run) args.push_back("--dry-run");
    return run(args);
}

int run(const std::vector<std::string>& args) {
    Options o;
    CLI::App app{"Detect LLM-generated code by task-conditioned token entropy."};
    app.require_subcommand(1);

    auto* score = app.add_subcommand("score", "Score code files (or stdin) and emit one JSON result per input");
    score->add_option("inputs", o.inputs, "Code files; '-' or none reads stdin");
    score->add_option("--task", o.task, "Known task text for --mode conditional");
    score->add_option("--out", o.out, "Also write results.jsonl and config.json here");

    auto* approx = app.add_subcommand("approx", "Approximate the task behind a code file");
    approx->add_option("input", o.inputs, "Code file; '-' or none reads stdin")->expected(0, 1);
    approx->add_option("--out", o.out, "Also write tasks.jsonl and config.json here");
    approx->add_flag("--json", o.json_lines, "Emit one JSON object per task");

    auto* bench = app.add_subcommand("bench", "Run a detection benchmark over a JSONL dataset");
    bench->add_option("dataset", o.inputs, "Dataset file")->required()->expected(1);
    bench->add_option("--out", o.out, "Output directory");
    bench->add_option("--fpr", o.fpr, "False-positive-rate targets")->delimiter(',');
    bench->add_option("--recall-target", o.recall_target, "Recall target for F1");
    bench->add_option("--buckets", o.buckets, "Length bucket edges in characters")->delimiter(',');
    bench->add_option("--generators", o.generators, "Generators to include")->delimiter(',');
    bench->add_option("--length-filter", o.length_filter, "Drop shorter code and truncate longer code");
    bench->add_flag("--resume", o.resume, "Resume from the checkpoint in --out");

    auto* heatmap = app.add_subcommand("heatmap", "Export top-r next-token candidates for every code token");
    heatmap->add_option("input", o.inputs, "Code file")->expected(0, 1);
    heatmap->add_option("--task", o.task, "Conditioning task (unconditional when omitted)");
    heatmap->add_option("--top-r", o.top_r, "Candidates per position");
    heatmap->add_option("--out", o.out, "Also write heatmap.jsonl and config.json here");

    auto* strip = app.add_subcommand("strip", "Remove comments, or list comment spans");
    strip->add_option("input", o.inputs, "Code file")->expected(0, 1);
    strip->add_flag("--spans", o.spans, "Print 'start end kind' per comment span instead");

    auto* train = app.add_subcommand("train", "Train a reference n-gram model");
    train->add_option("corpus", o.inputs, "Text files, or .jsonl datasets")->required();
    train->add_option("--order", o.order, "n-gram order (1-5)");
    train->add_option("--out", o.out, "Model file to write")->required();

    auto* synth = app.add_subcommand("synth", "Write the synthetic benchmark and its reference model");
    synth->add_option("--out", o.out, "Output directory")->required();
    synth->add_option("--seed", o.seed, "Benchmark seed (0: default)");

    std::string snapshot;
    std::string replay_out;
    auto* replay = app.add_subcommand("replay", "Re-run a command from a config.json snapshot");
    replay->add_option("snapshot", snapshot, "config.json written by an earlier run")->required();
    replay->add_option("--out", replay_out, "Output directory for the re-run");

    for (auto* sub : {score, approx, bench, heatmap, strip, train, synth, replay}) add_common(sub, o);
    for (auto* sub : {score, approx, bench, heatmap}) add_backend_options(sub, o);
    for (auto* sub : {score, approx, bench}) add_sampling_options(sub, o);
    for (auto* sub : {score, bench}) add_detector_options(sub, o);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }
    spdlog::set_level(spdlog::level::from_str(o.log_level));

    try {
        if (*score) return cmd_score(o, args);
        if (*approx) return cmd_approx(o, args);
        if (*bench) return cmd_bench(o, args);
        if (*heatmap) return cmd_heatmap(o, args);
        if (*strip) return cmd_strip(o);
        if (*train) return cmd_train(o);
        if (*synth) return cmd_synth(o);
        if (*replay) return cmd_replay(snapshot, replay_out, o.dry_run);
    } catch (const UsageError& e) {
        spdlog::error("{}", e.what());
        return 1;
    } catch (const atc::Error& e) {
        spdlog::error("{}", e.what());
        return is_usage_code(e.code()) ? 1 : 2;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 2;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("atc"));
    spdlog::set_pattern("atc: %l: %v");
    return run(std::vector<std::string>(argv + 1, argv + argc));
}
