#pragma once

// Benchmark harness: dataset ingestion, experiment orchestration over
// human/LLM solution pairs, metric reports and analysis exports.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "atc/backend.hpp"
#include "atc/error.hpp"
#include "atc/lexer.hpp"
#include "atc/metrics.hpp"
#include "atc/scorer.hpp"
#include "atc/task_approx.hpp"

namespace atc {

struct DatasetRecord {
    std::string id;
    std::string task;
    Language language = Language::python;
    std::string human_code;
    std::map<std::string, std::string> generations;  // generator name -> code
};

/// One JSON object per line: id, task, language, human_code, generations.
/// `human_code` may be a list, in which case the first solution is used.
inline std::vector<DatasetRecord> parse_dataset(std::istream& in) {
    std::vector<DatasetRecord> out;
    std::set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = "line " + std::to_string(line_no);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error("malformed_dataset", where + ": " + e.what());
        }
        if (!j.is_object()) throw Error("malformed_dataset", where + ": not an object");
        DatasetRecord r;
        try {
            const auto& id = j.at("id");
            r.id = id.is_string() ? id.get<std::string>() : id.dump();
            r.task = j.value("task", std::string());
            r.language = parse_language(j.at("language").get<std::string>());
            if (!j.contains("human_code")) throw Error("malformed_dataset", where + ": missing human_code");
            const auto& human = j["human_code"];
            if (human.is_array()) {
                if (human.empty()) throw Error("malformed_dataset", where + ": empty human_code list");
                r.human_code = human.at(0).get<std::string>();
            } else {
                r.human_code = human.get<std::string>();
            }
            if (j.contains("generations")) {
                for (const auto& [name, code] : j["generations"].items()) {
                    r.generations[name] = code.get<std::string>();
                }
            }
        } catch (const nlohmann::json::exception& e) {
            throw Error("malformed_dataset", where + ": " + e.what());
        } catch (const Error& e) {
            if (e.code() == "unsupported_language") throw Error("unsupported_language", where + ": " + e.what());
            throw;
        }
        if (r.human_code.empty()) throw Error("malformed_dataset", where + ": empty human_code");
        for (const auto& [name, code] : r.generations) {
            if (code.empty()) throw Error("malformed_dataset", where + ": empty generation '" + name + "'");
        }
        if (!ids.insert(r.id).second) throw Error("duplicate_id", where + ": duplicate id '" + r.id + "'");
        out.push_back(std::move(r));
    }
    return out;
}

inline std::vector<DatasetRecord> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io_error", "cannot open dataset " + path.string());
    return parse_dataset(in);
}

inline std::string dataset_line(const DatasetRecord& r) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["task"] = r.task;
    j["language"] = std::string(to_string(r.language));
    j["human_code"] = r.human_code;
    nlohmann::ordered_json gens = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.generations) gens[k] = v;
    j["generations"] = gens;
    return j.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
}

/// How code is conditioned. `atc` approximates tasks with the backend;
/// `conditional` uses the dataset's own task text; `unconditional` scores
/// with no prefix.
enum class ExperimentMode { atc, conditional, unconditional };

inline std::string_view to_string(ExperimentMode m) {
    switch (m) {
        case ExperimentMode::atc: return "atc";
        case ExperimentMode::conditional: return "conditional";
        case ExperimentMode::unconditional: return "unconditional";
    }
    return "unknown";
}

inline ExperimentMode parse_mode(std::string_view s) {
    if (s == "atc") return ExperimentMode::atc;
    if (s == "conditional") return ExperimentMode::conditional;
    if (s == "unconditional") return ExperimentMode::unconditional;
    throw Error("invalid_config", "unknown mode '" + std::string(s) + "'");
}

struct ExperimentConfig {
    ExperimentMode mode = ExperimentMode::atc;
    DetectorConfig detector;
    PromptStyle style = builtin_prompt_styles().front();
    bool fence_code = false;
    std::vector<std::string> generators;  // empty: every generator in the dataset
    int jobs = 1;
    /// Discard code shorter than this many characters and truncate longer
    /// code to it. 0 disables.
    std::size_t length_filter_chars = 0;
    std::filesystem::path checkpoint;  // empty: no checkpointing
    std::size_t checkpoint_every = 50;
    bool resume = false;
    int abort_after_transport_failures = 5;
};

struct SampleOutcome {
    std::string sample_id;
    std::string record_id;
    std::string source;  // "human" or generator name
    Label label = Label::human;
    std::size_t code_chars = 0;
    CommentLineRatio comment_ratio;
    DetectionResult result;
};

struct ExperimentOutput {
    std::vector<SampleOutcome> outcomes;  // sorted by sample_id
    std::size_t filtered_short = 0;
    bool partial = false;
};

namespace detail {

struct SampleJob {
    std::string sample_id;
    std::string record_id;
    std::string source;
    Label label;
    Language language;
    std::string task;
    std::string code;
    CommentLineRatio comment_ratio;
};

inline void write_atomically(const std::filesystem::path& path, const std::string& content) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("io_error", "cannot write " + tmp);
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

inline std::map<std::string, DetectionResult> read_checkpoint(const std::filesystem::path& path) {
    std::map<std::string, DetectionResult> out;
    std::ifstream in(path, std::ios::binary);
    if (!in) return out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto r = detection_result_from_json(nlohmann::ordered_json::parse(line));
        if (!r.failed) out.emplace(r.sample_id, std::move(r));
    }
    return out;
}

}  // namespace detail

/// Scores one snippet in the experiment's mode. `task` is used only in the
/// conditional mode.
inline DetectionResult score_code(std::string_view code, Language lang, const std::string& task,
                                  const std::string& sample_id, const ExperimentConfig& cfg, const Backend& backend) {
    switch (cfg.mode) {
        case ExperimentMode::unconditional:
            return unconditional_score(code, lang, cfg.detector, backend, sample_id);
        case ExperimentMode::conditional: {
            std::vector<std::string> tasks(static_cast<std::size_t>(cfg.detector.n_tasks), task);
            return atc_score(code, lang, tasks, cfg.detector, backend, sample_id);
        }
        case ExperimentMode::atc: break;
    }
    TaskApproximation approx;
    try {
        approx = approximate_tasks(code, lang, cfg.detector.n_tasks, cfg.style, cfg.detector.sampling, backend,
                                   cfg.fence_code);
    } catch (const Error& e) {
        DetectionResult failed;
        failed.sample_id = sample_id;
        failed.failed = true;
        failed.failure = e.what();
        return failed;
    }
    if (!approx.complete()) {
        DetectionResult failed;
        failed.sample_id = sample_id;
        failed.failed = true;
        for (const auto& slot : approx.slots) {
            if (!slot.task) {
                failed.failure = slot.failure;
                break;
            }
        }
        failed.tasks = approx.texts();
        failed.generated_tokens = approx.generated_tokens();
        return failed;
    }
    auto res = atc_score(code, lang, approx.texts(), cfg.detector, backend, sample_id);
    res.generated_tokens = approx.generated_tokens();
    res.generation_latency_ms = approx.latency_ms();
    return res;
}

namespace detail {

inline DetectionResult score_sample(const SampleJob& job, const ExperimentConfig& cfg, const Backend& backend) {
    return score_code(job.code, job.language, job.task, job.sample_id, cfg, backend);
}

}  // namespace detail

/// Scores every human solution and every selected generation with the same
/// configuration. Failures are kept in the output (never dropped).
inline ExperimentOutput run_experiment(const std::vector<DatasetRecord>& dataset, const ExperimentConfig& cfg,
                                       const Backend& backend) {
    if (dataset.empty()) throw Error("invalid_argument", "empty dataset");
    cfg.detector.validate();

    ExperimentOutput out;
    std::vector<detail::SampleJob> jobs;
    auto add_job = [&](const DatasetRecord& r, const std::string& source, Label label, const std::string& raw) {
        std::string code = cfg.detector.strip_comments_first ? strip_comments(raw, r.language) : raw;
        if (cfg.length_filter_chars > 0) {
            if (char_count(code) < cfg.length_filter_chars) {
                ++out.filtered_short;
                return;
            }
            code = truncate_chars(code, cfg.length_filter_chars);
        }
        if (code.empty()) {
            ++out.filtered_short;
            return;
        }
        jobs.push_back({r.id + ":" + source, r.id, source, label, r.language, r.task, std::move(code),
                        comment_line_ratio(raw, r.language)});
    };
    for (const auto& r : dataset) {
        add_job(r, "human", Label::human, r.human_code);
        for (const auto& [gen, code] : r.generations) {
            if (!cfg.generators.empty() &&
                std::find(cfg.generators.begin(), cfg.generators.end(), gen) == cfg.generators.end()) {
                continue;
            }
            add_job(r, gen, Label::llm, code);
        }
    }

    std::map<std::string, DetectionResult> done;
    if (cfg.resume && !cfg.checkpoint.empty()) done = detail::read_checkpoint(cfg.checkpoint);

    std::vector<std::optional<DetectionResult>> results(jobs.size());
    std::vector<std::size_t> pending;
    for (std::size_t k = 0; k < jobs.size(); ++k) {
        if (auto it = done.find(jobs[k].sample_id); it != done.end()) {
            results[k] = it->second;
        } else {
            pending.push_back(k);
        }
    }

    std::mutex mu;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};
    int consecutive_transport = 0;
    std::size_t since_checkpoint = 0;

    auto checkpoint = [&]() {  // caller holds mu
        if (cfg.checkpoint.empty()) return;
        std::vector<const DetectionResult*> finished;
        for (const auto& r : results) {
            if (r && !r->failed) finished.push_back(&*r);
        }
        std::sort(finished.begin(), finished.end(),
                  [](const auto* a, const auto* b) { return a->sample_id < b->sample_id; });
        std::string content;
        for (const auto* r : finished) content += to_json_line(*r) + "\n";
        detail::write_atomically(cfg.checkpoint, content);
    };

    auto worker = [&]() {
        while (!abort.load()) {
            const std::size_t slot = next.fetch_add(1);
            if (slot >= pending.size()) break;
            const std::size_t k = pending[slot];
            DetectionResult res = detail::score_sample(jobs[k], cfg, backend);
            std::lock_guard lock(mu);
            if (res.failed && res.failure.rfind("transport_failure", 0) == 0) {
                if (++consecutive_transport >= cfg.abort_after_transport_failures) abort = true;
            } else {
                consecutive_transport = 0;
            }
            results[k] = std::move(res);
            if (++since_checkpoint >= cfg.checkpoint_every) {
                since_checkpoint = 0;
                checkpoint();
            }
        }
    };
    {
        std::vector<std::jthread> threads;
        const int n_threads = std::max(1, std::min<int>(cfg.jobs, static_cast<int>(pending.size())));
        for (int t = 1; t < n_threads; ++t) threads.emplace_back(worker);
        worker();
    }
    {
        std::lock_guard lock(mu);
        checkpoint();
    }

    for (std::size_t k = 0; k < jobs.size(); ++k) {
        if (!results[k]) {
            out.partial = true;
            continue;
        }
        const auto& j = jobs[k];
        out.outcomes.push_back({j.sample_id, j.record_id, j.source, j.label, char_count(j.code), j.comment_ratio,
                                std::move(*results[k])});
    }
    if (abort) out.partial = true;
    std::sort(out.outcomes.begin(), out.outcomes.end(),
              [](const SampleOutcome& a, const SampleOutcome& b) { return a.sample_id < b.sample_id; });
    return out;
}

/// Which number of a DetectionResult feeds a metric.
enum class ScoreSource { atc, entropy, log_p, log_rank, lrr };

inline double oriented(const DetectionResult& r, ScoreSource src, ScoreKind atc_kind) {
    switch (src) {
        case ScoreSource::atc: return orient_score(atc_kind, r.atc_score);
        case ScoreSource::entropy: return orient_score(ScoreKind::entropy, r.baseline.entropy);
        case ScoreSource::log_p: return orient_score(ScoreKind::log_p, r.baseline.log_p);
        case ScoreSource::log_rank: return orient_score(ScoreKind::log_rank, r.baseline.log_rank);
        case ScoreSource::lrr: return orient_score(ScoreKind::lrr, r.baseline.lrr);
    }
    return 0.0;
}

/// Labeled scores of successful samples; `generator` restricts the llm side.
inline std::vector<LabeledScore> labeled_scores(const ExperimentOutput& out, ScoreSource src, ScoreKind atc_kind,
                                                const std::optional<std::string>& generator = std::nullopt) {
    std::vector<LabeledScore> scores;
    for (const auto& o : out.outcomes) {
        if (o.result.failed) continue;
        if (generator && o.label == Label::llm && o.source != *generator) continue;
        scores.push_back({o.sample_id, o.source, o.label, oriented(o.result, src, atc_kind), o.code_chars});
    }
    return scores;
}

struct TokenAccounting {
    double mean_generated_tokens = 0.0;
    double mean_latency_ms = 0.0;
    std::size_t samples = 0;
};

/// Means over successful samples only. Token counts exclude the prompt.
inline TokenAccounting generated_token_accounting(std::span<const DetectionResult> results) {
    TokenAccounting acc;
    double tokens = 0.0;
    double latency = 0.0;
    for (const auto& r : results) {
        if (r.failed) continue;
        tokens += r.generated_tokens;
        latency += r.generation_latency_ms;
        ++acc.samples;
    }
    if (acc.samples > 0) {
        acc.mean_generated_tokens = tokens / static_cast<double>(acc.samples);
        acc.mean_latency_ms = latency / static_cast<double>(acc.samples);
    }
    return acc;
}

struct ReportOptions {
    std::vector<double> fpr_targets = {0.05, 0.10, 0.20};
    std::vector<double> recall_targets = {0.90};
    std::vector<std::size_t> bucket_edges;
};

namespace detail {

inline std::string number_key(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

inline nlohmann::ordered_json maybe_auroc(std::span<const LabeledScore> scores) {
    try {
        return auroc(scores);
    } catch (const Error&) {
        return nullptr;
    }
}

inline std::vector<std::string> generator_names(const ExperimentOutput& out) {
    std::set<std::string> names;
    for (const auto& o : out.outcomes) {
        if (o.label == Label::llm) names.insert(o.source);
    }
    return {names.begin(), names.end()};
}

}  // namespace detail

/// Machine-readable metrics. Contains no timing data, so identical inputs
/// give byte-identical output.
inline nlohmann::ordered_json metrics_report(const ExperimentOutput& out, const ExperimentConfig& cfg,
                                             const ReportOptions& opts) {
    const ScoreKind kind = cfg.detector.score_kind;
    nlohmann::ordered_json j;
    j["mode"] = std::string(to_string(cfg.mode));
    j["score_kind"] = std::string(to_string(kind));
    j["n_tasks"] = cfg.detector.n_tasks;
    j["strip_comments"] = cfg.detector.strip_comments_first;
    j["include_comments_in_score"] = cfg.detector.include_comments_in_score;

    std::size_t failed = 0;
    std::size_t n_llm = 0;
    std::size_t n_human = 0;
    std::vector<DetectionResult> results;
    for (const auto& o : out.outcomes) {
        results.push_back(o.result);
        if (o.result.failed) {
            ++failed;
        } else {
            (o.label == Label::llm ? n_llm : n_human)++;
        }
    }
    j["counts"] = {{"samples", out.outcomes.size()},
                   {"scored_llm", n_llm},
                   {"scored_human", n_human},
                   {"failed", failed},
                   {"filtered_short", out.filtered_short}};
    j["partial"] = out.partial;

    const auto main_scores = labeled_scores(out, ScoreSource::atc, kind);
    j["auroc"] = detail::maybe_auroc(main_scores);

    const auto generators = detail::generator_names(out);
    nlohmann::ordered_json per_gen = nlohmann::ordered_json::object();
    for (const auto& g : generators) per_gen[g] = detail::maybe_auroc(labeled_scores(out, ScoreSource::atc, kind, g));
    j["per_generator_auroc"] = per_gen;

    nlohmann::ordered_json recall = nlohmann::ordered_json::object();
    nlohmann::ordered_json f1 = nlohmann::ordered_json::object();
    nlohmann::ordered_json buckets = nlohmann::ordered_json::array();
    if (n_llm > 0 && n_human > 0) {
        for (double t : opts.fpr_targets) recall[detail::number_key(t)] = recall_at_fpr(main_scores, t).recall;
        for (double t : opts.recall_targets) {
            const auto r = f1_at_recall(main_scores, t);
            f1[detail::number_key(t)] = {{"f1", r.f1}, {"flagged", r.flagged}};
        }
    }
    for (const auto& b : length_bucket_analysis(main_scores, opts.bucket_edges)) {
        buckets.push_back({{"bucket", b.label()},
                           {"n_llm", b.n_llm},
                           {"n_human", b.n_human},
                           {"auroc", b.auroc ? nlohmann::ordered_json(*b.auroc) : nlohmann::ordered_json(nullptr)},
                           {"insufficient", !b.auroc.has_value()}});
    }
    j["recall_at_fpr"] = recall;
    j["f1_at_recall"] = f1;
    j["per_bucket_auroc"] = buckets;

    nlohmann::ordered_json baselines;
    const std::pair<const char*, ScoreSource> sources[] = {{"entropy", ScoreSource::entropy},
                                                           {"logp", ScoreSource::log_p},
                                                           {"logrank", ScoreSource::log_rank},
                                                           {"lrr", ScoreSource::lrr}};
    for (const auto& [name, src] : sources) {
        nlohmann::ordered_json b;
        b["all"] = detail::maybe_auroc(labeled_scores(out, src, kind));
        for (const auto& g : generators) b[g] = detail::maybe_auroc(labeled_scores(out, src, kind, g));
        baselines[name] = b;
    }
    j["baselines_auroc"] = baselines;

    if (cfg.mode == ExperimentMode::atc) {
        j["mean_generated_tokens"] = generated_token_accounting(results).mean_generated_tokens;
    }
    return j;
}

/// Fixed-width AUROC table (x100): one row per method, one column per
/// generator plus the average.
inline std::string summary_table(const nlohmann::ordered_json& report) {
    std::vector<std::string> generators;
    for (const auto& [g, v] : report["per_generator_auroc"].items()) generators.push_back(g);
    std::ostringstream os;
    auto cell = [&](const nlohmann::ordered_json& v) {
        std::ostringstream c;
        if (v.is_number()) {
            c << std::fixed << std::setprecision(2) << v.get<double>() * 100.0;
        } else {
            c << "-";
        }
        return c.str();
    };
    os << std::left << std::setw(22) << "Method";
    for (const auto& g : generators) os << std::right << std::setw(14) << g;
    os << std::right << std::setw(10) << "Avg." << "\n";
    auto row = [&](const std::string& name, const nlohmann::ordered_json& per_gen) {
        os << std::left << std::setw(22) << name;
        double sum = 0.0;
        int n = 0;
        for (const auto& g : generators) {
            const auto v = per_gen.contains(g) ? per_gen[g] : nlohmann::ordered_json(nullptr);
            os << std::right << std::setw(14) << cell(v);
            if (v.is_number()) {
                sum += v.get<double>();
                ++n;
            }
        }
        os << std::right << std::setw(10) << (n ? cell(sum / n) : std::string("-")) << "\n";
    };
    for (const auto& name : {"entropy", "logp", "logrank", "lrr"}) row(name, report["baselines_auroc"][name]);
    row(report["mode"].get<std::string>() + " (" + report["score_kind"].get<std::string>() + ")",
        report["per_generator_auroc"]);
    return os.str();
}

namespace detail {

inline std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::string csv_number(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

}  // namespace detail

/// Writes results.jsonl, failures.jsonl, scores.csv, comment_ratios.csv,
/// metrics.json and, for the conditional/unconditional entropy settings,
/// boxplot.csv into `dir`.
inline void write_experiment_outputs(const std::filesystem::path& dir, const ExperimentOutput& out,
                                     const ExperimentConfig& cfg, const ReportOptions& opts) {
    std::filesystem::create_directories(dir);
    std::string results;
    std::string failures;
    std::string scores = "sample_id,record_id,source,label,detection_score,code_chars\n";
    std::string ratios = "sample_id,source,comment_lines,code_lines,log_ratio\n";
    for (const auto& o : out.outcomes) {
        const std::string line = to_json_line(o.result) + "\n";
        results += line;
        if (o.result.failed) {
            failures += line;
            continue;
        }
        scores += detail::csv_field(o.sample_id) + "," + detail::csv_field(o.record_id) + "," +
                  detail::csv_field(o.source) + "," + (o.label == Label::llm ? "llm" : "human") + "," +
                  detail::csv_number(oriented(o.result, ScoreSource::atc, cfg.detector.score_kind)) + "," +
                  std::to_string(o.code_chars) + "\n";
        ratios += detail::csv_field(o.sample_id) + "," + detail::csv_field(o.source) + "," +
                  std::to_string(o.comment_ratio.comment_lines) + "," + std::to_string(o.comment_ratio.code_lines) +
                  "," + detail::csv_number(o.comment_ratio.log_ratio) + "\n";
    }
    detail::write_atomically(dir / "results.jsonl", results);
    detail::write_atomically(dir / "failures.jsonl", failures);
    detail::write_atomically(dir / "scores.csv", scores);
    detail::write_atomically(dir / "comment_ratios.csv", ratios);
    detail::write_atomically(dir / "metrics.json", metrics_report(out, cfg, opts).dump(2) + "\n");

    if (cfg.mode != ExperimentMode::atc && cfg.detector.score_kind == ScoreKind::entropy) {
        std::string box = "sample_id,source,setting,mean_entropy\n";
        const std::string setting(to_string(cfg.mode));
        for (const auto& o : out.outcomes) {
            if (o.result.failed) continue;
            box += detail::csv_field(o.sample_id) + "," + (o.label == Label::llm ? "llm" : "human") + "," + setting +
                   "," + detail::csv_number(o.result.atc_score) + "\n";
        }
        detail::write_atomically(dir / "boxplot.csv", box);
    }
}

struct HeatmapCandidate {
    std::string token;
    double prob = 0.0;
    bool actual = false;
};

struct HeatmapRow {
    std::size_t position = 0;  // index among code tokens
    ByteSpan span;
    std::string actual_token;
    double actual_prob = 0.0;
    std::vector<HeatmapCandidate> top;
};

/// Display form used in heatmaps: space as "_", newline as "0x0A", other
/// control or stray high bytes as hex.
inline std::string render_token(std::string_view text) {
    std::string out;
    const bool single_high = text.size() == 1 && static_cast<unsigned char>(text[0]) >= 0x80;
    for (unsigned char c : text) {
        if (c == ' ') {
            out += '_';
        } else if (c < 0x20 || c == 0x7F || single_high) {
            char buf[8];
            std::snprintf(buf, sizeof buf, "0x%02X", c);
            out += buf;
        } else {
            out += static_cast<char>(c);
        }
    }
    return out;
}

/// Top-r candidates at every code token, conditioned on `task` (or
/// unconditional when absent).
inline std::vector<HeatmapRow> export_token_heatmap(std::string_view code, Language lang,
                                                    const std::optional<std::string>& task, const Backend& backend,
                                                    std::size_t top_r) {
    if (top_r < 1) throw Error("invalid_argument", "top_r must be >= 1");
    const std::string prefix = task ? conditioning_prefix(*task) : std::string();
    const auto seq = backend.score_continuation(prefix, code);
    const auto comments = find_comment_spans(code, lang);
    std::vector<ByteSpan> spans;
    for (const auto& t : seq.tokens) spans.push_back({t.span.start + prefix.size(), t.span.end + prefix.size()});
    const auto classes = classify_tokens(code, spans, comments.spans, prefix.size());

    std::vector<HeatmapRow> rows;
    for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
        if (classes[i] != TokenClass::code) continue;
        const auto& d = seq.distributions[i];
        HeatmapRow row;
        row.position = rows.size();
        row.span = seq.tokens[i].span;
        row.actual_token = render_token(seq.tokens[i].text);
        row.actual_prob = std::exp(d.actual_log_prob);
        for (std::size_t k = 0; k < std::min(top_r, d.entries.size()); ++k) {
            const auto& e = d.entries[k];
            row.top.push_back({render_token(backend.token_text(e.id)), std::exp(e.log_prob), e.id == d.actual_token_id});
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::string to_json_line(const HeatmapRow& row) {
    nlohmann::ordered_json j;
    j["position"] = row.position;
    j["start"] = row.span.start;
    j["end"] = row.span.end;
    j["actual"] = row.actual_token;
    j["actual_prob"] = row.actual_prob;
    auto top = nlohmann::ordered_json::array();
    for (const auto& c : row.top) top.push_back({{"token", c.token}, {"prob", c.prob}, {"actual", c.actual}});
    j["top"] = top;
    return j.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
}

}  // namespace atc
