#pragma once

// Desk-scale synthetic benchmark for the reference backend.
//
// Corpus A ("model style") pairs each task text with code that opens with a
// task-specific line, followed by one of a few shared body blocks. It also
// holds code-then-task documents so the model can answer task-approximation
// prompts. The reference model is trained on corpus A only.
//
// "llm" samples are generated from the model conditioned on the true task.
// "human" samples come from a separately drawn corpus B: plausible code in
// the same vocabulary that opens with a line the model associates with a
// different task. Without the task both kinds look alike to the model; with
// it, the human opening is a surprise.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "atc/bench.hpp"
#include "atc/ngram.hpp"
#include "atc/rng.hpp"

namespace atc::synthetic {

struct TaskSpec {
    const char* task;
    const char* opening;
};

// Task texts end in distinct characters and openings start with distinct
// characters, so a 4-byte context spanning the separator identifies both.
// Openings share no 4-byte context with each other, the body or the task
// texts, which keeps generation from drifting between tasks.
inline const std::vector<TaskSpec>& task_specs() {
    static const std::vector<TaskSpec> specs = {
        {"Sum the numbers in a list", "total = sum(nums)\n"},
        {"Reverse the given string", "rev = txt[::-1]\n"},
        {"Count vowels in a word", "vc = nvow(w)\n"},
        {"Find the largest item", "big = max(seq)\n"},
        {"Check if a number is prime", "ok = isprm(q)\n"},
        {"Compute the factorial of n", "pf = gamma1(m)\n"},
        {"Sort values in ascending order", "arr.sort()\n"},
        {"Remove duplicate entries", "uniq = dedupe(vals)\n"},
        {"Flatten a nested array", "w2 = chain(*grid)\n"},
        {"Average the values in a pool", "mu = fmean(bucket)\n"},
        {"Compute the length of a path", "hops = edges(route)\n"},
        {"Pop the top of a stack", "e = pop_top(stk)\n"},
    };
    return specs;
}

inline const std::vector<std::string>& body_blocks() {
    static const std::vector<std::string> bodies = {
        "print(result)\n",
    };
    return bodies;
}

struct Config {
    std::uint64_t seed = 7;
    int forward_docs_per_task = 1500;
    int reverse_docs_per_task = 300;
    int samples_per_task = 10;
    int order = 5;
    SamplingConfig sampling;  // for llm sample generation; stop/max_tokens are set internally
};

struct Benchmark {
    std::vector<std::string> corpus_a;
    std::vector<DatasetRecord> records;  // one "ref" generation per record
    std::shared_ptr<const ReferenceModel> model;
};

inline std::size_t pick(Lcg64& rng, std::size_t n) {
    return static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)) % n;
}

inline std::string model_code(std::size_t task, Lcg64& rng) {
    return std::string(task_specs()[task].opening) + body_blocks()[pick(rng, body_blocks().size())];
}

/// Plausible code that opens the way the model would for some other task.
inline std::string human_code(std::size_t task, Lcg64& rng) {
    const std::size_t k = task_specs().size();
    const std::size_t other = (task + 1 + pick(rng, k - 1)) % k;
    return std::string(task_specs()[other].opening) + body_blocks()[pick(rng, body_blocks().size())];
}

inline std::vector<std::string> build_corpus_a(const Config& cfg) {
    Lcg64 rng(cfg.seed);
    std::vector<std::string> docs;
    for (std::size_t t = 0; t < task_specs().size(); ++t) {
        const std::string task = task_specs()[t].task;
        for (int i = 0; i < cfg.forward_docs_per_task; ++i) {
            docs.push_back(task + std::string(kTaskSeparator) + model_code(t, rng));
        }
        for (int i = 0; i < cfg.reverse_docs_per_task; ++i) {
            docs.push_back(model_code(t, rng) + "\n\n" + task + "\n");
        }
    }
    return docs;
}

inline Benchmark make_benchmark(const Config& cfg = {}) {
    Benchmark b;
    b.corpus_a = build_corpus_a(cfg);
    b.model = std::make_shared<const ReferenceModel>(ReferenceModel::train(b.corpus_a, cfg.order));
    const ReferenceBackend backend(b.model);

    Lcg64 human_rng(cfg.seed ^ 0xB5AD4ECEDA1CE2A9ULL);  // corpus B stream
    SamplingConfig sampling = cfg.sampling;
    sampling.stop = {"\n\n"};
    sampling.max_tokens = 200;
    std::uint64_t gen_seed = cfg.seed * 1000003ULL;
    for (std::size_t t = 0; t < task_specs().size(); ++t) {
        const std::string task = task_specs()[t].task;
        for (int i = 0; i < cfg.samples_per_task; ++i) {
            DatasetRecord r;
            r.id = "synth-" + std::to_string(t) + "-" + std::to_string(i);
            r.task = task;
            r.language = Language::python;
            r.human_code = human_code(t, human_rng);
            std::string generated;
            while (generated.empty()) {
                sampling.seed = gen_seed++;
                generated = backend.generate(Prompt{"", task + std::string(kTaskSeparator)}, sampling).text;
            }
            if (generated.back() != '\n') generated += '\n';
            r.generations["ref"] = generated;
            b.records.push_back(std::move(r));
        }
    }
    return b;
}

}  // namespace atc::synthetic
