#pragma once

// Task-approximation prompts and sampling of approximated task descriptions.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "atc/backend.hpp"
#include "atc/error.hpp"
#include "atc/lexer.hpp"
#include "atc/sampling.hpp"

namespace atc {

inline constexpr std::string_view kLangPlaceholder = "<LANG>";

struct PromptStyle {
    std::string name;
    std::string system_text;       // may contain <LANG>
    std::string instruction_text;  // may contain <LANG>
};

inline const std::vector<PromptStyle>& builtin_prompt_styles() {
    static const std::vector<PromptStyle> styles = {
        {"regular", "You are a <LANG> developer.",
         "Based on the provided code snippet, create a simple one-line task description that, when given to an "
         "LLM, would likely result in the generation of a similar piece of code."},
        {"short", "You are a <LANG> developer.",
         "Based on the provided code snippet, create a very short and simple task that, when given to an LLM, "
         "would likely result in the generation of a similar piece of code."},
        {"long", "You are a <LANG> developer.",
         "Based on the provided code snippet, create a long and detailed task description that, when given to an "
         "LLM, would likely result in the generation of a similar piece of code."},
        {"storytelling",
         "You are writing a programming questions textbook. Each question is based on a short fictional story, and "
         "the reader is required to write a piece of code that solves the question in the story.",
         "Based on the provided code snippet, create the required story description that would likely result in "
         "the generation of a similar piece of code."},
        {"pseudocode", "You are a <LANG> developer experienced in writing structured pseudocode.",
         "Translate the given code snippet into a pseudocode-like task."},
        {"friendly", "You are a <LANG> developer helping a friend understand coding tasks.",
         "Based on the provided code snippet, create a very short and simple task that, when given to an LLM, "
         "would likely result in the generation of a similar piece of code."},
        {"critical", "You are a no-nonsense <LANG> developer who has no patience for inefficiency or poorly written code.",
         "Write a brutally honest task description that, when given to an LLM, would likely result in the "
         "generation of a similar piece of code. The tone should be direct, demanding, and critical. Do not "
         "sugarcoat anything."},
    };
    return styles;
}

/// Style file format: first line is the system template, the remainder the
/// instruction template (one trailing newline is dropped).
inline PromptStyle parse_style_file(const std::string& name, std::string_view content) {
    if (!content.empty() && content.back() == '\n') content.remove_suffix(1);
    const auto nl = content.find('\n');
    if (nl == std::string_view::npos) throw Error("bad_style_file", name + ": expected system and instruction lines");
    return {name, std::string(content.substr(0, nl)), std::string(content.substr(nl + 1))};
}

inline std::string format_style_file(const PromptStyle& s) {
    return s.system_text + "\n" + s.instruction_text + "\n";
}

class StyleRegistry {
public:
    StyleRegistry() {
        for (const auto& s : builtin_prompt_styles()) styles_[s.name] = s;
    }

    /// Adds every `<name>.txt` in `dir`, overriding built-ins of the same name.
    void load_directory(const std::filesystem::path& dir) {
        if (!std::filesystem::is_directory(dir)) throw Error("io_error", "not a directory: " + dir.string());
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(dir)) {
            if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            std::ifstream in(f, std::ios::binary);
            std::stringstream ss;
            ss << in.rdbuf();
            const std::string name = f.stem().string();
            styles_[name] = parse_style_file(name, ss.str());
        }
    }

    const PromptStyle& get(const std::string& name) const {
        const auto it = styles_.find(name);
        if (it == styles_.end()) throw Error("unknown_style", "'" + name + "'");
        return it->second;
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& [k, v] : styles_) out.push_back(k);
        return out;
    }

private:
    std::map<std::string, PromptStyle> styles_;
};

inline std::string substitute_language(std::string_view tmpl, Language lang) {
    std::string out;
    std::size_t pos = 0;
    while (true) {
        const auto hit = tmpl.find(kLangPlaceholder, pos);
        out.append(tmpl.substr(pos, hit - pos));
        if (hit == std::string_view::npos) break;
        out.append(to_string(lang));
        pos = hit + kLangPlaceholder.size();
    }
    return out;
}

/// System text with <LANG> filled in; user text is the instruction, a blank
/// line, then the code verbatim (optionally in a fenced block).
inline Prompt build_prompt(std::string_view code, Language lang, const PromptStyle& style, bool fence_code = false) {
    if (code.empty()) throw Error("invalid_argument", "empty code snippet");
    Prompt p;
    p.system = substitute_language(style.system_text, lang);
    p.user = substitute_language(style.instruction_text, lang) + "\n\n";
    if (fence_code) {
        p.user += "```" + std::string(to_string(lang)) + "\n" + std::string(code);
        if (p.user.back() != '\n') p.user += '\n';
        p.user += "```";
    } else {
        p.user += code;
    }
    return p;
}

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

inline bool starts_with_ci(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(s[i])) != std::tolower(static_cast<unsigned char>(prefix[i])))
            return false;
    }
    return true;
}

inline std::string clean_task_once(std::string_view raw) {
    std::string s = trim(raw);
    if (s.rfind("```", 0) == 0) {
        const auto nl = s.find('\n');
        s = nl == std::string::npos ? s.substr(3) : s.substr(nl + 1);
        s = trim(s);
    }
    if (s.size() >= 3 && s.compare(s.size() - 3, 3, "```") == 0) s = trim(s.substr(0, s.size() - 3));
    for (std::string_view label : {"task description:", "task:"}) {
        if (starts_with_ci(s, label)) {
            s = trim(std::string_view(s).substr(label.size()));
            break;
        }
    }
    return s;
}

}  // namespace detail

/// Trims whitespace, markdown fences and a leading "Task:" label. Applied to
/// a fixed point, so cleaning twice equals cleaning once.
inline std::string clean_task_text(std::string_view raw) {
    std::string current(raw);
    while (true) {
        std::string next = detail::clean_task_once(current);
        if (next == current) return next;
        current = std::move(next);
    }
}

struct ApproximatedTask {
    std::string text;
    std::string style;
    std::uint64_t seed = 0;
    std::string backend_id;
    bool truncated = false;
};

struct TaskSlot {
    std::optional<ApproximatedTask> task;
    std::string failure;
    int generated_tokens = 0;
    double latency_ms = 0.0;
};

struct TaskApproximation {
    std::vector<TaskSlot> slots;

    bool complete() const {
        return std::all_of(slots.begin(), slots.end(), [](const TaskSlot& s) { return s.task.has_value(); });
    }

    std::vector<std::string> texts() const {
        std::vector<std::string> out;
        for (const auto& s : slots) {
            if (s.task) out.push_back(s.task->text);
        }
        return out;
    }

    int generated_tokens() const {
        int n = 0;
        for (const auto& s : slots) n += s.generated_tokens;
        return n;
    }

    double latency_ms() const {
        double t = 0.0;
        for (const auto& s : slots) t += s.latency_ms;
        return t;
    }
};

/// Seed used for the retry after an empty generation in slot `seed`.
inline std::uint64_t retry_seed(std::uint64_t seed) { return seed ^ 0x9E3779B97F4A7C15ULL; }

/// Draws `n` task descriptions; slot i uses seed `sampling.seed + i`. An empty
/// result is retried once with a derived seed before the slot is failed.
inline TaskApproximation approximate_tasks(std::string_view code, Language lang, int n, const PromptStyle& style,
                                           const SamplingConfig& sampling, const Backend& backend,
                                           bool fence_code = false) {
    if (n < 1) throw Error("invalid_argument", "N must be >= 1");
    sampling.validate();
    const Prompt prompt = build_prompt(code, lang, style, fence_code);
    TaskApproximation out;
    for (int i = 0; i < n; ++i) {
        TaskSlot slot;
        SamplingConfig cfg = sampling;
        cfg.seed = sampling.seed + static_cast<std::uint64_t>(i);
        try {
            for (int attempt = 0; attempt < 2; ++attempt) {
                if (attempt == 1) cfg.seed = retry_seed(cfg.seed);
                const Generation g = backend.generate(prompt, cfg);
                slot.generated_tokens += g.generated_tokens;
                slot.latency_ms += g.latency_ms;
                std::string text = clean_task_text(g.text);
                if (!text.empty()) {
                    slot.task = ApproximatedTask{std::move(text), style.name, cfg.seed, backend.id(), g.truncated};
                    break;
                }
            }
            if (!slot.task) slot.failure = "empty_generation: backend returned no task text";
        } catch (const Error& e) {
            slot.failure = e.what();
        }
        out.slots.push_back(std::move(slot));
    }
    return out;
}

}  // namespace atc
