#pragma once

// Comment and docstring lexing for Python, C++ and Java.
//
// The lexers are small hand-written state machines. They know enough about
// string, character and raw-string literals to never report delimiters that
// appear inside literals, and nothing more: no syntax validation is done.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "atc/error.hpp"

namespace atc {

enum class Language { python, cpp, java };

inline std::string_view to_string(Language lang) {
    switch (lang) {
        case Language::python: return "python";
        case Language::cpp: return "cpp";
        case Language::java: return "java";
    }
    return "unknown";
}

inline Language parse_language(std::string_view tag) {
    std::string lower(tag);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "python" || lower == "py") return Language::python;
    if (lower == "cpp" || lower == "c++") return Language::cpp;
    if (lower == "java") return Language::java;
    throw Error("unsupported_language", "'" + std::string(tag) + "'");
}

/// Maps .py/.cpp/.cc/.cxx/.hpp/.java to a language. Anything else (including
/// .h, which could be C or C++) returns nullopt.
inline std::optional<Language> language_from_extension(const std::filesystem::path& path) {
    const std::string ext = path.extension().string();
    if (ext == ".py") return Language::python;
    if (ext == ".cpp" || ext == ".cc" || ext == ".cxx" || ext == ".hpp") return Language::cpp;
    if (ext == ".java") return Language::java;
    return std::nullopt;
}

enum class SpanKind { line_comment, block_comment, docstring };

inline std::string_view to_string(SpanKind kind) {
    switch (kind) {
        case SpanKind::line_comment: return "line_comment";
        case SpanKind::block_comment: return "block_comment";
        case SpanKind::docstring: return "docstring";
    }
    return "unknown";
}

inline SpanKind parse_span_kind(std::string_view s) {
    if (s == "line_comment") return SpanKind::line_comment;
    if (s == "block_comment") return SpanKind::block_comment;
    if (s == "docstring") return SpanKind::docstring;
    throw Error("invalid_span_kind", std::string(s));
}

/// Half-open byte range [start, end) of a comment, delimiters included.
struct SourceSpan {
    std::size_t start = 0;
    std::size_t end = 0;
    SpanKind kind = SpanKind::line_comment;

    friend bool operator==(const SourceSpan&, const SourceSpan&) = default;
};

struct CommentScan {
    std::vector<SourceSpan> spans;   // sorted, disjoint
    std::vector<std::string> warnings;
};

namespace detail {

inline bool is_word_byte(unsigned char c) {
    return std::isalnum(c) || c == '_' || c >= 0x80;
}

inline bool is_hspace(char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v';
}

inline bool is_space(char c) { return is_hspace(c) || c == '\n'; }

inline std::string lowercase(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// Scans a quoted literal whose opening quote is at `open`. Returns the offset
// one past the closing quote, or the offset of the terminating newline / end
// of input when the literal is unterminated.
inline std::size_t scan_quoted(std::string_view s, std::size_t open, char quote, bool& terminated) {
    std::size_t i = open + 1;
    while (i < s.size()) {
        const char c = s[i];
        if (c == '\\') {
            i += 2;
            continue;
        }
        if (c == quote) {
            terminated = true;
            return i + 1;
        }
        if (c == '\n') break;
        ++i;
    }
    terminated = false;
    return std::min(i, s.size());
}

inline std::string offset_note(std::string_view what, std::size_t at) {
    return std::string(what) + " at offset " + std::to_string(at);
}

class PythonScanner {
public:
    explicit PythonScanner(std::string_view src) : s_(src) {}

    CommentScan run() {
        const std::size_t n = s_.size();
        while (i_ < n) {
            const char c = s_[i_];
            if (c == '\n') {
                if (depth_ == 0) start_logical_line();
                ++i_;
            } else if (is_hspace(c)) {
                ++i_;
            } else if (c == '\\' && continuation_at(i_)) {
                i_ = skip_continuation(i_);
            } else if (c == '#') {
                const std::size_t start = i_;
                while (i_ < n && s_[i_] != '\n') ++i_;
                std::size_t end = i_;
                if (end > start && s_[end - 1] == '\r') --end;
                out_.spans.push_back({start, end, SpanKind::line_comment});
            } else if (c == '"' || c == '\'') {
                string_literal(i_, 0);
            } else if (is_word_byte(static_cast<unsigned char>(c))) {
                word();
            } else {
                punctuation(c);
                ++i_;
            }
        }
        return std::move(out_);
    }

private:
    void start_logical_line() {
        at_logical_start_ = true;
        first_word_.clear();
        header_colon_seen_ = false;
    }

    bool continuation_at(std::size_t i) const {
        if (i + 1 < s_.size() && s_[i + 1] == '\n') return true;
        return i + 2 < s_.size() && s_[i + 1] == '\r' && s_[i + 2] == '\n';
    }

    std::size_t skip_continuation(std::size_t i) const {
        return s_[i + 1] == '\n' ? i + 2 : i + 3;
    }

    void word() {
        const std::size_t start = i_;
        while (i_ < s_.size() && is_word_byte(static_cast<unsigned char>(s_[i_]))) ++i_;
        const std::string_view w = s_.substr(start, i_ - start);
        if (i_ < s_.size() && (s_[i_] == '"' || s_[i_] == '\'') && w.size() <= 2) {
            const std::string lw = lowercase(w);
            if (lw == "r" || lw == "u" || lw == "b" || lw == "f" || lw == "br" || lw == "rb" ||
                lw == "fr" || lw == "rf") {
                i_ = start;
                string_literal(start, w.size());
                return;
            }
        }
        if (at_logical_start_) {
            first_word_ = std::string(w);
            at_logical_start_ = false;
        } else if (first_word_ == "async" && w == "def") {
            first_word_ = "def";
        }
        docstring_allowed_ = false;
    }

    void punctuation(char c) {
        at_logical_start_ = false;
        if (c == '(' || c == '[' || c == '{') {
            ++depth_;
        } else if (c == ')' || c == ']' || c == '}') {
            if (depth_ > 0) --depth_;
        } else if (c == ':' && depth_ == 0 && !header_colon_seen_ &&
                   (first_word_ == "def" || first_word_ == "class")) {
            header_colon_seen_ = true;
            docstring_allowed_ = true;
            return;
        }
        docstring_allowed_ = false;
    }

    void string_literal(std::size_t start, std::size_t prefix_len) {
        const std::size_t q = start + prefix_len;
        const char quote = s_[q];
        const bool triple = q + 2 < s_.size() && s_[q + 1] == quote && s_[q + 2] == quote;
        std::size_t end;
        bool terminated = false;
        if (triple) {
            std::size_t i = q + 3;
            while (i < s_.size()) {
                if (s_[i] == '\\') {
                    i += 2;
                    continue;
                }
                if (s_[i] == quote && i + 2 < s_.size() && s_[i + 1] == quote && s_[i + 2] == quote) {
                    terminated = true;
                    i += 3;
                    break;
                }
                ++i;
            }
            end = std::min(i, s_.size());
        } else {
            end = scan_quoted(s_, q, quote, terminated);
        }
        if (!terminated) out_.warnings.push_back(offset_note("unterminated string literal", start));

        const std::string prefix = lowercase(s_.substr(start, prefix_len));
        if (triple && terminated && docstring_allowed_ && (prefix.empty() || prefix == "r" || prefix == "u") &&
            statement_ends_at(end)) {
            out_.spans.push_back({start, end, SpanKind::docstring});
        }
        docstring_allowed_ = false;
        at_logical_start_ = false;
        i_ = end;
    }

    // True when only horizontal whitespace separates `pos` from the end of
    // the statement (newline, comment, semicolon or end of input).
    bool statement_ends_at(std::size_t pos) const {
        while (pos < s_.size() && is_hspace(s_[pos])) ++pos;
        return pos >= s_.size() || s_[pos] == '\n' || s_[pos] == '#' || s_[pos] == ';';
    }

    std::string_view s_;
    std::size_t i_ = 0;
    int depth_ = 0;
    bool docstring_allowed_ = true;  // module start
    bool at_logical_start_ = true;
    bool header_colon_seen_ = false;
    std::string first_word_;
    CommentScan out_;
};

class CFamilyScanner {
public:
    CFamilyScanner(std::string_view src, Language lang) : s_(src), cpp_(lang == Language::cpp) {}

    CommentScan run() {
        const std::size_t n = s_.size();
        while (i_ < n) {
            const char c = s_[i_];
            const char next = i_ + 1 < n ? s_[i_ + 1] : '\0';
            if (c == '/' && next == '/') {
                line_comment();
            } else if (c == '/' && next == '*') {
                block_comment();
            } else if (c == '"') {
                if (!cpp_ && next == '"' && i_ + 2 < n && s_[i_ + 2] == '"') {
                    text_block();
                } else {
                    quoted('"');
                }
            } else if (c == '\'') {
                quoted('\'');
            } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                       (c == '.' && std::isdigit(static_cast<unsigned char>(next)))) {
                number();
            } else if (is_word_byte(static_cast<unsigned char>(c))) {
                word();
            } else if (c == '#' && cpp_ && line_start_) {
                directive();
            } else {
                if (c == '\n') {
                    line_start_ = true;
                } else if (!is_hspace(c)) {
                    line_start_ = false;
                }
                ++i_;
            }
        }
        return std::move(out_);
    }

private:
    void line_comment() {
        const std::size_t start = i_;
        const std::size_t n = s_.size();
        i_ += 2;
        while (i_ < n) {
            if (s_[i_] == '\n') {
                // Line splice: a backslash right before the newline continues the comment.
                std::size_t k = i_;
                if (k > start && s_[k - 1] == '\r') --k;
                if (cpp_ && k > start + 2 && s_[k - 1] == '\\') {
                    ++i_;
                    continue;
                }
                break;
            }
            ++i_;
        }
        std::size_t end = i_;
        if (end > start + 2 && s_[end - 1] == '\r') --end;
        out_.spans.push_back({start, end, SpanKind::line_comment});
        line_start_ = false;
    }

    void block_comment() {
        const std::size_t start = i_;
        const std::size_t close = s_.find("*/", i_ + 2);
        if (close == std::string_view::npos) {
            out_.warnings.push_back(offset_note("unterminated block comment", start));
            i_ = s_.size();
        } else {
            i_ = close + 2;
        }
        out_.spans.push_back({start, i_, SpanKind::block_comment});
        line_start_ = false;
    }

    void quoted(char quote) {
        bool terminated = false;
        const std::size_t start = i_;
        i_ = scan_quoted(s_, i_, quote, terminated);
        if (!terminated) out_.warnings.push_back(offset_note("unterminated literal", start));
        line_start_ = false;
    }

    void text_block() {
        const std::size_t start = i_;
        std::size_t i = i_ + 3;
        bool terminated = false;
        while (i < s_.size()) {
            if (s_[i] == '\\') {
                i += 2;
                continue;
            }
            if (s_.compare(i, 3, "\"\"\"") == 0) {
                i += 3;
                terminated = true;
                break;
            }
            ++i;
        }
        if (!terminated) out_.warnings.push_back(offset_note("unterminated text block", start));
        i_ = std::min(i, s_.size());
        line_start_ = false;
    }

    // pp-number; in C++ a quote between alphanumerics is a digit separator.
    void number() {
        const std::size_t n = s_.size();
        ++i_;
        while (i_ < n) {
            const char c = s_[i_];
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.') {
                ++i_;
            } else if (cpp_ && c == '\'' && i_ + 1 < n && std::isalnum(static_cast<unsigned char>(s_[i_ + 1]))) {
                ++i_;
            } else if ((c == '+' || c == '-') && std::string_view("eEpP").find(s_[i_ - 1]) != std::string_view::npos) {
                ++i_;
            } else {
                break;
            }
        }
        line_start_ = false;
    }

    void word() {
        const std::size_t start = i_;
        while (i_ < s_.size() && is_word_byte(static_cast<unsigned char>(s_[i_]))) ++i_;
        line_start_ = false;
        if (!cpp_ || i_ >= s_.size() || s_[i_] != '"') return;
        const std::string_view w = s_.substr(start, i_ - start);
        if (w == "R" || w == "LR" || w == "uR" || w == "UR" || w == "u8R") raw_string(start);
    }

    // R"delim( ... )delim". Falls back to an ordinary string when the
    // delimiter is malformed.
    void raw_string(std::size_t start) {
        const std::size_t open = i_;
        const std::size_t paren = s_.find('(', open + 1);
        if (paren == std::string_view::npos || paren - open - 1 > 16) {
            quoted('"');
            return;
        }
        const std::string_view delim = s_.substr(open + 1, paren - open - 1);
        if (delim.find_first_of(" \\)\t\n\"") != std::string_view::npos) {
            quoted('"');
            return;
        }
        const std::string closing = ")" + std::string(delim) + "\"";
        const std::size_t close = s_.find(closing, paren + 1);
        if (close == std::string_view::npos) {
            out_.warnings.push_back(offset_note("unterminated raw string", start));
            i_ = s_.size();
        } else {
            i_ = close + closing.size();
        }
    }

    // `#include <...>` header names may contain "//" or "/*".
    void directive() {
        const std::size_t n = s_.size();
        std::size_t i = i_ + 1;
        while (i < n && is_hspace(s_[i])) ++i;
        const std::size_t w0 = i;
        while (i < n && std::isalpha(static_cast<unsigned char>(s_[i]))) ++i;
        const std::string_view name = s_.substr(w0, i - w0);
        line_start_ = false;
        if (name == "include" || name == "include_next" || name == "import") {
            while (i < n && is_hspace(s_[i])) ++i;
            if (i < n && s_[i] == '<') {
                while (i < n && s_[i] != '>' && s_[i] != '\n') ++i;
                if (i < n && s_[i] == '>') ++i;
            }
        }
        i_ = i;
    }

    std::string_view s_;
    bool cpp_;
    std::size_t i_ = 0;
    bool line_start_ = true;
    CommentScan out_;
};

inline std::vector<char> comment_mask(std::size_t size, std::span<const SourceSpan> spans) {
    std::vector<char> mask(size, 0);
    for (const auto& sp : spans) {
        const std::size_t end = std::min(sp.end, size);
        for (std::size_t k = sp.start; k < end; ++k) mask[k] = 1;
    }
    return mask;
}

inline std::string strip_once(std::string_view src, std::span<const SourceSpan> spans) {
    const auto mask = comment_mask(src.size(), spans);
    std::string out;
    out.reserve(src.size());

    std::string line;
    bool touched = false;
    std::size_t last_cut = 0;  // position in `line` right after the most recent removal
    bool had_cr = false;

    auto flush = [&](bool newline) {
        if (touched) {
            const bool tail_blank = std::all_of(line.begin() + static_cast<std::ptrdiff_t>(last_cut), line.end(),
                                                [](char c) { return is_hspace(c); });
            if (tail_blank) {
                while (!line.empty() && is_hspace(line.back())) line.pop_back();
                if (had_cr) line.push_back('\r');
            }
            if (std::all_of(line.begin(), line.end(), [](char c) { return is_hspace(c); })) {
                line.clear();
                touched = false;
                had_cr = false;
                return;
            }
        }
        out += line;
        if (newline) out += '\n';
        line.clear();
        touched = false;
        had_cr = false;
    };

    for (std::size_t k = 0; k < src.size(); ++k) {
        if (mask[k]) {
            touched = true;
            last_cut = line.size();
            continue;
        }
        if (src[k] == '\n') {
            had_cr = !line.empty() && line.back() == '\r';
            flush(true);
        } else {
            line.push_back(src[k]);
        }
    }
    if (!line.empty() || touched) {
        had_cr = false;
        flush(false);
    }
    return out;
}

}  // namespace detail

/// Finds every comment and docstring span. Literal contents are never
/// reported. An unterminated block comment extends to the end of the input
/// and adds a warning.
inline CommentScan find_comment_spans(std::string_view source, Language lang) {
    if (lang == Language::python) return detail::PythonScanner(source).run();
    return detail::CFamilyScanner(source, lang).run();
}

inline CommentScan find_comment_spans(std::string_view source, std::string_view language_tag) {
    return find_comment_spans(source, parse_language(language_tag));
}

/// Deletes every comment span. Lines that held a comment and end up
/// whitespace-only are removed with their newline; whitespace left dangling
/// before a removed trailing comment is trimmed. Idempotent.
inline std::string strip_comments(std::string_view source, Language lang) {
    std::string current(source);
    // Removing a docstring can promote the next string literal to docstring
    // position, so iterate to a fixed point.
    for (int round = 0; round < 64; ++round) {
        const auto scan = find_comment_spans(current, lang);
        if (scan.spans.empty()) break;
        current = detail::strip_once(current, scan.spans);
    }
    return current;
}

enum class TokenClass { code, comment, conditioning };

inline std::string_view to_string(TokenClass c) {
    switch (c) {
        case TokenClass::code: return "code";
        case TokenClass::comment: return "comment";
        case TokenClass::conditioning: return "conditioning";
    }
    return "unknown";
}

/// Half-open byte range of a model token.
struct ByteSpan {
    std::size_t start = 0;
    std::size_t end = 0;

    friend bool operator==(const ByteSpan&, const ByteSpan&) = default;
};

/// Classifies model tokens of the scored sequence `prefix + code`.
///
/// `token_spans` are in full-sequence coordinates; `comment_spans` are
/// relative to `code`, which begins at `code_offset`. Tokens ending at or
/// before `code_offset` are conditioning. Other tokens are comment when they
/// overlap a comment in a non-whitespace byte or lie entirely inside one;
/// otherwise code.
inline std::vector<TokenClass> classify_tokens(std::string_view code, std::span<const ByteSpan> token_spans,
                                               std::span<const SourceSpan> comment_spans, std::size_t code_offset) {
    const auto mask = detail::comment_mask(code.size(), comment_spans);
    std::vector<TokenClass> out;
    out.reserve(token_spans.size());
    std::size_t prev_end = 0;
    for (std::size_t t = 0; t < token_spans.size(); ++t) {
        const auto& tok = token_spans[t];
        if (tok.start > tok.end || (t > 0 && tok.start < prev_end) || tok.end > code_offset + code.size()) {
            throw Error("malformed_tokenization",
                        "token " + std::to_string(t) + " [" + std::to_string(tok.start) + "," +
                            std::to_string(tok.end) + ")");
        }
        prev_end = tok.end;
        if (tok.end <= code_offset) {
            out.push_back(TokenClass::conditioning);
            continue;
        }
        // A token straddling the separator is judged by its code-region bytes.
        const std::size_t lo = std::max(tok.start, code_offset) - code_offset;
        const std::size_t hi = tok.end - code_offset;
        bool non_ws_overlap = false;
        bool all_inside = hi > lo;
        for (std::size_t k = lo; k < hi; ++k) {
            if (mask[k]) {
                if (!detail::is_space(code[k])) non_ws_overlap = true;
            } else {
                all_inside = false;
            }
        }
        out.push_back(non_ws_overlap || all_inside ? TokenClass::comment : TokenClass::code);
    }
    return out;
}

struct CommentLineRatio {
    std::size_t comment_lines = 0;
    std::size_t code_lines = 0;
    double log_ratio = 0.0;
};

/// Comment-to-code line statistics with add-one smoothing:
/// log_ratio = ln((comment_lines + 1) / (code_lines + 1)).
inline CommentLineRatio comment_line_ratio(std::string_view source, Language lang) {
    CommentLineRatio r;
    if (source.empty()) return r;
    const auto scan = find_comment_spans(source, lang);
    const auto mask = detail::comment_mask(source.size(), scan.spans);
    std::size_t line_start = 0;
    while (line_start <= source.size()) {
        std::size_t line_end = source.find('\n', line_start);
        if (line_end == std::string_view::npos) line_end = source.size();
        bool any = false;
        bool code = false;
        for (std::size_t k = line_start; k < line_end; ++k) {
            if (detail::is_space(source[k])) continue;
            any = true;
            if (!mask[k]) code = true;
        }
        if (code) {
            ++r.code_lines;
        } else if (any) {
            ++r.comment_lines;
        }
        if (line_end == source.size()) break;
        line_start = line_end + 1;
    }
    r.log_ratio = std::log((static_cast<double>(r.comment_lines) + 1.0) / (static_cast<double>(r.code_lines) + 1.0));
    return r;
}

}  // namespace atc
