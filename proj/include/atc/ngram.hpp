#pragma once

// Byte-level n-gram reference model with add-one smoothing.
//
// Vocabulary: the 256 byte values plus BOS (256) and EOS (257). Contexts are
// the previous order-1 symbols, padded on the left with BOS:
//
//   P(v | ctx) = (count(ctx, v) + 1) / (count(ctx) + 258)
//
// Only bytes are counted during training; EOS exists in the vocabulary but
// only ever receives smoothing mass.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "atc/backend.hpp"
#include "atc/error.hpp"
#include "atc/rng.hpp"
#include "atc/sampling.hpp"

namespace atc {

inline constexpr int kVocabSize = 258;
inline constexpr std::uint16_t kBos = 256;
inline constexpr std::uint16_t kEos = 257;
inline constexpr int kMaxOrder = 5;

class ReferenceModel {
public:
    static constexpr std::string_view magic = "ATCNGRM1";

    /// Trains on `corpus` (one document per element).
    static ReferenceModel train(std::span<const std::string> corpus, int order) {
        if (order < 1 || order > kMaxOrder) throw Error("invalid_order", "order must be in [1, 5]");
        if (corpus.empty()) throw Error("empty_corpus", "reference model needs at least one document");
        ReferenceModel m(order);
        for (const auto& doc : corpus) {
            std::vector<std::uint16_t> history(static_cast<std::size_t>(order - 1), kBos);
            for (unsigned char byte : doc) {
                m.add_count(m.key_of(history), byte, 1);
                if (order > 1) {
                    history.erase(history.begin());
                    history.push_back(byte);
                }
            }
        }
        return m;
    }

    int order() const noexcept { return order_; }

    /// Packs the last order-1 symbols of `history` (BOS-padded on the left).
    std::uint64_t key_of(std::span<const std::uint16_t> history) const {
        std::uint64_t key = 0;
        const auto width = static_cast<std::size_t>(order_ - 1);
        for (std::size_t k = 0; k < width; ++k) {
            const std::size_t pad = width > history.size() ? width - history.size() : 0;
            const std::uint16_t sym = k < pad ? kBos : history[history.size() - width + k];
            key = (key << 16) | sym;
        }
        return key;
    }

    std::uint64_t count(std::uint64_t ctx, std::uint16_t symbol) const {
        const auto it = table_.find(ctx);
        if (it == table_.end()) return 0;
        const auto jt = it->second.counts.find(symbol);
        return jt == it->second.counts.end() ? 0 : jt->second;
    }

    std::uint64_t context_total(std::uint64_t ctx) const {
        const auto it = table_.find(ctx);
        return it == table_.end() ? 0 : it->second.total;
    }

    double log_prob(std::uint64_t ctx, std::uint16_t symbol) const {
        return std::log(static_cast<double>(count(ctx, symbol) + 1)) -
               std::log(static_cast<double>(context_total(ctx) + kVocabSize));
    }

    /// Full distribution at `ctx`, entries sorted by probability descending
    /// then id ascending.
    Distribution distribution(std::uint64_t ctx, std::uint16_t actual) const {
        Distribution d;
        d.exact = true;
        d.tail_mass = 0.0;
        d.actual_token_id = actual;
        const std::uint64_t total = context_total(ctx);
        const double log_denominator = std::log(static_cast<double>(total + kVocabSize));
        d.entries.reserve(kVocabSize);
        std::array<bool, kVocabSize> seen{};
        if (const auto it = table_.find(ctx); it != table_.end()) {
            std::vector<std::pair<std::uint16_t, std::uint64_t>> seen_counts(it->second.counts.begin(),
                                                                             it->second.counts.end());
            std::sort(seen_counts.begin(), seen_counts.end(), [](const auto& a, const auto& b) {
                return a.second != b.second ? a.second > b.second : a.first < b.first;
            });
            for (const auto& [sym, c] : seen_counts) {
                d.entries.push_back({sym, std::log(static_cast<double>(c + 1)) - log_denominator});
                seen[sym] = true;
            }
        }
        const double floor_lp = -log_denominator;
        for (int sym = 0; sym < kVocabSize; ++sym) {
            if (!seen[static_cast<std::size_t>(sym)]) d.entries.push_back({sym, floor_lp});
        }
        d.actual_log_prob = log_prob(ctx, actual);
        return d;
    }

    /// Little-endian layout: magic, u32 order, u32 vocab size, u64 triple
    /// count, then (context symbols as u16 x (order-1), u16 symbol, u64 count)
    /// sorted by context then symbol.
    void save(std::ostream& os) const {
        os.write(magic.data(), static_cast<std::streamsize>(magic.size()));
        put_u32(os, static_cast<std::uint32_t>(order_));
        put_u32(os, kVocabSize);
        std::vector<std::uint64_t> keys;
        keys.reserve(table_.size());
        std::uint64_t triples = 0;
        for (const auto& [key, entry] : table_) {
            keys.push_back(key);
            triples += entry.counts.size();
        }
        std::sort(keys.begin(), keys.end());
        put_u64(os, triples);
        const int width = order_ - 1;
        for (auto key : keys) {
            for (const auto& [sym, c] : table_.at(key).counts) {  // std::map: sorted by symbol
                for (int k = width - 1; k >= 0; --k) put_u16(os, static_cast<std::uint16_t>(key >> (16 * k)));
                put_u16(os, sym);
                put_u64(os, c);
            }
        }
    }

    std::string serialize() const {
        std::ostringstream os(std::ios::binary);
        save(os);
        return os.str();
    }

    static ReferenceModel load(std::istream& is) {
        std::string head(magic.size(), '\0');
        is.read(head.data(), static_cast<std::streamsize>(head.size()));
        if (!is || head != magic) throw Error("bad_model_file", "missing magic header");
        const auto order = static_cast<int>(get_u32(is));
        const auto vocab = get_u32(is);
        if (order < 1 || order > kMaxOrder || vocab != kVocabSize) throw Error("bad_model_file", "bad header fields");
        ReferenceModel m(order);
        const std::uint64_t triples = get_u64(is);
        for (std::uint64_t t = 0; t < triples; ++t) {
            std::uint64_t key = 0;
            for (int k = 0; k < order - 1; ++k) key = (key << 16) | get_u16(is);
            const std::uint16_t sym = get_u16(is);
            const std::uint64_t c = get_u64(is);
            if (sym >= kVocabSize) throw Error("bad_model_file", "symbol out of range");
            m.add_count(key, sym, c);
        }
        return m;
    }

    static ReferenceModel load_file(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error("io_error", "cannot open model file " + path);
        return load(in);
    }

    void save_file(const std::string& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("io_error", "cannot write model file " + path);
        save(out);
    }

private:
    struct ContextEntry {
        std::uint64_t total = 0;
        std::map<std::uint16_t, std::uint64_t> counts;
    };

    explicit ReferenceModel(int order) : order_(order) {}

    void add_count(std::uint64_t ctx, std::uint16_t sym, std::uint64_t c) {
        auto& entry = table_[ctx];
        entry.total += c;
        entry.counts[sym] += c;
    }

    static void put_u16(std::ostream& os, std::uint16_t v) {
        const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
        os.write(b, 2);
    }
    static void put_u32(std::ostream& os, std::uint32_t v) {
        for (int k = 0; k < 4; ++k) os.put(static_cast<char>((v >> (8 * k)) & 0xff));
    }
    static void put_u64(std::ostream& os, std::uint64_t v) {
        for (int k = 0; k < 8; ++k) os.put(static_cast<char>((v >> (8 * k)) & 0xff));
    }
    static std::uint64_t get_le(std::istream& is, int bytes) {
        std::uint64_t v = 0;
        for (int k = 0; k < bytes; ++k) {
            const int c = is.get();
            if (c == std::char_traits<char>::eof()) throw Error("bad_model_file", "truncated file");
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * k);
        }
        return v;
    }
    static std::uint16_t get_u16(std::istream& is) { return static_cast<std::uint16_t>(get_le(is, 2)); }
    static std::uint32_t get_u32(std::istream& is) { return static_cast<std::uint32_t>(get_le(is, 4)); }
    static std::uint64_t get_u64(std::istream& is) { return get_le(is, 8); }

    int order_;
    std::unordered_map<std::uint64_t, ContextEntry> table_;
};

/// Backend over an immutable ReferenceModel. One token per byte; every
/// distribution is exact.
class ReferenceBackend final : public Backend {
public:
    explicit ReferenceBackend(std::shared_ptr<const ReferenceModel> model) : model_(std::move(model)) {}

    const ReferenceModel& model() const { return *model_; }

    std::string id() const override { return "ref:order=" + std::to_string(model_->order()); }

    ScoredSequence score_continuation(std::string_view prefix, std::string_view continuation) const override {
        if (continuation.empty()) throw Error("empty_continuation", "nothing to score");
        std::vector<std::uint16_t> history;
        history.reserve(prefix.size() + continuation.size());
        for (unsigned char c : prefix) history.push_back(c);
        ScoredSequence seq;
        seq.tokens.reserve(continuation.size());
        seq.distributions.reserve(continuation.size());
        for (std::size_t i = 0; i < continuation.size(); ++i) {
            const auto byte = static_cast<unsigned char>(continuation[i]);
            seq.distributions.push_back(model_->distribution(model_->key_of(history), byte));
            seq.tokens.push_back({byte, std::string(1, continuation[i]), {i, i + 1}});
            history.push_back(byte);
        }
        return seq;
    }

    Generation generate(const Prompt& prompt, const SamplingConfig& cfg) const override {
        cfg.validate();
        const auto started = std::chrono::steady_clock::now();
        const std::string text = render_completion_prompt(prompt);
        std::vector<std::uint16_t> history(text.begin(), text.end());
        for (auto& h : history) h = static_cast<unsigned char>(h);
        Lcg64 rng(cfg.seed);
        Generation g;
        g.truncated = true;
        std::vector<double> logits(kVocabSize);
        for (int step = 0; step < cfg.max_tokens; ++step) {
            const std::uint64_t ctx = model_->key_of(history);
            for (int v = 0; v < kVocabSize; ++v) logits[static_cast<std::size_t>(v)] = model_->log_prob(ctx, static_cast<std::uint16_t>(v));
            logits[kBos] = -std::numeric_limits<double>::infinity();  // never emitted
            const auto sym = static_cast<std::uint16_t>(sample_token(logits, cfg.temperature, cfg.top_p, rng));
            ++g.generated_tokens;
            if (sym == kEos) {
                g.truncated = false;
                break;
            }
            g.text.push_back(static_cast<char>(sym));
            history.push_back(sym);
            if (strip_stop(g.text, cfg.stop)) {
                g.truncated = false;
                break;
            }
        }
        g.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
        return g;
    }

    std::string token_text(TokenId id) const override {
        if (id == kBos) return "<s>";
        if (id == kEos) return "</s>";
        return std::string(1, static_cast<char>(id));
    }

private:
    static bool strip_stop(std::string& text, const std::vector<std::string>& stop) {
        for (const auto& s : stop) {
            if (!s.empty() && text.size() >= s.size() && text.compare(text.size() - s.size(), s.size(), s) == 0) {
                text.resize(text.size() - s.size());
                return true;
            }
        }
        return false;
    }

    std::shared_ptr<const ReferenceModel> model_;
};

}  // namespace atc
