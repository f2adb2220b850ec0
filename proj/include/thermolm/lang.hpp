// Token inventory, sentences, the concatenation monoid, and corpus ingestion.
//
// The vocabulary reserves index 0 for the end token (written "∅"), which is
// never a surface token.  The empty token sequence is the unique empty
// sentence; it doubles as the two-sided identity of concatenation and as the
// stop symbol of generation.
#pragma once

#include <cstdint>
#include <istream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "thermolm/errors.hpp"

namespace thermolm {

using TokenId = std::uint32_t;

inline constexpr TokenId kEndId = 0;
inline constexpr std::string_view kEndGlyph = "∅";

enum class TokenizeMode { Whitespace, Character };

inline std::string_view tokenize_mode_name(TokenizeMode mode) {
    return mode == TokenizeMode::Whitespace ? "whitespace" : "char";
}

inline TokenizeMode tokenize_mode_from_name(std::string_view name) {
    if (name == "whitespace") return TokenizeMode::Whitespace;
    if (name == "char" || name == "character") return TokenizeMode::Character;
    throw Error("unknown tokenize mode: " + std::string(name));
}

// ---------------------------------------------------------------------------
// UTF-8 handling
// ---------------------------------------------------------------------------

// Strict UTF-8 decode of one code point starting at `pos`; advances `pos`.
// Rejects overlong forms, surrogates and values above U+10FFFF.
inline char32_t decode_utf8_at(std::string_view text, std::size_t& pos) {
    const auto byte = [&](std::size_t i) -> std::uint32_t {
        return static_cast<unsigned char>(text[i]);
    };
    const std::size_t start = pos;
    const std::uint32_t b0 = byte(pos);
    auto fail = [&](const char* why) -> char32_t {
        throw DecodeError(start, "invalid UTF-8 at byte offset " +
                                     std::to_string(start) + ": " + why);
    };
    auto continuation = [&](std::size_t i) -> std::uint32_t {
        if (i >= text.size()) return fail("truncated sequence"), 0;
        const std::uint32_t b = byte(i);
        if ((b & 0xC0u) != 0x80u) return fail("bad continuation byte"), 0;
        return b & 0x3Fu;
    };
    if (b0 < 0x80u) {
        pos += 1;
        return static_cast<char32_t>(b0);
    }
    if ((b0 & 0xE0u) == 0xC0u) {
        const std::uint32_t cp = ((b0 & 0x1Fu) << 6) | continuation(pos + 1);
        if (cp < 0x80u) fail("overlong encoding");
        pos += 2;
        return static_cast<char32_t>(cp);
    }
    if ((b0 & 0xF0u) == 0xE0u) {
        const std::uint32_t cp = ((b0 & 0x0Fu) << 12) | (continuation(pos + 1) << 6) |
                                 continuation(pos + 2);
        if (cp < 0x800u) fail("overlong encoding");
        if (cp >= 0xD800u && cp <= 0xDFFFu) fail("surrogate code point");
        pos += 3;
        return static_cast<char32_t>(cp);
    }
    if ((b0 & 0xF8u) == 0xF0u) {
        const std::uint32_t cp = ((b0 & 0x07u) << 18) | (continuation(pos + 1) << 12) |
                                 (continuation(pos + 2) << 6) | continuation(pos + 3);
        if (cp < 0x10000u) fail("overlong encoding");
        if (cp > 0x10FFFFu) fail("code point above U+10FFFF");
        pos += 4;
        return static_cast<char32_t>(cp);
    }
    return fail("invalid lead byte");
}

inline void append_utf8(std::string& out, char32_t cp) {
    const std::uint32_t c = cp;
    if (c < 0x80u) {
        out.push_back(static_cast<char>(c));
    } else if (c < 0x800u) {
        out.push_back(static_cast<char>(0xC0u | (c >> 6)));
        out.push_back(static_cast<char>(0x80u | (c & 0x3Fu)));
    } else if (c < 0x10000u) {
        out.push_back(static_cast<char>(0xE0u | (c >> 12)));
        out.push_back(static_cast<char>(0x80u | ((c >> 6) & 0x3Fu)));
        out.push_back(static_cast<char>(0x80u | (c & 0x3Fu)));
    } else {
        out.push_back(static_cast<char>(0xF0u | (c >> 18)));
        out.push_back(static_cast<char>(0x80u | ((c >> 12) & 0x3Fu)));
        out.push_back(static_cast<char>(0x80u | ((c >> 6) & 0x3Fu)));
        out.push_back(static_cast<char>(0x80u | (c & 0x3Fu)));
    }
}

// Validates the whole buffer; throws DecodeError naming the byte offset.
inline void validate_utf8(std::string_view text) {
    std::size_t pos = 0;
    while (pos < text.size()) decode_utf8_at(text, pos);
}

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

// Immutable token inventory.  Slot 0 is the reserved end token; surface
// tokens occupy [1, size).  Frozen once built: unseen tokens at query time
// are an error, not an UNK bucket.
class Vocabulary {
public:
    // `surface_tokens` in first-appearance order, duplicates ignored.
    static std::shared_ptr<const Vocabulary> build(
        const std::vector<std::string>& surface_tokens) {
        auto vocab = std::shared_ptr<Vocabulary>(new Vocabulary());
        for (const auto& tok : surface_tokens) vocab->add(tok);
        return vocab;
    }

    std::size_t size() const { return tokens_.size(); }  // includes the end token

    const std::string& token(TokenId id) const {
        if (id >= tokens_.size())
            throw VocabularyError("token id " + std::to_string(id) + " out of range");
        return tokens_[id];
    }

    std::optional<TokenId> find(std::string_view tok) const {
        auto it = index_.find(std::string(tok));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    TokenId require(std::string_view tok) const {
        auto id = find(tok);
        if (!id) throw VocabularyError("unknown token \"" + std::string(tok) + "\"");
        return *id;
    }

    bool same_as(const Vocabulary& other) const {
        return this == &other || tokens_ == other.tokens_;
    }

private:
    friend class VocabularyBuilder;
    Vocabulary() {
        tokens_.emplace_back(kEndGlyph);
        index_.emplace(std::string(kEndGlyph), kEndId);
    }

    TokenId add(const std::string& tok) {
        if (tok == kEndGlyph)
            throw VocabularyError("token collides with the reserved end glyph \"" +
                                  std::string(kEndGlyph) + "\"");
        auto it = index_.find(tok);
        if (it != index_.end()) return it->second;
        const TokenId id = static_cast<TokenId>(tokens_.size());
        tokens_.push_back(tok);
        index_.emplace(tok, id);
        return id;
    }

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
};

// Incrementally grows a vocabulary during ingestion, then freezes it.
class VocabularyBuilder {
public:
    VocabularyBuilder() : vocab_(new Vocabulary()) {}

    TokenId add(const std::string& tok) { return vocab_->add(tok); }

    std::shared_ptr<const Vocabulary> freeze() { return std::move(vocab_); }

private:
    std::shared_ptr<Vocabulary> vocab_;
};

// ---------------------------------------------------------------------------
// Sentence
// ---------------------------------------------------------------------------

// A finite sequence of surface-token ids (never the end id).  The empty
// sequence is the unique empty sentence; a default-constructed Sentence is
// the vocabulary-agnostic empty sentence.
class Sentence {
public:
    Sentence() = default;

    Sentence(std::shared_ptr<const Vocabulary> vocab, std::vector<TokenId> ids)
        : vocab_(std::move(vocab)), ids_(std::move(ids)) {
        if (!ids_.empty() && !vocab_)
            throw VocabularyError("nonempty sentence requires a vocabulary");
        for (TokenId id : ids_) {
            if (id == kEndId)
                throw VocabularyError("end token cannot appear inside a sentence");
            if (id >= vocab_->size())
                throw VocabularyError("token id " + std::to_string(id) +
                                      " out of range for vocabulary");
        }
    }

    std::size_t length() const { return ids_.size(); }
    bool empty() const { return ids_.empty(); }
    const std::vector<TokenId>& ids() const { return ids_; }
    const std::shared_ptr<const Vocabulary>& vocabulary() const { return vocab_; }

    bool operator==(const Sentence& other) const { return ids_ == other.ids_; }

private:
    std::shared_ptr<const Vocabulary> vocab_;
    std::vector<TokenId> ids_;
};

// Both operands must share a vocabulary; the empty sentence is compatible
// with anything.
inline Sentence concat(const Sentence& a, const Sentence& b) {
    const auto& va = a.vocabulary();
    const auto& vb = b.vocabulary();
    if (va && vb && !va->same_as(*vb))
        throw VocabularyMismatchError("concat: sentences use different vocabularies");
    std::vector<TokenId> ids;
    ids.reserve(a.length() + b.length());
    ids.insert(ids.end(), a.ids().begin(), a.ids().end());
    ids.insert(ids.end(), b.ids().begin(), b.ids().end());
    return Sentence(va ? va : vb, std::move(ids));
}

// Inverse of tokenization: whitespace mode joins with single spaces,
// character mode joins directly.  The empty sentence renders as the end glyph.
inline std::string render(const Sentence& s, TokenizeMode mode) {
    if (s.empty()) return std::string(kEndGlyph);
    std::string out;
    const auto& vocab = *s.vocabulary();
    bool first = true;
    for (TokenId id : s.ids()) {
        if (mode == TokenizeMode::Whitespace && !first) out.push_back(' ');
        out += vocab.token(id);
        first = false;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Corpus
// ---------------------------------------------------------------------------

struct Corpus {
    std::vector<Sentence> sentences;
    std::shared_ptr<const Vocabulary> vocabulary;
    std::uint64_t token_count = 0;
};

namespace detail {

inline bool is_ascii_space(char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v';
}

inline std::vector<std::string> split_line_tokens(std::string_view line,
                                                  TokenizeMode mode) {
    std::vector<std::string> toks;
    if (mode == TokenizeMode::Whitespace) {
        std::size_t i = 0;
        while (i < line.size()) {
            while (i < line.size() && is_ascii_space(line[i])) ++i;
            std::size_t j = i;
            while (j < line.size() && !is_ascii_space(line[j])) ++j;
            if (j > i) toks.emplace_back(line.substr(i, j - i));
            i = j;
        }
    } else {
        std::size_t pos = 0;
        while (pos < line.size()) {
            const char32_t cp = decode_utf8_at(line, pos);
            if (cp == U'\r') continue;
            std::string tok;
            append_utf8(tok, cp);
            toks.push_back(std::move(tok));
        }
    }
    return toks;
}

}  // namespace detail

// One sentence per nonempty line; lines producing no tokens are skipped.
// The vocabulary is frozen in first-appearance order after the end token.
inline Corpus ingest_corpus(std::string_view text, TokenizeMode mode) {
    validate_utf8(text);
    VocabularyBuilder builder;
    std::vector<std::vector<TokenId>> raw_sentences;
    std::uint64_t token_count = 0;

    std::size_t line_start = 0;
    while (line_start <= text.size()) {
        std::size_t nl = text.find('\n', line_start);
        std::string_view line = (nl == std::string_view::npos)
                                    ? text.substr(line_start)
                                    : text.substr(line_start, nl - line_start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        auto toks = detail::split_line_tokens(line, mode);
        if (!toks.empty()) {
            std::vector<TokenId> ids;
            ids.reserve(toks.size());
            for (const auto& tok : toks) ids.push_back(builder.add(tok));
            token_count += ids.size();
            raw_sentences.push_back(std::move(ids));
        }
        if (nl == std::string_view::npos) break;
        line_start = nl + 1;
    }

    Corpus corpus;
    corpus.vocabulary = builder.freeze();
    corpus.token_count = token_count;
    corpus.sentences.reserve(raw_sentences.size());
    for (auto& ids : raw_sentences)
        corpus.sentences.emplace_back(corpus.vocabulary, std::move(ids));
    return corpus;
}

inline Corpus ingest_corpus(std::istream& in, TokenizeMode mode) {
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw Error("failed reading corpus stream");
    const std::string text = buf.str();
    return ingest_corpus(std::string_view(text), mode);
}

// Tokenizes text into sentences over a freshly built vocabulary.
inline std::vector<Sentence> tokenize(std::string_view text, TokenizeMode mode) {
    return ingest_corpus(text, mode).sentences;
}

// Parses a single prompt line against a frozen vocabulary.  The end glyph by
// itself denotes the empty sentence.  Unknown tokens throw VocabularyError.
inline Sentence parse_prompt(std::string_view line,
                             const std::shared_ptr<const Vocabulary>& vocab,
                             TokenizeMode mode) {
    validate_utf8(line);
    std::string_view trimmed = line;
    while (!trimmed.empty() && detail::is_ascii_space(trimmed.front())) trimmed.remove_prefix(1);
    while (!trimmed.empty() && detail::is_ascii_space(trimmed.back())) trimmed.remove_suffix(1);
    if (trimmed.empty() || trimmed == kEndGlyph) return Sentence();
    auto toks = detail::split_line_tokens(trimmed, mode);
    std::vector<TokenId> ids;
    ids.reserve(toks.size());
    for (const auto& tok : toks) ids.push_back(vocab->require(tok));
    return Sentence(vocab, std::move(ids));
}

}  // namespace thermolm
