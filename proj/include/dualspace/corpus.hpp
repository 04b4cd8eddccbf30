#pragma once

// Text -> sentences -> vocabulary -> id streams.

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dualspace/common.hpp"

namespace dualspace {

enum class NormalizerMode { none, lowercase, lowercase_suffix_strip };

inline NormalizerMode parse_normalizer(std::string_view s) {
    if (s == "none") return NormalizerMode::none;
    if (s == "lowercase") return NormalizerMode::lowercase;
    if (s == "lowercase+suffix-strip" || s == "suffix-strip") return NormalizerMode::lowercase_suffix_strip;
    throw UsageError("unknown normalizer '" + std::string(s) + "'");
}

inline std::string_view to_string(NormalizerMode m) {
    switch (m) {
        case NormalizerMode::none: return "none";
        case NormalizerMode::lowercase: return "lowercase";
        case NormalizerMode::lowercase_suffix_strip: return "lowercase+suffix-strip";
    }
    return "?";
}

using Sentence = std::vector<std::string>;
using StopwordSet = std::unordered_set<std::string>;

inline std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

/// Naive English suffix stripper standing in for a lemmatizer. Only touches
/// tokens long enough that the remaining stem keeps at least three letters.
inline std::string strip_suffix(std::string tok) {
    auto ends = [&](std::string_view suf) {
        return tok.size() >= suf.size() && std::string_view(tok).substr(tok.size() - suf.size()) == suf;
    };
    if (tok.size() > 4 && ends("ies")) {
        tok.resize(tok.size() - 3);
        tok += 'y';
    } else if (tok.size() > 4 && ends("sses")) {
        tok.resize(tok.size() - 2);
    } else if (tok.size() > 5 && ends("ing")) {
        tok.resize(tok.size() - 3);
    } else if (tok.size() > 4 && ends("ed")) {
        tok.resize(tok.size() - 2);
    } else if (tok.size() > 3 && ends("s") && !ends("ss") && !ends("us") && !ends("is")) {
        tok.resize(tok.size() - 1);
    }
    return tok;
}

/// Small built-in English stopword list; data/stopwords_en.txt carries the same words.
inline const StopwordSet& default_english_stopwords() {
    static const StopwordSet kWords = {
        "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are", "as", "at",
        "be", "because", "been", "before", "being", "below", "between", "both", "but", "by", "can", "could",
        "did", "do", "does", "doing", "down", "during", "each", "few", "for", "from", "further", "had", "has",
        "have", "having", "he", "her", "here", "hers", "herself", "him", "himself", "his", "how", "i", "if",
        "in", "into", "is", "it", "its", "itself", "just", "me", "more", "most", "my", "myself", "no", "nor",
        "not", "now", "of", "off", "on", "once", "only", "or", "other", "our", "ours", "ourselves", "out",
        "over", "own", "same", "she", "should", "so", "some", "such", "than", "that", "the", "their",
        "theirs", "them", "themselves", "then", "there", "these", "they", "this", "those", "through", "to",
        "too", "under", "until", "up", "very", "was", "we", "were", "what", "when", "where", "which",
        "while", "who", "whom", "why", "will", "with", "would", "you", "your", "yours", "yourself",
        "yourselves", "also", "s", "t", "may", "one", "us"};
    return kWords;
}

/// One token per line; blank lines and lines starting with '#' ignored.
inline StopwordSet load_stopwords(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open stopword file: " + path);
    StopwordSet out;
    std::string line;
    while (std::getline(in, line)) {
        auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos || line[b] == '#') continue;
        auto e = line.find_last_not_of(" \t\r");
        out.insert(ascii_lower(std::string_view(line).substr(b, e - b + 1)));
    }
    return out;
}

namespace detail {

inline bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

inline bool is_terminal(const std::string_view text, std::size_t i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') return false;
    if (i + 1 == text.size()) return true;
    const auto next = static_cast<unsigned char>(text[i + 1]);
    return std::isspace(next) || next == '"' || next == '\'' || next == ')' || next == ']';
}

}  // namespace detail

/// Splits one line of text into normalized sentences and hands each non-empty
/// sentence to `emit`. Sentence ends: '.', '!', '?' followed by whitespace,
/// a closing quote/bracket or end of line; a line break always ends a sentence.
/// Punctuation separates tokens; '\'' and '-' survive only between word characters.
template <typename Emit>
void split_line(std::string_view line, const StopwordSet& stopwords, NormalizerMode mode, Emit&& emit) {
    Sentence current;
    std::string tok;
    auto flush_token = [&] {
        if (tok.empty()) return;
        std::string lower = ascii_lower(tok);
        if (!stopwords.contains(lower)) {
            switch (mode) {
                case NormalizerMode::none: current.push_back(std::move(tok)); break;
                case NormalizerMode::lowercase: current.push_back(std::move(lower)); break;
                case NormalizerMode::lowercase_suffix_strip: current.push_back(strip_suffix(std::move(lower))); break;
            }
        }
        tok.clear();
    };
    auto flush_sentence = [&] {
        flush_token();
        if (!current.empty()) emit(std::move(current));
        current.clear();
    };
    for (std::size_t i = 0; i < line.size(); ++i) {
        const auto c = static_cast<unsigned char>(line[i]);
        if (detail::is_word_byte(c)) {
            tok += static_cast<char>(c);
        } else if ((c == '\'' || c == '-') && !tok.empty() && i + 1 < line.size() &&
                   detail::is_word_byte(static_cast<unsigned char>(line[i + 1]))) {
            tok += static_cast<char>(c);
        } else if (detail::is_terminal(line, i)) {
            flush_sentence();
        } else {
            flush_token();
        }
    }
    flush_sentence();
}

/// Normalizes a whole text (any number of lines) into token sentences.
inline std::vector<Sentence> normalize(std::string_view text, const StopwordSet& stopwords,
                                       NormalizerMode mode = NormalizerMode::lowercase) {
    std::vector<Sentence> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto nl = text.find('\n', start);
        if (nl == std::string_view::npos) nl = text.size();
        split_line(text.substr(start, nl - start), stopwords, mode,
                   [&](Sentence&& s) { out.push_back(std::move(s)); });
        start = nl + 1;
    }
    return out;
}

/// Streaming variant: one pass over `in`, sentences delivered to `emit`.
template <typename Emit>
void for_each_sentence(std::istream& in, const StopwordSet& stopwords, NormalizerMode mode, Emit&& emit) {
    std::string line;
    while (std::getline(in, line)) split_line(line, stopwords, mode, emit);
}

/// Token <-> id mapping with corpus frequencies. Ids are assigned by
/// descending frequency, ties broken lexicographically.
class Vocabulary {
public:
    Vocabulary() = default;

    /// Builds from explicit (token, count) entries already in id order.
    static Vocabulary from_entries(std::vector<std::pair<std::string, std::uint64_t>> entries,
                                   std::uint64_t total_tokens) {
        Vocabulary v;
        v.total_tokens_ = total_tokens;
        v.id_to_token_.reserve(entries.size());
        v.counts_.reserve(entries.size());
        for (auto& [tok, count] : entries) {
            const auto id = static_cast<TokenId>(v.id_to_token_.size());
            if (!v.token_to_id_.emplace(tok, id).second) throw Error("duplicate token in vocabulary: " + tok);
            v.id_to_token_.push_back(std::move(tok));
            v.counts_.push_back(count);
        }
        return v;
    }

    std::size_t size() const noexcept { return id_to_token_.size(); }
    bool empty() const noexcept { return id_to_token_.empty(); }
    std::uint64_t total_tokens() const noexcept { return total_tokens_; }

    std::optional<TokenId> find(std::string_view tok) const {
        auto it = token_to_id_.find(std::string(tok));
        if (it == token_to_id_.end()) return std::nullopt;
        return it->second;
    }
    bool contains(std::string_view tok) const { return find(tok).has_value(); }

    const std::string& token(TokenId id) const { return id_to_token_.at(id); }
    std::uint64_t count(TokenId id) const { return counts_.at(id); }
    const std::vector<std::string>& tokens() const noexcept { return id_to_token_; }
    const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
        return a.id_to_token_ == b.id_to_token_ && a.counts_ == b.counts_ && a.total_tokens_ == b.total_tokens_;
    }

private:
    std::unordered_map<std::string, TokenId> token_to_id_;
    std::vector<std::string> id_to_token_;
    std::vector<std::uint64_t> counts_;
    std::uint64_t total_tokens_ = 0;
};

/// Incremental frequency counter feeding build_vocab.
class VocabCounter {
public:
    void add(const Sentence& s) {
        for (const auto& t : s) ++counts_[t];
        total_ += s.size();
    }

    std::uint64_t total_tokens() const noexcept { return total_; }

    Vocabulary finish(std::uint64_t min_count) const {
        if (min_count < 1) throw UsageError("min_count must be >= 1");
        std::vector<std::pair<std::string, std::uint64_t>> kept;
        for (const auto& [tok, c] : counts_)
            if (c >= min_count) kept.emplace_back(tok, c);
        if (kept.empty()) throw Error("empty vocabulary");
        std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
            return a.second != b.second ? a.second > b.second : a.first < b.first;
        });
        return Vocabulary::from_entries(std::move(kept), total_);
    }

private:
    std::unordered_map<std::string, std::uint64_t> counts_;
    std::uint64_t total_ = 0;
};

inline Vocabulary build_vocab(const std::vector<Sentence>& sentences, std::uint64_t min_count) {
    VocabCounter counter;
    for (const auto& s : sentences) counter.add(s);
    return counter.finish(min_count);
}

/// Sentences of in-vocabulary ids. Never contains empty sentences.
struct SentenceStream {
    std::vector<std::vector<TokenId>> sentences;

    std::size_t token_count() const {
        std::size_t n = 0;
        for (const auto& s : sentences) n += s.size();
        return n;
    }
    friend bool operator==(const SentenceStream&, const SentenceStream&) = default;
};

/// OOV tokens dropped; emptied sentences dropped.
inline std::vector<TokenId> encode_sentence(const Sentence& s, const Vocabulary& vocab) {
    std::vector<TokenId> ids;
    ids.reserve(s.size());
    for (const auto& t : s)
        if (auto id = vocab.find(t)) ids.push_back(*id);
    return ids;
}

inline SentenceStream encode(const std::vector<Sentence>& sentences, const Vocabulary& vocab) {
    SentenceStream out;
    for (const auto& s : sentences) {
        auto ids = encode_sentence(s, vocab);
        if (!ids.empty()) out.sentences.push_back(std::move(ids));
    }
    return out;
}

inline std::vector<Sentence> decode(const SentenceStream& stream, const Vocabulary& vocab) {
    std::vector<Sentence> out;
    out.reserve(stream.sentences.size());
    for (const auto& ids : stream.sentences) {
        Sentence s;
        for (auto id : ids) s.push_back(vocab.token(id));
        out.push_back(std::move(s));
    }
    return out;
}

// ---- persistence ---------------------------------------------------------

inline void write_vocab(std::ostream& out, const Vocabulary& vocab) {
    out << "VOCAB " << vocab.size() << ' ' << vocab.total_tokens() << '\n';
    for (std::size_t i = 0; i < vocab.size(); ++i) out << vocab.tokens()[i] << '\t' << vocab.counts()[i] << '\n';
}

inline Vocabulary read_vocab(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error("vocab: missing header");
    std::istringstream hdr(line);
    std::string magic;
    std::size_t size = 0;
    std::uint64_t total = 0;
    if (!(hdr >> magic >> size >> total) || magic != "VOCAB") throw Error("vocab: malformed header");
    std::vector<std::pair<std::string, std::uint64_t>> entries;
    entries.reserve(size);
    for (std::size_t i = 0; i < size; ++i) {
        if (!std::getline(in, line)) throw Error("vocab: expected " + std::to_string(size) + " entries");
        auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0) throw Error("vocab: malformed line " + std::to_string(i + 2));
        try {
            entries.emplace_back(line.substr(0, tab), std::stoull(line.substr(tab + 1)));
        } catch (const std::logic_error&) {
            throw Error("vocab: bad count on line " + std::to_string(i + 2));
        }
    }
    return Vocabulary::from_entries(std::move(entries), total);
}

inline void save_vocab(const std::string& path, const Vocabulary& vocab) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    write_vocab(out, vocab);
}

inline Vocabulary load_vocab(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    return read_vocab(in);
}

/// Stream file: header `STREAM <sentences> <tokens>`, then one sentence per line of space-separated ids.
inline void write_stream(std::ostream& out, const SentenceStream& stream) {
    out << "STREAM " << stream.sentences.size() << ' ' << stream.token_count() << '\n';
    for (const auto& s : stream.sentences) {
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (i) out << ' ';
            out << s[i];
        }
        out << '\n';
    }
}

inline SentenceStream read_stream(std::istream& in, std::size_t vocab_size) {
    std::string line;
    if (!std::getline(in, line)) throw Error("stream: missing header");
    std::istringstream hdr(line);
    std::string magic;
    std::size_t n = 0, tokens = 0;
    if (!(hdr >> magic >> n >> tokens) || magic != "STREAM") throw Error("stream: malformed header");
    SentenceStream out;
    out.sentences.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::getline(in, line)) throw Error("stream: truncated");
        std::vector<TokenId> ids;
        std::istringstream ls(line);
        std::uint64_t id;
        while (ls >> id) {
            if (id >= vocab_size) throw Error("stream: id out of range on line " + std::to_string(i + 2));
            ids.push_back(static_cast<TokenId>(id));
        }
        if (ids.empty()) throw Error("stream: empty sentence on line " + std::to_string(i + 2));
        out.sentences.push_back(std::move(ids));
    }
    if (out.token_count() != tokens) throw Error("stream: token count mismatch");
    return out;
}

inline void save_stream(const std::string& path, const SentenceStream& stream) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    write_stream(out, stream);
}

inline SentenceStream load_stream(const std::string& path, std::size_t vocab_size) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    return read_stream(in, vocab_size);
}

}  // namespace dualspace
