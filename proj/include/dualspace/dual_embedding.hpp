#pragma once

// Trained W/C matrices, compare-method resolution, cosine queries and the
// DUALEMB file format.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dualspace/common.hpp"
#include "dualspace/corpus.hpp"

namespace dualspace {

/// Which matrix a lookup reads: W, C, their sum S, or their mean A.
enum class Space { W, C, S, A };

/// (cue space, candidate space) selector.
enum class CompareMethod { WW, WC, CW, CC, SS, AA };

inline constexpr std::array<CompareMethod, 6> kAllCompareMethods = {
    CompareMethod::WW, CompareMethod::WC, CompareMethod::CW, CompareMethod::CC, CompareMethod::SS, CompareMethod::AA};

inline std::string_view to_string(CompareMethod cm) {
    switch (cm) {
        case CompareMethod::WW: return "WW";
        case CompareMethod::WC: return "WC";
        case CompareMethod::CW: return "CW";
        case CompareMethod::CC: return "CC";
        case CompareMethod::SS: return "SS";
        case CompareMethod::AA: return "AA";
    }
    return "?";
}

inline CompareMethod parse_compare_method(std::string_view s) {
    const std::string up = [&] {
        std::string u(s);
        for (char& c : u) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        return u;
    }();
    for (auto cm : kAllCompareMethods)
        if (to_string(cm) == up) return cm;
    throw UsageError("unknown compare method '" + std::string(s) + "'");
}

inline std::pair<Space, Space> spaces_of(CompareMethod cm) {
    switch (cm) {
        case CompareMethod::WW: return {Space::W, Space::W};
        case CompareMethod::WC: return {Space::W, Space::C};
        case CompareMethod::CW: return {Space::C, Space::W};
        case CompareMethod::CC: return {Space::C, Space::C};
        case CompareMethod::SS: return {Space::S, Space::S};
        case CompareMethod::AA: return {Space::A, Space::A};
    }
    return {Space::W, Space::W};
}

template <typename T, typename U>
double cosine(std::span<T> u, std::span<U> v) {
    if (u.size() != v.size()) throw Error("cosine: dimension mismatch");
    double uv = 0.0, uu = 0.0, vv = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        const double a = u[k], b = v[k];
        uv += a * b;
        uu += a * a;
        vv += b * b;
    }
    if (uu == 0.0 || vv == 0.0) throw Error("undefined cosine: zero vector");
    return uv / (std::sqrt(uu) * std::sqrt(vv));
}

inline double cosine(const std::vector<double>& u, const std::vector<double>& v) {
    return cosine(std::span<const double>(u), std::span<const double>(v));
}

/// Unit-length rows in double precision; zero rows stay zero and are flagged.
struct NormalizedSpace {
    Matrix<double> rows;
    std::vector<bool> zero;
    std::size_t zero_count = 0;
};

struct Neighbor {
    TokenId id;
    std::string token;
    double score;
};

/// Vocabulary plus both trained matrices. Immutable once constructed; derived
/// matrices (S, A) and normalized candidate spaces are built on first use.
class DualEmbedding {
public:
    using Metadata = std::map<std::string, std::string>;

    DualEmbedding() : cache_(std::make_shared<Cache>()) {}
    DualEmbedding(Vocabulary vocab, Matrix<float> w, Matrix<float> c, Metadata meta = {})
        : vocab_(std::move(vocab)), w_(std::move(w)), c_(std::move(c)), meta_(std::move(meta)),
          cache_(std::make_shared<Cache>()) {
        if (w_.rows() != c_.rows() || w_.cols() != c_.cols())
            throw Error("W and C must have identical shape");
        if (w_.rows() != vocab_.size()) throw Error("matrix rows do not match vocabulary size");
    }

    const Vocabulary& vocab() const noexcept { return vocab_; }
    const Matrix<float>& W() const noexcept { return w_; }
    const Matrix<float>& C() const noexcept { return c_; }
    const Metadata& metadata() const noexcept { return meta_; }
    void set_metadata(Metadata meta) { meta_ = std::move(meta); }
    std::size_t dim() const noexcept { return w_.cols(); }
    std::size_t size() const noexcept { return w_.rows(); }

    /// GloVe biases (b, b~); empty for SGNS models.
    const std::vector<float>& word_bias() const noexcept { return b_; }
    const std::vector<float>& context_bias() const noexcept { return bt_; }
    void set_biases(std::vector<float> b, std::vector<float> bt) {
        if (b.size() != size() || bt.size() != size()) throw Error("bias length mismatch");
        b_ = std::move(b);
        bt_ = std::move(bt);
    }

    const Matrix<float>& matrix(Space s) const {
        switch (s) {
            case Space::W: return w_;
            case Space::C: return c_;
            case Space::S:
                std::call_once(cache_->sum_once, [&] {
                    cache_->sum = Matrix<float>(size(), dim());
                    auto out = cache_->sum.data();
                    auto a = w_.data(), b = c_.data();
                    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
                });
                return cache_->sum;
            case Space::A:
                std::call_once(cache_->mean_once, [&] {
                    const auto& sum = matrix(Space::S);
                    cache_->mean = Matrix<float>(size(), dim());
                    auto out = cache_->mean.data();
                    auto in = sum.data();
                    for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] * 0.5f;
                });
                return cache_->mean;
        }
        return w_;
    }

    /// (cue matrix, candidate matrix) for a compare method.
    std::pair<const Matrix<float>&, const Matrix<float>&> resolve_spaces(CompareMethod cm) const {
        auto [cue, cand] = spaces_of(cm);
        return {matrix(cue), matrix(cand)};
    }

    const NormalizedSpace& normalized(Space s) const {
        auto& slot = cache_->norm[static_cast<std::size_t>(s)];
        std::call_once(slot.once, [&] {
            const auto& m = matrix(s);
            slot.value.rows = Matrix<double>(m.rows(), m.cols());
            slot.value.zero.assign(m.rows(), false);
            for (std::size_t i = 0; i < m.rows(); ++i) {
                auto in = m.row(i);
                double ss = 0.0;
                for (float x : in) ss += static_cast<double>(x) * x;
                if (ss == 0.0) {
                    slot.value.zero[i] = true;
                    ++slot.value.zero_count;
                    continue;
                }
                const double n = std::sqrt(ss);
                auto out = slot.value.rows.row(i);
                for (std::size_t k = 0; k < in.size(); ++k) out[k] = in[k] / n;
            }
            if (slot.value.zero_count > 0)
                detail::warn(std::to_string(slot.value.zero_count) + " zero rows excluded from candidate space");
        });
        return slot.value;
    }

    std::size_t zero_rows(Space s) const {
        const auto& m = matrix(s);
        std::size_t n = 0;
        for (std::size_t i = 0; i < m.rows(); ++i)
            if (std::all_of(m.row(i).begin(), m.row(i).end(), [](float x) { return x == 0.0f; })) ++n;
        return n;
    }

    TokenId require(std::string_view token) const {
        auto id = vocab_.find(token);
        if (!id) throw Error("out-of-vocabulary token: " + std::string(token));
        return *id;
    }

private:
    struct NormSlot {
        std::once_flag once;
        NormalizedSpace value;
    };
    struct Cache {
        std::once_flag sum_once, mean_once;
        Matrix<float> sum, mean;
        std::array<NormSlot, 4> norm;
    };

    Vocabulary vocab_;
    Matrix<float> w_, c_;
    Metadata meta_;
    std::vector<float> b_, bt_;
    std::shared_ptr<Cache> cache_;
};

/// Cosine between the cue row (cue space) and every candidate row (candidate
/// space). Zero candidate rows get NaN. Throws if the cue row is zero.
inline std::vector<double> cosine_scores(const DualEmbedding& emb, Space cue_space, TokenId cue, Space cand_space) {
    const auto& cue_norm = emb.normalized(cue_space);
    if (cue_norm.zero[cue]) throw Error("undefined cosine: zero cue vector for '" + emb.vocab().token(cue) + "'");
    const auto& cand = emb.normalized(cand_space);
    auto q = cue_norm.rows.row(cue);
    std::vector<double> scores(emb.size());
    for (std::size_t i = 0; i < emb.size(); ++i)
        scores[i] = cand.zero[i] ? std::nan("") : dot(q, cand.rows.row(i));
    return scores;
}

/// Indices of the top n entries of `scores`, descending, ties by ascending id.
/// NaN entries and ids in `exclude` are skipped.
inline std::vector<TokenId> top_n(const std::vector<double>& scores, std::size_t n,
                                  const std::unordered_set<TokenId>& exclude) {
    std::vector<TokenId> ids;
    ids.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const auto id = static_cast<TokenId>(i);
        if (!std::isnan(scores[i]) && !exclude.contains(id)) ids.push_back(id);
    }
    const auto k = std::min(n, ids.size());
    auto better = [&](TokenId a, TokenId b) { return scores[a] != scores[b] ? scores[a] > scores[b] : a < b; };
    std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(), better);
    ids.resize(k);
    return ids;
}

/// Top-n neighbors of `cue`. The cue itself is always excluded.
inline std::vector<Neighbor> nearest(const DualEmbedding& emb, CompareMethod cm, std::string_view cue, std::size_t n,
                                     const std::unordered_set<std::string>& exclude = {}) {
    if (n < 1) throw UsageError("nearest: n must be >= 1");
    const TokenId cue_id = emb.require(cue);
    auto [cue_space, cand_space] = spaces_of(cm);
    const auto scores = cosine_scores(emb, cue_space, cue_id, cand_space);
    std::unordered_set<TokenId> skip{cue_id};
    for (const auto& t : exclude)
        if (auto id = emb.vocab().find(t)) skip.insert(*id);
    std::vector<Neighbor> out;
    for (auto id : top_n(scores, n, skip)) out.push_back({id, emb.vocab().token(id), scores[id]});
    return out;
}

// ---- DUALEMB persistence -------------------------------------------------
//
//   DUALEMB 1 <vocab> <dim>\n
//   key=value key=value ...\n
//   [W]\n  then per row: <token> ' ' <dim x float32 LE> '\n'
//   [C]\n  same layout, same token order
//   [B]\n  optional: <vocab x float32 LE b> <vocab x float32 LE b~> '\n'
//   [N]\n  optional: <uint64 LE total_tokens> <vocab x uint64 LE counts> '\n'

namespace detail {

template <typename U>
void put_le(std::ostream& out, U bits) {
    char buf[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
    out.write(buf, sizeof(U));
}

template <typename U>
U get_le(std::istream& in) {
    unsigned char buf[sizeof(U)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof(U))) throw Error("DUALEMB: truncated binary block");
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
    return v;
}

inline void put_f32(std::ostream& out, float x) { put_le(out, std::bit_cast<std::uint32_t>(x)); }
inline float get_f32(std::istream& in) { return std::bit_cast<float>(get_le<std::uint32_t>(in)); }

inline void expect_line(std::istream& in, std::string_view want) {
    std::string line;
    if (!std::getline(in, line) || line != want)
        throw Error("DUALEMB: expected section " + std::string(want));
}

inline void expect_newline(std::istream& in) {
    if (in.get() != '\n') throw Error("DUALEMB: row not newline-terminated (shape mismatch?)");
}

}  // namespace detail

inline void write_embedding(std::ostream& out, const DualEmbedding& emb) {
    const std::size_t v = emb.size(), d = emb.dim();
    out << "DUALEMB 1 " << v << ' ' << d << '\n';
    bool first = true;
    for (const auto& [k, val] : emb.metadata()) {
        if (k.empty() || k.find_first_of(" =\n\t") != std::string::npos || val.find_first_of(" \n\t") != std::string::npos)
            throw Error("DUALEMB: metadata keys/values must not contain whitespace: " + k);
        out << (first ? "" : " ") << k << '=' << val;
        first = false;
    }
    out << '\n';
    auto section = [&](std::string_view name, const Matrix<float>& m) {
        out << '[' << name << "]\n";
        for (std::size_t i = 0; i < v; ++i) {
            out << emb.vocab().tokens()[i] << ' ';
            for (float x : m.row(i)) detail::put_f32(out, x);
            out << '\n';
        }
    };
    section("W", emb.W());
    section("C", emb.C());
    if (!emb.word_bias().empty()) {
        out << "[B]\n";
        for (float x : emb.word_bias()) detail::put_f32(out, x);
        for (float x : emb.context_bias()) detail::put_f32(out, x);
        out << '\n';
    }
    out << "[N]\n";
    detail::put_le<std::uint64_t>(out, emb.vocab().total_tokens());
    for (auto c : emb.vocab().counts()) detail::put_le<std::uint64_t>(out, c);
    out << '\n';
}

inline DualEmbedding read_embedding(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error("DUALEMB: empty file");
    std::istringstream hdr(line);
    std::string magic;
    int version = 0;
    std::size_t v = 0, d = 0;
    if (!(hdr >> magic >> version >> v >> d) || magic != "DUALEMB" || version != 1 || v == 0 || d == 0)
        throw Error("DUALEMB: malformed header");
    if (!std::getline(in, line)) throw Error("DUALEMB: missing metadata line");
    DualEmbedding::Metadata meta;
    {
        std::istringstream ms(line);
        std::string kv;
        while (ms >> kv) {
            auto eq = kv.find('=');
            if (eq == std::string::npos || eq == 0) throw Error("DUALEMB: malformed metadata entry '" + kv + "'");
            meta[kv.substr(0, eq)] = kv.substr(eq + 1);
        }
    }
    std::vector<std::string> tokens;
    auto section = [&](std::string_view name, bool record) {
        detail::expect_line(in, "[" + std::string(name) + "]");
        Matrix<float> m(v, d);
        for (std::size_t i = 0; i < v; ++i) {
            std::string tok;
            if (!std::getline(in, tok, ' ') || tok.empty() || tok.front() == '[')
                throw Error("DUALEMB: section [" + std::string(name) + "] has fewer than " + std::to_string(v) + " rows");
            if (record) {
                tokens.push_back(tok);
            } else if (tok != tokens[i]) {
                throw Error("DUALEMB: token order differs between [W] and [C] at row " + std::to_string(i));
            }
            for (auto& x : m.row(i)) x = detail::get_f32(in);
            detail::expect_newline(in);
        }
        return m;
    };
    Matrix<float> w = section("W", true);
    Matrix<float> c = section("C", false);

    std::vector<float> b, bt;
    std::vector<std::pair<std::string, std::uint64_t>> entries;
    std::uint64_t total = 0;
    bool have_counts = false;
    while (std::getline(in, line)) {
        if (line == "[B]") {
            b.resize(v);
            bt.resize(v);
            for (auto& x : b) x = detail::get_f32(in);
            for (auto& x : bt) x = detail::get_f32(in);
            detail::expect_newline(in);
        } else if (line == "[N]") {
            total = detail::get_le<std::uint64_t>(in);
            for (std::size_t i = 0; i < v; ++i) entries.emplace_back(tokens[i], detail::get_le<std::uint64_t>(in));
            detail::expect_newline(in);
            have_counts = true;
        } else if (!line.empty()) {
            throw Error("DUALEMB: unexpected trailing content (shape mismatch?)");
        }
    }
    if (!have_counts)
        for (auto& t : tokens) entries.emplace_back(std::move(t), 0);
    DualEmbedding emb(Vocabulary::from_entries(std::move(entries), total), std::move(w), std::move(c), std::move(meta));
    if (!b.empty()) emb.set_biases(std::move(b), std::move(bt));
    return emb;
}

inline void save_embedding(const std::string& path, const DualEmbedding& emb) {
    for (auto s : {Space::W, Space::C})
        if (auto z = emb.zero_rows(s); z > 0)
            detail::warn(path + ": " + std::to_string(z) + " all-zero rows in " + (s == Space::W ? "W" : "C"));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    write_embedding(out, emb);
    if (!out) throw Error("write failed: " + path);
}

inline DualEmbedding load_embedding(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    return read_embedding(in);
}

}  // namespace dualspace
