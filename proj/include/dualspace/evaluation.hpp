#pragma once

// Intrinsic evaluation: dataset parsers plus similarity (Pearson),
// association (hit ratio / coverage over top-N neighbors) and analogy
// (3COSMUL, top-N) scoring for one compare method.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "dualspace/common.hpp"
#include "dualspace/corpus.hpp"
#include "dualspace/dual_embedding.hpp"
#include "dualspace/rng.hpp"

namespace dualspace {

enum class Task { similarity, association, analogy };

inline std::string_view to_string(Task t) {
    switch (t) {
        case Task::similarity: return "similarity";
        case Task::association: return "association";
        case Task::analogy: return "analogy";
    }
    return "?";
}

inline Task parse_task(std::string_view s) {
    if (s == "similarity") return Task::similarity;
    if (s == "association") return Task::association;
    if (s == "analogy") return Task::analogy;
    throw UsageError("unknown task '" + std::string(s) + "'");
}

struct SimilarityPair {
    std::string w1, w2;
    double gold;
};

struct CueResponseSet {
    std::string cue;
    std::map<std::string, double> responses;
};

struct AnalogyQuestion {
    std::string a, a_star, b, b_star;
    std::string category;
    friend bool operator==(const AnalogyQuestion&, const AnalogyQuestion&) = default;
};

struct TaskScore {
    Task task = Task::similarity;
    double value = 0.0;
    std::map<std::string, double> aux;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["task"] = std::string(to_string(task));
        j["value"] = value;
        j["aux"] = aux;
        return j;
    }
    friend bool operator==(const TaskScore&, const TaskScore&) = default;
};

// ---- parsing -------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto tab = line.find('\t', start);
        out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
        if (tab == std::string::npos) break;
        start = tab + 1;
    }
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
    return out;
}

inline bool skippable(const std::string& line) {
    auto b = line.find_first_not_of(" \t\r");
    return b == std::string::npos || line[b] == '#';
}

inline std::string normalize_token(const std::string& tok, NormalizerMode mode) {
    switch (mode) {
        case NormalizerMode::none: return tok;
        case NormalizerMode::lowercase: return ascii_lower(tok);
        case NormalizerMode::lowercase_suffix_strip: return strip_suffix(ascii_lower(tok));
    }
    return tok;
}

inline double parse_real(const std::string& s, const std::string& path, std::size_t lineno) {
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
        return v;
    } catch (const std::logic_error&) {
        throw Error(path + ":" + std::to_string(lineno) + ": bad number '" + s + "'");
    }
}

inline std::ifstream open_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open dataset " + path);
    return in;
}

}  // namespace detail

/// Canonical `w1<TAB>w2<TAB>score`. Blank and '#' lines are skipped.
inline std::vector<SimilarityPair> parse_similarity(const std::string& path,
                                                    NormalizerMode mode = NormalizerMode::lowercase) {
    auto in = detail::open_dataset(path);
    std::vector<SimilarityPair> out;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (detail::skippable(line)) continue;
        auto f = detail::split_tabs(line);
        if (f.size() != 3 || f[0].empty() || f[1].empty())
            throw Error(path + ":" + std::to_string(lineno) + ": expected w1<TAB>w2<TAB>score");
        out.push_back({detail::normalize_token(f[0], mode), detail::normalize_token(f[1], mode),
                       detail::parse_real(f[2], path, lineno)});
    }
    if (out.empty()) throw Error(path + ": no pairs");
    return out;
}

/// Canonical `cue<TAB>response<TAB>strength`, strength in [0, 1]. Responses
/// below `min_strength` are pruned; cues left without responses are dropped.
/// Cues keep their order of first appearance.
inline std::vector<CueResponseSet> parse_association(const std::string& path, double min_strength = 0.10,
                                                     NormalizerMode mode = NormalizerMode::lowercase) {
    auto in = detail::open_dataset(path);
    std::vector<CueResponseSet> sets;
    std::map<std::string, std::size_t> index;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (detail::skippable(line)) continue;
        auto f = detail::split_tabs(line);
        if (f.size() != 3 || f[0].empty() || f[1].empty())
            throw Error(path + ":" + std::to_string(lineno) + ": expected cue<TAB>response<TAB>strength");
        const double s = detail::parse_real(f[2], path, lineno);
        if (s < 0.0 || s > 1.0) throw Error(path + ":" + std::to_string(lineno) + ": strength outside [0,1]");
        const auto cue = detail::normalize_token(f[0], mode);
        auto [it, fresh] = index.emplace(cue, sets.size());
        if (fresh) sets.push_back({cue, {}});
        if (s >= min_strength) {
            auto& slot = sets[it->second].responses[detail::normalize_token(f[1], mode)];
            slot = std::max(slot, s);
        }
    }
    std::erase_if(sets, [](const CueResponseSet& c) { return c.responses.empty(); });
    return sets;
}

/// Google analogy format: `: section` headers, then `a a* b b*` rows.
inline std::vector<AnalogyQuestion> parse_analogy_google(const std::string& path,
                                                         NormalizerMode mode = NormalizerMode::lowercase) {
    auto in = detail::open_dataset(path);
    std::vector<AnalogyQuestion> out;
    std::string line, category;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (detail::skippable(line)) continue;
        std::istringstream ls(line);
        std::vector<std::string> f;
        for (std::string t; ls >> t;) f.push_back(t);
        if (f.front() == ":") {
            category = f.size() > 1 ? f[1] : "";
            continue;
        }
        if (f.size() != 4) throw Error(path + ":" + std::to_string(lineno) + ": expected 4 tokens");
        out.push_back({detail::normalize_token(f[0], mode), detail::normalize_token(f[1], mode),
                       detail::normalize_token(f[2], mode), detail::normalize_token(f[3], mode), category});
    }
    if (out.empty()) throw Error(path + ": no questions");
    return out;
}

/// Canonical `a<TAB>a*<TAB>b<TAB>b*[<TAB>category]`.
inline std::vector<AnalogyQuestion> parse_analogy_tsv(const std::string& path,
                                                      NormalizerMode mode = NormalizerMode::lowercase) {
    auto in = detail::open_dataset(path);
    std::vector<AnalogyQuestion> out;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (detail::skippable(line)) continue;
        auto f = detail::split_tabs(line);
        if (f.size() < 4 || f.size() > 5 || std::any_of(f.begin(), f.begin() + 4, [](auto& s) { return s.empty(); }))
            throw Error(path + ":" + std::to_string(lineno) + ": expected a<TAB>a*<TAB>b<TAB>b*[<TAB>category]");
        out.push_back({detail::normalize_token(f[0], mode), detail::normalize_token(f[1], mode),
                       detail::normalize_token(f[2], mode), detail::normalize_token(f[3], mode),
                       f.size() == 5 ? f[4] : ""});
    }
    if (out.empty()) throw Error(path + ": no questions");
    return out;
}

/// Dispatches on content: a leading ':' header line means Google format.
inline std::vector<AnalogyQuestion> parse_analogy(const std::string& path,
                                                  NormalizerMode mode = NormalizerMode::lowercase) {
    auto in = detail::open_dataset(path);
    std::string line;
    while (std::getline(in, line) && detail::skippable(line)) {
    }
    if (!line.empty() && line[0] == ':') return parse_analogy_google(path, mode);
    if (line.find('\t') == std::string::npos) return parse_analogy_google(path, mode);
    return parse_analogy_tsv(path, mode);
}

/// Partial analogy pairs (a, a*) of one BATS subclass.
struct AnalogySubclass {
    std::string name;
    std::vector<std::pair<std::string, std::string>> pairs;
};

/// Reads a BATS release directory (one `<id> [<name>].txt` file per
/// subclass, lines `a<TAB>b1/b2/...`). Subclasses whose file name starts
/// with 'I' (inflectional morphology) are skipped. The first listed answer
/// is the gold one.
inline std::vector<AnalogySubclass> parse_bats_dir(const std::string& dir,
                                                   NormalizerMode mode = NormalizerMode::lowercase) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw Error("not a directory: " + dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<AnalogySubclass> out;
    for (const auto& p : files) {
        const auto stem = p.filename().string();
        if (stem.empty() || stem[0] == 'I') continue;
        AnalogySubclass sub{p.stem().string(), {}};
        std::ifstream in(p);
        std::string line;
        for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
            if (detail::skippable(line)) continue;
            auto f = detail::split_tabs(line);
            if (f.size() != 2 || f[0].empty() || f[1].empty())
                throw Error(p.string() + ":" + std::to_string(lineno) + ": expected a<TAB>b");
            const auto answer = f[1].substr(0, f[1].find('/'));
            sub.pairs.emplace_back(detail::normalize_token(f[0], mode), detail::normalize_token(answer, mode));
        }
        out.push_back(std::move(sub));
    }
    return out;
}

/// Completes partial analogies: every pair (a, a*) of a subclass is joined
/// with one partner (b, b*) drawn uniformly from the other pairs of the same
/// subclass, giving exactly |pairs| questions per subclass.
inline std::vector<AnalogyQuestion> bats_join(const std::vector<AnalogySubclass>& subclasses, std::uint64_t seed) {
    std::vector<AnalogyQuestion> out;
    for (const auto& sub : subclasses) {
        const auto n = sub.pairs.size();
        if (n < 2) {
            detail::warn("analogy subclass '" + sub.name + "' has fewer than 2 pairs; skipped");
            continue;
        }
        Rng rng(derive_seed(seed, "bats/" + sub.name));
        for (std::size_t k = 0; k < n; ++k) {
            auto partner = static_cast<std::size_t>(rng.below(n - 1));
            if (partner >= k) ++partner;
            out.push_back({sub.pairs[k].first, sub.pairs[k].second, sub.pairs[partner].first,
                           sub.pairs[partner].second, sub.name});
        }
    }
    return out;
}

// ---- scoring -------------------------------------------------------------

/// Product-moment correlation (centered two-pass form).
inline double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw Error("pearson: length mismatch");
    if (x.size() < 2) throw Error("pearson: need at least 2 points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        mx += x[k];
        my += y[k];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double dx = x[k] - mx, dy = y[k] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw Error("pearson: zero variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson(std::span<const double>(x), std::span<const double>(y));
}

namespace detail {

/// Id of a token whose row in `space` is usable (in vocabulary, non-zero).
inline std::optional<TokenId> usable(const DualEmbedding& emb, const std::string& tok, Space space) {
    auto id = emb.vocab().find(tok);
    if (!id || emb.normalized(space).zero[*id]) return std::nullopt;
    return id;
}

}  // namespace detail

/// Pearson correlation between cosine(cue-space w1, candidate-space w2) and gold.
inline TaskScore eval_similarity(const DualEmbedding& emb, CompareMethod cm, const std::vector<SimilarityPair>& pairs) {
    auto [cue_space, cand_space] = spaces_of(cm);
    const auto& cue = emb.normalized(cue_space);
    const auto& cand = emb.normalized(cand_space);
    std::vector<double> x, y;
    double skipped = 0;
    for (const auto& p : pairs) {
        auto i = detail::usable(emb, p.w1, cue_space);
        auto j = detail::usable(emb, p.w2, cand_space);
        if (!i || !j) {
            ++skipped;
            continue;
        }
        x.push_back(dot(cue.rows.row(*i), cand.rows.row(*j)));
        y.push_back(p.gold);
    }
    if (x.size() < 2) throw Error("similarity: fewer than 2 in-vocabulary pairs");
    TaskScore s;
    s.task = Task::similarity;
    s.value = pearson(x, y);
    s.aux = {{"n_pairs", static_cast<double>(pairs.size())},
             {"n_evaluated", static_cast<double>(x.size())},
             {"n_skipped_oov", skipped}};
    return s;
}

/// Hit ratio (cues with at least one gold response among the top n) and
/// coverage (mean fraction of gold responses retrieved); value is their mean.
/// Gold responses outside the vocabulary (or equal to the cue) cannot be
/// retrieved and are not counted in |H|; a cue left with none is skipped.
inline TaskScore eval_association(const DualEmbedding& emb, CompareMethod cm, const std::vector<CueResponseSet>& sets,
                                  std::size_t n = 10) {
    if (n < 1) throw UsageError("association: n must be >= 1");
    auto [cue_space, cand_space] = spaces_of(cm);
    double hits = 0, coverage = 0, evaluated = 0, skipped = 0, responses_unusable = 0;
    for (const auto& set : sets) {
        auto cue = detail::usable(emb, set.cue, cue_space);
        std::unordered_set<TokenId> gold;
        for (const auto& [r, strength] : set.responses) {
            if (auto id = detail::usable(emb, r, cand_space); id && (!cue || *id != *cue))
                gold.insert(*id);
            else
                ++responses_unusable;
        }
        if (!cue || gold.empty()) {
            ++skipped;
            continue;
        }
        const auto scores = cosine_scores(emb, cue_space, *cue, cand_space);
        std::size_t overlap = 0;
        for (auto id : top_n(scores, n, {*cue}))
            if (gold.contains(id)) ++overlap;
        ++evaluated;
        if (overlap > 0) ++hits;
        coverage += static_cast<double>(overlap) / static_cast<double>(gold.size());
    }
    if (evaluated == 0) throw Error("association: no usable cues");
    TaskScore s;
    s.task = Task::association;
    const double hit_ratio = hits / evaluated, cov = coverage / evaluated;
    s.value = 0.5 * (hit_ratio + cov);
    s.aux = {{"hit_ratio", hit_ratio},
             {"coverage", cov},
             {"top_n", static_cast<double>(n)},
             {"n_cues", static_cast<double>(sets.size())},
             {"n_evaluated", evaluated},
             {"n_skipped_oov", skipped},
             {"n_responses_unusable", responses_unusable}};
    return s;
}

/// cos'(b*,a*) * cos'(b*,b) / (cos'(b*,a) + eps) on already-shifted cosines.
inline double three_cos_mul_score(double cos_astar, double cos_b, double cos_a, double epsilon = 0.001) {
    return cos_astar * cos_b / (cos_a + epsilon);
}

/// Maps a cosine from [-1, 1] to [0, 1].
inline double shift_cosine(double c) { return (c + 1.0) / 2.0; }

struct AnalogyOptions {
    double epsilon = 0.001;
    bool shift = true;
};

/// 3COSMUL score of every candidate for one question; NaN for excluded
/// candidates (a, a*, b and zero rows). Query rows come from the cue space,
/// candidates from the candidate space. Throws if a query token is unusable.
inline std::vector<double> three_cos_mul_scores(const DualEmbedding& emb, CompareMethod cm, const AnalogyQuestion& q,
                                                const AnalogyOptions& opt = {}) {
    auto [cue_space, cand_space] = spaces_of(cm);
    auto a = detail::usable(emb, q.a, cue_space), as = detail::usable(emb, q.a_star, cue_space),
         b = detail::usable(emb, q.b, cue_space);
    if (!a || !as || !b) throw Error("analogy: query token out of vocabulary");
    const auto& cue = emb.normalized(cue_space);
    const auto& cand = emb.normalized(cand_space);
    const auto ra = cue.rows.row(*a), ras = cue.rows.row(*as), rb = cue.rows.row(*b);
    std::vector<double> scores(emb.size());
    auto tf = [&](double c) { return opt.shift ? shift_cosine(c) : c; };
    for (std::size_t i = 0; i < emb.size(); ++i) {
        if (cand.zero[i] || i == *a || i == *as || i == *b) {
            scores[i] = std::nan("");
            continue;
        }
        const auto r = cand.rows.row(i);
        scores[i] = three_cos_mul_score(tf(dot(r, ras)), tf(dot(r, rb)), tf(dot(r, ra)), opt.epsilon);
    }
    return scores;
}

/// Candidates in descending 3COSMUL order (at most `limit`).
inline std::vector<Neighbor> three_cos_mul(const DualEmbedding& emb, CompareMethod cm, const AnalogyQuestion& q,
                                           std::size_t limit, const AnalogyOptions& opt = {}) {
    const auto scores = three_cos_mul_scores(emb, cm, q, opt);
    std::vector<Neighbor> out;
    for (auto id : top_n(scores, limit, {})) out.push_back({id, emb.vocab().token(id), scores[id]});
    return out;
}

/// Fraction of answerable questions whose gold b* is among the top_n
/// 3COSMUL candidates. Questions with any unusable token are skipped.
inline TaskScore eval_analogy(const DualEmbedding& emb, CompareMethod cm, const std::vector<AnalogyQuestion>& questions,
                              std::size_t top_n_answers = 3, const AnalogyOptions& opt = {}, std::size_t threads = 1) {
    if (top_n_answers < 1) throw UsageError("analogy: top_n must be >= 1");
    auto [cue_space, cand_space] = spaces_of(cm);
    std::vector<std::size_t> usable_q;
    std::vector<TokenId> gold;
    for (std::size_t k = 0; k < questions.size(); ++k) {
        const auto& q = questions[k];
        auto g = detail::usable(emb, q.b_star, cand_space);
        if (detail::usable(emb, q.a, cue_space) && detail::usable(emb, q.a_star, cue_space) &&
            detail::usable(emb, q.b, cue_space) && g) {
            usable_q.push_back(k);
            gold.push_back(*g);
        }
    }
    if (usable_q.empty()) throw Error("analogy: no answerable questions");
    emb.normalized(cue_space);
    emb.normalized(cand_space);

    threads = std::max<std::size_t>(1, std::min(threads, usable_q.size()));
    std::vector<std::size_t> answered(threads, 0);
    auto work = [&](std::size_t t) {
        for (std::size_t k = t; k < usable_q.size(); k += threads) {
            const auto scores = three_cos_mul_scores(emb, cm, questions[usable_q[k]], opt);
            for (auto id : top_n(scores, top_n_answers, {}))
                if (id == gold[k]) {
                    ++answered[t];
                    break;
                }
        }
    };
    if (threads == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t);
        for (auto& th : pool) th.join();
    }
    std::size_t total = 0;
    for (auto a : answered) total += a;
    TaskScore s;
    s.task = Task::analogy;
    s.value = static_cast<double>(total) / static_cast<double>(usable_q.size());
    s.aux = {{"n_questions", static_cast<double>(questions.size())},
             {"n_evaluated", static_cast<double>(usable_q.size())},
             {"n_answered", static_cast<double>(total)},
             {"n_skipped_oov", static_cast<double>(questions.size() - usable_q.size())},
             {"top_n", static_cast<double>(top_n_answers)}};
    return s;
}

/// Seeded uniform sample of k questions without replacement, original order kept.
inline std::vector<AnalogyQuestion> sample_questions(const std::vector<AnalogyQuestion>& qs, std::size_t k,
                                                     std::uint64_t seed) {
    if (k >= qs.size()) return qs;
    std::vector<std::size_t> idx(qs.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(derive_seed(seed, "analogy/sample"));
    rng.shuffle(std::span<std::size_t>(idx));
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    std::vector<AnalogyQuestion> out;
    for (auto i : idx) out.push_back(qs[i]);
    return out;
}

}  // namespace dualspace
