#pragma once

// Global co-occurrence counting and weighted least-squares factorization
// (GloVe) with AdaGrad.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "dualspace/common.hpp"
#include "dualspace/corpus.hpp"
#include "dualspace/dual_embedding.hpp"
#include "dualspace/rng.hpp"

namespace dualspace {

struct CoocEntry {
    TokenId i;
    TokenId j;
    double x;
    friend bool operator==(const CoocEntry&, const CoocEntry&) = default;
};

/// Sparse symmetric co-occurrence counts, entries sorted by (i, j). Absent
/// pairs are zero and never stored.
struct CoocMatrix {
    std::size_t vocab_size = 0;
    std::size_t window = 0;
    bool distance_weighting = false;
    std::vector<CoocEntry> entries;

    bool empty() const noexcept { return entries.empty(); }

    double at(TokenId i, TokenId j) const {
        auto it = std::lower_bound(entries.begin(), entries.end(), std::pair{i, j},
                                   [](const CoocEntry& e, const std::pair<TokenId, TokenId>& k) {
                                       return e.i != k.first ? e.i < k.first : e.j < k.second;
                                   });
        return it != entries.end() && it->i == i && it->j == j ? it->x : 0.0;
    }

    friend bool operator==(const CoocMatrix&, const CoocMatrix&) = default;
};

namespace detail {

using PairCounts = std::unordered_map<std::uint64_t, std::uint64_t>;

inline std::uint64_t pair_key(TokenId i, TokenId j) { return (static_cast<std::uint64_t>(i) << 32) | j; }

/// Integer counts of position pairs with lo <= distance <= hi, both orientations.
inline void count_pairs(const SentenceStream& stream, std::size_t first, std::size_t last, std::size_t lo,
                        std::size_t hi, PairCounts& out) {
    for (std::size_t s = first; s < last; ++s) {
        const auto& sent = stream.sentences[s];
        for (std::size_t p = 0; p < sent.size(); ++p) {
            for (std::size_t dist = lo; dist <= hi && p + dist < sent.size(); ++dist) {
                const TokenId a = sent[p], b = sent[p + dist];
                ++out[pair_key(a, b)];
                ++out[pair_key(b, a)];
            }
        }
    }
}

inline PairCounts count_sharded(const SentenceStream& stream, std::size_t lo, std::size_t hi, std::size_t threads) {
    const std::size_t n = stream.sentences.size();
    threads = std::max<std::size_t>(1, std::min(threads, n));
    std::vector<PairCounts> shards(threads);
    auto work = [&](std::size_t t) { count_pairs(stream, n * t / threads, n * (t + 1) / threads, lo, hi, shards[t]); };
    if (threads == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t);
        for (auto& th : pool) th.join();
    }
    for (std::size_t t = 1; t < threads; ++t)
        for (const auto& [k, v] : shards[t]) shards[0][k] += v;
    return std::move(shards[0]);
}

}  // namespace detail

/// Windowed co-occurrence counts. Every pair of positions at distance
/// 1..window within a sentence adds 1 (or 1/distance) to both X[a][b] and
/// X[b][a]. Counting is done in integers per distance and converted to reals
/// in a fixed order, so the result is independent of sentence order and of
/// how the stream is sharded across threads.
inline CoocMatrix accumulate_cooc(const SentenceStream& stream, std::size_t vocab_size, std::size_t window,
                                  bool distance_weighting, std::size_t threads = 1) {
    if (window < 1) throw UsageError("window must be >= 1");
    CoocMatrix out;
    out.vocab_size = vocab_size;
    out.window = window;
    out.distance_weighting = distance_weighting;
    std::unordered_map<std::uint64_t, double> acc;
    if (!distance_weighting) {
        for (const auto& [k, n] : detail::count_sharded(stream, 1, window, threads)) acc[k] = static_cast<double>(n);
    } else {
        for (std::size_t dist = 1; dist <= window; ++dist)
            for (const auto& [k, n] : detail::count_sharded(stream, dist, dist, threads))
                acc[k] += static_cast<double>(n) / static_cast<double>(dist);
    }
    out.entries.reserve(acc.size());
    for (const auto& [k, x] : acc) {
        const auto i = static_cast<TokenId>(k >> 32), j = static_cast<TokenId>(k & 0xFFFFFFFFu);
        if (i >= vocab_size || j >= vocab_size) throw Error("co-occurrence id outside vocabulary");
        out.entries.push_back({i, j, x});
    }
    std::sort(out.entries.begin(), out.entries.end(),
              [](const CoocEntry& a, const CoocEntry& b) { return a.i != b.i ? a.i < b.i : a.j < b.j; });
    return out;
}

/// f(x) = (x/x_max)^alpha below x_max, 1 at and above it.
inline double weight_fn(double x, double x_max = 100.0, double alpha = 0.75) {
    if (x < 0.0) throw UsageError("weight_fn: x must be >= 0");
    return x < x_max ? std::pow(x / x_max, alpha) : 1.0;
}

struct GloveConfig {
    std::size_t dim = 100;
    std::size_t window = 5;
    std::size_t epochs = 25;
    double learning_rate = 0.05;
    double x_max = 100.0;
    double alpha = 0.75;
    bool distance_weighting = true;
    std::uint64_t seed = 1;
    std::size_t threads = 1;

    void validate() const {
        if (dim < 1) throw UsageError("dim must be >= 1");
        if (window < 1) throw UsageError("window must be >= 1");
        if (!(x_max > 0.0)) throw UsageError("x_max must be > 0");
        if (!(alpha > 0.0 && alpha <= 1.0)) throw UsageError("alpha must be in (0, 1]");
        if (!(learning_rate > 0.0)) throw UsageError("learning rate must be > 0");
        if (threads < 1) throw UsageError("threads must be >= 1");
    }
};

/// Vectors, biases and their AdaGrad accumulators.
template <typename T>
struct GloveParams {
    Matrix<T> W, C;
    std::vector<T> b, bt;
    Matrix<T> gW, gC;
    std::vector<T> gb, gbt;

    GloveParams() = default;
    GloveParams(std::size_t n, std::size_t dim)
        : W(n, dim), C(n, dim), b(n, T{0}), bt(n, T{0}), gW(n, dim, T{1}), gC(n, dim, T{1}), gb(n, T{1}),
          gbt(n, T{1}) {}
};

template <typename T>
double glove_residual(const GloveParams<T>& p, TokenId i, TokenId j, double x) {
    return dot(p.W.row(i), p.C.row(j)) + static_cast<double>(p.b[i]) + static_cast<double>(p.bt[j]) - std::log(x);
}

/// f(X_ij) (w_i . c_j + b_i + b~_j - log X_ij)^2
template <typename T>
double glove_loss(const GloveParams<T>& p, TokenId i, TokenId j, double x, double x_max = 100.0, double alpha = 0.75) {
    if (!(x > 0.0)) throw Error("glove_loss: X_ij must be > 0");
    const double r = glove_residual(p, i, j, x);
    return weight_fn(x, x_max, alpha) * r * r;
}

/// Gradient of glove_loss with respect to w_i, c_j, b_i, b~_j.
struct GloveGradient {
    std::vector<double> w, c;
    double b = 0.0, bt = 0.0;
};

template <typename T>
GloveGradient glove_gradient(const GloveParams<T>& p, TokenId i, TokenId j, double x, double x_max = 100.0,
                             double alpha = 0.75) {
    if (!(x > 0.0)) throw Error("glove_gradient: X_ij must be > 0");
    const double g = 2.0 * weight_fn(x, x_max, alpha) * glove_residual(p, i, j, x);
    GloveGradient out;
    const auto wi = p.W.row(i), cj = p.C.row(j);
    out.w.resize(wi.size());
    out.c.resize(wi.size());
    for (std::size_t k = 0; k < wi.size(); ++k) {
        out.w[k] = g * cj[k];
        out.c[k] = g * wi[k];
    }
    out.b = g;
    out.bt = g;
    return out;
}

/// One AdaGrad step on entry (i, j). Returns the loss before the update.
template <typename T>
double glove_step(GloveParams<T>& p, TokenId i, TokenId j, double x, const GloveConfig& cfg) {
    const double r = glove_residual(p, i, j, x);
    const double f = weight_fn(x, cfg.x_max, cfg.alpha);
    const double g = 2.0 * f * r;
    if (!std::isfinite(g)) {
        std::ostringstream msg;
        msg << "non-finite gradient in GloVe step (i " << i << ", j " << j << ", x " << x << ", residual " << r << ")";
        throw Error(msg.str());
    }
    const double lr = cfg.learning_rate;
    auto wi = p.W.row(i), cj = p.C.row(j), gwi = p.gW.row(i), gcj = p.gC.row(j);
    for (std::size_t k = 0; k < wi.size(); ++k) {
        const double dw = g * cj[k], dc = g * wi[k];
        gwi[k] = static_cast<T>(gwi[k] + dw * dw);
        gcj[k] = static_cast<T>(gcj[k] + dc * dc);
        wi[k] = static_cast<T>(wi[k] - lr * dw / std::sqrt(static_cast<double>(gwi[k])));
        cj[k] = static_cast<T>(cj[k] - lr * dc / std::sqrt(static_cast<double>(gcj[k])));
    }
    p.gb[i] = static_cast<T>(p.gb[i] + g * g);
    p.gbt[j] = static_cast<T>(p.gbt[j] + g * g);
    p.b[i] = static_cast<T>(p.b[i] - lr * g / std::sqrt(static_cast<double>(p.gb[i])));
    p.bt[j] = static_cast<T>(p.bt[j] - lr * g / std::sqrt(static_cast<double>(p.gbt[j])));
    return f * r * r;
}

/// W, C ~ U(-0.5/d, 0.5/d) from independent seeds; biases 0; accumulators 1.
inline GloveParams<float> glove_initial_params(std::size_t vocab_size, const GloveConfig& cfg) {
    GloveParams<float> p(vocab_size, cfg.dim);
    const double half = 0.5 / static_cast<double>(cfg.dim);
    Rng rw(derive_seed(cfg.seed, "glove/init/W"));
    for (auto& x : p.W.data()) x = static_cast<float>(rw.uniform(-half, half));
    Rng rc(derive_seed(cfg.seed, "glove/init/C"));
    for (auto& x : p.C.data()) x = static_cast<float>(rc.uniform(-half, half));
    return p;
}

inline DualEmbedding::Metadata glove_metadata(const GloveConfig& cfg) {
    auto num = [](double v) {
        std::ostringstream s;
        s << v;
        return s.str();
    };
    return {{"trainer", "glove"},
            {"method", "glove"},
            {"dim", std::to_string(cfg.dim)},
            {"window", std::to_string(cfg.window)},
            {"epochs", std::to_string(cfg.epochs)},
            {"lr", num(cfg.learning_rate)},
            {"x_max", num(cfg.x_max)},
            {"alpha", num(cfg.alpha)},
            {"distance_weighting", cfg.distance_weighting ? "1" : "0"},
            {"seed", std::to_string(cfg.seed)},
            {"threads", std::to_string(cfg.threads)}};
}

/// AdaGrad over shuffled stored entries. `log` receives the total loss
/// accumulated over each epoch. Single-threaded runs are bit-reproducible;
/// threads > 1 update shared parameters without locks.
inline DualEmbedding train_glove(const CoocMatrix& cooc, const Vocabulary& vocab, const GloveConfig& cfg,
                                 TrainingLog* log = nullptr) {
    cfg.validate();
    if (cooc.empty()) throw Error("empty co-occurrence matrix");
    if (cooc.vocab_size != vocab.size()) throw Error("co-occurrence matrix does not match vocabulary");

    auto p = glove_initial_params(vocab.size(), cfg);
    std::vector<std::size_t> order(cooc.entries.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    Rng shuffler(derive_seed(cfg.seed, "glove/shuffle"));
    const std::size_t nthreads = std::min(cfg.threads, order.size());

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffler.shuffle(std::span<std::size_t>(order));
        std::vector<double> loss(nthreads, 0.0);
        auto work = [&](std::size_t t) {
            const std::size_t begin = order.size() * t / nthreads, end = order.size() * (t + 1) / nthreads;
            for (std::size_t k = begin; k < end; ++k) {
                const auto& e = cooc.entries[order[k]];
                loss[t] += glove_step(p, e.i, e.j, e.x, cfg);
            }
        };
        if (nthreads == 1) {
            work(0);
        } else {
            std::vector<std::thread> pool;
            for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(work, t);
            for (auto& th : pool) th.join();
        }
        if (log) {
            double total = 0.0;
            for (double l : loss) total += l;
            log->epoch_loss.push_back(total);
        }
    }
    DualEmbedding emb(vocab, std::move(p.W), std::move(p.C), glove_metadata(cfg));
    emb.set_biases(std::move(p.b), std::move(p.bt));
    return emb;
}

/// Exact total loss over all stored entries.
template <typename T>
double glove_total_loss(const GloveParams<T>& p, const CoocMatrix& cooc, const GloveConfig& cfg) {
    double total = 0.0;
    for (const auto& e : cooc.entries) total += glove_loss(p, e.i, e.j, e.x, cfg.x_max, cfg.alpha);
    return total;
}

// ---- persistence: binary triples + text header -----------------------------

inline constexpr char kCoocMagic[8] = {'C', 'O', 'O', 'C', '0', '0', '0', '1'};

inline void save_cooc(const std::string& path, const CoocMatrix& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out.write(kCoocMagic, sizeof kCoocMagic);
    for (const auto& e : m.entries) {
        detail::put_le<std::uint32_t>(out, e.i);
        detail::put_le<std::uint32_t>(out, e.j);
        detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(e.x));
    }
    std::ofstream hdr(path + ".hdr");
    hdr << "vocab_size=" << m.vocab_size << "\nwindow=" << m.window
        << "\ndistance_weighting=" << (m.distance_weighting ? 1 : 0) << "\nentries=" << m.entries.size() << '\n';
    if (!out || !hdr) throw Error("write failed: " + path);
}

inline CoocMatrix load_cooc(const std::string& path) {
    CoocMatrix m;
    std::ifstream hdr(path + ".hdr");
    if (!hdr) throw Error("cannot open " + path + ".hdr");
    std::size_t entries = 0;
    bool have_size = false;
    std::string line;
    while (std::getline(hdr, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const auto key = line.substr(0, eq);
        const auto val = std::stoull(line.substr(eq + 1));
        if (key == "vocab_size") {
            m.vocab_size = val;
            have_size = true;
        } else if (key == "window") {
            m.window = val;
        } else if (key == "distance_weighting") {
            m.distance_weighting = val != 0;
        } else if (key == "entries") {
            entries = val;
        }
    }
    if (!have_size) throw Error("cooc header lacks vocab_size");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    char magic[8];
    if (!in.read(magic, 8) || !std::equal(magic, magic + 8, kCoocMagic)) throw Error("not a COOC0001 file: " + path);
    m.entries.reserve(entries);
    while (in.peek() != std::char_traits<char>::eof()) {
        CoocEntry e{};
        e.i = detail::get_le<std::uint32_t>(in);
        e.j = detail::get_le<std::uint32_t>(in);
        e.x = std::bit_cast<double>(detail::get_le<std::uint64_t>(in));
        if (e.i >= m.vocab_size || e.j >= m.vocab_size || !(e.x > 0.0)) throw Error("cooc: invalid entry in " + path);
        m.entries.push_back(e);
    }
    if (m.entries.size() != entries) throw Error("cooc: entry count does not match header");
    return m;
}

}  // namespace dualspace
