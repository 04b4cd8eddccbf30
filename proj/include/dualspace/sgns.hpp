#pragma once

// Window-based prediction training: CBOW and skip-gram with negative sampling.
// Both the input (W) and output (C) matrices are kept.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dualspace/common.hpp"
#include "dualspace/corpus.hpp"
#include "dualspace/dual_embedding.hpp"
#include "dualspace/rng.hpp"

namespace dualspace {

enum class SgnsMethod { cbow, sg };

inline std::string_view to_string(SgnsMethod m) { return m == SgnsMethod::cbow ? "cbow" : "sg"; }

inline SgnsMethod parse_sgns_method(std::string_view s) {
    if (s == "cbow" || s == "sgns-cbow") return SgnsMethod::cbow;
    if (s == "sg" || s == "sgns-sg" || s == "skipgram") return SgnsMethod::sg;
    throw UsageError("unknown SGNS method '" + std::string(s) + "'");
}

struct SgnsConfig {
    SgnsMethod method = SgnsMethod::sg;
    std::size_t dim = 100;
    std::size_t window = 5;
    std::size_t negatives = 5;
    std::size_t epochs = 5;
    double learning_rate = 0.025;
    double noise_power = 0.75;
    std::uint64_t seed = 1;
    std::size_t threads = 1;

    void validate() const {
        if (dim < 1) throw UsageError("dim must be >= 1");
        if (window < 1) throw UsageError("window must be >= 1");
        if (negatives < 1) throw UsageError("negatives must be >= 1");
        if (!(learning_rate > 0.0)) throw UsageError("learning rate must be > 0");
        if (threads < 1) throw UsageError("threads must be >= 1");
    }
};

/// Unigram counts raised to `power`, normalized, stored as a cumulative table.
class NoiseDistribution {
public:
    NoiseDistribution(std::span<const std::uint64_t> counts, double power) {
        if (counts.empty()) throw Error("noise distribution over empty vocabulary");
        std::vector<double> mass(counts.size());
        for (std::size_t i = 0; i < counts.size(); ++i)
            mass[i] = std::pow(static_cast<double>(std::max<std::uint64_t>(counts[i], 1)), power);
        cumulative_.resize(counts.size());
        double run = 0.0;
        for (std::size_t i = 0; i < mass.size(); ++i) {
            run += mass[i];
            cumulative_[i] = run;
        }
        for (auto& c : cumulative_) c /= run;
        cumulative_.back() = 1.0;
    }

    std::size_t size() const noexcept { return cumulative_.size(); }

    double probability(TokenId id) const {
        return id == 0 ? cumulative_[0] : cumulative_[id] - cumulative_[id - 1];
    }

    TokenId sample(Rng& rng) const {
        const double u = rng.uniform01();
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
        if (it == cumulative_.end()) --it;
        return static_cast<TokenId>(it - cumulative_.begin());
    }

private:
    std::vector<double> cumulative_;
};

/// m i.i.d. draws from the noise distribution; draws equal to `exclude` are redrawn.
inline std::vector<TokenId> sample_negatives(const NoiseDistribution& dist, std::size_t m, TokenId exclude, Rng& rng) {
    if (m < 1) throw UsageError("need at least one negative sample");
    if (dist.size() < 2) throw Error("vocabulary of size 1 has no valid negative sample");
    std::vector<TokenId> out;
    out.reserve(m);
    while (out.size() < m) {
        const TokenId id = dist.sample(rng);
        if (id != exclude) out.push_back(id);
    }
    return out;
}

/// One training example: input ids (one for SG, the context for CBOW) predicting `target` in C.
struct TrainingPair {
    std::vector<TokenId> inputs;
    TokenId target;
    friend bool operator==(const TrainingPair&, const TrainingPair&) = default;
};

/// Visits the examples of one sentence in position order. Context is every
/// other token within `window` positions; windows never leave the sentence.
template <typename Visit>
void for_each_pair(std::span<const TokenId> sentence, std::size_t window, SgnsMethod method, Visit&& visit) {
    const std::size_t n = sentence.size();
    std::vector<TokenId> ctx;
    for (std::size_t t = 0; t < n; ++t) {
        const std::size_t lo = t >= window ? t - window : 0;
        const std::size_t hi = std::min(n - 1, t + window);
        if (method == SgnsMethod::sg) {
            for (std::size_t j = lo; j <= hi; ++j)
                if (j != t) visit(std::span<const TokenId>(&sentence[t], 1), sentence[j]);
        } else {
            ctx.clear();
            for (std::size_t j = lo; j <= hi; ++j)
                if (j != t) ctx.push_back(sentence[j]);
            if (!ctx.empty()) visit(std::span<const TokenId>(ctx), sentence[t]);
        }
    }
}

inline std::vector<TrainingPair> generate_pairs(const SentenceStream& stream, std::size_t window, SgnsMethod method) {
    if (window < 1) throw UsageError("window must be >= 1");
    std::vector<TrainingPair> out;
    for (const auto& s : stream.sentences)
        for_each_pair(s, window, method, [&](std::span<const TokenId> in, TokenId target) {
            out.push_back({{in.begin(), in.end()}, target});
        });
    return out;
}

/// log(sigma(x)), stable for large |x|.
inline double log_sigmoid(double x) {
    return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// Negated SGNS objective for one example:
///   -log sigma(w.c_pos) - sum_k log sigma(-w.c_k)
template <typename T>
double sgns_loss(std::span<const T> input, std::span<const T> ctx, const std::vector<std::span<const T>>& negs) {
    if (ctx.size() != input.size()) throw Error("sgns_loss: dimension mismatch");
    double loss = -log_sigmoid(dot(input, ctx));
    for (const auto& n : negs) {
        if (n.size() != input.size()) throw Error("sgns_loss: dimension mismatch");
        loss -= log_sigmoid(-dot(input, n));
    }
    return loss;
}

/// Scratch buffers reused across steps.
struct SgnsWorkspace {
    std::vector<double> hidden, grad_hidden, coeff;
};

/// One SGD step on a single example. The input vector is W[i] for SG, the
/// mean of the context rows for CBOW. All gradients are taken at the current
/// parameters before any row is written. Returns the loss before the update.
template <typename T>
double sgns_step(Matrix<T>& W, Matrix<T>& C, std::span<const TokenId> inputs, TokenId target,
                 std::span<const TokenId> negs, double lr, SgnsWorkspace& ws) {
    const std::size_t d = W.cols();
    auto& h = ws.hidden;
    auto& gh = ws.grad_hidden;
    auto& coeff = ws.coeff;
    h.assign(d, 0.0);
    gh.assign(d, 0.0);
    coeff.resize(negs.size() + 1);

    const double inv = 1.0 / static_cast<double>(inputs.size());
    for (TokenId i : inputs) {
        auto row = W.row(i);
        for (std::size_t k = 0; k < d; ++k) h[k] += row[k];
    }
    if (inputs.size() > 1)
        for (auto& x : h) x *= inv;

    const std::span<const double> hs(h);
    double loss = 0.0;
    auto score = [&](TokenId id, bool positive, std::size_t slot) {
        const double x = dot(hs, C.row(id));
        if (!std::isfinite(x)) {
            std::ostringstream msg;
            msg << "non-finite activation in SGNS step (target " << target << ", row " << id << ", value " << x
                << ", lr " << lr << ")";
            throw Error(msg.str());
        }
        loss -= log_sigmoid(positive ? x : -x);
        coeff[slot] = positive ? sigmoid(x) - 1.0 : sigmoid(x);
        auto c = C.row(id);
        for (std::size_t k = 0; k < d; ++k) gh[k] += coeff[slot] * c[k];
    };
    score(target, true, 0);
    for (std::size_t k = 0; k < negs.size(); ++k) score(negs[k], false, k + 1);

    auto update_c = [&](TokenId id, double g) {
        auto c = C.row(id);
        for (std::size_t k = 0; k < d; ++k) c[k] = static_cast<T>(c[k] - lr * g * h[k]);
    };
    update_c(target, coeff[0]);
    for (std::size_t k = 0; k < negs.size(); ++k) update_c(negs[k], coeff[k + 1]);

    const double scale = inputs.size() > 1 ? lr * inv : lr;
    for (TokenId i : inputs) {
        auto row = W.row(i);
        for (std::size_t k = 0; k < d; ++k) row[k] = static_cast<T>(row[k] - scale * gh[k]);
    }
    return loss;
}

template <typename T>
double sgns_step(Matrix<T>& W, Matrix<T>& C, std::span<const TokenId> inputs, TokenId target,
                 std::span<const TokenId> negs, double lr) {
    SgnsWorkspace ws;
    return sgns_step(W, C, inputs, target, negs, lr, ws);
}

/// W ~ U(-0.5/d, 0.5/d) from the seed, C = 0.
inline std::pair<Matrix<float>, Matrix<float>> sgns_initial_params(std::size_t vocab_size, const SgnsConfig& cfg) {
    Matrix<float> w(vocab_size, cfg.dim), c(vocab_size, cfg.dim, 0.0f);
    Rng rng(derive_seed(cfg.seed, "sgns/init"));
    const double half = 0.5 / static_cast<double>(cfg.dim);
    for (auto& x : w.data()) x = static_cast<float>(rng.uniform(-half, half));
    return {std::move(w), std::move(c)};
}

inline DualEmbedding::Metadata sgns_metadata(const SgnsConfig& cfg) {
    auto num = [](double v) {
        std::ostringstream s;
        s << v;
        return s.str();
    };
    return {{"trainer", cfg.method == SgnsMethod::cbow ? "sgns-cbow" : "sgns-sg"},
            {"method", std::string(to_string(cfg.method))},
            {"dim", std::to_string(cfg.dim)},
            {"window", std::to_string(cfg.window)},
            {"negatives", std::to_string(cfg.negatives)},
            {"epochs", std::to_string(cfg.epochs)},
            {"lr", num(cfg.learning_rate)},
            {"noise_power", num(cfg.noise_power)},
            {"seed", std::to_string(cfg.seed)},
            {"threads", std::to_string(cfg.threads)}};
}

/// Trains one model. Single-threaded runs are bit-reproducible for a fixed
/// seed. With threads > 1 workers update the shared W and C without locks
/// and lost updates are tolerated; the result is no longer reproducible.
inline DualEmbedding train_sgns(const SentenceStream& stream, const Vocabulary& vocab, const SgnsConfig& cfg,
                                TrainingLog* log = nullptr) {
    cfg.validate();
    if (stream.sentences.empty()) throw Error("empty sentence stream");
    if (vocab.size() < 2) throw Error("SGNS needs a vocabulary of at least 2 tokens");

    auto [W, C] = sgns_initial_params(vocab.size(), cfg);
    const NoiseDistribution noise(vocab.counts(), cfg.noise_power);

    const std::size_t per_epoch = stream.token_count();
    const double total = static_cast<double>(per_epoch * cfg.epochs);
    const double lr0 = cfg.learning_rate, lr_min = cfg.learning_rate * 1e-4;
    std::atomic<std::size_t> processed{0};

    const std::size_t nthreads = std::min(cfg.threads, stream.sentences.size());
    std::vector<Rng> rngs;
    for (std::size_t t = 0; t < nthreads; ++t) rngs.emplace_back(derive_seed(cfg.seed, "sgns/worker/" + std::to_string(t)));

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<double> loss_sum(nthreads, 0.0);
        std::vector<std::size_t> loss_n(nthreads, 0);
        auto work = [&](std::size_t t) {
            SgnsWorkspace ws;
            Rng& rng = rngs[t];
            const std::size_t begin = stream.sentences.size() * t / nthreads;
            const std::size_t end = stream.sentences.size() * (t + 1) / nthreads;
            std::vector<TokenId> negs(cfg.negatives);
            for (std::size_t s = begin; s < end; ++s) {
                const auto& sent = stream.sentences[s];
                const double done = static_cast<double>(processed.load(std::memory_order_relaxed));
                const double lr = std::max(lr_min, lr0 - (lr0 - lr_min) * done / total);
                for_each_pair(sent, cfg.window, cfg.method, [&](std::span<const TokenId> in, TokenId target) {
                    for (auto& n : negs) {
                        do {
                            n = noise.sample(rng);
                        } while (n == target);
                    }
                    loss_sum[t] += sgns_step(W, C, in, target, negs, lr, ws);
                    ++loss_n[t];
                });
                processed.fetch_add(sent.size(), std::memory_order_relaxed);
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
            double s = 0.0;
            std::size_t n = 0;
            for (std::size_t t = 0; t < nthreads; ++t) {
                s += loss_sum[t];
                n += loss_n[t];
            }
            log->epoch_loss.push_back(n ? s / static_cast<double>(n) : 0.0);
        }
    }
    return DualEmbedding(vocab, std::move(W), std::move(C), sgns_metadata(cfg));
}

}  // namespace dualspace
