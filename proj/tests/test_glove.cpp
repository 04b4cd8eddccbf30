#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "dualspace/glove.hpp"
#include "oracles.hpp"

using namespace dualspace;

namespace {

SentenceStream abc() { return SentenceStream{{{0, 1, 2}}}; }

}  // namespace

TEST(Cooc, UnweightedWindowTwo) {
    auto m = accumulate_cooc(abc(), 3, 2, false);
    EXPECT_EQ(m.at(0, 1), 1.0);
    EXPECT_EQ(m.at(1, 0), 1.0);
    EXPECT_EQ(m.at(0, 2), 1.0);
    EXPECT_EQ(m.at(2, 0), 1.0);
    EXPECT_EQ(m.at(1, 2), 1.0);
    EXPECT_EQ(m.at(2, 1), 1.0);
    EXPECT_EQ(m.entries.size(), 6u);
}

TEST(Cooc, DistanceWeighted) {
    auto m = accumulate_cooc(abc(), 3, 2, true);
    EXPECT_EQ(m.at(0, 2), 0.5);
    EXPECT_EQ(m.at(2, 0), 0.5);
    EXPECT_EQ(m.at(0, 1), 1.0);
    EXPECT_EQ(m.at(1, 2), 1.0);
}

TEST(Cooc, EmptyStream) { EXPECT_TRUE(accumulate_cooc(SentenceStream{}, 3, 5, true).empty()); }

TEST(Cooc, SymmetricAndPositive) {
    auto sents = oracle::two_cluster_corpus(3000, 5);
    auto v = build_vocab(sents, 1);
    auto m = accumulate_cooc(encode(sents, v), v.size(), 4, true);
    for (const auto& e : m.entries) {
        EXPECT_GT(e.x, 0.0);
        EXPECT_EQ(m.at(e.j, e.i), e.x);
    }
}

TEST(Cooc, ReversedSentencesGiveIdenticalMatrix) {
    auto sents = oracle::two_cluster_corpus(3000, 6);
    auto v = build_vocab(sents, 1);
    auto s = encode(sents, v);
    auto r = s;
    for (auto& sent : r.sentences) std::reverse(sent.begin(), sent.end());
    std::reverse(r.sentences.begin(), r.sentences.end());
    EXPECT_EQ(accumulate_cooc(s, v.size(), 5, true), accumulate_cooc(r, v.size(), 5, true));
    EXPECT_EQ(accumulate_cooc(s, v.size(), 5, false), accumulate_cooc(r, v.size(), 5, false));
}

TEST(Cooc, ShardedEqualsSerial) {
    auto sents = oracle::two_cluster_corpus(5000, 8);
    auto v = build_vocab(sents, 1);
    auto s = encode(sents, v);
    EXPECT_EQ(accumulate_cooc(s, v.size(), 5, true, 1), accumulate_cooc(s, v.size(), 5, true, 4));
}

TEST(Cooc, PersistenceRoundTrip) {
    auto m = accumulate_cooc(SentenceStream{{{0, 1, 2, 0}, {2, 1}}}, 3, 3, true);
    const auto path = (std::filesystem::temp_directory_path() / "ds_cooc.bin").string();
    save_cooc(path, m);
    EXPECT_EQ(load_cooc(path), m);
}

TEST(WeightFn, Values) {
    EXPECT_EQ(weight_fn(100.0, 100.0, 0.75), 1.0);
    EXPECT_EQ(weight_fn(0.0), 0.0);
    EXPECT_NEAR(weight_fn(50.0, 100.0, 0.75), 0.594603558, 1e-9);
    EXPECT_NEAR(weight_fn(50.0, 100.0, 0.75), std::pow(0.5, 0.75), 1e-15);
}

TEST(WeightFn, MonotoneClampedContinuous) {
    double prev = 0.0;
    for (double x = 0.0; x <= 300.0; x += 0.37) {
        const double f = weight_fn(x);
        EXPECT_GE(f, prev);
        EXPECT_GE(f, 0.0);
        EXPECT_LE(f, 1.0);
        prev = f;
    }
    EXPECT_NEAR(weight_fn(100.0 - 1e-9), 1.0, 1e-10);
}

TEST(GloveLoss, ZeroResidual) {
    GloveParams<double> p(2, 2);
    p.W(0, 0) = 1.0;
    p.C(1, 0) = 0.5;
    p.b[0] = 0.25;
    p.bt[1] = std::log(7.0) - 0.75;
    EXPECT_NEAR(glove_loss(p, 0, 1, 7.0), 0.0, 1e-24);
}

TEST(GloveLoss, CountOneWithZeroParams) {
    GloveParams<double> p(2, 3);
    EXPECT_EQ(glove_loss(p, 0, 1, 1.0), 0.0);
}

TEST(GloveLoss, ExpSquaredWithZeroParams) {
    GloveParams<double> p(2, 3);
    const double x = std::exp(2.0);
    const double expected = std::pow(x / 100.0, 0.75) * 4.0;
    EXPECT_NEAR(glove_loss(p, 0, 1, x), expected, 1e-12);
    EXPECT_NEAR(glove_loss(p, 0, 1, x), 0.566894, 1e-6);
}

TEST(GloveLoss, NonPositiveCountIsError) {
    GloveParams<double> p(2, 3);
    EXPECT_THROW(glove_loss(p, 0, 1, 0.0), Error);
    EXPECT_THROW(glove_loss(p, 0, 1, -1.0), Error);
}

TEST(GloveGradient, MatchesFiniteDifferences) {
    for (std::uint64_t s = 1; s <= 25; ++s) EXPECT_LT(oracle::glove_gradient_error(s), 1e-4) << s;
}

TEST(GloveStep, AdaGradUpdateFromFreshAccumulators) {
    GloveParams<double> p(3, 2);
    p.W(0, 0) = 0.3;
    p.W(0, 1) = -0.2;
    p.C(2, 0) = 0.1;
    p.C(2, 1) = 0.4;
    p.b[0] = 0.05;
    auto before = p;
    GloveConfig cfg;
    const double x = 12.0;
    const auto g = glove_gradient(p, 0, 2, x);
    const double loss = glove_step(p, 0, 2, x, cfg);
    EXPECT_NEAR(loss, glove_loss(before, 0, 2, x), 1e-15);
    for (std::size_t k = 0; k < 2; ++k) {
        EXPECT_NEAR(p.W(0, k), before.W(0, k) - cfg.learning_rate * g.w[k] / std::sqrt(1 + g.w[k] * g.w[k]), 1e-15);
        EXPECT_NEAR(p.C(2, k), before.C(2, k) - cfg.learning_rate * g.c[k] / std::sqrt(1 + g.c[k] * g.c[k]), 1e-15);
        EXPECT_GT(p.gW(0, k), 0.0);
    }
    EXPECT_NEAR(p.b[0], before.b[0] - cfg.learning_rate * g.b / std::sqrt(1 + g.b * g.b), 1e-15);
    EXPECT_NEAR(p.bt[2], before.bt[2] - cfg.learning_rate * g.bt / std::sqrt(1 + g.bt * g.bt), 1e-15);
}

TEST(GloveConfig, Validation) {
    GloveConfig c;
    c.alpha = 0.0;
    EXPECT_THROW(c.validate(), UsageError);
    c.alpha = 1.5;
    EXPECT_THROW(c.validate(), UsageError);
    c = GloveConfig{};
    c.x_max = 0.0;
    EXPECT_THROW(c.validate(), UsageError);
}

namespace {

struct Fixture {
    Vocabulary vocab;
    CoocMatrix cooc;
};

Fixture cluster_fixture(std::size_t tokens) {
    auto sents = oracle::two_cluster_corpus(tokens, 13);
    auto v = build_vocab(sents, 1);
    return {v, accumulate_cooc(encode(sents, v), v.size(), 5, true)};
}

}  // namespace

TEST(TrainGlove, ZeroEpochsEqualsInitialization) {
    auto f = cluster_fixture(500);
    GloveConfig cfg;
    cfg.dim = 6;
    cfg.epochs = 0;
    auto emb = train_glove(f.cooc, f.vocab, cfg);
    auto p = glove_initial_params(f.vocab.size(), cfg);
    EXPECT_EQ(emb.W(), p.W);
    EXPECT_EQ(emb.C(), p.C);
    EXPECT_NE(p.W, p.C);
}

TEST(TrainGlove, LossDecreasesAndDeterministic) {
    auto f = cluster_fixture(5000);
    GloveConfig cfg;
    cfg.dim = 10;
    cfg.epochs = 5;
    TrainingLog log;
    auto a = train_glove(f.cooc, f.vocab, cfg, &log);
    auto b = train_glove(f.cooc, f.vocab, cfg);
    ASSERT_EQ(log.epoch_loss.size(), 5u);
    EXPECT_LT(log.epoch_loss.back(), log.epoch_loss.front());
    EXPECT_EQ(a.W(), b.W());
    EXPECT_EQ(a.C(), b.C());
    EXPECT_EQ(a.word_bias(), b.word_bias());
    EXPECT_EQ(a.word_bias().size(), f.vocab.size());
}

TEST(TrainGlove, EmptyMatrixIsError) {
    auto f = cluster_fixture(200);
    CoocMatrix empty;
    empty.vocab_size = f.vocab.size();
    EXPECT_THROW(train_glove(empty, f.vocab, GloveConfig{}), Error);
}

TEST(TrainGlove, ParallelModeStaysFinite) {
    auto f = cluster_fixture(5000);
    GloveConfig cfg;
    cfg.dim = 10;
    cfg.epochs = 3;
    cfg.threads = 4;
    auto emb = train_glove(f.cooc, f.vocab, cfg);
    for (float x : emb.W().data()) ASSERT_TRUE(std::isfinite(x));
}
