#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "dualspace/evaluation.hpp"
#include "oracles.hpp"

using namespace dualspace;
namespace fs = std::filesystem;

namespace {

std::string write_temp(const std::string& name, const std::string& text) {
    const auto p = fs::temp_directory_path() / ("ds_eval_" + name);
    std::ofstream(p, std::ios::binary) << text;
    return p.string();
}

DualEmbedding from_rows(const std::vector<std::string>& toks, const std::vector<std::vector<float>>& w,
                        const std::vector<std::vector<float>>& c) {
    const std::size_t n = toks.size(), d = w[0].size();
    Matrix<float> W(n, d), C(n, d);
    std::vector<std::pair<std::string, std::uint64_t>> entries;
    for (std::size_t i = 0; i < n; ++i) {
        entries.emplace_back(toks[i], n - i);
        for (std::size_t k = 0; k < d; ++k) {
            W(i, k) = w[i][k];
            C(i, k) = c[i][k];
        }
    }
    return DualEmbedding(Vocabulary::from_entries(entries, 100), std::move(W), std::move(C));
}

std::string expect_error(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.what();
    }
    ADD_FAILURE() << "no error";
    return "";
}

}  // namespace

// ---- parsers -------------------------------------------------------------

TEST(ParseSimilarity, CanonicalRows) {
    auto pairs = parse_similarity(write_temp("sim.tsv", "coast\tshore\t9.11\ncoast\thill\t4.38\n"));
    ASSERT_EQ(pairs.size(), 2u);
    EXPECT_EQ(pairs[0].w1, "coast");
    EXPECT_EQ(pairs[0].w2, "shore");
    EXPECT_EQ(pairs[0].gold, 9.11);
    EXPECT_EQ(pairs[1].gold, 4.38);
}

TEST(ParseSimilarity, EmptyFileIsError) {
    EXPECT_NE(expect_error([] { parse_similarity(write_temp("empty.tsv", "")); }).find("no pairs"), std::string::npos);
}

TEST(ParseSimilarity, MalformedLineReportsLineNumber) {
    auto msg = expect_error([] { parse_similarity(write_temp("bad.tsv", "# c\na\tb\t1\na b 2\n")); });
    EXPECT_NE(msg.find(":3:"), std::string::npos) << msg;
}

TEST(ParseSimilarity, TokensNormalized) {
    auto pairs = parse_similarity(write_temp("case.tsv", "Coast\tSHORE\t1\n"));
    EXPECT_EQ(pairs[0].w1, "coast");
    EXPECT_EQ(pairs[0].w2, "shore");
}

TEST(ParseAssociation, PrunesWeakResponses) {
    auto sets = parse_association(write_temp("assoc1.tsv", "c\tr1\t0.30\nc\tr2\t0.09\n"));
    ASSERT_EQ(sets.size(), 1u);
    EXPECT_EQ(sets[0].cue, "c");
    EXPECT_EQ(sets[0].responses, (std::map<std::string, double>{{"r1", 0.30}}));
}

TEST(ParseAssociation, ZeroThresholdKeepsAll) {
    auto sets = parse_association(write_temp("assoc2.tsv", "c\tr1\t0.30\nc\tr2\t0.09\n"), 0.0);
    EXPECT_EQ(sets[0].responses.size(), 2u);
}

TEST(ParseAssociation, GroupsByCue) {
    auto sets = parse_association(write_temp("assoc3.tsv", "x\ta\t0.5\ny\tb\t0.4\nx\tc\t0.2\n"));
    ASSERT_EQ(sets.size(), 2u);
    EXPECT_EQ(sets[0].cue, "x");
    EXPECT_EQ(sets[0].responses.size(), 2u);
    EXPECT_EQ(sets[1].cue, "y");
    EXPECT_EQ(sets[1].responses.size(), 1u);
}

TEST(ParseAssociation, CueWithOnlyWeakResponsesDropped) {
    auto sets = parse_association(write_temp("assoc4.tsv", "x\ta\t0.5\ny\tb\t0.05\n"));
    ASSERT_EQ(sets.size(), 1u);
    EXPECT_EQ(sets[0].cue, "x");
}

TEST(ParseAssociation, StrengthOutOfRangeIsError) {
    EXPECT_THROW(parse_association(write_temp("assoc5.tsv", "x\ta\t1.5\n")), Error);
    EXPECT_THROW(parse_association(write_temp("assoc6.tsv", "x\ta\t-0.1\n")), Error);
    EXPECT_THROW(parse_association(write_temp("assoc7.tsv", "x\ta\n")), Error);
}

TEST(ParseAnalogy, GoogleFormat) {
    auto qs = parse_analogy_google(
        write_temp("google.txt", ": capital-common-countries\nAthens Greece Baghdad Iraq\n: family\nboy girl son daughter\n"));
    ASSERT_EQ(qs.size(), 2u);
    EXPECT_EQ(qs[0], (AnalogyQuestion{"athens", "greece", "baghdad", "iraq", "capital-common-countries"}));
    EXPECT_EQ(qs[1].category, "family");
}

TEST(ParseAnalogy, ArityError) {
    auto msg = expect_error([] { parse_analogy_google(write_temp("google_bad.txt", ": x\na b c d\na b c\n")); });
    EXPECT_NE(msg.find(":3:"), std::string::npos) << msg;
}

TEST(ParseAnalogy, TsvAndAutoDetect) {
    const auto tsv = write_temp("an.tsv", "a\tb\tc\td\tcat1\ne\tf\tg\th\n");
    auto qs = parse_analogy_tsv(tsv);
    ASSERT_EQ(qs.size(), 2u);
    EXPECT_EQ(qs[0].category, "cat1");
    EXPECT_EQ(parse_analogy(tsv), qs);
    const auto g = write_temp("an.txt", ": sec\nA B C D\n");
    EXPECT_EQ(parse_analogy(g)[0].category, "sec");
}

TEST(ParseBats, SkipsInflectionalAndTakesFirstAnswer) {
    const auto dir = fs::temp_directory_path() / "ds_bats";
    fs::remove_all(dir);
    fs::create_directories(dir / "1_Inflectional_morphology");
    fs::create_directories(dir / "2_Derivational_morphology");
    std::ofstream(dir / "1_Inflectional_morphology" / "I01 [noun - plural_reg].txt") << "cat\tcats\ndog\tdogs\n";
    std::ofstream(dir / "2_Derivational_morphology" / "D01 [noun+less_reg].txt") << "hope\thopeless\nhome\thomeless/houseless\n";
    auto subs = parse_bats_dir(dir.string());
    ASSERT_EQ(subs.size(), 1u);
    EXPECT_EQ(subs[0].name, "D01 [noun+less_reg]");
    EXPECT_EQ(subs[0].pairs[1], (std::pair<std::string, std::string>{"home", "homeless"}));
}

TEST(BatsJoin, TwoPairsUseEachOther) {
    AnalogySubclass s{"x", {{"a", "a2"}, {"b", "b2"}}};
    auto qs = bats_join({s}, 1);
    ASSERT_EQ(qs.size(), 2u);
    EXPECT_EQ(qs[0], (AnalogyQuestion{"a", "a2", "b", "b2", "x"}));
    EXPECT_EQ(qs[1], (AnalogyQuestion{"b", "b2", "a", "a2", "x"}));
}

TEST(BatsJoin, DeterministicDistinctPartners) {
    AnalogySubclass s{"y", {{"a", "1"}, {"b", "2"}, {"c", "3"}}};
    auto q1 = bats_join({s}, 5), q2 = bats_join({s}, 5);
    EXPECT_EQ(q1, q2);
    ASSERT_EQ(q1.size(), 3u);
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_EQ(q1[k].a, s.pairs[k].first);
        EXPECT_NE(q1[k].b, q1[k].a);
    }
    // replay the seeded draws
    Rng rng(derive_seed(5, "bats/y"));
    for (std::size_t k = 0; k < 3; ++k) {
        auto p = static_cast<std::size_t>(rng.below(2));
        if (p >= k) ++p;
        EXPECT_EQ(q1[k].b, s.pairs[p].first);
    }
}

TEST(BatsJoin, SmallSubclassSkipped) {
    set_quiet(true);
    auto qs = bats_join({AnalogySubclass{"solo", {{"a", "b"}}}, AnalogySubclass{"duo", {{"c", "d"}, {"e", "f"}}}}, 1);
    set_quiet(false);
    EXPECT_EQ(qs.size(), 2u);
}

// ---- pearson -------------------------------------------------------------

TEST(Pearson, PerfectAndInverse) {
    std::vector<double> x{1, 5, 2, 8};
    std::vector<double> neg{-1, -5, -2, -8};
    EXPECT_DOUBLE_EQ(pearson(x, x), 1.0);
    EXPECT_DOUBLE_EQ(pearson(x, neg), -1.0);
}

TEST(Pearson, HandValue) { EXPECT_NEAR(pearson({1, 2, 3}, {1, 2, 4}), 9.0 / std::sqrt(84.0), 1e-15); }

TEST(Pearson, ZeroVariance) {
    auto msg = expect_error([] { pearson({1, 1, 1}, {1, 2, 3}); });
    EXPECT_NE(msg.find("zero variance"), std::string::npos);
}

TEST(Pearson, MatchesClosedFormOracle) {
    std::mt19937_64 gen(21);
    std::normal_distribution<double> g;
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 2 + gen() % 60;
        std::vector<double> x(n), y(n);
        for (std::size_t k = 0; k < n; ++k) {
            x[k] = g(gen);
            y[k] = 0.5 * x[k] + g(gen);
        }
        EXPECT_NEAR(pearson(x, y), oracle::pearson_closed_form(x, y), 1e-12);
    }
}

TEST(Pearson, AffineInvariance) {
    std::mt19937_64 gen(22);
    std::normal_distribution<double> g;
    for (int t = 0; t < 50; ++t) {
        std::vector<double> x(20), y(20), ax(20);
        const double a = std::exp(g(gen)), b = 3 * g(gen);
        for (int k = 0; k < 20; ++k) {
            x[k] = g(gen);
            y[k] = x[k] + g(gen);
            ax[k] = a * x[k] + b;
        }
        EXPECT_NEAR(pearson(ax, y), pearson(x, y), 1e-12);
    }
}

// ---- evaluators ----------------------------------------------------------

TEST(EvalSimilarity, GoldEqualToCosineGivesOne) {
    auto e = oracle::random_embedding(20, 5, 30);
    std::vector<SimilarityPair> pairs;
    for (int k = 0; k < 10; ++k) {
        const std::string a = "w" + std::to_string(k), b = "w" + std::to_string(k + 10);
        pairs.push_back({a, b, oracle::plain_cosine(oracle::space_row(e, Space::W, k), oracle::space_row(e, Space::W, k + 10))});
    }
    EXPECT_NEAR(eval_similarity(e, CompareMethod::WW, pairs).value, 1.0, 1e-12);
}

TEST(EvalSimilarity, ClosedFormOnHandBuiltEmbedding) {
    // angles 0, 20, 45, 70, 85 degrees from w0; gold monotone but nonlinear
    std::vector<std::string> toks{"w0", "w1", "w2", "w3", "w4", "w5"};
    std::vector<std::vector<float>> rows{{1, 0}};
    for (double deg : {0.0, 20.0, 45.0, 70.0, 85.0}) {
        const double r = deg * M_PI / 180.0;
        rows.push_back({static_cast<float>(std::cos(r)), static_cast<float>(std::sin(r))});
    }
    auto e = from_rows(toks, rows, rows);
    std::vector<SimilarityPair> pairs;
    std::vector<double> gold{10, 9, 5, 1, 0.5}, cos;
    for (int k = 0; k < 5; ++k) {
        pairs.push_back({"w0", toks[k + 1], gold[k]});
        cos.push_back(oracle::plain_cosine(oracle::space_row(e, Space::W, 0), oracle::space_row(e, Space::W, k + 1)));
    }
    auto s = eval_similarity(e, CompareMethod::WW, pairs);
    EXPECT_NEAR(s.value, oracle::pearson_closed_form(cos, gold), 1e-12);
    EXPECT_LT(s.value, 1.0);
    EXPECT_GT(s.value, 0.9);
}

TEST(EvalSimilarity, AsymmetricUsesCueThenCandidateSpace) {
    auto e = oracle::random_embedding(12, 4, 31);
    std::vector<SimilarityPair> pairs;
    std::vector<double> cos, gold;
    for (int k = 0; k < 6; ++k) {
        pairs.push_back({"w" + std::to_string(k), "w" + std::to_string(k + 6), static_cast<double>(k * k)});
        cos.push_back(oracle::plain_cosine(oracle::space_row(e, Space::W, k), oracle::space_row(e, Space::C, k + 6)));
        gold.push_back(k * k);
    }
    EXPECT_NEAR(eval_similarity(e, CompareMethod::WC, pairs).value, oracle::pearson_closed_form(cos, gold), 1e-12);
}

TEST(EvalSimilarity, OovSkippedAndCounted) {
    auto e = oracle::random_embedding(6, 3, 32);
    std::vector<SimilarityPair> pairs{{"w0", "w1", 1}, {"w2", "w3", 2}, {"w4", "zzz", 3}, {"qqq", "w5", 4}, {"w1", "w4", 0}};
    auto s = eval_similarity(e, CompareMethod::WW, pairs);
    EXPECT_EQ(s.aux.at("n_skipped_oov"), 2);
    EXPECT_EQ(s.aux.at("n_evaluated"), 3);
    EXPECT_TRUE(std::isfinite(s.value));
}

TEST(EvalSimilarity, FewerThanTwoUsablePairsIsError) {
    auto e = oracle::random_embedding(4, 3, 33);
    EXPECT_THROW(eval_similarity(e, CompareMethod::WW, {{"w0", "w1", 1}, {"x", "y", 2}}), Error);
}

TEST(EvalAssociation, PartialOverlap) {
    // cue w0; w1 nearest, w2 far
    auto e = from_rows({"c", "a", "b", "d"}, {{1, 0}, {0.9f, 0.1f}, {-1, 0.1f}, {0.5f, 0.5f}},
                       {{1, 0}, {0.9f, 0.1f}, {-1, 0.1f}, {0.5f, 0.5f}});
    std::vector<CueResponseSet> sets{{"c", {{"a", 0.5}, {"b", 0.3}}}};
    auto s = eval_association(e, CompareMethod::WW, sets, 1);
    EXPECT_EQ(s.aux.at("hit_ratio"), 1.0);
    EXPECT_EQ(s.aux.at("coverage"), 0.5);
    EXPECT_EQ(s.value, 0.75);
}

TEST(EvalAssociation, PerfectRetrieval) {
    auto e = oracle::random_embedding(10, 4, 34);
    std::vector<CueResponseSet> sets;
    for (TokenId c = 0; c < 10; c += 3) {
        auto top = nearest(e, CompareMethod::WC, e.vocab().token(c), 3);
        CueResponseSet s{e.vocab().token(c), {}};
        for (const auto& n : top) s.responses[n.token] = 0.5;
        sets.push_back(s);
    }
    auto s = eval_association(e, CompareMethod::WC, sets, 3);
    EXPECT_EQ(s.value, 1.0);
    EXPECT_EQ(s.aux.at("hit_ratio"), 1.0);
    EXPECT_EQ(s.aux.at("coverage"), 1.0);
}

TEST(EvalAssociation, MonotoneInN) {
    auto e = oracle::random_embedding(80, 6, 35);
    std::mt19937_64 gen(36);
    std::vector<CueResponseSet> sets;
    for (int c = 0; c < 30; ++c) {
        CueResponseSet s{"w" + std::to_string(gen() % 80), {}};
        for (int r = 0; r < 4; ++r) s.responses["w" + std::to_string(gen() % 80)] = 0.2;
        sets.push_back(s);
    }
    for (auto cm : kAllCompareMethods)
        EXPECT_GE(eval_association(e, cm, sets, 20).value, eval_association(e, cm, sets, 10).value);
}

TEST(EvalAssociation, AllCuesOovIsError) {
    auto e = oracle::random_embedding(5, 3, 37);
    EXPECT_THROW(eval_association(e, CompareMethod::WW, {{"nope", {{"w1", 0.5}}}}), Error);
}

TEST(ThreeCosMul, RawFormula) {
    EXPECT_DOUBLE_EQ(three_cos_mul_score(1.0, 1.0, 0.0, 0.001), 1000.0);
    EXPECT_NEAR(three_cos_mul_score(0.5, 0.5, 0.5, 0.001), 0.25 / 0.501, 1e-15);
    EXPECT_NEAR(three_cos_mul_score(0.5, 0.5, 0.5, 0.001), 0.4990, 1e-4);
    EXPECT_EQ(shift_cosine(-1.0), 0.0);
    EXPECT_EQ(shift_cosine(1.0), 1.0);
}

namespace {

// Exact parallelogram: man/woman/king/queen plus distractors.
DualEmbedding parallelogram() {
    std::vector<std::vector<float>> rows{{1, 0, 0, 0.1f}, {1, 1, 0, 0.1f}, {0, 0, 1, 0.1f}, {0, 1, 1, 0.1f},
                                         {-1, 0, 0, 1},   {0, -1, -1, 1}};
    return from_rows({"man", "woman", "king", "queen", "apple", "stone"}, rows, rows);
}

}  // namespace

TEST(ThreeCosMul, ParallelogramAnsweredFirst) {
    auto e = parallelogram();
    AnalogyQuestion q{"man", "woman", "king", "queen", ""};
    auto ranked = three_cos_mul(e, CompareMethod::WW, q, 3);
    ASSERT_FALSE(ranked.empty());
    EXPECT_EQ(ranked[0].token, "queen");
    for (const auto& n : ranked) {
        EXPECT_NE(n.token, "man");
        EXPECT_NE(n.token, "woman");
        EXPECT_NE(n.token, "king");
    }
    auto s = eval_analogy(e, CompareMethod::WW, {q, {"woman", "man", "queen", "king", ""}});
    EXPECT_EQ(s.value, 1.0);
    std::vector<TokenId> got;
    for (const auto& n : three_cos_mul(e, CompareMethod::WW, q, 10)) got.push_back(n.id);
    EXPECT_EQ(got, oracle::scan_three_cos_mul(e, CompareMethod::WW, 0, 1, 2, 10));
}

TEST(EvalAnalogy, TopNBoundary) {
    auto e = oracle::random_embedding(40, 5, 40);
    AnalogyQuestion q{"w0", "w1", "w2", "", ""};
    auto ranked = three_cos_mul(e, CompareMethod::WW, q, 10);
    q.b_star = ranked[2].token;
    EXPECT_EQ(eval_analogy(e, CompareMethod::WW, {q}, 3).value, 1.0);
    q.b_star = ranked[3].token;
    EXPECT_EQ(eval_analogy(e, CompareMethod::WW, {q}, 3).value, 0.0);
}

TEST(EvalAnalogy, OovSkippedAndZeroAnswerableIsError) {
    auto e = parallelogram();
    auto s = eval_analogy(e, CompareMethod::WW,
                          {{"man", "woman", "king", "queen", ""}, {"man", "woman", "prince", "princess", ""}});
    EXPECT_EQ(s.aux.at("n_skipped_oov"), 1);
    EXPECT_EQ(s.aux.at("n_evaluated"), 1);
    EXPECT_THROW(eval_analogy(e, CompareMethod::WW, {{"x", "y", "z", "w", ""}}), Error);
}

TEST(EvalAnalogy, ThreadedEqualsSerial) {
    auto e = oracle::random_embedding(200, 8, 41);
    std::mt19937_64 gen(42);
    std::vector<AnalogyQuestion> qs;
    for (int k = 0; k < 60; ++k) {
        auto t = [&] { return "w" + std::to_string(gen() % 200); };
        qs.push_back({t(), t(), t(), t(), ""});
    }
    std::erase_if(qs, [](const AnalogyQuestion& q) { return q.a == q.a_star || q.a == q.b || q.a_star == q.b; });
    EXPECT_EQ(eval_analogy(e, CompareMethod::CW, qs, 3, {}, 1), eval_analogy(e, CompareMethod::CW, qs, 3, {}, 4));
}

TEST(ThreeCosMul, MatchesLoopOracle) {
    auto e = oracle::random_embedding(300, 10, 43);
    std::mt19937_64 gen(44);
    for (int t = 0; t < 20; ++t) {
        const auto a = static_cast<TokenId>(gen() % 300), as = static_cast<TokenId>(gen() % 300),
                   b = static_cast<TokenId>(gen() % 300);
        if (a == as || a == b || as == b) continue;
        const auto cm = kAllCompareMethods[gen() % 6];
        AnalogyQuestion q{e.vocab().token(a), e.vocab().token(as), e.vocab().token(b), "", ""};
        std::vector<TokenId> got;
        for (const auto& n : three_cos_mul(e, cm, q, 10)) got.push_back(n.id);
        EXPECT_EQ(got, oracle::scan_three_cos_mul(e, cm, a, as, b, 10));
    }
}

TEST(Evaluators, AaEqualsSsExactly) {
    auto e = oracle::random_embedding(60, 6, 45);
    std::vector<SimilarityPair> sim;
    std::vector<CueResponseSet> assoc;
    std::vector<AnalogyQuestion> an;
    std::mt19937_64 gen(46);
    auto t = [&] { return "w" + std::to_string(gen() % 60); };
    for (int k = 0; k < 20; ++k) sim.push_back({t(), t(), static_cast<double>(gen() % 10)});
    for (int k = 0; k < 10; ++k) assoc.push_back({t(), {{t(), 0.3}, {t(), 0.2}}});
    for (int k = 0; k < 20; ++k) an.push_back({"w" + std::to_string(k), "w" + std::to_string(k + 20), "w" + std::to_string(k + 40), t(), ""});
    EXPECT_EQ(eval_similarity(e, CompareMethod::AA, sim), eval_similarity(e, CompareMethod::SS, sim));
    EXPECT_EQ(eval_association(e, CompareMethod::AA, assoc), eval_association(e, CompareMethod::SS, assoc));
    EXPECT_EQ(eval_analogy(e, CompareMethod::AA, an), eval_analogy(e, CompareMethod::SS, an));
}

TEST(Evaluators, Pure) {
    auto e = oracle::random_embedding(30, 4, 47);
    std::vector<SimilarityPair> sim{{"w0", "w1", 1}, {"w2", "w3", 2}, {"w4", "w5", 0}};
    EXPECT_EQ(eval_similarity(e, CompareMethod::CC, sim), eval_similarity(e, CompareMethod::CC, sim));
}

TEST(SampleQuestions, DeterministicSubset) {
    std::vector<AnalogyQuestion> qs;
    for (int k = 0; k < 50; ++k) qs.push_back({"a" + std::to_string(k), "b", "c", "d", ""});
    auto s1 = sample_questions(qs, 10, 3), s2 = sample_questions(qs, 10, 3);
    EXPECT_EQ(s1, s2);
    EXPECT_EQ(s1.size(), 10u);
    EXPECT_EQ(sample_questions(qs, 100, 3), qs);
}

TEST(TaskScore, Json) {
    TaskScore s{Task::association, 0.25, {{"hit_ratio", 0.5}}};
    auto j = s.to_json();
    EXPECT_EQ(j["task"], "association");
    EXPECT_EQ(j["value"], 0.25);
    EXPECT_EQ(j["aux"]["hit_ratio"], 0.5);
}
