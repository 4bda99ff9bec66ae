#include <gtest/gtest.h>

#include <cmath>
#include <regex>

#include "generators.hpp"
#include "hfphen/features.hpp"

using namespace hfphen;
using namespace hfphen::testing;

namespace {

TokenSeq toks(std::vector<std::string> t) {
    TokenSeq s;
    for (std::size_t i = 0; i < t.size(); ++i) s.offsets.emplace_back(2 * i, 2 * i + 1);
    s.tokens = std::move(t);
    return s;
}

std::vector<TokenSeq> random_corpus(Rng& rng, std::size_t n) {
    std::vector<TokenSeq> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(normalize(random_text_with_mentions(rng)));
    return out;
}

}  // namespace

TEST(Normalize, Examples) {
    const auto t = normalize("LVEF 19%.");
    EXPECT_EQ(t.tokens, (std::vector<std::string>{"lvef", "NUMBER"}));
    EXPECT_EQ(t.offsets[0], (std::pair<std::size_t, std::size_t>{0, 4}));
    EXPECT_EQ(t.offsets[1], (std::pair<std::size_t, std::size_t>{5, 7}));
    EXPECT_EQ(normalize("").size(), 0u);
    EXPECT_EQ(normalize("matig-slechte functie").tokens, (std::vector<std::string>{"matigslechte", "functie"}));
    EXPECT_EQ(normalize("EF 3,5 - 40.0").tokens, (std::vector<std::string>{"ef", "NUMBER", "NUMBER"}));
    EXPECT_EQ(normalize("Patiënt (ÉÉN)").tokens, (std::vector<std::string>{"patiënt", "één"}));
}

TEST(Normalize, IdempotentOnDetokenizedOutput) {
    Rng rng(1);
    for (int i = 0; i < 500; ++i) {
        const auto a = normalize(random_text_with_mentions(rng));
        const auto b = normalize(detokenize(a));
        EXPECT_EQ(a.tokens, b.tokens);
    }
}

TEST(Normalize, TokenInvariants) {
    Rng rng(2);
    const std::regex numeric(R"(^[0-9]+([.,][0-9]+)?$)");
    for (int i = 0; i < 500; ++i) {
        const std::string text = random_text_with_mentions(rng);
        const auto cps = utf8_decode(text);
        const auto t = normalize(text);
        for (std::size_t k = 0; k < t.size(); ++k) {
            EXPECT_FALSE(std::regex_match(t.tokens[k], numeric)) << t.tokens[k];
            for (char32_t c : utf8_decode(t.tokens[k])) EXPECT_FALSE(is_punct(c));
            EXPECT_LT(t.offsets[k].first, t.offsets[k].second);
            EXPECT_LE(t.offsets[k].second, cps.size());
            if (k) EXPECT_LE(t.offsets[k - 1].second, t.offsets[k].first);
        }
    }
}

TEST(Vocabulary, SlidingWindow) {
    const std::vector<TokenSeq> corpus = {toks({"a", "b", "c"})};
    const auto v = build_vocabulary(corpus, 2, uniform_thresholds(2, 1));
    EXPECT_EQ(v.ngrams(), (std::vector<std::string>{"a", "b", "c", "a b", "b c"}));
    for (std::size_t id = 0; id < v.size(); ++id) EXPECT_EQ(v.entry(id).id, id);
}

TEST(Vocabulary, ThresholdAndErrors) {
    const std::vector<TokenSeq> corpus = {toks({"a", "b", "b"})};
    const auto v = build_vocabulary(corpus, 1, uniform_thresholds(1, 2));
    EXPECT_EQ(v.find("a"), nullptr);
    ASSERT_NE(v.find("b"), nullptr);
    EXPECT_EQ(v.find("b")->count, 2u);
    EXPECT_THROW(build_vocabulary(corpus, 0, {}), std::invalid_argument);
    EXPECT_THROW(build_vocabulary(corpus, 6, uniform_thresholds(6, 1)), std::invalid_argument);
    EXPECT_THROW(build_vocabulary(corpus, 2, uniform_thresholds(1, 1)), std::invalid_argument);
}

TEST(Vocabulary, DeterministicAcrossCallsAndJobs) {
    Rng rng(3);
    const auto corpus = random_corpus(rng, 200);
    const auto a = build_vocabulary(corpus, 3, uniform_thresholds(3, 2), 1);
    const auto b = build_vocabulary(corpus, 3, uniform_thresholds(3, 2), 1);
    const auto c = build_vocabulary(corpus, 3, uniform_thresholds(3, 2), 4);
    EXPECT_EQ(a.to_tsv(), b.to_tsv());
    EXPECT_EQ(a.to_tsv(), c.to_tsv());
    EXPECT_EQ(a.hash(), c.hash());
}

TEST(Vocabulary, MonotoneInThresholds) {
    Rng rng(4);
    const auto corpus = random_corpus(rng, 200);
    for (std::size_t k : {1, 2, 5, 20}) {
        const auto lo = build_vocabulary(corpus, 3, uniform_thresholds(3, k));
        auto th = uniform_thresholds(3, k);
        th[2] = k + 3;
        const auto hi = build_vocabulary(corpus, 3, th);
        EXPECT_LE(hi.size(), lo.size());
        for (const auto& g : hi.ngrams()) EXPECT_NE(lo.find(g), nullptr);
        for (std::size_t id = 0; id < hi.size(); ++id) EXPECT_GE(hi.entry(id).count, th.at(hi.entry(id).order));
    }
}

TEST(Vocabulary, TsvRoundTrip) {
    Rng rng(5);
    const auto corpus = random_corpus(rng, 50);
    const auto v = build_vocabulary(corpus, 2, uniform_thresholds(2, 1));
    const auto w = Vocabulary::from_tsv(v.to_tsv(), 2, uniform_thresholds(2, 1));
    EXPECT_EQ(w.to_tsv(), v.to_tsv());
    EXPECT_THROW(Vocabulary::from_tsv("0\t2\t1\ta\n", 2, uniform_thresholds(2, 1)), std::runtime_error);
    EXPECT_THROW(Vocabulary::from_tsv("1\t1\t1\ta\n", 2, uniform_thresholds(2, 1)), std::runtime_error);
}

TEST(DocNgrams, Examples) {
    const std::vector<TokenSeq> corpus = {toks({"a", "b"})};
    const auto v = build_vocabulary(corpus, 3, uniform_thresholds(3, 1));
    const auto occ = doc_ngrams(corpus[0], v);
    ASSERT_EQ(occ.size(), 3u);
    std::size_t order3 = 0;
    for (const auto& o : occ) order3 += (o.end - o.begin) == 3;
    EXPECT_EQ(order3, 0u);
    EXPECT_EQ(v.ngram(occ[1].id), "a b");
}

TEST(DocNgrams, CountsMatchIndependentScan) {
    Rng rng(6);
    const auto corpus = random_corpus(rng, 100);
    const auto v = build_vocabulary(corpus, 3, uniform_thresholds(3, 3));
    std::vector<std::size_t> via_doc(v.size(), 0);
    for (const auto& d : corpus)
        for (const auto& o : doc_ngrams(d, v)) ++via_doc[o.id];
    for (std::size_t id = 0; id < v.size(); ++id) {
        // Independent recount: split the n-gram and compare token by token.
        const auto parts = split(v.ngram(id), ' ');
        std::size_t n = 0;
        for (const auto& d : corpus)
            for (std::size_t i = 0; i + parts.size() <= d.size(); ++i)
                n += std::equal(parts.begin(), parts.end(), d.tokens.begin() + static_cast<std::ptrdiff_t>(i));
        EXPECT_EQ(n, v.entry(id).count) << v.ngram(id);
        EXPECT_EQ(via_doc[id], n);
    }
}

TEST(DocNgrams, RangesMapToContiguousText) {
    Rng rng(7);
    for (int it = 0; it < 100; ++it) {
        const std::string text = random_text_with_mentions(rng);
        const auto doc = normalize(text);
        const std::vector<TokenSeq> corpus = {doc};
        const auto v = build_vocabulary(corpus, 3, uniform_thresholds(3, 1));
        const auto cps = utf8_decode(text);
        for (const auto& o : doc_ngrams(doc, v)) {
            const auto [a, b] = char_span(doc, o.begin, o.end);
            ASSERT_LE(b, cps.size());
            const auto piece = normalize(utf8_encode(std::u32string_view(cps).substr(a, b - a)));
            EXPECT_EQ(join_ngram(piece.tokens), v.ngram(o.id));
        }
    }
}

TEST(Tfidf, HandComputedTable) {
    const std::vector<TokenSeq> corpus = {toks({"a", "b"}), toks({"a", "c", "c"}), toks({"a", "b", "d"})};
    const std::vector<std::string> stop;
    const auto r = tfidf_vectors(corpus, stop);
    ASSERT_EQ(r.model.terms, (std::vector<std::string>{"a", "b", "c", "d"}));
    const double ia = 1.0, ib = std::log(4.0 / 3.0) + 1, ic = std::log(2.0) + 1;
    const double expected[3][4] = {{ia, ib, 0, 0}, {ia, 0, 2 * ic, 0}, {ia, ib, 0, ic}};
    for (int i = 0; i < 3; ++i) {
        double n = 0;
        for (double x : expected[i]) n += x * x;
        n = std::sqrt(n);
        for (int j = 0; j < 4; ++j) EXPECT_NEAR(r.matrix.coeff(i, j), expected[i][j] / n, 1e-15);
    }
}

TEST(Tfidf, SingleDocumentAndStopwords) {
    const std::vector<TokenSeq> one = {toks({"de", "x", "x", "y"})};
    const auto r = tfidf_vectors(one, dutch_stopwords());
    ASSERT_EQ(r.model.terms, (std::vector<std::string>{"x", "y"}));
    EXPECT_DOUBLE_EQ(r.model.idf[0], r.model.idf[1]);
    EXPECT_NEAR(r.matrix.coeff(0, 0) / r.matrix.coeff(0, 1), 2.0, 1e-12);
    const std::vector<TokenSeq> none;
    EXPECT_THROW(tfidf_vectors(none, dutch_stopwords()), std::invalid_argument);
}

TEST(Tfidf, UbiquitousTermHasLowestIdf) {
    Rng rng(8);
    auto corpus = random_corpus(rng, 30);
    for (auto& d : corpus) d.tokens.push_back("overal");
    const std::vector<std::string> stop;
    const auto m = fit_tfidf(corpus, stop);
    const double mn = *std::min_element(m.idf.begin(), m.idf.end());
    EXPECT_EQ(m.idf[m.index.at("overal")], mn);
}
