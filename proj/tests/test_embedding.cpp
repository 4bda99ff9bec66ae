#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "fixture.hpp"
#include "hfphen/embedding.hpp"

using namespace hfphen;
using namespace hfphen::testing;

namespace {

/// Replies with a vector derived from each string, counting calls.
class FakeTransport : public EmbedTransport {
public:
    explicit FakeTransport(std::size_t dim, int failures = 0) : dim_(dim), failures_(failures) {}
    std::string post(const std::string& body) override {
        ++calls;
        if (failures_ > 0) {
            --failures_;
            throw std::runtime_error("connection refused");
        }
        nlohmann::json out = nlohmann::json::array();
        for (const auto& s : nlohmann::json::parse(body)) {
            ++strings;
            std::vector<float> v(dim_);
            for (std::size_t d = 0; d < dim_; ++d)
                v[d] = static_cast<float>(s.get<std::string>().size()) / 7.0f + static_cast<float>(d) * 0.1f;
            out.push_back(v);
        }
        return out.dump();
    }
    int calls = 0;
    int strings = 0;

private:
    std::size_t dim_;
    int failures_;
};

}  // namespace

TEST(Hashed, NormsAndDeterminism) {
    HashedEmbedder h(32, 9);
    const std::vector<std::string> g = {"a", "a", "linker kamer", "ejectiefractie"};
    const auto m = embed_batch(h, g);
    ASSERT_EQ(m.rows(), 4);
    ASSERT_EQ(m.cols(), 32);
    for (Eigen::Index i = 0; i < m.rows(); ++i) EXPECT_NEAR(m.row(i).norm(), 1.0, 1e-6);
    EXPECT_EQ(m.row(0), m.row(1));
    EXPECT_EQ(h.embed("x"), HashedEmbedder(32, 9).embed("x"));
    EXPECT_NE(h.embed("x"), HashedEmbedder(32, 10).embed("x"));
    for (float x : h.embed("")) EXPECT_EQ(x, 0.0f);
    EXPECT_THROW(HashedEmbedder(0, 1), std::invalid_argument);
}

TEST(EmbedBatch, EmptyList) {
    HashedEmbedder h(8, 1);
    const std::vector<std::string> none;
    const auto m = embed_batch(h, none);
    EXPECT_EQ(m.rows(), 0);
    EXPECT_EQ(m.cols(), 8);
}

TEST(EmbedBatch, DuplicatesComputedOnce) {
    auto t = std::make_shared<FakeTransport>(4);
    RemoteEmbedder r(4, RemoteOptions{"http://unused", 1, {}, 64, 1}, t);
    const std::vector<std::string> g = {"x", "yy", "x", "x"};
    const auto m = embed_batch(r, g);
    EXPECT_EQ(t->strings, 2);
    EXPECT_EQ(m.row(0), m.row(3));
}

TEST(Store, RoundTripIsExact) {
    const auto dir = temp_dir("store");
    HashedEmbedder h(16, 3);
    const std::vector<TokenSeq> corpus = {normalize("linker kamer functie matig goed linker kamer")};
    const auto vocab = build_vocabulary(corpus, 2, uniform_thresholds(2, 1));
    export_store(h, vocab, dir / "s.tsv");
    const auto f = import_store(dir / "s.tsv", 16);
    EXPECT_EQ(f.size(), vocab.size());
    for (const auto& g : vocab.ngrams()) {
        const auto a = h.embed(g), b = f.embed(g);
        for (std::size_t d = 0; d < 16; ++d) EXPECT_EQ(std::stof(detail::format_float(a[d])), b[d]);
    }
    EXPECT_THROW(f.embed("onbekend"), EmbeddingError);
    EXPECT_THROW(import_store(dir / "s.tsv", 8), EmbeddingError);
}

TEST(Store, FileLayout) {
    HashedEmbedder h(4, 1);
    const std::vector<std::string> g = {"a", "b", "c"};
    const auto text = store_text(h, g);
    const auto lines = split(text, '\n');
    EXPECT_EQ(lines[0], "dim=4");
    std::size_t rows = 0;
    for (std::size_t i = 1; i < lines.size(); ++i) rows += !lines[i].empty();
    EXPECT_EQ(rows, 3u);
}

TEST(Store, InconsistentRowsRejected) {
    EXPECT_THROW(FileEmbedder::parse("dim=2\na\t1,2\nb\t1\n"), EmbeddingError);
    EXPECT_THROW(FileEmbedder::parse("a\t1,2\n"), EmbeddingError);
    EXPECT_THROW(FileEmbedder::parse("dim=2\na\t1,x\n"), EmbeddingError);
}

TEST(Remote, WarmCacheMakesNoCalls) {
    const auto dir = temp_dir("remote_cache");
    const std::vector<std::string> g = {"a", "bb", "ccc", "dddd", "eeeee"};
    auto t1 = std::make_shared<FakeTransport>(3);
    RemoteEmbedder cold(3, RemoteOptions{"http://unused", 1, dir, 2, 1}, t1);
    const auto first = cold.embed_many(g);
    EXPECT_EQ(t1->calls, 3);
    auto t2 = std::make_shared<FakeTransport>(3);
    RemoteEmbedder warm(3, RemoteOptions{"http://unused", 1, dir, 2, 1}, t2);
    const auto second = warm.embed_many(g);
    EXPECT_EQ(t2->calls, 0);
    EXPECT_EQ(first, second);
}

TEST(Remote, RetriesThenFailsWithoutPoisoningCache) {
    const auto dir = temp_dir("remote_fail");
    auto t = std::make_shared<FakeTransport>(3, 5);
    RemoteEmbedder r(3, RemoteOptions{"http://unused", 1, dir, 8, 3}, t);
    const std::vector<std::string> g = {"a", "b"};
    try {
        r.embed_many(g);
        FAIL() << "expected failure";
    } catch (const EmbeddingError& e) {
        EXPECT_NE(std::string(e.what()).find("'a'"), std::string::npos);
    }
    EXPECT_EQ(t->calls, 3);
    EXPECT_TRUE(std::filesystem::is_empty(dir));

    auto ok = std::make_shared<FakeTransport>(3, 2);
    RemoteEmbedder r2(3, RemoteOptions{"http://unused", 1, dir, 8, 3}, ok);
    EXPECT_EQ(r2.embed_many(g).size(), 2u);
    EXPECT_EQ(ok->calls, 3);
}

TEST(Remote, WrongDimensionRejected) {
    auto t = std::make_shared<FakeTransport>(2);
    RemoteEmbedder r(3, RemoteOptions{"http://unused", 1, {}, 8, 1}, t);
    EXPECT_THROW(r.embed("a"), EmbeddingError);
}
