#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "gr2tex/embedding.hpp"
#include "gr2tex/retrieval.hpp"
#include "../oracles.hpp"
#include "../support.hpp"

using namespace gr2tex;

namespace {

EmbeddingVector vec(std::vector<double> v) { return EmbeddingVector(std::move(v)); }

std::set<std::size_t> oracle_buckets(const std::string& padded_ascii) {
    std::set<std::size_t> out;
    for (std::size_t i = 0; i + 3 <= padded_ascii.size(); ++i) {
        out.insert(oracle::fnv1a(padded_ascii.substr(i, 3)) % 512);
    }
    return out;
}

}  // namespace

TEST_SUITE("retrieval") {

TEST_CASE("measures by hand") {
    CHECK(cosine(vec({1, 2}), vec({1, 2})) == doctest::Approx(1.0));
    CHECK(cosine(vec({1, 0}), vec({0, 1})) == 0.0);
    CHECK(cosine(vec({1, 2}), vec({2, 1})) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(euclidean(vec({1, 2}), vec({1, 2})) == 0.0);
    CHECK(euclidean(vec({0, 0}), vec({3, 4})) == doctest::Approx(5.0));
    CHECK(euclidean(vec({1, 1}), vec({2, 3})) == doctest::Approx(std::sqrt(5.0)));
    CHECK(manhattan(vec({1, 2}), vec({1, 2})) == 0.0);
    CHECK(manhattan(vec({1, 2}), vec({3, 0})) == doctest::Approx(4.0));
    CHECK(manhattan(vec({0.5, 0.5, 0}), vec({0, 0, 1})) == doctest::Approx(2.0));

    CHECK_THROWS_AS(cosine(vec({0, 0}), vec({1, 0})), RetrievalError);
    CHECK_THROWS_AS(euclidean(vec({1, 2}), vec({1, 2, 3})), RetrievalError);
    CHECK_THROWS_AS(manhattan(vec({1}), vec({1, 2})), RetrievalError);
    CHECK_THROWS_AS(vec({}), RetrievalError);
    CHECK_THROWS_AS(vec({1.0, NAN}), RetrievalError);
}

TEST_CASE("measure names") {
    CHECK(parse_measure("cosine") == Measure::cosine);
    CHECK(parse_measure("manhattan") == Measure::manhattan);
    CHECK_THROWS_WITH(parse_measure("chebyshev"), doctest::Contains("euclidean"));
    CHECK(is_similarity(Measure::cosine));
    CHECK_FALSE(is_similarity(Measure::euclidean));
}

TEST_CASE("offline provider hashes padded trigrams") {
    const OfflineTrigramProvider p;
    const auto buckets = oracle_buckets("##a##");
    REQUIRE(buckets.size() == 3);  // no collision among the three trigrams
    const auto v = p.embed("a");
    REQUIRE(v.dim() == 512);
    for (std::size_t i = 0; i < 512; ++i) {
        CAPTURE(i);
        if (buckets.count(i)) CHECK(v.values()[i] == doctest::Approx(1.0 / std::sqrt(3.0)));
        else CHECK(v.values()[i] == 0.0);
    }
    CHECK(p.embed("a") == v);
    CHECK(p.embed("  a ") == v);
    CHECK_THROWS_AS(p.embed(""), RetrievalError);
    CHECK_THROWS_AS(p.embed(" \t"), RetrievalError);
}

TEST_CASE("texts with disjoint trigram buckets have cosine 0") {
    const auto a = oracle_buckets("##abc##");
    const auto b = oracle_buckets("##xyz##");
    for (auto x : a) REQUIRE(b.count(x) == 0);
    const OfflineTrigramProvider p;
    CHECK(cosine(p.embed("abc"), p.embed("xyz")) == 0.0);
}

TEST_CASE("offline vectors are unit length for Greek text") {
    const OfflineTrigramProvider p;
    const auto v = p.embed("το ολοκλήρωμα του x");
    double norm = 0;
    for (double x : v.values()) norm += x * x;
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("build index") {
    const OfflineTrigramProvider p;
    const std::vector<EquationPair> pairs = {{"a", "ένα", "1"}, {"b", "δύο", "2"}, {"c", "τρία", "3"}};
    const auto index = build_index(pairs, p);
    REQUIRE(index.size() == 3);
    CHECK(index.entries()[0].pair_id == "a");
    CHECK(index.entries()[2].pair_id == "c");
    CHECK(index.provider_id() == p.provider_id());
    CHECK_THROWS_AS(build_index({}, p), RetrievalError);
    CHECK_THROWS_AS(build_index({{"a", "x", "1"}, {"a", "y", "2"}}, p), RetrievalError);
    CHECK_THROWS_WITH(build_index({{"a", "x", "1"}, {"bad", " ", "2"}}, p), doctest::Contains("bad"));
}

TEST_CASE("index persistence round trip") {
    const OfflineTrigramProvider p;
    const auto ds = support::duplicated_corpus();
    const auto index = support::train_index(ds, p);
    const auto path = std::filesystem::temp_directory_path() / "gr2tex-test-index.json";
    save_index(index, path);
    const auto back = load_index(path);
    REQUIRE(back.size() == index.size());
    CHECK(back.provider_id() == index.provider_id());
    for (std::size_t i = 0; i < index.size(); ++i) {
        CHECK(back.entries()[i].pair_id == index.entries()[i].pair_id);
        CHECK(back.entries()[i].vector == index.entries()[i].vector);
    }
    std::filesystem::remove(path);
    CHECK_THROWS_AS(index_from_json("{\"provider_id\":\"x\",\"dim\":2,\"entries\":[{\"id\":\"a\",\"values\":[1]}]}"),
                    RetrievalError);
}

TEST_CASE("self retrieval and full permutation") {
    const OfflineTrigramProvider p;
    const auto ds = support::duplicated_corpus();
    const auto index = support::train_index(ds, p);
    for (const auto& pair : ds.select(Split::train)) {
        for (auto m : {Measure::cosine, Measure::euclidean, Measure::manhattan}) {
            const auto r = query(index, p, pair.nl_text, 3, m);
            REQUIRE(!r.results.empty());
            CHECK(r.results[0].pair_id == pair.id);
            CHECK(r.results[0].rank == 1);
            CHECK(r.results[0].score == doctest::Approx(m == Measure::cosine ? 1.0 : 0.0));
        }
    }
    const auto all = query(index, p, "κάτι", index.size(), Measure::euclidean);
    CHECK_FALSE(all.truncated);
    std::set<std::string> ids;
    for (std::size_t i = 0; i < all.results.size(); ++i) {
        CHECK(all.results[i].rank == i + 1);
        ids.insert(all.results[i].pair_id);
    }
    CHECK(ids.size() == index.size());
    const auto over = query(index, p, "κάτι", index.size() + 5, Measure::cosine);
    CHECK(over.truncated);
    CHECK(over.results.size() == index.size());
    CHECK_THROWS_AS(query(index, p, "κάτι", 0, Measure::cosine), RetrievalError);
}

TEST_CASE("exclusion skips the given id") {
    const OfflineTrigramProvider p;
    const auto ds = support::duplicated_corpus();
    const auto index = support::train_index(ds, p);
    const auto& first = ds.pairs().front();
    const auto r = query(index, p, first.nl_text, 4, Measure::cosine, first.id);
    for (const auto& hit : r.results) CHECK(hit.pair_id != first.id);
    CHECK(r.results.size() == 4);
}

TEST_CASE("query agrees with the linear-scan oracle, ties included") {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> coord(-2, 2);  // small integers make ties common
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 1 + rng() % 30;
        std::vector<IndexEntry> entries;
        std::vector<std::vector<double>> raw;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> v(4);
            do {
                for (auto& x : v) x = coord(rng);
            } while (std::all_of(v.begin(), v.end(), [](double x) { return x == 0; }));
            raw.push_back(v);
            entries.push_back({"e" + std::to_string(i), EmbeddingVector(v)});
        }
        const Index index("test", std::move(entries));
        std::vector<double> q(4);
        do {
            for (auto& x : q) x = coord(rng);
        } while (std::all_of(q.begin(), q.end(), [](double x) { return x == 0; }));
        for (auto m : {Measure::cosine, Measure::euclidean, Measure::manhattan}) {
            std::vector<double> scores;
            for (const auto& v : raw) {
                scores.push_back(m == Measure::cosine      ? oracle::cosine(q, v)
                                 : m == Measure::euclidean ? oracle::euclidean(q, v)
                                                           : oracle::manhattan(q, v));
            }
            const std::size_t k = 1 + rng() % n;
            const auto expected = oracle::knn(scores, k, m == Measure::cosine);
            const auto got = query(index, EmbeddingVector(q), k, m);
            REQUIRE(got.results.size() == expected.size());
            for (std::size_t i = 0; i < expected.size(); ++i) {
                CHECK(got.results[i].pair_id == "e" + std::to_string(expected[i]));
            }
        }
    }
}

TEST_CASE("scores are monotone in rank") {
    const OfflineTrigramProvider p;
    const auto ds = support::duplicated_corpus();
    const auto index = support::train_index(ds, p);
    for (auto m : {Measure::cosine, Measure::euclidean, Measure::manhattan}) {
        const auto r = query(index, p, "το x στο τετράγωνο", index.size(), m);
        for (std::size_t i = 1; i < r.results.size(); ++i) {
            // Ties are resolved at 1e-12, so neighbours may differ below that.
            if (is_similarity(m)) CHECK(r.results[i].score <= r.results[i - 1].score + 1e-12);
            else CHECK(r.results[i].score >= r.results[i - 1].score - 1e-12);
        }
    }
}

TEST_CASE("provider and dimension mismatches are errors") {
    const OfflineTrigramProvider p;
    const Index small("other", {{"a", vec({1, 0})}});
    CHECK_THROWS_AS(query(small, p, "x", 1, Measure::cosine), RetrievalError);
    CHECK_THROWS_AS(query(small, vec({1, 0, 0}), 1, Measure::cosine), RetrievalError);
    CHECK_THROWS_AS(Index("x", {{"a", vec({1, 0})}, {"b", vec({1})}}), RetrievalError);
    CHECK_THROWS_AS(make_embedding_provider("nope"), std::exception);
    CHECK(make_embedding_provider("offline")->provider_id() == std::string(OfflineTrigramProvider::kProviderId));
}

}
