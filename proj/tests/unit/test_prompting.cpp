#include <doctest.h>

#include <random>

#include "gr2tex/embedding.hpp"
#include "gr2tex/prompting.hpp"
#include "gr2tex/text_util.hpp"
#include "../support.hpp"

using namespace gr2tex;

namespace {

std::string fixture(const std::string& id) { return read_file(GR2TEX_SOURCE_DIR "/data/prompts/" + id + ".txt"); }

ResolvedExample example(std::string id, std::string nl, std::string latex, double score, std::size_t rank) {
    return {{id, score, rank}, {id, std::move(nl), std::move(latex), Split::train}};
}

}  // namespace

TEST_SUITE("prompting") {

TEST_CASE("instruction texts match the fixture files") {
    for (const char* id : {"p1", "p2", "p3"}) {
        CAPTURE(id);
        CHECK(get_prompt(id).text == fixture(id));
    }
    CHECK(get_prompt(PromptId::p1).text.starts_with("You are a LaTeX equation generator."));
    const std::string p1(get_prompt(PromptId::p1).text);
    CHECK(std::string(get_prompt(PromptId::p2).text) ==
          p1 + " Follow the examples and generate the LaTeX equation for the last query.");
    CHECK(get_prompt(PromptId::p3).text.starts_with("Είσαι ένας βοηθός"));
    CHECK_THROWS_AS(get_prompt("p4"), PromptError);
    CHECK_THROWS_WITH(parse_prompt_id("P1 "), doctest::Contains("p1, p2, p3"));
}

TEST_CASE("baseline prompt has no examples") {
    const auto p = assemble(get_prompt(PromptId::p1), {}, "x συν y");
    CHECK(p.system_text == get_prompt(PromptId::p1).text);
    CHECK(p.example_turns.empty());
    CHECK(p.query_text == "x συν y");
    CHECK(render_user_block(p) == "Input: x συν y\nOutput:");
}

TEST_CASE("examples are ordered most similar last") {
    std::vector<ResolvedExample> ex = {example("a", "ένα", "1", 0.9, 1), example("b", "δύο", "2", 0.5, 2)};
    const auto p = assemble(get_prompt(PromptId::p2), ex, "τρία");
    REQUIRE(p.example_turns.size() == 2);
    CHECK(p.example_turns[0].pair_id == "b");
    CHECK(p.example_turns[1].pair_id == "a");
    CHECK(render_user_block(p) == "Input: δύο\nOutput: 2\n\nInput: ένα\nOutput: 1\n\nInput: τρία\nOutput:");

    AssembleOptions first;
    first.order = ExampleOrder::most_similar_first;
    const auto q = assemble(get_prompt(PromptId::p2), ex, "τρία", first);
    CHECK(q.example_turns[0].pair_id == "a");
}

TEST_CASE("instruction placement") {
    const auto p = assemble(get_prompt(PromptId::p1), {example("a", "ένα", "1", 1.0, 1)}, "δύο");
    const auto sys = to_messages(p);
    REQUIRE(sys.size() == 2);
    CHECK(sys[0] == ChatMessage{"system", std::string(get_prompt(PromptId::p1).text)});
    CHECK(sys[1].role == "user");
    const auto user = to_messages(p, InstructionPlacement::user_prefix);
    REQUIRE(user.size() == 1);
    CHECK(user[0].content == std::string(get_prompt(PromptId::p1).text) + "\n\n" + render_user_block(p));
    CHECK(dump_prompt(p).starts_with("[system]\n"));
}

TEST_CASE("leakage guard rejects the query's own pair") {
    AssembleOptions opts;
    opts.query_pair_id = "a";
    CHECK_THROWS_AS(assemble(get_prompt(PromptId::p1), {example("a", "ένα", "1", 1.0, 1)}, "ένα", opts), PromptError);
    CHECK_NOTHROW(assemble(get_prompt(PromptId::p1), {example("b", "δύο", "2", 1.0, 1)}, "ένα", opts));
}

TEST_CASE("resolve examples against the dataset") {
    const auto ds = support::duplicated_corpus();
    const OfflineTrigramProvider provider;
    const auto index = support::train_index(ds, provider);
    const auto hits = query(index, provider, "το άλφα", 3, Measure::cosine);
    const auto resolved = resolve_examples(hits.results, ds);
    REQUIRE(resolved.size() == 3);
    CHECK(resolved[0].pair.id == hits.results[0].pair_id);
    CHECK_THROWS_AS(resolve_examples({{"missing", 1.0, 1}}, ds), PromptError);
}

TEST_CASE("assembly is deterministic and self-excluding on random cases") {
    const auto ds = support::duplicated_corpus(14, 0);
    const OfflineTrigramProvider provider;
    const auto index = support::train_index(ds, provider);
    std::mt19937_64 rng(31);
    const auto& pairs = ds.pairs();
    for (int i = 0; i < 200; ++i) {
        const auto& q = pairs[rng() % pairs.size()];
        const std::size_t k = 2 + rng() % 5;
        const auto m = static_cast<Measure>(rng() % 3);
        const auto id = static_cast<PromptId>(rng() % 3);
        const auto hits = query(index, provider, q.nl_text, k, m, q.id);
        AssembleOptions opts;
        opts.query_pair_id = q.id;
        const auto a = assemble(get_prompt(id), resolve_examples(hits.results, ds), q.nl_text, opts);
        const auto b = assemble(get_prompt(id), resolve_examples(hits.results, ds), q.nl_text, opts);
        CHECK(dump_prompt(a) == dump_prompt(b));
        CHECK(a.example_turns.size() == k);
        for (const auto& t : a.example_turns) CHECK(t.pair_id != q.id);
        for (std::size_t j = 1; j < a.example_turns.size(); ++j) {
            CHECK(a.example_turns[j - 1].rank > a.example_turns[j].rank);
        }
    }
}

}
