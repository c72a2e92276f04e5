#include "gr2tex/prompting.hpp"

#include <algorithm>

namespace gr2tex {
namespace {

constexpr std::string_view kPromptP1 =
    "You are a LaTeX equation generator. You are provided with an equation described in natural text and you "
    "are asked to generate the respective LaTeX equation.";

constexpr std::string_view kPromptP2 =
    "You are a LaTeX equation generator. You are provided with an equation described in natural text and you "
    "are asked to generate the respective LaTeX equation. Follow the examples and generate the LaTeX equation "
    "for the last query.";

constexpr std::string_view kPromptP3 =
    "Είσαι ένας βοηθός προγραμματιστή. Σου παρέχεται μία εξίσωση σε φυσική γλώσσα και σου ζητείται να "
    "παράξεις την αντίστοιχη εξίσωση σε κώδικα LaTeX. Συμπλήρωσε την εξίσωση σε κώδικα LaTeX για το "
    "τελευταίο αίτημα.";

}  // namespace

std::string_view to_string(PromptId id) {
    switch (id) {
        case PromptId::p1: return "p1";
        case PromptId::p2: return "p2";
        case PromptId::p3: return "p3";
    }
    return "p1";
}

PromptId parse_prompt_id(std::string_view name) {
    if (name == "p1") return PromptId::p1;
    if (name == "p2") return PromptId::p2;
    if (name == "p3") return PromptId::p3;
    throw PromptError("unknown prompt id '" + std::string(name) + "' (allowed: p1, p2, p3)");
}

InstructionPrompt get_prompt(PromptId id) {
    switch (id) {
        case PromptId::p1: return {id, kPromptP1};
        case PromptId::p2: return {id, kPromptP2};
        case PromptId::p3: return {id, kPromptP3};
    }
    throw PromptError("unknown prompt id");
}

InstructionPrompt get_prompt(std::string_view id) { return get_prompt(parse_prompt_id(id)); }

AssembledPrompt assemble(const InstructionPrompt& instruction, std::vector<ResolvedExample> examples,
                         std::string_view query, const AssembleOptions& options) {
    if (options.query_pair_id) {
        for (const auto& ex : examples) {
            if (ex.pair.id == *options.query_pair_id) {
                throw PromptError("example '" + ex.pair.id + "' is the query's own pair");
            }
        }
    }
    // Rank 1 is the most similar hit; ties on rank keep input order.
    std::stable_sort(examples.begin(), examples.end(), [&](const ResolvedExample& a, const ResolvedExample& b) {
        return options.order == ExampleOrder::most_similar_last ? a.hit.rank > b.hit.rank : a.hit.rank < b.hit.rank;
    });

    AssembledPrompt prompt;
    prompt.prompt_id = instruction.id;
    prompt.system_text = std::string(instruction.text);
    prompt.query_text = std::string(query);
    for (auto& ex : examples) {
        prompt.example_turns.push_back(
            {std::move(ex.pair.id), std::move(ex.pair.nl_text), std::move(ex.pair.latex), ex.hit.score, ex.hit.rank});
    }
    return prompt;
}

std::vector<ResolvedExample> resolve_examples(const std::vector<RetrievalResult>& hits, const Dataset& dataset) {
    std::vector<ResolvedExample> out;
    out.reserve(hits.size());
    for (const auto& hit : hits) {
        const auto* pair = dataset.find(hit.pair_id);
        if (pair == nullptr) {
            throw PromptError("retrieved pair '" + hit.pair_id + "' is not in the dataset");
        }
        out.push_back({hit, *pair});
    }
    return out;
}

std::string render_user_block(const AssembledPrompt& prompt) {
    std::string out;
    for (const auto& turn : prompt.example_turns) {
        out += "Input: " + turn.nl_text + "\nOutput: " + turn.latex + "\n\n";
    }
    out += "Input: " + prompt.query_text + "\nOutput:";
    return out;
}

std::vector<ChatMessage> to_messages(const AssembledPrompt& prompt, InstructionPlacement placement) {
    if (placement == InstructionPlacement::system_message) {
        return {{"system", prompt.system_text}, {"user", render_user_block(prompt)}};
    }
    return {{"user", prompt.system_text + "\n\n" + render_user_block(prompt)}};
}

std::string dump_prompt(const AssembledPrompt& prompt, InstructionPlacement placement) {
    std::string out;
    for (const auto& message : to_messages(prompt, placement)) {
        if (!out.empty()) out += "\n\n";
        out += "[" + message.role + "]\n" + message.content;
    }
    out += "\n";
    return out;
}

}  // namespace gr2tex
