#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gr2tex/dataset.hpp"
#include "gr2tex/retrieval.hpp"

namespace gr2tex {

class PromptError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class PromptId { p1, p2, p3 };

std::string_view to_string(PromptId id);
PromptId parse_prompt_id(std::string_view name);

struct InstructionPrompt {
    PromptId id;
    std::string_view text;
};

/// The three instruction texts: p1 and p2 in English, p3 in Greek. The
/// same bytes ship as data/prompts/<id>.txt.
InstructionPrompt get_prompt(PromptId id);
InstructionPrompt get_prompt(std::string_view id);

/// One demonstrative example, in the order it appears in the prompt.
struct ExampleTurn {
    std::string pair_id;
    std::string nl_text;
    std::string latex;
    double score = 0.0;
    std::size_t rank = 0;
};

struct AssembledPrompt {
    PromptId prompt_id = PromptId::p1;
    std::string system_text;
    std::vector<ExampleTurn> example_turns;  // least similar first
    std::string query_text;
};

/// A retrieval hit paired with the corpus entry it points to.
struct ResolvedExample {
    RetrievalResult hit;
    EquationPair pair;
};

enum class ExampleOrder { most_similar_last, most_similar_first };

struct AssembleOptions {
    ExampleOrder order = ExampleOrder::most_similar_last;
    // When set, an example carrying this pair id is a leak and is rejected.
    std::optional<std::string> query_pair_id;
};

/// Pure function of its inputs. Examples are re-ordered by rank so that the
/// most similar one sits next to the query (configurable). Throws
/// PromptError when an example is the query's own pair.
AssembledPrompt assemble(const InstructionPrompt& instruction, std::vector<ResolvedExample> examples,
                         std::string_view query, const AssembleOptions& options = {});

/// Resolves retrieval hits against the dataset; unknown ids are an error.
std::vector<ResolvedExample> resolve_examples(const std::vector<RetrievalResult>& hits, const Dataset& dataset);

enum class InstructionPlacement { system_message, user_prefix };

struct ChatMessage {
    std::string role;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

/// Few-shot block carried in a single user turn:
///
///   Input: <nl_text>
///   Output: <latex>
///
///   ...
///
///   Input: <query>
///   Output:
std::string render_user_block(const AssembledPrompt& prompt);

std::vector<ChatMessage> to_messages(const AssembledPrompt& prompt,
                                     InstructionPlacement placement = InstructionPlacement::system_message);

// Human-readable dump of the exact messages sent to the model.
std::string dump_prompt(const AssembledPrompt& prompt,
                        InstructionPlacement placement = InstructionPlacement::system_message);

}  // namespace gr2tex
