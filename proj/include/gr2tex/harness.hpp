#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gr2tex/dataset.hpp"
#include "gr2tex/metrics.hpp"
#include "gr2tex/model_clients.hpp"
#include "gr2tex/prompting.hpp"
#include "gr2tex/retrieval.hpp"

namespace gr2tex {

class HarnessError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class IndexSplit { train, train_validation };

std::string_view to_string(IndexSplit split);
IndexSplit parse_index_split(std::string_view name);

struct GridBounds {
    int min_k = 2;
    int max_k = 6;
};

/// One grid cell. k = 0 is the no-example baseline and carries no measure.
struct ExperimentConfig {
    int k = 0;
    std::optional<Measure> measure;
    PromptId prompt_id = PromptId::p1;
    GenerationConfig generation;
    IndexSplit index_split = IndexSplit::train;
    std::uint64_t seed = 0;
};

void validate(const ExperimentConfig& config, const GridBounds& bounds = {});

struct ItemRecord {
    std::string pair_id;
    std::string query;
    std::vector<std::string> retrieved_ids;  // prompt order, most similar last
    std::string raw_completion;
    std::string latex;
    ElScore el;
};

std::string to_jsonl(const std::vector<ItemRecord>& records);
std::vector<ItemRecord> records_from_jsonl(std::string_view jsonl);

struct ResultRow {
    int k = 0;
    std::optional<Measure> measure;
    PromptId prompt_id = PromptId::p1;
    double el_lt_low = 0.0;   // percent
    double el_gt_high = 0.0;  // percent
    double bleu = 0.0;
    double chrf = 0.0;
    std::size_t n_items = 0;
    std::optional<std::string> error;  // set when the row aborted
};

struct ExperimentOutcome {
    ResultRow row;
    std::vector<ItemRecord> records;  // sorted by pair id
};

struct HarnessOptions {
    std::size_t concurrency = 4;  // in-flight generation calls per row
    double low = kDefaultLowThreshold;
    double high = kDefaultHighThreshold;
    GridBounds bounds;
    bool raw_text_metrics = false;  // BLEU/chrF on raw instead of normalized LaTeX
    std::optional<std::filesystem::path> records_dir;
};

/// Read-only inputs shared by every row of a grid.
struct PipelineInputs {
    const Dataset& dataset;
    const Index& index;
    const EmbeddingProvider& provider;
    const LlmClient& llm;
    const Normalizer& normalizer;
};

/// Scores every test-split pair: retrieve k examples (never the pair
/// itself), assemble, generate, extract, and measure EL against the
/// reference. Aggregation is keyed by pair id, so item concurrency does not
/// change the row. A client error aborts the row; the records completed so
/// far are kept (and written when records_dir is set).
ExperimentOutcome run_experiment(const ExperimentConfig& config, const PipelineInputs& inputs,
                                 const HarnessOptions& options = {});

struct GridResult {
    std::vector<ResultRow> rows;                     // input order
    std::vector<std::vector<ItemRecord>> records;    // parallel to rows
};

GridResult run_grid(const std::vector<ExperimentConfig>& configs, const PipelineInputs& inputs,
                    const HarnessOptions& options = {});

// Best el_lt_low first; ties by ascending k, then input order.
std::vector<ResultRow> sort_rows(std::vector<ResultRow> rows);

/// Columns: k, Sim/Dist, Prompt, EL<0.1, EL>0.4, BLEU, chrF, plus n_items
/// when with_counts is set. The baseline row shows an en dash for k, measure
/// and prompt; an aborted row shows ERR in the metric cells.
std::string rows_to_csv(const std::vector<ResultRow>& rows, bool with_counts = false);
std::string rows_to_table(const std::vector<ResultRow>& rows);

inline constexpr std::string_view kEnDash = "–";

/// {"model", "temperature", "max_tokens", "timeout_ms", "retries", "seed",
/// "instruction_placement": "system" | "user"}; absent keys keep defaults.
GenerationConfig generation_from_json(std::string_view json_text);

struct GridFile {
    std::vector<ExperimentConfig> configs;
    std::size_t concurrency = 4;
    GridBounds bounds;
};

GridFile grid_from_json(std::string_view json_text);
GridFile load_grid(const std::filesystem::path& path);

/// Baseline plus every (k, measure, prompt) for k in [bounds.min_k, bounds.max_k].
std::vector<ExperimentConfig> default_grid(const GenerationConfig& generation = {}, const GridBounds& bounds = {});

AgreementReport score_annotations(const std::vector<ItemRecord>& records, const std::vector<HumanLabel>& annotations,
                                  double low = kDefaultLowThreshold, double high = kDefaultHighThreshold);

}  // namespace gr2tex
