#include "gr2tex/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <mutex>
#include <thread>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "gr2tex/text_util.hpp"

namespace gr2tex {
namespace {

using nlohmann::json;

std::string fixed2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string measure_label(Measure m) {
    switch (m) {
        case Measure::cosine: return "Cosine";
        case Measure::euclidean: return "Euclidean";
        case Measure::manhattan: return "Manhattan";
    }
    return "?";
}

std::vector<std::string> row_cells(const ResultRow& row) {
    const bool baseline = row.k == 0;
    std::vector<std::string> cells;
    cells.emplace_back(baseline ? std::string(kEnDash) : std::to_string(row.k));
    cells.emplace_back(baseline || !row.measure ? std::string(kEnDash) : measure_label(*row.measure));
    cells.emplace_back(baseline ? std::string(kEnDash) : std::string(to_string(row.prompt_id)));
    if (row.error) {
        for (int i = 0; i < 4; ++i) cells.emplace_back("ERR");
    } else {
        cells.push_back(fixed2(row.el_lt_low));
        cells.push_back(fixed2(row.el_gt_high));
        cells.push_back(fixed2(row.bleu));
        cells.push_back(fixed2(row.chrf));
    }
    cells.push_back(std::to_string(row.n_items));
    return cells;
}

const std::vector<std::string> kColumns = {"k", "Sim/Dist", "Prompt", "EL<0.1", "EL>0.4", "BLEU", "chrF", "n_items"};

std::string csv_cell(const std::string& cell) {
    if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
    std::string out = "\"";
    for (char c : cell) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

// Display width in code points; good enough for the ASCII + en dash cells.
std::size_t width(const std::string& s) { return decode_utf8(s).size(); }

bool index_split_allows(IndexSplit index_split, Split split) {
    if (split == Split::train) return true;
    return index_split == IndexSplit::train_validation && split == Split::validation;
}

void check_index_matches(const ExperimentConfig& config, const PipelineInputs& inputs) {
    if (inputs.index.provider_id() != inputs.provider.provider_id()) {
        throw HarnessError("index was built with '" + inputs.index.provider_id() + "' but the provider is '" +
                           inputs.provider.provider_id() + "'");
    }
    for (const auto& entry : inputs.index.entries()) {
        const auto* pair = inputs.dataset.find(entry.pair_id);
        if (pair == nullptr) throw HarnessError("index entry '" + entry.pair_id + "' is not in the dataset");
        if (!index_split_allows(config.index_split, pair->split)) {
            throw HarnessError("index entry '" + entry.pair_id + "' belongs to split '" +
                               std::string(to_string(pair->split)) + "', outside index split '" +
                               std::string(to_string(config.index_split)) + "'");
        }
    }
}

std::string records_filename(std::size_t position, const ExperimentConfig& config) {
    std::string name = "row" + std::to_string(position) + "-k" + std::to_string(config.k);
    if (config.measure) name += "-" + std::string(to_string(*config.measure));
    name += "-" + std::string(to_string(config.prompt_id)) + ".jsonl";
    return name;
}

ExperimentOutcome run_one(const ExperimentConfig& config, const PipelineInputs& inputs, const HarnessOptions& options,
                          std::optional<std::filesystem::path> records_path) {
    validate(config, options.bounds);
    validate(config.generation);
    if (config.k > 0) check_index_matches(config, inputs);

    auto items = inputs.dataset.select(Split::test);
    if (items.empty()) throw HarnessError("dataset has no test-split pairs to score");
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

    const auto instruction = get_prompt(config.prompt_id);
    std::vector<std::optional<ItemRecord>> slots(items.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> aborted{false};
    std::mutex error_mutex;
    std::optional<std::string> first_error;

    auto work = [&] {
        while (!aborted.load()) {
            const std::size_t i = next.fetch_add(1);
            if (i >= items.size()) return;
            const auto& pair = items[i];
            try {
                ItemRecord record;
                record.pair_id = pair.id;
                record.query = pair.nl_text;
                std::vector<ResolvedExample> examples;
                if (config.k > 0) {
                    const auto hits = query(inputs.index, inputs.provider, pair.nl_text,
                                            static_cast<std::size_t>(config.k), *config.measure, pair.id);
                    examples = resolve_examples(hits.results, inputs.dataset);
                }
                AssembleOptions assemble_options;
                assemble_options.query_pair_id = pair.id;
                const auto prompt = assemble(instruction, std::move(examples), pair.nl_text, assemble_options);
                for (const auto& turn : prompt.example_turns) record.retrieved_ids.push_back(turn.pair_id);

                // An empty or unparseable reply is scored as an empty hypothesis.
                try {
                    record.raw_completion = generate(prompt, config.generation, inputs.llm);
                    record.latex = extract_latex(record.raw_completion);
                } catch (const ClientError& ex) {
                    if (ex.kind() != ClientErrorKind::empty) throw;
                    spdlog::warn("{}: {}", pair.id, ex.what());
                    record.latex.clear();
                }
                record.el = el_distance(record.latex, pair.latex, inputs.normalizer);
                slots[i] = std::move(record);
            } catch (const std::exception& ex) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = pair.id + ": " + ex.what();
                aborted.store(true);
            }
        }
    };

    const std::size_t n_workers = std::max<std::size_t>(1, std::min(options.concurrency, items.size()));
    if (n_workers == 1) {
        work();
    } else {
        std::vector<std::jthread> workers;
        for (std::size_t w = 0; w < n_workers; ++w) workers.emplace_back(work);
    }

    ExperimentOutcome outcome;
    outcome.row.k = config.k;
    outcome.row.measure = config.measure;
    outcome.row.prompt_id = config.prompt_id;

    std::vector<const EquationPair*> scored_pairs;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (!slots[i]) continue;
        outcome.records.push_back(std::move(*slots[i]));
        scored_pairs.push_back(&items[i]);
    }
    if (records_path) write_file(*records_path, to_jsonl(outcome.records));

    if (first_error) {
        outcome.row.error = *first_error;
        outcome.row.n_items = outcome.records.size();
        spdlog::error("row k={} prompt={} aborted: {}", config.k, to_string(config.prompt_id), *first_error);
        return outcome;
    }

    std::vector<ElScore> scores;
    std::vector<TokenList> hyp_tokens, ref_tokens;
    std::vector<std::string> hyp_text, ref_text;
    for (std::size_t i = 0; i < outcome.records.size(); ++i) {
        const auto& record = outcome.records[i];
        const auto& ref = scored_pairs[i]->latex;
        scores.push_back(record.el);
        if (options.raw_text_metrics) {
            hyp_text.push_back(record.latex);
            ref_text.push_back(ref);
        } else {
            hyp_text.push_back(inputs.normalizer.normalize(record.latex));
            ref_text.push_back(inputs.normalizer.normalize(ref));
        }
        hyp_tokens.push_back(tokenize_latex(hyp_text.back()));
        ref_tokens.push_back(tokenize_latex(ref_text.back()));
    }
    const auto rates = threshold_rates(scores, options.low, options.high);
    outcome.row.el_lt_low = rates.pct_below_low;
    outcome.row.el_gt_high = rates.pct_above_high;
    outcome.row.bleu = bleu(hyp_tokens, ref_tokens);
    outcome.row.chrf = chrf(hyp_text, ref_text);
    outcome.row.n_items = outcome.records.size();
    return outcome;
}

ExperimentConfig config_row_from_json(const json& j, const GenerationConfig& generation, IndexSplit index_split,
                                      std::uint64_t seed) {
    ExperimentConfig config;
    config.generation = generation;
    config.index_split = index_split;
    config.seed = j.value("seed", seed);
    config.k = j.at("k").get<int>();
    if (j.contains("measure") && !j.at("measure").is_null()) {
        config.measure = parse_measure(j.at("measure").get<std::string>());
    }
    config.prompt_id = parse_prompt_id(j.value("prompt", std::string("p1")));
    return config;
}

}  // namespace

std::string_view to_string(IndexSplit split) {
    return split == IndexSplit::train ? "train" : "train+validation";
}

IndexSplit parse_index_split(std::string_view name) {
    if (name == "train") return IndexSplit::train;
    if (name == "train+validation" || name == "train_validation") return IndexSplit::train_validation;
    throw HarnessError("unknown index split '" + std::string(name) + "' (expected train or train+validation)");
}

void validate(const ExperimentConfig& config, const GridBounds& bounds) {
    if (bounds.min_k < 1 || bounds.max_k < bounds.min_k) {
        throw HarnessError("grid bounds must satisfy 1 <= min_k <= max_k");
    }
    if (config.k == 0) {
        if (config.measure) throw HarnessError("the k = 0 baseline takes no similarity measure");
        return;
    }
    if (config.k < bounds.min_k || config.k > bounds.max_k) {
        throw HarnessError("k = " + std::to_string(config.k) + " is outside {0} and [" + std::to_string(bounds.min_k) +
                           ", " + std::to_string(bounds.max_k) + "]");
    }
    if (!config.measure) throw HarnessError("k = " + std::to_string(config.k) + " needs a similarity measure");
}

std::string to_jsonl(const std::vector<ItemRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        nlohmann::ordered_json j;
        j["pair_id"] = r.pair_id;
        j["query"] = r.query;
        j["retrieved_ids"] = r.retrieved_ids;
        j["raw_completion"] = r.raw_completion;
        j["latex"] = r.latex;
        j["el"] = {{"value", r.el.value},
                   {"raw_edits", r.el.raw_edits},
                   {"hyp_norm_len", r.el.hyp_norm_len},
                   {"ref_norm_len", r.el.ref_norm_len}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<ItemRecord> records_from_jsonl(std::string_view jsonl) {
    std::vector<ItemRecord> records;
    std::size_t line_no = 0;
    for (const auto line : split_lines(jsonl)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            const auto j = json::parse(line);
            ItemRecord r;
            r.pair_id = j.at("pair_id").get<std::string>();
            r.query = j.value("query", std::string());
            r.retrieved_ids = j.value("retrieved_ids", std::vector<std::string>{});
            r.raw_completion = j.value("raw_completion", std::string());
            r.latex = j.at("latex").get<std::string>();
            const auto& el = j.at("el");
            r.el.value = el.at("value").get<double>();
            r.el.raw_edits = el.value("raw_edits", std::size_t{0});
            r.el.hyp_norm_len = el.value("hyp_norm_len", std::size_t{0});
            r.el.ref_norm_len = el.value("ref_norm_len", std::size_t{0});
            records.push_back(std::move(r));
        } catch (const json::exception& ex) {
            throw HarnessError("records line " + std::to_string(line_no) + ": " + ex.what());
        }
    }
    return records;
}

ExperimentOutcome run_experiment(const ExperimentConfig& config, const PipelineInputs& inputs,
                                 const HarnessOptions& options) {
    std::optional<std::filesystem::path> path;
    if (options.records_dir) path = *options.records_dir / records_filename(0, config);
    return run_one(config, inputs, options, path);
}

GridResult run_grid(const std::vector<ExperimentConfig>& configs, const PipelineInputs& inputs,
                    const HarnessOptions& options) {
    if (configs.empty()) throw HarnessError("experiment grid has no rows");
    GridResult result;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        const auto& config = configs[i];
        std::optional<std::filesystem::path> path;
        if (options.records_dir) path = *options.records_dir / records_filename(i, config);
        try {
            auto outcome = run_one(config, inputs, options, path);
            result.rows.push_back(std::move(outcome.row));
            result.records.push_back(std::move(outcome.records));
        } catch (const std::exception& ex) {
            ResultRow row;
            row.k = config.k;
            row.measure = config.measure;
            row.prompt_id = config.prompt_id;
            row.error = ex.what();
            spdlog::error("row {} failed: {}", i, ex.what());
            result.rows.push_back(std::move(row));
            result.records.emplace_back();
        }
    }
    return result;
}

std::vector<ResultRow> sort_rows(std::vector<ResultRow> rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
        if (a.el_lt_low != b.el_lt_low) return a.el_lt_low > b.el_lt_low;
        return a.k < b.k;
    });
    return rows;
}

std::string rows_to_csv(const std::vector<ResultRow>& rows, bool with_counts) {
    const std::size_t n = with_counts ? kColumns.size() : kColumns.size() - 1;
    std::string out;
    for (std::size_t c = 0; c < n; ++c) out += (c ? "," : "") + kColumns[c];
    out += '\n';
    for (const auto& row : rows) {
        const auto cells = row_cells(row);
        for (std::size_t c = 0; c < n; ++c) out += (c ? "," : "") + csv_cell(cells[c]);
        out += '\n';
    }
    return out;
}

std::string rows_to_table(const std::vector<ResultRow>& rows) {
    // Same cells as the CSV minus n_items.
    std::vector<std::vector<std::string>> grid{{kColumns.begin(), kColumns.end() - 1}};
    for (const auto& row : rows) {
        auto cells = row_cells(row);
        cells.pop_back();
        grid.push_back(std::move(cells));
    }
    std::vector<std::size_t> widths(grid.front().size(), 0);
    for (const auto& line : grid) {
        for (std::size_t c = 0; c < line.size(); ++c) widths[c] = std::max(widths[c], width(line[c]));
    }
    std::string out;
    auto emit = [&](const std::vector<std::string>& line) {
        for (std::size_t c = 0; c < line.size(); ++c) {
            if (c) out += "  ";
            const auto pad = widths[c] - width(line[c]);
            // Text columns left-aligned, numbers right-aligned.
            if (c < 3) out += line[c] + std::string(pad, ' ');
            else out += std::string(pad, ' ') + line[c];
        }
        while (!out.empty() && out.back() == ' ') out.pop_back();
        out += '\n';
    };
    emit(grid.front());
    std::size_t total = 2 * (widths.size() - 1);
    for (auto w : widths) total += w;
    out += std::string(total, '-') + '\n';
    for (std::size_t i = 1; i < grid.size(); ++i) emit(grid[i]);
    return out;
}

GenerationConfig generation_from_json(std::string_view json_text) {
    GenerationConfig generation;
    try {
        const auto g = json::parse(json_text);
        generation.model_name = g.value("model", generation.model_name);
        generation.temperature = g.value("temperature", generation.temperature);
        generation.max_tokens = g.value("max_tokens", generation.max_tokens);
        generation.timeout = std::chrono::milliseconds(g.value("timeout_ms", generation.timeout.count()));
        generation.retry.retries = g.value("retries", generation.retry.retries);
        if (g.contains("seed") && !g.at("seed").is_null()) generation.seed = g.at("seed").get<std::int64_t>();
        const auto placement = g.value("instruction_placement", std::string("system"));
        if (placement == "system") generation.placement = InstructionPlacement::system_message;
        else if (placement == "user") generation.placement = InstructionPlacement::user_prefix;
        else throw HarnessError("instruction_placement must be system or user, got '" + placement + "'");
    } catch (const json::exception& ex) {
        throw HarnessError(std::string("bad generation settings: ") + ex.what());
    }
    try {
        validate(generation);
    } catch (const std::invalid_argument& ex) {
        throw HarnessError(std::string("bad generation settings: ") + ex.what());
    }
    return generation;
}

GridFile grid_from_json(std::string_view json_text) {
    try {
        const auto j = json::parse(json_text);
        GridFile grid;
        const auto generation =
            j.contains("generation") ? generation_from_json(j.at("generation").dump()) : GenerationConfig{};
        const auto index_split = parse_index_split(j.value("index_split", std::string("train")));
        const auto seed = j.value("seed", std::uint64_t{0});
        grid.concurrency = j.value("concurrency", grid.concurrency);
        if (grid.concurrency == 0) throw HarnessError("concurrency must be at least 1");
        if (j.contains("bounds")) {
            grid.bounds.min_k = j.at("bounds").value("min_k", grid.bounds.min_k);
            grid.bounds.max_k = j.at("bounds").value("max_k", grid.bounds.max_k);
        }
        if (j.contains("rows")) {
            for (const auto& row : j.at("rows")) {
                auto config = config_row_from_json(row, generation, index_split, seed);
                validate(config, grid.bounds);
                grid.configs.push_back(std::move(config));
            }
        } else {
            grid.configs = default_grid(generation, grid.bounds);
            for (auto& c : grid.configs) {
                c.index_split = index_split;
                c.seed = seed;
            }
        }
        return grid;
    } catch (const json::exception& ex) {
        throw HarnessError(std::string("bad grid config: ") + ex.what());
    } catch (const std::invalid_argument& ex) {
        throw HarnessError(std::string("bad grid config: ") + ex.what());
    } catch (const RetrievalError& ex) {
        throw HarnessError(std::string("bad grid config: ") + ex.what());
    }
}

GridFile load_grid(const std::filesystem::path& path) { return grid_from_json(read_file(path)); }

std::vector<ExperimentConfig> default_grid(const GenerationConfig& generation, const GridBounds& bounds) {
    std::vector<ExperimentConfig> configs;
    ExperimentConfig baseline;
    baseline.generation = generation;
    configs.push_back(baseline);
    for (int k = bounds.min_k; k <= bounds.max_k; ++k) {
        for (auto measure : {Measure::cosine, Measure::euclidean, Measure::manhattan}) {
            for (auto prompt : {PromptId::p1, PromptId::p2, PromptId::p3}) {
                ExperimentConfig c;
                c.k = k;
                c.measure = measure;
                c.prompt_id = prompt;
                c.generation = generation;
                configs.push_back(c);
            }
        }
    }
    return configs;
}

AgreementReport score_annotations(const std::vector<ItemRecord>& records, const std::vector<HumanLabel>& annotations,
                                  double low, double high) {
    std::vector<std::pair<std::string, int>> predicted;
    predicted.reserve(records.size());
    for (const auto& r : records) predicted.emplace_back(r.pair_id, el_bucket(r.el, low, high));
    return annotation_agreement(predicted, annotations);
}

}  // namespace gr2tex
