// Command-line front end: dataset preparation, indexing, evaluation and the
// HTTP service.

#include <cstdio>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "gr2tex/dataset.hpp"
#include "gr2tex/embedding.hpp"
#include "gr2tex/harness.hpp"
#include "gr2tex/latex_normalizer.hpp"
#include "gr2tex/metrics.hpp"
#include "gr2tex/model_clients.hpp"
#include "gr2tex/prompting.hpp"
#include "gr2tex/retrieval.hpp"
#include "gr2tex/service.hpp"
#include "gr2tex/text_util.hpp"

using namespace gr2tex;

namespace {

std::string fmt2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

Normalizer make_normalizer(const std::string& config_path) {
    return config_path.empty() ? Normalizer() : Normalizer(load_normalization_config(config_path));
}

// Hypotheses: JSONL with pair_id (or id) and latex. Harness record files qualify.
std::map<std::string, std::string> load_hypotheses(const std::string& path) {
    std::map<std::string, std::string> out;
    std::size_t line_no = 0;
    const auto text = read_file(path);
    for (const auto line : split_lines(text)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            const auto id = j.contains("pair_id") ? j.at("pair_id").get<std::string>() : j.at("id").get<std::string>();
            if (!out.emplace(id, j.at("latex").get<std::string>()).second) {
                throw std::runtime_error("duplicate hypothesis for '" + id + "'");
            }
        } catch (const nlohmann::json::exception& ex) {
            throw std::runtime_error(path + " line " + std::to_string(line_no) + ": " + ex.what());
        }
    }
    return out;
}

struct EvaluateArgs {
    std::string hyp, ref, annotations, out, norm_config;
    bool raw = false;
    std::string split;
};

int cmd_evaluate(const EvaluateArgs& a) {
    const auto hyps = load_hypotheses(a.hyp);
    const auto refs = load_dataset(a.ref);
    const auto normalizer = make_normalizer(a.norm_config);

    std::vector<EquationPair> pairs = a.split.empty() ? refs.pairs() : refs.select(parse_split(a.split));
    std::vector<ItemRecord> records;
    std::vector<ElScore> scores;
    std::vector<TokenList> hyp_tokens, ref_tokens;
    std::vector<std::string> hyp_text, ref_text;
    std::string csv = "pair_id,el,bucket\n";
    for (const auto& pair : pairs) {
        const auto it = hyps.find(pair.id);
        if (it == hyps.end()) {
            if (a.split.empty()) continue;
            throw std::runtime_error("no hypothesis for '" + pair.id + "'");
        }
        ItemRecord r;
        r.pair_id = pair.id;
        r.latex = it->second;
        r.el = el_distance(r.latex, pair.latex, normalizer);
        csv += pair.id + "," + fmt6(r.el.value) + "," + std::to_string(el_bucket(r.el)) + "\n";
        scores.push_back(r.el);
        hyp_text.push_back(a.raw ? r.latex : normalizer.normalize(r.latex));
        ref_text.push_back(a.raw ? pair.latex : normalizer.normalize(pair.latex));
        hyp_tokens.push_back(tokenize_latex(hyp_text.back()));
        ref_tokens.push_back(tokenize_latex(ref_text.back()));
        records.push_back(std::move(r));
    }
    if (records.empty()) throw std::runtime_error("no hypothesis matches a reference id");
    for (const auto& [id, latex] : hyps) {
        if (refs.find(id) == nullptr) throw std::runtime_error("hypothesis '" + id + "' has no reference");
    }
    const auto rates = threshold_rates(scores);
    csv += "#EL<0.1," + fmt2(rates.pct_below_low) + ",\n";
    csv += "#EL>0.4," + fmt2(rates.pct_above_high) + ",\n";
    csv += "#BLEU," + fmt2(bleu(hyp_tokens, ref_tokens)) + ",\n";
    csv += "#chrF," + fmt2(chrf(hyp_text, ref_text)) + ",\n";
    csv += "#n_items," + std::to_string(records.size()) + ",\n";
    if (!a.annotations.empty()) {
        const auto report = score_annotations(records, load_annotations(read_file(a.annotations)));
        csv += "#agreement," + fmt6(report.agreement) + "," + std::to_string(report.n_items) + "\n";
    }
    if (a.out.empty()) std::cout << csv;
    else write_file(a.out, csv);
    std::cerr << "scored " << records.size() << " items: EL<0.1 " << fmt2(rates.pct_below_low) << "%, EL>0.4 "
              << fmt2(rates.pct_above_high) << "%\n";
    return 0;
}

struct GridArgs {
    std::string dataset, index, grid, llm = "nearest-neighbor", out, annotations, records_dir, provider = "offline",
                                      norm_config;
    bool sort = false;
    bool raw = false;
    bool with_counts = false;
};

int cmd_evaluate_grid(const GridArgs& a) {
    auto dataset = std::make_shared<const Dataset>(load_dataset(a.dataset));
    auto index = std::make_shared<const Index>(load_index(a.index));
    auto provider = make_embedding_provider(a.provider);
    const auto llm = make_llm_client(a.llm, {index, dataset, provider});
    const auto normalizer = make_normalizer(a.norm_config);
    const auto grid = load_grid(a.grid);

    HarnessOptions options;
    options.concurrency = grid.concurrency;
    options.bounds = grid.bounds;
    options.raw_text_metrics = a.raw;
    if (!a.records_dir.empty()) options.records_dir = a.records_dir;

    const PipelineInputs inputs{*dataset, *index, *provider, *llm, normalizer};
    const auto result = run_grid(grid.configs, inputs, options);
    const auto rows = a.sort ? sort_rows(result.rows) : result.rows;
    write_file(a.out, rows_to_csv(rows, a.with_counts));
    std::cout << rows_to_table(rows);

    int failures = 0;
    for (std::size_t i = 0; i < result.rows.size(); ++i) {
        if (result.rows[i].error) {
            ++failures;
            std::cerr << "row " << i << " failed: " << *result.rows[i].error << "\n";
        }
    }
    if (!a.annotations.empty()) {
        const auto labels = load_annotations(read_file(a.annotations));
        for (std::size_t i = 0; i < result.rows.size(); ++i) {
            if (result.rows[i].error) continue;
            const auto report = score_annotations(result.records[i], labels);
            std::cout << "row " << i << " annotation agreement: " << fmt6(report.agreement) << " over "
                      << report.n_items << " items\n";
        }
    }
    if (const auto* llm_remote = dynamic_cast<const RemoteChatLlm*>(llm.get())) {
        std::cerr << "LLM requests sent: " << llm_remote->requests_sent() << "\n";
    }
    return failures == 0 ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Greek spoken-math to LaTeX: retrieval, prompting, evaluation and service"};
    app.set_version_flag("--version", std::string(build_version()));
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Debug logging");

    // ingest
    std::string ingest_path, ingest_out, ingest_ratios = "0.70,0.15,0.15";
    std::uint64_t ingest_seed = 0;
    auto* ingest = app.add_subcommand("ingest", "Validate a JSONL corpus and assign train/validation/test splits");
    ingest->add_option("path", ingest_path, "Input JSONL")->required()->check(CLI::ExistingFile);
    ingest->add_option("--split", ingest_ratios, "train,validation,test ratios")->capture_default_str();
    ingest->add_option("--seed", ingest_seed, "Shuffle seed")->capture_default_str();
    ingest->add_option("--out", ingest_out, "Output JSONL")->required();

    // index
    std::string index_dataset, index_out, index_split = "train", index_provider = "offline";
    auto* index_cmd = app.add_subcommand("index", "Embed a dataset split and write the index");
    index_cmd->add_option("--dataset", index_dataset)->required()->check(CLI::ExistingFile);
    index_cmd->add_option("--split", index_split, "train or train+validation")->capture_default_str();
    index_cmd->add_option("--provider", index_provider, "offline | remote | remote:<model>")->capture_default_str();
    index_cmd->add_option("--out", index_out)->required();

    // query
    std::string query_index, query_text, query_measure = "cosine", query_provider = "offline";
    std::size_t query_k = 3;
    auto* query_cmd = app.add_subcommand("query", "Top-k retrieval for a text");
    query_cmd->add_option("--index", query_index)->required()->check(CLI::ExistingFile);
    query_cmd->add_option("--text", query_text)->required();
    query_cmd->add_option("-k", query_k)->capture_default_str();
    query_cmd->add_option("--measure", query_measure, "cosine | euclidean | manhattan")->capture_default_str();
    query_cmd->add_option("--provider", query_provider)->capture_default_str();

    // evaluate
    EvaluateArgs eval_args;
    auto* eval_cmd = app.add_subcommand("evaluate", "Score hypotheses against references");
    eval_cmd->add_option("--hyp", eval_args.hyp, "JSONL with pair_id and latex")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--ref", eval_args.ref, "Dataset JSONL")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--split", eval_args.split, "Require a hypothesis for every pair of this split");
    eval_cmd->add_option("--annotations", eval_args.annotations, "JSONL {pair_id, label}")->check(CLI::ExistingFile);
    eval_cmd->add_option("--norm-config", eval_args.norm_config)->check(CLI::ExistingFile);
    eval_cmd->add_option("--out", eval_args.out, "CSV output (stdout when omitted)");
    eval_cmd->add_flag("--raw", eval_args.raw, "BLEU/chrF on raw LaTeX instead of normalized");

    // evaluate-grid
    GridArgs grid_args;
    auto* grid_cmd = app.add_subcommand("evaluate-grid", "Run an experiment grid over the test split");
    grid_cmd->add_option("--dataset", grid_args.dataset)->required()->check(CLI::ExistingFile);
    grid_cmd->add_option("--index", grid_args.index)->required()->check(CLI::ExistingFile);
    grid_cmd->add_option("--grid", grid_args.grid)->required()->check(CLI::ExistingFile);
    grid_cmd->add_option("--llm", grid_args.llm, "nearest-neighbor | echo | fixed:<text> | failing | remote")
        ->capture_default_str();
    grid_cmd->add_option("--provider", grid_args.provider)->capture_default_str();
    grid_cmd->add_option("--out", grid_args.out)->required();
    grid_cmd->add_option("--annotations", grid_args.annotations)->check(CLI::ExistingFile);
    grid_cmd->add_option("--records-dir", grid_args.records_dir, "Per-item JSONL records per row");
    grid_cmd->add_option("--norm-config", grid_args.norm_config)->check(CLI::ExistingFile);
    grid_cmd->add_flag("--sort", grid_args.sort, "Best EL<0.1 first");
    grid_cmd->add_flag("--raw", grid_args.raw, "BLEU/chrF on raw LaTeX instead of normalized");
    grid_cmd->add_flag("--with-counts", grid_args.with_counts, "Append an n_items column to the CSV");

    // serve
    std::string serve_config;
    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
    serve_cmd->add_option("--config", serve_config)->required()->check(CLI::ExistingFile);

    // dump-prompt
    std::string dump_prompt_id = "p1", dump_text, dump_index, dump_dataset, dump_measure = "cosine",
                dump_placement = "system", dump_provider = "offline";
    int dump_k = 0;
    auto* dump_cmd = app.add_subcommand("dump-prompt", "Print the exact messages that would be sent");
    dump_cmd->add_option("--prompt", dump_prompt_id, "p1 | p2 | p3")->capture_default_str();
    dump_cmd->add_option("--text", dump_text)->required();
    dump_cmd->add_option("-k", dump_k)->capture_default_str();
    dump_cmd->add_option("--measure", dump_measure)->capture_default_str();
    dump_cmd->add_option("--index", dump_index)->check(CLI::ExistingFile);
    dump_cmd->add_option("--dataset", dump_dataset)->check(CLI::ExistingFile);
    dump_cmd->add_option("--provider", dump_provider)->capture_default_str();
    dump_cmd->add_option("--placement", dump_placement, "system | user")->capture_default_str();

    // normalize
    std::string norm_input, norm_config;
    bool norm_dump = false;
    auto* norm_cmd = app.add_subcommand("normalize", "Normalize LaTeX, or print the default normalization config");
    norm_cmd->add_option("latex", norm_input);
    norm_cmd->add_option("--config", norm_config)->check(CLI::ExistingFile);
    norm_cmd->add_flag("--dump-config", norm_dump);

    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

    try {
        if (*ingest) {
            const auto split = split_dataset(load_dataset(ingest_path), parse_ratios(ingest_ratios), ingest_seed);
            write_dataset(split, ingest_out);
            const auto c = split.counts();
            std::cout << "train " << c.train << ", validation " << c.validation << ", test " << c.test << "\n";
        } else if (*index_cmd) {
            const auto dataset = load_dataset(index_dataset);
            auto pairs = dataset.select(Split::train);
            if (parse_index_split(index_split) == IndexSplit::train_validation) {
                auto extra = dataset.select(Split::validation);
                pairs.insert(pairs.end(), extra.begin(), extra.end());
            }
            if (pairs.empty()) throw std::runtime_error("no pairs in split '" + index_split + "'; run ingest first");
            const auto provider = make_embedding_provider(index_provider);
            const auto index = build_index(pairs, *provider);
            save_index(index, index_out);
            std::cout << "indexed " << index.size() << " pairs with " << index.provider_id() << "\n";
        } else if (*query_cmd) {
            const auto index = load_index(query_index);
            const auto provider = make_embedding_provider(query_provider);
            const auto result = query(index, *provider, query_text, query_k, parse_measure(query_measure));
            for (const auto& r : result.results) std::cout << r.rank << "\t" << r.pair_id << "\t" << fmt6(r.score) << "\n";
            if (result.truncated) std::cerr << "note: k exceeds index size; returned " << result.results.size() << "\n";
        } else if (*eval_cmd) {
            return cmd_evaluate(eval_args);
        } else if (*grid_cmd) {
            return cmd_evaluate_grid(grid_args);
        } else if (*serve_cmd) {
            return serve(load_service_config(serve_config));
        } else if (*dump_cmd) {
            std::vector<ResolvedExample> examples;
            if (dump_k > 0) {
                if (dump_index.empty() || dump_dataset.empty()) {
                    throw std::runtime_error("-k > 0 needs --index and --dataset");
                }
                const auto dataset = load_dataset(dump_dataset);
                const auto index = load_index(dump_index);
                const auto provider = make_embedding_provider(dump_provider);
                const auto hits = query(index, *provider, dump_text, static_cast<std::size_t>(dump_k),
                                        parse_measure(dump_measure));
                examples = resolve_examples(hits.results, dataset);
            }
            const auto prompt = assemble(get_prompt(dump_prompt_id), std::move(examples), dump_text);
            const auto placement =
                dump_placement == "user" ? InstructionPlacement::user_prefix : InstructionPlacement::system_message;
            std::cout << dump_prompt(prompt, placement);
        } else if (*norm_cmd) {
            if (norm_dump) {
                std::cout << to_json(default_normalization_config());
            } else {
                std::cout << make_normalizer(norm_config).normalize(norm_input) << "\n";
            }
        }
    } catch (const std::exception& ex) {
        spdlog::error("{}", ex.what());
        return 1;
    }
    return 0;
}
