#include "gr2tex/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "gr2tex/text_util.hpp"

namespace gr2tex {
namespace {

void validate_pair(const EquationPair& pair) {
    if (trim(pair.id).empty()) {
        throw DatasetError("equation pair has an empty id");
    }
    if (trim(pair.nl_text).empty()) {
        throw DatasetError("equation pair '" + pair.id + "' has an empty nl_text");
    }
    if (trim(pair.latex).empty()) {
        throw DatasetError("equation pair '" + pair.id + "' has an empty latex");
    }
}

std::string required_string(const nlohmann::json& obj, const char* key, std::size_t line_no) {
    const auto it = obj.find(key);
    if (it == obj.end()) {
        throw DatasetError("line " + std::to_string(line_no) + ": missing key '" + key + "'");
    }
    if (!it->is_string()) {
        throw DatasetError("line " + std::to_string(line_no) + ": key '" + key + "' is not a string");
    }
    return it->get<std::string>();
}

}  // namespace

std::string_view to_string(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::validation: return "validation";
        case Split::test: return "test";
        case Split::unassigned: return "unassigned";
    }
    return "unassigned";
}

Split parse_split(std::string_view name) {
    if (name == "train") return Split::train;
    if (name == "validation") return Split::validation;
    if (name == "test") return Split::test;
    if (name == "unassigned") return Split::unassigned;
    throw DatasetError("unknown split '" + std::string(name) + "'");
}

Dataset::Dataset(std::vector<EquationPair> pairs) : pairs_(std::move(pairs)) {
    for (std::size_t i = 0; i < pairs_.size(); ++i) {
        validate_pair(pairs_[i]);
        const auto [it, inserted] = by_id_.emplace(pairs_[i].id, i);
        if (!inserted) {
            throw DatasetError("duplicate pair id '" + pairs_[i].id + "'");
        }
    }
}

SplitCounts Dataset::counts() const {
    SplitCounts counts;
    for (const auto& pair : pairs_) {
        switch (pair.split) {
            case Split::train: ++counts.train; break;
            case Split::validation: ++counts.validation; break;
            case Split::test: ++counts.test; break;
            case Split::unassigned: ++counts.unassigned; break;
        }
    }
    return counts;
}

const EquationPair* Dataset::find(std::string_view id) const {
    const auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &pairs_[it->second];
}

std::vector<EquationPair> Dataset::select(Split split) const {
    std::vector<EquationPair> out;
    std::copy_if(pairs_.begin(), pairs_.end(), std::back_inserter(out),
                 [split](const EquationPair& p) { return p.split == split; });
    return out;
}

Dataset parse_dataset(std::string_view jsonl) {
    std::vector<EquationPair> pairs;
    std::map<std::string, std::size_t, std::less<>> first_seen;
    std::size_t line_no = 0;
    for (const auto& raw_line : split_lines(jsonl)) {
        ++line_no;
        if (trim(raw_line).empty()) {
            continue;
        }
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(raw_line);
        } catch (const nlohmann::json::parse_error& ex) {
            throw DatasetError("line " + std::to_string(line_no) + ": malformed JSON (" + ex.what() + ")");
        }
        if (!obj.is_object()) {
            throw DatasetError("line " + std::to_string(line_no) + ": expected a JSON object");
        }
        EquationPair pair;
        pair.id = required_string(obj, "id", line_no);
        pair.nl_text = required_string(obj, "nl_text", line_no);
        pair.latex = required_string(obj, "latex", line_no);
        if (const auto it = obj.find("split"); it != obj.end() && !it->is_null()) {
            if (!it->is_string()) {
                throw DatasetError("line " + std::to_string(line_no) + ": key 'split' is not a string");
            }
            try {
                pair.split = parse_split(it->get<std::string>());
            } catch (const DatasetError& ex) {
                throw DatasetError("line " + std::to_string(line_no) + ": " + ex.what());
            }
        }
        try {
            validate_pair(pair);
        } catch (const DatasetError& ex) {
            throw DatasetError("line " + std::to_string(line_no) + ": " + ex.what());
        }
        if (const auto [it, inserted] = first_seen.emplace(pair.id, line_no); !inserted) {
            throw DatasetError("duplicate pair id '" + pair.id + "' on lines " + std::to_string(it->second) +
                               " and " + std::to_string(line_no));
        }
        pairs.push_back(std::move(pair));
    }
    return Dataset(std::move(pairs));
}

Dataset load_dataset(const std::filesystem::path& path) {
    return parse_dataset(read_file(path));
}

std::string serialize_dataset(const Dataset& dataset) {
    std::string out;
    for (const auto& pair : dataset.pairs()) {
        nlohmann::ordered_json obj;
        obj["id"] = pair.id;
        obj["nl_text"] = pair.nl_text;
        obj["latex"] = pair.latex;
        obj["split"] = to_string(pair.split);
        out += obj.dump();
        out += '\n';
    }
    return out;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
    write_file(path, serialize_dataset(dataset));
}

SplitRatios parse_ratios(std::string_view text) {
    const auto parts = split_on(text, ',');
    if (parts.size() != 3) {
        throw DatasetError("split ratios must be three comma-separated numbers, got '" + std::string(text) + "'");
    }
    std::array<double, 3> values{};
    for (std::size_t i = 0; i < 3; ++i) {
        try {
            std::size_t used = 0;
            const std::string part(trim(parts[i]));
            values[i] = std::stod(part, &used);
            if (used != part.size()) {
                throw std::invalid_argument(part);
            }
        } catch (const std::exception&) {
            throw DatasetError("invalid split ratio '" + std::string(parts[i]) + "'");
        }
    }
    return {values[0], values[1], values[2]};
}

Dataset split_dataset(const Dataset& dataset, SplitRatios ratios, std::uint64_t seed) {
    if (dataset.empty()) {
        throw DatasetError("cannot split an empty dataset");
    }
    const std::array<double, 3> r{ratios.train, ratios.validation, ratios.test};
    for (const double v : r) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw DatasetError("split ratios must be positive");
        }
    }
    if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9) {
        throw DatasetError("split ratios must sum to 1");
    }

    const std::size_t n = dataset.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 engine(seed);
    for (std::size_t i = n - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(engine() % (i + 1));
        std::swap(order[i], order[j]);
    }

    // The epsilon keeps products like 500 * 0.15 from flooring to 74.
    const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * r[0] + 1e-9));
    const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * r[1] + 1e-9));

    auto pairs = dataset.pairs();
    for (std::size_t pos = 0; pos < n; ++pos) {
        Split split = Split::test;
        if (pos < n_train) {
            split = Split::train;
        } else if (pos < n_train + n_val) {
            split = Split::validation;
        }
        pairs[order[pos]].split = split;
    }
    return Dataset(std::move(pairs));
}

}  // namespace gr2tex
