#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gr2tex {

enum class Split { train, validation, test, unassigned };

std::string_view to_string(Split split);
// Throws DatasetError on anything other than the four split names.
Split parse_split(std::string_view name);

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EquationPair {
    std::string id;
    std::string nl_text;  // Greek natural-language description, UTF-8
    std::string latex;
    Split split = Split::unassigned;

    bool operator==(const EquationPair&) const = default;
};

struct SplitCounts {
    std::size_t train = 0;
    std::size_t validation = 0;
    std::size_t test = 0;
    std::size_t unassigned = 0;

    std::size_t total() const { return train + validation + test + unassigned; }
    bool operator==(const SplitCounts&) const = default;
};

/// Ordered, id-unique collection of equation pairs. Immutable once built;
/// every constructor path validates the EquationPair invariants.
class Dataset {
public:
    Dataset() = default;
    explicit Dataset(std::vector<EquationPair> pairs);

    const std::vector<EquationPair>& pairs() const { return pairs_; }
    std::size_t size() const { return pairs_.size(); }
    bool empty() const { return pairs_.empty(); }
    SplitCounts counts() const;

    // nullptr when the id is unknown.
    const EquationPair* find(std::string_view id) const;
    std::vector<EquationPair> select(Split split) const;

private:
    std::vector<EquationPair> pairs_;
    std::map<std::string, std::size_t, std::less<>> by_id_;
};

/// Reads JSON Lines: one object per line with keys id, nl_text, latex and an
/// optional split. Blank lines are skipped. Errors carry the 1-based line.
Dataset load_dataset(const std::filesystem::path& path);
Dataset parse_dataset(std::string_view jsonl);

void write_dataset(const Dataset& dataset, const std::filesystem::path& path);
std::string serialize_dataset(const Dataset& dataset);

struct SplitRatios {
    double train = 0.70;
    double validation = 0.15;
    double test = 0.15;
};

/// Seeded shuffle followed by contiguous assignment. Train receives
/// floor(n * train), validation floor(n * validation), test the remainder.
/// The permutation is a Fisher-Yates pass driven by std::mt19937_64 with
/// index j = engine() % (i + 1), so it is reproducible on any conforming
/// standard library. Pairs keep their original order in the result; only
/// the split tags change.
Dataset split_dataset(const Dataset& dataset, SplitRatios ratios, std::uint64_t seed);

// Parses "0.7,0.15,0.15".
SplitRatios parse_ratios(std::string_view text);

}  // namespace gr2tex
