#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gr2tex/latex_normalizer.hpp"

namespace gr2tex {

class MetricError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Edit distance over Unicode scalar values (not bytes). Uses the
/// bit-parallel Myers/Hyyrö recurrence when the shorter string fits in a
/// machine word and a two-row Wagner-Fischer table otherwise.
std::size_t levenshtein(std::string_view a, std::string_view b);
std::size_t levenshtein(std::u32string_view a, std::u32string_view b);

/// Normalized edit distance between two normalized LaTeX strings.
/// value = raw_edits / max(hyp_norm_len, ref_norm_len), or 0 when both are
/// empty. Lengths are in code points.
struct ElScore {
    double value = 0.0;
    std::size_t raw_edits = 0;
    std::size_t hyp_norm_len = 0;
    std::size_t ref_norm_len = 0;
};

ElScore el_distance(std::string_view hyp, std::string_view ref, const Normalizer& normalizer);
ElScore el_distance(std::string_view hyp, std::string_view ref,
                    const NormalizationConfig& config = default_normalization_config());

using TokenList = std::vector<std::string>;

/// Corpus BLEU-4 in [0, 100]. Clipped n-gram counts are summed over the
/// corpus; an order n >= 2 with zero matches uses (0 + 1) / (total + 1).
/// Brevity penalty uses the summed hypothesis and reference lengths.
double bleu(const std::vector<TokenList>& hypotheses, const std::vector<TokenList>& references);

/// chrF (character n-grams 1..6, beta = 2) in [0, 100]. For each pair the
/// n-gram precision and recall are averaged over the orders that occur in
/// either string, combined into F-beta, and the per-pair F is averaged over
/// the corpus. Whitespace is removed before extraction.
double chrf(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references);

struct ThresholdRates {
    double pct_below_low = 0.0;
    double pct_above_high = 0.0;
};

inline constexpr double kDefaultLowThreshold = 0.1;
inline constexpr double kDefaultHighThreshold = 0.4;

// Strict inequalities on both sides.
ThresholdRates threshold_rates(const std::vector<ElScore>& scores, double low = kDefaultLowThreshold,
                               double high = kDefaultHighThreshold);

/// 1 = Match, 0 = Almost Match, -1 = Not Match.
int el_bucket(const ElScore& score, double low = kDefaultLowThreshold, double high = kDefaultHighThreshold);
int el_bucket(double value, double low = kDefaultLowThreshold, double high = kDefaultHighThreshold);

struct HumanLabel {
    std::string pair_id;
    int label = 0;
};

struct AgreementReport {
    double agreement = 0.0;
    std::size_t n_items = 0;
    // confusion[human + 1][predicted + 1]
    std::array<std::array<std::size_t, 3>, 3> confusion{};
};

AgreementReport annotation_agreement(const std::vector<std::pair<std::string, int>>& predicted,
                                     const std::vector<HumanLabel>& human);

std::vector<HumanLabel> load_annotations(std::string_view jsonl);

}  // namespace gr2tex
