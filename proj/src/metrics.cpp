#include "gr2tex/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <unordered_map>

#include <json.hpp>

#include "gr2tex/text_util.hpp"

namespace gr2tex {
namespace {

// Hyyrö's formulation of Myers' bit-vector algorithm for global edit
// distance; `pattern` must be non-empty and at most 64 code points.
std::size_t levenshtein_bitparallel(std::u32string_view pattern, std::u32string_view text) {
    const std::size_t m = pattern.size();
    std::array<std::uint64_t, 128> ascii_peq{};
    std::unordered_map<char32_t, std::uint64_t> other_peq;
    for (std::size_t i = 0; i < m; ++i) {
        const std::uint64_t bit = std::uint64_t{1} << i;
        if (pattern[i] < 128) {
            ascii_peq[pattern[i]] |= bit;
        } else {
            other_peq[pattern[i]] |= bit;
        }
    }
    const std::uint64_t mask = m == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << m) - 1;
    const std::uint64_t last = std::uint64_t{1} << (m - 1);

    std::uint64_t pv = mask;
    std::uint64_t mv = 0;
    std::size_t score = m;
    for (const char32_t c : text) {
        std::uint64_t eq = 0;
        if (c < 128) {
            eq = ascii_peq[c];
        } else if (const auto it = other_peq.find(c); it != other_peq.end()) {
            eq = it->second;
        }
        const std::uint64_t xv = eq | mv;
        const std::uint64_t xh = ((((eq & pv) + pv) & mask) ^ pv) | eq;
        std::uint64_t ph = mv | ~(xh | pv);
        std::uint64_t mh = pv & xh;
        if (ph & last) ++score;
        if (mh & last) --score;
        ph = ((ph << 1) | 1) & mask;
        mh = (mh << 1) & mask;
        pv = (mh | ~(xv | ph)) & mask;
        mv = ph & xv;
    }
    return score;
}

std::size_t levenshtein_rows(std::u32string_view a, std::u32string_view b) {
    std::vector<std::size_t> prev(a.size() + 1);
    std::vector<std::size_t> curr(a.size() + 1);
    for (std::size_t i = 0; i <= a.size(); ++i) prev[i] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
        curr[0] = j;
        for (std::size_t i = 1; i <= a.size(); ++i) {
            const std::size_t sub = prev[i - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            curr[i] = std::min({prev[i] + 1, curr[i - 1] + 1, sub});
        }
        std::swap(prev, curr);
    }
    return prev[a.size()];
}

std::string ngram_key(const TokenList& tokens, std::size_t start, std::size_t n) {
    std::string key;
    for (std::size_t k = 0; k < n; ++k) {
        if (k > 0) key.push_back('\x1f');
        key += tokens[start + k];
    }
    return key;
}

std::unordered_map<std::string, std::size_t> count_token_ngrams(const TokenList& tokens, std::size_t n) {
    std::unordered_map<std::string, std::size_t> counts;
    if (tokens.size() < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) ++counts[ngram_key(tokens, i, n)];
    return counts;
}

std::unordered_map<std::u32string, std::size_t> count_char_ngrams(std::u32string_view chars, std::size_t n) {
    std::unordered_map<std::u32string, std::size_t> counts;
    if (chars.size() < n) return counts;
    for (std::size_t i = 0; i + n <= chars.size(); ++i) ++counts[std::u32string(chars.substr(i, n))];
    return counts;
}

std::u32string strip_whitespace(std::string_view text) {
    std::u32string out;
    for (const char32_t cp : decode_utf8(text)) {
        if (cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' || cp == U'\f' || cp == U'\v' ||
            cp == 0xA0) {
            continue;
        }
        out.push_back(cp);
    }
    return out;
}

double sentence_chrf(std::u32string_view hyp, std::u32string_view ref) {
    constexpr std::size_t kMaxOrder = 6;
    constexpr double kBeta = 2.0;
    if (hyp.empty() && ref.empty()) return 1.0;
    if (hyp.empty() || ref.empty()) return 0.0;

    double precision_sum = 0.0;
    double recall_sum = 0.0;
    std::size_t orders = 0;
    for (std::size_t n = 1; n <= kMaxOrder; ++n) {
        const auto hyp_counts = count_char_ngrams(hyp, n);
        const auto ref_counts = count_char_ngrams(ref, n);
        const std::size_t hyp_total = hyp.size() >= n ? hyp.size() - n + 1 : 0;
        const std::size_t ref_total = ref.size() >= n ? ref.size() - n + 1 : 0;
        if (hyp_total == 0 && ref_total == 0) break;
        std::size_t matches = 0;
        for (const auto& [gram, count] : hyp_counts) {
            if (const auto it = ref_counts.find(gram); it != ref_counts.end()) {
                matches += std::min(count, it->second);
            }
        }
        precision_sum += hyp_total ? static_cast<double>(matches) / static_cast<double>(hyp_total) : 0.0;
        recall_sum += ref_total ? static_cast<double>(matches) / static_cast<double>(ref_total) : 0.0;
        ++orders;
    }
    const double p = precision_sum / static_cast<double>(orders);
    const double r = recall_sum / static_cast<double>(orders);
    if (p + r == 0.0) return 0.0;
    const double b2 = kBeta * kBeta;
    return (1.0 + b2) * p * r / (b2 * p + r);
}

}  // namespace

std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
    while (!a.empty() && !b.empty() && a.front() == b.front()) {
        a.remove_prefix(1);
        b.remove_prefix(1);
    }
    while (!a.empty() && !b.empty() && a.back() == b.back()) {
        a.remove_suffix(1);
        b.remove_suffix(1);
    }
    if (a.size() > b.size()) std::swap(a, b);
    if (a.empty()) return b.size();
    if (a.size() <= 64) return levenshtein_bitparallel(a, b);
    return levenshtein_rows(a, b);
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
    return levenshtein(decode_utf8(a), decode_utf8(b));
}

ElScore el_distance(std::string_view hyp, std::string_view ref, const Normalizer& normalizer) {
    const auto hyp_norm = decode_utf8(normalizer.normalize(hyp));
    const auto ref_norm = decode_utf8(normalizer.normalize(ref));
    ElScore score;
    score.hyp_norm_len = hyp_norm.size();
    score.ref_norm_len = ref_norm.size();
    score.raw_edits = levenshtein(hyp_norm, ref_norm);
    const std::size_t denom = std::max(score.hyp_norm_len, score.ref_norm_len);
    score.value = denom == 0 ? 0.0 : static_cast<double>(score.raw_edits) / static_cast<double>(denom);
    return score;
}

ElScore el_distance(std::string_view hyp, std::string_view ref, const NormalizationConfig& config) {
    if (&config == &default_normalization_config()) {
        static const Normalizer shared;
        return el_distance(hyp, ref, shared);
    }
    return el_distance(hyp, ref, Normalizer(config));
}

double bleu(const std::vector<TokenList>& hypotheses, const std::vector<TokenList>& references) {
    constexpr std::size_t kMaxOrder = 4;
    if (hypotheses.empty()) throw MetricError("BLEU needs a non-empty corpus");
    if (hypotheses.size() != references.size()) {
        throw MetricError("BLEU needs as many references as hypotheses");
    }

    std::array<std::size_t, kMaxOrder> matches{};
    std::array<std::size_t, kMaxOrder> totals{};
    std::size_t hyp_len = 0;
    std::size_t ref_len = 0;
    for (std::size_t s = 0; s < hypotheses.size(); ++s) {
        const auto& hyp = hypotheses[s];
        const auto& ref = references[s];
        hyp_len += hyp.size();
        ref_len += ref.size();
        for (std::size_t n = 1; n <= kMaxOrder; ++n) {
            const auto hyp_counts = count_token_ngrams(hyp, n);
            const auto ref_counts = count_token_ngrams(ref, n);
            for (const auto& [gram, count] : hyp_counts) {
                totals[n - 1] += count;
                if (const auto it = ref_counts.find(gram); it != ref_counts.end()) {
                    matches[n - 1] += std::min(count, it->second);
                }
            }
        }
    }
    if (matches[0] == 0) return 0.0;

    double log_sum = 0.0;
    for (std::size_t n = 0; n < kMaxOrder; ++n) {
        double p = 0.0;
        if (n > 0 && matches[n] == 0) {
            p = 1.0 / static_cast<double>(totals[n] + 1);
        } else {
            p = static_cast<double>(matches[n]) / static_cast<double>(totals[n]);
        }
        log_sum += std::log(p);
    }
    const double brevity = hyp_len > ref_len
                               ? 1.0
                               : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
    return 100.0 * brevity * std::exp(log_sum / static_cast<double>(kMaxOrder));
}

double chrf(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references) {
    if (hypotheses.empty()) throw MetricError("chrF needs a non-empty corpus");
    if (hypotheses.size() != references.size()) {
        throw MetricError("chrF needs as many references as hypotheses");
    }
    double total = 0.0;
    for (std::size_t s = 0; s < hypotheses.size(); ++s) {
        total += sentence_chrf(strip_whitespace(hypotheses[s]), strip_whitespace(references[s]));
    }
    return 100.0 * total / static_cast<double>(hypotheses.size());
}

ThresholdRates threshold_rates(const std::vector<ElScore>& scores, double low, double high) {
    if (scores.empty()) throw MetricError("threshold rates need at least one score");
    std::size_t below = 0;
    std::size_t above = 0;
    for (const auto& s : scores) {
        if (s.value < low) ++below;
        if (s.value > high) ++above;
    }
    const auto n = static_cast<double>(scores.size());
    return {100.0 * static_cast<double>(below) / n, 100.0 * static_cast<double>(above) / n};
}

int el_bucket(double value, double low, double high) {
    if (value < low) return 1;
    if (value > high) return -1;
    return 0;
}

int el_bucket(const ElScore& score, double low, double high) {
    return el_bucket(score.value, low, high);
}

AgreementReport annotation_agreement(const std::vector<std::pair<std::string, int>>& predicted,
                                     const std::vector<HumanLabel>& human) {
    auto check_label = [](int label, const std::string& id) {
        if (label < -1 || label > 1) {
            throw MetricError("label " + std::to_string(label) + " for '" + id + "' is not in {-1, 0, 1}");
        }
    };
    std::map<std::string, int, std::less<>> by_id;
    for (const auto& [id, bucket] : predicted) {
        check_label(bucket, id);
        if (!by_id.emplace(id, bucket).second) {
            throw MetricError("duplicate predicted id '" + id + "'");
        }
    }
    if (human.empty()) throw MetricError("no human labels to compare against");

    AgreementReport report;
    std::size_t agree = 0;
    std::map<std::string, bool, std::less<>> seen;
    for (const auto& h : human) {
        check_label(h.label, h.pair_id);
        const auto it = by_id.find(h.pair_id);
        if (it == by_id.end()) {
            throw MetricError("human label references unknown pair id '" + h.pair_id + "'");
        }
        if (!seen.emplace(h.pair_id, true).second) {
            throw MetricError("duplicate human label for '" + h.pair_id + "'");
        }
        ++report.confusion[static_cast<std::size_t>(h.label + 1)][static_cast<std::size_t>(it->second + 1)];
        if (h.label == it->second) ++agree;
    }
    report.n_items = human.size();
    report.agreement = static_cast<double>(agree) / static_cast<double>(human.size());
    return report;
}

std::vector<HumanLabel> load_annotations(std::string_view jsonl) {
    std::vector<HumanLabel> labels;
    std::size_t line_no = 0;
    for (const auto line : split_lines(jsonl)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            const int label = j.at("label").get<int>();
            if (label < -1 || label > 1) {
                throw MetricError("annotations line " + std::to_string(line_no) + ": label must be -1, 0 or 1");
            }
            labels.push_back({j.at("pair_id").get<std::string>(), label});
        } catch (const nlohmann::json::exception& ex) {
            throw MetricError("annotations line " + std::to_string(line_no) + ": " + ex.what());
        }
    }
    return labels;
}

}  // namespace gr2tex
