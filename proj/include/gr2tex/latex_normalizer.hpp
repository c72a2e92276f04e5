#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace gr2tex {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Rule set defining the canonical form of a LaTeX equation. Entries of the
/// strip sets are written as LaTeX source ("\\left", "\\begin{equation}")
/// and matched token-wise, so "\\begin {equation}" is stripped as well.
struct NormalizationConfig {
    std::string version = "1";
    std::vector<std::string> delimiter_strip_set;
    std::vector<std::string> formatting_command_strip_set;
    std::map<std::string, std::string> greek_map;
    std::set<std::string> punctuation_strip_set;
    bool lowercase = false;

    bool operator==(const NormalizationConfig&) const = default;
};

const NormalizationConfig& default_normalization_config();

// Throws ConfigError when an invariant of the rule set is violated.
void validate(const NormalizationConfig& config);

NormalizationConfig normalization_config_from_json(std::string_view json_text);
std::string to_json(const NormalizationConfig& config);
NormalizationConfig load_normalization_config(const std::filesystem::path& path);

/// A NormalizationConfig compiled into lookup tables. Cheap to share across
/// threads; normalize() is const and allocation-local.
class Normalizer {
public:
    explicit Normalizer(NormalizationConfig config = default_normalization_config());

    /// Total and idempotent. Runs the rewrite pass to a fixed point: a pass
    /// can glue a preserved command to following letters ("\\sin" + "x"),
    /// and re-lexing the glued text must not change the result.
    std::string normalize(std::string_view latex) const;

    std::string map_greek(std::string_view token) const;

    const NormalizationConfig& config() const { return config_; }

private:
    std::string normalize_once(std::string_view latex) const;

    NormalizationConfig config_;
    std::vector<std::vector<std::string>> delimiter_sequences_;  // longest first
    std::unordered_set<std::string> formatting_;
    std::unordered_map<std::string, std::string> greek_;
};

std::string normalize(std::string_view latex, const NormalizationConfig& config = default_normalization_config());
std::string map_greek(std::string_view token, const NormalizationConfig& config = default_normalization_config());

/// Splits LaTeX source into evaluation tokens: a backslash command (letters
/// or one control character) is one token, runs of digits and runs of
/// letters are one token each, and every other character stands alone.
/// Whitespace is discarded; a backslash followed by whitespace or the end
/// of input is a lone "\\" token.
std::vector<std::string> tokenize_latex(std::string_view latex);

}  // namespace gr2tex
