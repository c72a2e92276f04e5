// Fixture builders shared by the unit tests and the acceptance binary.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gr2tex/dataset.hpp"
#include "gr2tex/embedding.hpp"
#include "gr2tex/retrieval.hpp"
#include "gr2tex/wav.hpp"

namespace support {

// Tokens a LaTeX-ish string is built from. No lone backslashes: every
// backslash starts a command or a control symbol.
inline const std::vector<std::string>& latex_token_pool() {
    static const std::vector<std::string> pool = {
        "x", "y", "z", "a", "b", "n", "k", "1", "2", "10", "0",
        "+", "-", "=", "<", ">", "/", "*", "|", "(", ")", "[", "]",
        "{", "}", "^", "_", "^{2}", "_{i}", "^{n}", "_{\\alpha}",
        "\\frac", "\\sqrt", "\\sum", "\\int", "\\lim", "\\sin", "\\cos", "\\log", "\\infty", "\\to", "\\cdot",
        "\\alpha", "\\beta", "\\Gamma", "\\theta", "\\pi", "\\Omega", "\\varphi", "\\xi",
        "α", "β", "Σ", "ω", "µ",
        "\\left", "\\right", "\\left(", "\\right)", "\\big", "\\,", "\\;", "\\quad", "\\qquad", "\\displaystyle",
        "\\{", "\\}", "\\%", "\\$", "$", "$$", "\\(", "\\)", "\\[", "\\]",
        ".", ",", ";", "!", "?",
        "\\begin{equation}", "\\end{equation}", "\\begin{equation*}",
    };
    return pool;
}

inline bool is_ascii_letter(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

// True when `token` ends in a command name (backslash + letters).
inline bool ends_with_command(const std::string& token) {
    const auto bs = token.rfind('\\');
    if (bs == std::string::npos || bs + 1 >= token.size()) return false;
    for (std::size_t i = bs + 1; i < token.size(); ++i) {
        if (!is_ascii_letter(token[i])) return false;
    }
    return true;
}

inline std::vector<std::string> random_tokens(std::mt19937_64& rng, std::size_t max_len = 14) {
    const auto& pool = latex_token_pool();
    std::uniform_int_distribution<std::size_t> len(0, max_len);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::vector<std::string> out(len(rng));
    for (auto& t : out) t = pool[pick(rng)];
    return out;
}

// Concatenates tokens, adding a single space only where a command would
// otherwise absorb the next token's letters.
inline std::string join_tight(const std::vector<std::string>& tokens) {
    std::string out;
    for (const auto& t : tokens) {
        if (!out.empty() && ends_with_command(out) && !t.empty() && is_ascii_letter(t.front())) out += ' ';
        out += t;
    }
    return out;
}

// Same tokens separated by random non-empty whitespace runs.
inline std::string join_spaced(const std::vector<std::string>& tokens, std::mt19937_64& rng) {
    static const std::vector<std::string> ws = {" ", "  ", "\t", "\n", " \t ", "\xC2\xA0"};
    std::uniform_int_distribution<std::size_t> pick(0, ws.size() - 1);
    std::string out = ws[pick(rng)];
    for (const auto& t : tokens) {
        out += t;
        out += ws[pick(rng)];
    }
    return out;
}

// A small Greek corpus: `n_train` indexed pairs and a test split made of
// exact duplicates (fresh ids) of the first `n_test` train pairs.
inline gr2tex::Dataset duplicated_corpus(std::size_t n_train = 12, std::size_t n_test = 5) {
    static const std::vector<std::pair<std::string, std::string>> base = {
        {"το άλφα συν το βήτα", "\\alpha + \\beta"},
        {"x στο τετράγωνο συν y στο τετράγωνο", "x^2 + y^2"},
        {"το ολοκλήρωμα από μηδέν έως ένα του x", "\\int_0^1 x \\, dx"},
        {"το άθροισμα για i από ένα έως n", "\\sum_{i=1}^{n} i"},
        {"η τετραγωνική ρίζα του x", "\\sqrt{x}"},
        {"ένα δεύτερο", "\\frac{1}{2}"},
        {"το ημίτονο του θήτα", "\\sin \\theta"},
        {"το συνημίτονο του φι", "\\cos \\phi"},
        {"ο λογάριθμος του x", "\\log x"},
        {"το δέλτα x", "\\Delta x"},
        {"n παραγοντικό", "n!"},
        {"το x με δείκτη i", "x_i"},
        {"το ω ίσον δύο π f", "\\omega = 2 \\pi f"},
        {"το a διάφορο του b", "a \\neq b"},
    };
    std::vector<gr2tex::EquationPair> pairs;
    for (std::size_t i = 0; i < n_train && i < base.size(); ++i) {
        pairs.push_back({"tr" + std::to_string(100 + i), base[i].first, base[i].second, gr2tex::Split::train});
    }
    for (std::size_t i = 0; i < n_test && i < pairs.size(); ++i) {
        const auto src = pairs[i];
        pairs.push_back({"te" + std::to_string(100 + i), src.nl_text, src.latex, gr2tex::Split::test});
    }
    return gr2tex::Dataset(std::move(pairs));
}

inline gr2tex::Index train_index(const gr2tex::Dataset& dataset, const gr2tex::EmbeddingProvider& provider) {
    return gr2tex::build_index(dataset.select(gr2tex::Split::train), provider);
}

// Short deterministic tone; `variant` changes the bytes.
inline std::string tone_wav(int variant, std::uint32_t rate = gr2tex::kAsrSampleRate, std::uint16_t channels = 1) {
    std::vector<std::int16_t> samples(1600 * channels);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        samples[i] = static_cast<std::int16_t>(8000.0 * std::sin(0.01 * static_cast<double>((variant + 1) * i)));
    }
    return gr2tex::encode_wav_pcm16(samples, rate, channels);
}

}  // namespace support
