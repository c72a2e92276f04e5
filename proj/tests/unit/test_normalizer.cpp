#include <doctest.h>

#include <random>

#include "gr2tex/latex_normalizer.hpp"
#include "gr2tex/text_util.hpp"
#include "../support.hpp"

using namespace gr2tex;

namespace {

struct Golden {
    const char* input;
    const char* expected;
};

// Expected values worked out by hand from the rule set.
const Golden kGoldens[] = {
    {"$x + y$", "x+y"},
    {"x + y", "x+y"},
    {"", ""},
    {"\\alpha^{2} + \\beta", "a^2+b"},
    {"\\alpha^{2}+\\beta", "a^2+b"},
    {"\\left( \\frac{1}{2} \\right)", "(\\frac{1}{2})"},
    {"$$E = mc^{2}$$", "E=mc^2"},
    {"\\(a_{i}\\)", "a_i"},
    {"\\[ \\sum_{i=1}^{n} i \\]", "\\sum_{i=1}^ni"},
    {"\\begin{equation} x^{2} \\end{equation}", "x^2"},
    {"\\begin{equation*}y\\end{equation*}", "y"},
    {"\\displaystyle \\int_{0}^{1} f", "\\int_0^1f"},
    {"a \\, b \\; c \\quad d \\qquad e", "abcde"},
    {"\\Gamma + \\Delta", "G+D"},
    {"γ", "g"},
    {"Ω", "W"},
    {"\\xi + x", "xi+x"},
    {"\\theta", "th"},
    {"\\chi^{2}", "ch^2"},
    {"\\psi", "ps"},
    {"\\varepsilon", "e"},
    {"x + y.", "x+y"},
    {"., x = 1 ;!?", "x=1"},
    {"f(a, b)", "f(a,b)"},
    {"\\sqrt{x}", "\\sqrt{x}"},
    {"x^{ab}", "x^{ab}"},
    {"x^{\\alpha}", "x^a"},
    {"x_{\\pi}", "x_p"},
    {"\\frac{\\partial f}{\\partial y}", "\\frac{\\partialf}{\\partialy}"},
    {"\\lim_{x \\to 0}", "\\lim_{x\\to0}"},
    {"\\Sigma \\neq \\sigma", "S\\neqs"},
    {"{", "{"},
    {"\\frac{1}{2", "\\frac{1}{2"},
    {"\\left. x \\right|", "x|"},
    {"x\xC2\xA0+\xC2\xA0y", "x+y"},
    {"\\$5", "5"},
};

}  // namespace

TEST_SUITE("latex_normalizer") {

TEST_CASE("golden normalizations") {
    const Normalizer n;
    for (const auto& g : kGoldens) {
        CAPTURE(g.input);
        CHECK(n.normalize(g.input) == g.expected);
        CHECK(normalize(g.input) == g.expected);
    }
    CHECK(std::size(kGoldens) >= 25);
}

TEST_CASE("greek map") {
    CHECK(map_greek("\\alpha") == "a");
    CHECK(map_greek("x") == "x");
    CHECK(map_greek("γ") == "g");
    CHECK(map_greek("\\Omega") == "W");
    CHECK(map_greek("\\frac") == "\\frac");
    CHECK(normalize("\\alpha") == normalize("a"));
}

TEST_CASE("greek map covers all letters in both forms and cases") {
    const auto& cfg = default_normalization_config();
    const char* names[] = {"alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta",
                           "iota", "kappa", "lambda", "mu", "nu", "xi", "omicron", "pi",
                           "rho", "sigma", "tau", "upsilon", "phi", "chi", "psi", "omega"};
    const char32_t lower[] = {U'α', U'β', U'γ', U'δ', U'ε', U'ζ', U'η', U'θ', U'ι', U'κ', U'λ', U'μ',
                              U'ν', U'ξ', U'ο', U'π', U'ρ', U'σ', U'τ', U'υ', U'φ', U'χ', U'ψ', U'ω'};
    for (int i = 0; i < 24; ++i) {
        std::string name = names[i];
        std::string cap = name;
        cap[0] = static_cast<char>(cap[0] - 'a' + 'A');
        CAPTURE(name);
        CHECK(cfg.greek_map.count("\\" + name) == 1);
        CHECK(cfg.greek_map.count("\\" + cap) == 1);
        CHECK(cfg.greek_map.count(encode_utf8(lower[i])) == 1);
        CHECK(cfg.greek_map.count(encode_utf8(static_cast<char32_t>(lower[i] - 0x20))) == 1);
        const auto latin = cfg.greek_map.at("\\" + name);
        auto upper_latin = latin;
        upper_latin[0] = static_cast<char>(upper_latin[0] - 'a' + 'A');
        CHECK(cfg.greek_map.at("\\" + cap) == upper_latin);
        CHECK(cfg.greek_map.at(encode_utf8(lower[i])) == latin);
    }
}

TEST_CASE("tokenizer") {
    using V = std::vector<std::string>;
    CHECK(tokenize_latex("\\frac{a}{b}") == V{"\\frac", "{", "a", "}", "{", "b", "}"});
    CHECK(tokenize_latex("").empty());
    CHECK(tokenize_latex("x+12") == V{"x", "+", "12"});
    CHECK(tokenize_latex("ab \\, c") == V{"ab", "\\,", "c"});
    CHECK(tokenize_latex("αβ+1") == V{"αβ", "+", "1"});
}

TEST_CASE("tokenizer concatenation restores input without whitespace") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 300; ++i) {
        const auto s = support::join_spaced(support::random_tokens(rng), rng);
        std::string joined;
        for (const auto& t : tokenize_latex(s)) joined += t;
        std::string stripped;
        for (const auto ch : utf8_chars(s)) {
            if (ch == " " || ch == "\t" || ch == "\n" || ch == "\xC2\xA0") continue;
            stripped += ch;
        }
        CHECK(joined == stripped);
    }
}

TEST_CASE("idempotence, delimiter and whitespace invariance on random strings") {
    const Normalizer n;
    std::mt19937_64 rng(2024);
    const std::pair<std::string, std::string> wrappers[] = {
        {"$", "$"}, {"$$", "$$"}, {"\\(", "\\)"}, {"\\[", "\\]"},
        {"\\begin{equation}", "\\end{equation}"}, {"\\begin{equation*}", "\\end{equation*}"}};
    for (int i = 0; i < 600; ++i) {
        const auto tokens = support::random_tokens(rng);
        const auto s = support::join_tight(tokens);
        CAPTURE(s);
        const auto once = n.normalize(s);
        CHECK(n.normalize(once) == once);
        for (const auto& [open, close] : wrappers) CHECK(n.normalize(open + s + close) == once);
        CHECK(n.normalize(support::join_spaced(tokens, rng)) == once);
        CHECK(once.find(' ') == std::string::npos);
    }
}

TEST_CASE("config file round trip and validation") {
    const auto& cfg = default_normalization_config();
    const auto back = normalization_config_from_json(to_json(cfg));
    CHECK(to_json(back) == to_json(cfg));

    auto bad = cfg;
    bad.greek_map.erase("\\alpha");
    CHECK_THROWS_AS(validate(bad), ConfigError);
    bad = cfg;
    bad.delimiter_strip_set.push_back("\\alpha");
    CHECK_THROWS_AS(validate(bad), ConfigError);
    bad = cfg;
    bad.punctuation_strip_set.insert("ab");
    CHECK_THROWS_AS(validate(bad), ConfigError);
}

TEST_CASE("shipped config file equals the built-in default") {
    const auto shipped = load_normalization_config(GR2TEX_SOURCE_DIR "/data/config/normalization-v1.json");
    CHECK(to_json(shipped) == to_json(default_normalization_config()));
}

TEST_CASE("lowercase switch") {
    auto cfg = default_normalization_config();
    cfg.lowercase = true;
    const Normalizer n(cfg);
    CHECK(n.normalize("X + \\Sigma") == "x+s");
}

}
