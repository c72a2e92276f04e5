#include "gr2tex/latex_normalizer.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include <json.hpp>

#include "gr2tex/text_util.hpp"

namespace gr2tex {
namespace {

enum class TokenKind {
    command,    // \ followed by ASCII letters
    control,    // \ followed by one non-letter character
    backslash,  // \ followed by whitespace or end of input
    character,  // one code point (or one malformed byte)
    mapped,     // replacement text produced by the Greek map
};

struct Token {
    std::string text;
    TokenKind kind;
};

bool is_ascii_alpha(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

// Number of whitespace bytes at text[i] (ASCII whitespace or U+00A0).
std::size_t space_width(std::string_view text, std::size_t i) {
    const char c = text[i];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') return 1;
    if (static_cast<unsigned char>(c) == 0xC2 && i + 1 < text.size() &&
        static_cast<unsigned char>(text[i + 1]) == 0xA0) {
        return 2;
    }
    return 0;
}

std::size_t char_width(std::string_view text, std::size_t i) {
    return utf8_chars(text.substr(i, std::min<std::size_t>(4, text.size() - i))).front().size();
}

std::vector<Token> lex(std::string_view text) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        if (const auto ws = space_width(text, i); ws > 0) {
            i += ws;
            continue;
        }
        if (text[i] == '\\') {
            if (i + 1 == text.size() || space_width(text, i + 1) > 0) {
                tokens.push_back({"\\", TokenKind::backslash});
                ++i;
                continue;
            }
            std::size_t j = i + 1;
            if (is_ascii_alpha(text[j])) {
                while (j < text.size() && is_ascii_alpha(text[j])) ++j;
                tokens.push_back({std::string(text.substr(i, j - i)), TokenKind::command});
            } else {
                j += char_width(text, j);
                tokens.push_back({std::string(text.substr(i, j - i)), TokenKind::control});
            }
            i = j;
            continue;
        }
        const auto w = char_width(text, i);
        tokens.push_back({std::string(text.substr(i, w)), TokenKind::character});
        i += w;
    }
    return tokens;
}

std::vector<std::string> lex_texts(std::string_view text) {
    std::vector<std::string> out;
    for (auto& tok : lex(text)) out.push_back(std::move(tok.text));
    return out;
}

bool is_letter(char32_t cp) {
    if (cp < 0x80) return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
    if (cp >= 0xC0 && cp <= 0x24F) return cp != 0xD7 && cp != 0xF7;
    if (cp >= 0x370 && cp <= 0x3FF) return cp != 0x37E && cp != 0x387;
    return cp >= 0x1F00 && cp <= 0x1FFF;
}

bool is_digit(char32_t cp) { return cp >= '0' && cp <= '9'; }

bool is_sizing_command(std::string_view text) {
    static const std::unordered_set<std::string_view> sizing = {
        "\\left", "\\right", "\\middle", "\\big", "\\Big", "\\bigg", "\\Bigg", "\\bigl", "\\bigr",
        "\\Bigl", "\\Bigr", "\\biggl", "\\biggr", "\\Biggl", "\\Biggr"};
    return sizing.contains(text);
}

bool is_single_code_point(std::string_view text) {
    return !text.empty() && utf8_chars(text).size() == 1;
}

struct GreekLetter {
    const char* name;
    char32_t lower;
    char32_t upper;
    const char* latin;
};

constexpr std::array<GreekLetter, 24> kGreekAlphabet{{
    {"alpha", U'α', U'Α', "a"},   {"beta", U'β', U'Β', "b"},     {"gamma", U'γ', U'Γ', "g"},
    {"delta", U'δ', U'Δ', "d"},   {"epsilon", U'ε', U'Ε', "e"},  {"zeta", U'ζ', U'Ζ', "z"},
    {"eta", U'η', U'Η', "h"},     {"theta", U'θ', U'Θ', "th"},   {"iota", U'ι', U'Ι', "i"},
    {"kappa", U'κ', U'Κ', "k"},   {"lambda", U'λ', U'Λ', "l"},   {"mu", U'μ', U'Μ', "m"},
    {"nu", U'ν', U'Ν', "n"},      {"xi", U'ξ', U'Ξ', "xi"},      {"omicron", U'ο', U'Ο', "o"},
    {"pi", U'π', U'Π', "p"},      {"rho", U'ρ', U'Ρ', "r"},      {"sigma", U'σ', U'Σ', "s"},
    {"tau", U'τ', U'Τ', "t"},     {"upsilon", U'υ', U'Υ', "u"},  {"phi", U'φ', U'Φ', "f"},
    {"chi", U'χ', U'Χ', "ch"},    {"psi", U'ψ', U'Ψ', "ps"},     {"omega", U'ω', U'Ω', "w"},
}};

std::string capitalize(std::string s) {
    s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
}

NormalizationConfig build_default_config() {
    NormalizationConfig config;
    config.delimiter_strip_set = {
        "$$", "$", "\\$", "\\(", "\\)", "\\[", "\\]",
        "\\begin{equation}", "\\end{equation}", "\\begin{equation*}", "\\end{equation*}",
        "\\begin{displaymath}", "\\end{displaymath}", "\\begin{math}", "\\end{math}",
    };
    config.formatting_command_strip_set = {
        "\\left", "\\right", "\\middle", "\\big", "\\Big", "\\bigg", "\\Bigg", "\\bigl", "\\bigr",
        "\\Bigl", "\\Bigr", "\\biggl", "\\biggr", "\\Biggl", "\\Biggr",
        "\\,", "\\;", "\\:", "\\!", "\\quad", "\\qquad", "\\displaystyle", "\\textstyle",
    };
    for (const auto& letter : kGreekAlphabet) {
        const std::string name = letter.name;
        config.greek_map["\\" + name] = letter.latin;
        config.greek_map["\\" + capitalize(name)] = capitalize(letter.latin);
        config.greek_map[encode_utf8(letter.lower)] = letter.latin;
        config.greek_map[encode_utf8(letter.upper)] = capitalize(letter.latin);
    }
    // Variant glyphs share the base letter's transliteration.
    const std::array<std::pair<const char*, const char*>, 13> variants{{
        {"\\varepsilon", "e"}, {"\\vartheta", "th"}, {"\\varkappa", "k"}, {"\\varpi", "p"},
        {"\\varrho", "r"}, {"\\varsigma", "s"}, {"\\varphi", "f"},
        {"ϵ", "e"}, {"ϑ", "th"}, {"ϰ", "k"}, {"ϖ", "p"}, {"ϱ", "r"}, {"ϕ", "f"},
    }};
    for (const auto& [key, value] : variants) config.greek_map[key] = value;
    config.greek_map["ς"] = "s";
    config.greek_map["µ"] = "m";  // U+00B5 MICRO SIGN
    config.punctuation_strip_set = {".", ",", ";", "!", "?"};
    return config;
}

}  // namespace

const NormalizationConfig& default_normalization_config() {
    static const NormalizationConfig config = [] {
        auto c = build_default_config();
        validate(c);
        return c;
    }();
    return config;
}

void validate(const NormalizationConfig& config) {
    for (const auto* set : {&config.delimiter_strip_set, &config.formatting_command_strip_set}) {
        for (const auto& entry : *set) {
            if (lex(entry).empty()) {
                throw ConfigError("strip-set entry '" + entry + "' contains no LaTeX token");
            }
            if (config.greek_map.contains(entry)) {
                throw ConfigError("strip-set entry '" + entry + "' is also a Greek map key");
            }
        }
    }
    for (const auto& [key, value] : config.greek_map) {
        if (lex(key).size() != 1) {
            throw ConfigError("Greek map key '" + key + "' is not a single LaTeX token");
        }
    }
    for (const auto& letter : kGreekAlphabet) {
        const std::string name = letter.name;
        for (const auto& key : {"\\" + name, "\\" + capitalize(name), encode_utf8(letter.lower),
                                encode_utf8(letter.upper)}) {
            if (!config.greek_map.contains(key)) {
                throw ConfigError("Greek map is missing '" + key + "'");
            }
        }
    }
    for (const auto& p : config.punctuation_strip_set) {
        if (!is_single_code_point(p)) {
            throw ConfigError("punctuation entry '" + p + "' is not a single character");
        }
    }
}

NormalizationConfig normalization_config_from_json(std::string_view json_text) {
    NormalizationConfig config;
    try {
        const auto j = nlohmann::json::parse(json_text);
        config.version = j.at("version").get<std::string>();
        config.delimiter_strip_set = j.at("delimiter_strip_set").get<std::vector<std::string>>();
        config.formatting_command_strip_set = j.at("formatting_command_strip_set").get<std::vector<std::string>>();
        config.greek_map = j.at("greek_map").get<std::map<std::string, std::string>>();
        config.punctuation_strip_set = j.at("punctuation_strip_set").get<std::set<std::string>>();
        config.lowercase = j.value("lowercase", false);
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(std::string("invalid normalization config: ") + ex.what());
    }
    validate(config);
    return config;
}

std::string to_json(const NormalizationConfig& config) {
    nlohmann::ordered_json j;
    j["version"] = config.version;
    j["delimiter_strip_set"] = config.delimiter_strip_set;
    j["formatting_command_strip_set"] = config.formatting_command_strip_set;
    j["greek_map"] = config.greek_map;
    j["punctuation_strip_set"] = config.punctuation_strip_set;
    j["lowercase"] = config.lowercase;
    return j.dump(2) + "\n";
}

NormalizationConfig load_normalization_config(const std::filesystem::path& path) {
    return normalization_config_from_json(read_file(path));
}

Normalizer::Normalizer(NormalizationConfig config) : config_(std::move(config)) {
    validate(config_);
    for (const auto& d : config_.delimiter_strip_set) delimiter_sequences_.push_back(lex_texts(d));
    std::stable_sort(delimiter_sequences_.begin(), delimiter_sequences_.end(),
                     [](const auto& a, const auto& b) { return a.size() > b.size(); });
    for (const auto& f : config_.formatting_command_strip_set) {
        // Multi-token entries are matched as sequences, like delimiters.
        auto seq = lex_texts(f);
        if (seq.size() == 1) {
            formatting_.insert(seq.front());
        } else {
            delimiter_sequences_.push_back(std::move(seq));
        }
    }
    greek_.insert(config_.greek_map.begin(), config_.greek_map.end());
}

std::string Normalizer::map_greek(std::string_view token) const {
    const auto it = greek_.find(std::string(token));
    return it == greek_.end() ? std::string(token) : it->second;
}

std::string Normalizer::normalize_once(std::string_view latex) const {
    const auto tokens = lex(latex);

    std::vector<Token> kept;
    kept.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size();) {
        if (tokens[i].kind == TokenKind::backslash) {
            ++i;
            continue;
        }
        std::size_t matched = 0;
        for (const auto& seq : delimiter_sequences_) {
            if (i + seq.size() > tokens.size()) continue;
            bool ok = true;
            for (std::size_t k = 0; k < seq.size() && ok; ++k) ok = tokens[i + k].text == seq[k];
            if (ok) {
                matched = seq.size();
                break;
            }
        }
        if (matched > 0) {
            i += matched;
            continue;
        }
        if (formatting_.contains(tokens[i].text)) {
            // "\left." and friends: the dot is an invisible delimiter.
            if (is_sizing_command(tokens[i].text) && i + 1 < tokens.size() && tokens[i + 1].text == ".") {
                ++i;
            }
            ++i;
            continue;
        }
        kept.push_back(tokens[i]);
        ++i;
    }

    for (auto& tok : kept) {
        if (const auto it = greek_.find(tok.text); it != greek_.end()) {
            tok.text = it->second;
            tok.kind = is_single_code_point(tok.text) ? TokenKind::character : TokenKind::mapped;
        }
        if (config_.lowercase && tok.kind != TokenKind::command && tok.kind != TokenKind::control) {
            for (auto& c : tok.text) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        }
    }

    // ^{t} -> ^t and _{t} -> _t when t is one token and unwrapping cannot
    // glue a command name onto following letters.
    std::vector<Token> unbraced;
    unbraced.reserve(kept.size());
    for (std::size_t i = 0; i < kept.size();) {
        const auto& tok = kept[i];
        if ((tok.text == "^" || tok.text == "_") && i + 3 < kept.size() && kept[i + 1].text == "{" &&
            kept[i + 3].text == "}") {
            const auto& inner = kept[i + 2];
            bool eligible = false;
            switch (inner.kind) {
                case TokenKind::character:
                    eligible = inner.text != "{" && inner.text != "}" && inner.text != "^" && inner.text != "_";
                    break;
                case TokenKind::control:
                    eligible = true;
                    break;
                case TokenKind::command:
                    eligible = i + 4 >= kept.size() || kept[i + 4].text.empty() ||
                               !is_ascii_alpha(kept[i + 4].text.front());
                    break;
                default:
                    break;
            }
            if (eligible) {
                unbraced.push_back(tok);
                unbraced.push_back(inner);
                i += 4;
                continue;
            }
        }
        unbraced.push_back(tok);
        ++i;
    }

    auto is_punct = [this](const Token& t) {
        return t.kind == TokenKind::character && config_.punctuation_strip_set.contains(t.text);
    };
    std::size_t begin = 0;
    std::size_t end = unbraced.size();
    while (begin < end && is_punct(unbraced[begin])) ++begin;
    while (end > begin && is_punct(unbraced[end - 1])) --end;

    std::string out;
    for (std::size_t i = begin; i < end; ++i) out += unbraced[i].text;
    return out;
}

std::string Normalizer::normalize(std::string_view latex) const {
    std::string current = normalize_once(latex);
    // Each productive pass shrinks the text or replaces a non-ASCII letter,
    // so the loop terminates well before the guard.
    for (int pass = 0; pass < 64; ++pass) {
        auto next = normalize_once(current);
        if (next == current) break;
        current = std::move(next);
    }
    return current;
}

std::string normalize(std::string_view latex, const NormalizationConfig& config) {
    if (&config == &default_normalization_config()) {
        static const Normalizer shared;
        return shared.normalize(latex);
    }
    return Normalizer(config).normalize(latex);
}

std::string map_greek(std::string_view token, const NormalizationConfig& config) {
    const auto it = config.greek_map.find(std::string(token));
    return it == config.greek_map.end() ? std::string(token) : it->second;
}

std::vector<std::string> tokenize_latex(std::string_view latex) {
    std::vector<std::string> out;
    enum class Run { none, letters, digits } run = Run::none;
    for (auto& tok : lex(latex)) {
        if (tok.kind != TokenKind::character) {
            out.push_back(std::move(tok.text));
            run = Run::none;
            continue;
        }
        const auto cps = decode_utf8(tok.text);
        const char32_t cp = cps.size() == 1 ? cps.front() : U'\0';
        const Run kind = is_letter(cp) ? Run::letters : (is_digit(cp) ? Run::digits : Run::none);
        if (kind != Run::none && kind == run) {
            out.back() += tok.text;
        } else {
            out.push_back(std::move(tok.text));
        }
        run = kind;
    }
    return out;
}

}  // namespace gr2tex
