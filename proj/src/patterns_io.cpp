#include "pathlearn/patterns_io.hpp"

#include <charconv>
#include <functional>
#include <sstream>

#include "pathlearn/text_format.hpp"

namespace pathlearn::contextual {

namespace {

std::string_view trim_ws(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

PatternSet parse_patterns(std::string_view text) {
    PatternSet ps;
    bool has_discount = false, has_gap = false;
    std::size_t number = 0, start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = trim_ws(text.substr(start, end - start));
        ++number;
        start = end + 1;
        if (!line.empty()) {
            if (line.starts_with("discount=")) {
                if (has_discount) throw ParseError(number, "repeated discount header");
                auto v = line.substr(9);
                double x = 0.0;
                auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
                if (ec != std::errc() || ptr != v.data() + v.size() || !(x >= 0.0 && x <= 1.0))
                    throw ParseError(number, "discount must be a number in [0, 1]");
                ps.discount = x;
                has_discount = true;
            } else if (line.starts_with("max_gap=")) {
                if (has_gap) throw ParseError(number, "repeated max_gap header");
                auto v = line.substr(8);
                if (v == "inf") {
                    ps.max_gap.reset();
                } else {
                    std::size_t k = 0;
                    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), k);
                    if (ec != std::errc() || ptr != v.data() + v.size() || v.empty())
                        throw ParseError(number, "max_gap must be a non-negative integer or inf");
                    ps.max_gap = k;
                }
                has_gap = true;
            } else {
                Sequence pattern;
                std::istringstream in{std::string(line)};
                for (std::string sym; in >> sym;) pattern.push_back(sym);
                for (const auto& p : ps.patterns)
                    if (p == pattern) throw ParseError(number, "duplicate pattern");
                ps.patterns.push_back(std::move(pattern));
            }
        }
        if (end == text.size()) break;
    }
    if (ps.patterns.empty()) throw ParseError(number, "pattern file contains no patterns");
    if (has_discount && !has_gap && ps.discount > 0.0) ps.max_gap.reset();
    return ps;
}

std::string print_patterns(const PatternSet& ps) {
    std::string out;
    if (ps.discount > 0.0 || ps.max_gap != std::optional<std::size_t>(0)) {
        out += "discount=" + automata::format_double(ps.discount) + "\n";
        out += "max_gap=" + (ps.max_gap ? std::to_string(*ps.max_gap) : std::string("inf")) + "\n";
    }
    for (const auto& p : ps.patterns) {
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (i) out += ' ';
            out += p[i];
        }
        out += '\n';
    }
    return out;
}

PatternSet all_ngrams(const std::vector<std::string>& alphabet, std::size_t n) {
    if (alphabet.empty() || n == 0) throw InvalidArgument("n-grams need a non-empty alphabet and n >= 1");
    PatternSet ps;
    Sequence current;
    std::function<void()> rec = [&]() {
        if (current.size() == n) {
            ps.patterns.push_back(current);
            return;
        }
        for (const auto& s : alphabet) {
            current.push_back(s);
            rec();
            current.pop_back();
        }
    };
    rec();
    return ps;
}

}  // namespace pathlearn::contextual
