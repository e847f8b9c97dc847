#include "pathlearn/text_format.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

namespace pathlearn::automata {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        auto tab = line.find('\t', start);
        fields.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
        if (tab == std::string_view::npos) break;
        start = tab + 1;
    }
    return fields;
}

struct Line {
    std::size_t number;
    std::vector<std::string_view> fields;
};

std::vector<Line> records(std::string_view text) {
    std::vector<Line> lines;
    std::size_t number = 0, start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(start, end - start);
        ++number;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") != std::string_view::npos) lines.push_back({number, split_tabs(line)});
        if (end == text.size()) break;
        start = end + 1;
    }
    return lines;
}

StateId parse_state(const Line& line, std::string_view field) {
    StateId q = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), q);
    if (ec != std::errc() || ptr != field.data() + field.size() || field.empty())
        throw ParseError(line.number, "invalid state id '" + std::string(field) + "'");
    if (q == kNoState) throw ParseError(line.number, "state id too large");
    return q;
}

double parse_weight(const Line& line, std::string_view field) {
    double x = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), x);
    if (ec != std::errc() || ptr != field.data() + field.size() || field.empty())
        throw ParseError(line.number, "invalid weight '" + std::string(field) + "'");
    if (!(x >= 0.0)) throw ParseError(line.number, "negative weight");
    return x;
}

std::string parse_label(const Line& line, std::string_view field) {
    if (field.empty()) throw ParseError(line.number, "empty label");
    return std::string(field);
}

// Shared skeleton: first pass collects state ids, second pass builds.
template <class G, class IsArc, class AddArc, class AddFinal>
G parse_graph(std::string_view text, G machine, IsArc is_arc, AddArc add_arc, AddFinal add_final) {
    auto lines = records(text);
    StateId max_state = 0;
    bool any = false;
    StateId initial = kNoState;
    for (const auto& line : lines) {
        const bool arc = is_arc(line);
        const auto n = arc ? 2u : 1u;
        for (unsigned k = 0; k < n; ++k) {
            auto q = parse_state(line, line.fields[k]);
            max_state = any ? std::max(max_state, q) : q;
            any = true;
        }
        if (initial == kNoState) initial = parse_state(line, line.fields[0]);
    }
    if (!any) return machine;
    // The initial state of a machine with transitions is the first source,
    // even when a final line comes first.
    for (const auto& line : lines)
        if (is_arc(line)) {
            initial = parse_state(line, line.fields[0]);
            break;
        }
    machine.add_states(static_cast<std::size_t>(max_state) + 1);
    machine.set_initial(initial);
    for (const auto& line : lines) {
        if (is_arc(line))
            add_arc(machine, line, parse_state(line, line.fields[0]), parse_state(line, line.fields[1]));
        else
            add_final(machine, line, parse_state(line, line.fields[0]));
    }
    return machine;
}

template <class G, class ArcText, class FinalText>
std::string print_graph(const G& g, ArcText arc_text, FinalText final_text) {
    std::string out;
    if (g.empty()) return out;
    auto emit_arc = [&](std::size_t i) {
        const auto& a = g.arc(i);
        out += std::to_string(a.src);
        out += '\t';
        out += std::to_string(a.dst);
        out += '\t';
        out += arc_text(i);
        out += '\n';
    };
    const auto init = g.initial();
    for (auto i : g.outgoing(init)) emit_arc(i);
    for (std::size_t i = 0; i < g.num_arcs(); ++i)
        if (g.arc(i).src != init) emit_arc(i);
    // With no transitions the initial state must come first among finals.
    if (g.num_arcs() == 0 && g.is_final(init)) out += std::to_string(init) + final_text(init) + "\n";
    for (StateId q = 0; q < g.num_states(); ++q) {
        if (!g.is_final(q) || (g.num_arcs() == 0 && q == init)) continue;
        out += std::to_string(q) + final_text(q) + "\n";
    }
    return out;
}

}  // namespace

std::string format_double(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

std::string print(const Automaton& a) {
    return print_graph(a, [&](std::size_t i) { return a.name(i); }, [](StateId) { return std::string(); });
}

std::string print(const Transducer& t) {
    return print_graph(
        t, [&](std::size_t i) { return t.arc(i).input + "\t" + t.arc(i).output; },
        [](StateId) { return std::string(); });
}

std::string print(const WeightedAutomaton& w) {
    return print_graph(
        w, [&](std::size_t i) { return w.label_name(i) + "\t" + format_double(w.arc(i).weight); },
        [&](StateId q) { return "\t" + format_double(w.final_weight(q)); });
}

Automaton parse_automaton(std::string_view text) {
    auto is_arc = [](const Line& line) {
        if (line.fields.size() == 3) return true;
        if (line.fields.size() == 1) return false;
        throw ParseError(line.number, "expected 3 fields (transition) or 1 field (final state)");
    };
    auto machine = parse_graph(
        text, Automaton{}, is_arc,
        [](Automaton& m, const Line& line, StateId s, StateId d) {
            m.add_transition(s, d, parse_label(line, line.fields[2]));
        },
        [](Automaton& m, const Line&, StateId q) { m.set_final(q); });
    return machine;
}

Transducer parse_transducer(std::string_view text) {
    auto is_arc = [](const Line& line) {
        if (line.fields.size() == 4) return true;
        if (line.fields.size() == 1) return false;
        throw ParseError(line.number, "expected 4 fields (transition) or 1 field (final state)");
    };
    return parse_graph(
        text, Transducer{}, is_arc,
        [](Transducer& m, const Line& line, StateId s, StateId d) {
            auto output = parse_label(line, line.fields[3]);
            if (is_rho(output)) throw ParseError(line.number, "<rho> is not allowed as an output");
            m.add_transition(s, d, parse_label(line, line.fields[2]), std::move(output));
        },
        [](Transducer& m, const Line&, StateId q) { m.set_final(q); });
}

WeightedAutomaton parse_weighted(std::string_view text, std::shared_ptr<SymbolTable> symbols) {
    if (!symbols) symbols = std::make_shared<SymbolTable>();
    auto is_arc = [](const Line& line) {
        if (line.fields.size() == 3 || line.fields.size() == 4) return true;
        if (line.fields.size() == 1 || line.fields.size() == 2) return false;
        throw ParseError(line.number, "expected 3-4 fields (transition) or 1-2 fields (final state)");
    };
    return parse_graph(
        text, WeightedAutomaton(symbols), is_arc,
        [&](WeightedAutomaton& m, const Line& line, StateId s, StateId d) {
            const double weight = line.fields.size() == 4 ? parse_weight(line, line.fields[3]) : 1.0;
            m.add_transition(s, d, symbols->intern(parse_label(line, line.fields[2])), weight);
        },
        [](WeightedAutomaton& m, const Line& line, StateId q) {
            m.set_final_weight(q, line.fields.size() == 2 ? parse_weight(line, line.fields[1]) : 1.0);
        });
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidArgument("cannot write " + path);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw InvalidArgument("write failed for " + path);
}

}  // namespace pathlearn::automata
