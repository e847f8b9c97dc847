#include "pathlearn/contextual.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>

#include "pathlearn/algorithms.hpp"

namespace pathlearn::contextual {

using automata::StateId;

// --- patterns -----------------------------------------------------------------

void PatternSet::validate() const {
    if (patterns.empty()) throw InvalidArgument("pattern set is empty");
    std::set<Sequence> seen;
    for (const auto& p : patterns) {
        if (p.empty()) throw InvalidArgument("empty pattern");
        if (!seen.insert(p).second) throw InvalidArgument("duplicate pattern");
    }
    if (!(discount >= 0.0 && discount <= 1.0)) throw InvalidArgument("discount must lie in [0, 1]");
}

std::vector<std::size_t> PatternSet::lengths() const {
    std::set<std::size_t> ls;
    for (const auto& p : patterns) ls.insert(p.size());
    return {ls.begin(), ls.end()};
}

std::size_t PatternSet::gap_limit(std::size_t r, std::size_t longest) const {
    if (r <= 1 || discount == 0.0 || longest <= r) return 0;
    const std::size_t room = longest - r;
    return max_gap ? std::min(*max_gap, room) : room;
}

std::optional<std::size_t> PatternSet::index_of(const Sequence& content) const {
    for (std::size_t i = 0; i < patterns.size(); ++i)
        if (patterns[i] == content) return i;
    return std::nullopt;
}

namespace {

double count_pattern(const Sequence& y, const Sequence& theta, const PatternSet& ps) {
    const std::size_t m = y.size(), r = theta.size();
    if (r == 0 || m < r) return 0.0;
    const std::size_t cap = ps.gap_limit(r, m);
    if (cap == 0) {
        double c = 0.0;
        for (std::size_t i = 0; i + r <= m; ++i)
            if (std::equal(theta.begin(), theta.end(), y.begin() + static_cast<std::ptrdiff_t>(i))) c += 1.0;
        return c;
    }
    // f[i][g]: weight of partial occurrences of theta[0..j] ending at i with
    // total gap g so far.
    std::vector<std::vector<double>> f(m, std::vector<double>(cap + 1, 0.0)), next = f;
    for (std::size_t i = 0; i < m; ++i) f[i][0] = y[i] == theta[0] ? 1.0 : 0.0;
    for (std::size_t j = 1; j < r; ++j) {
        for (auto& row : next) std::fill(row.begin(), row.end(), 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            if (y[i] != theta[j]) continue;
            for (std::size_t prev = 0; prev < i; ++prev) {
                const std::size_t skip = i - prev - 1;
                if (skip > cap) continue;
                for (std::size_t g = 0; g + skip <= cap; ++g) next[i][g + skip] += f[prev][g];
            }
        }
        std::swap(f, next);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t g = 0; g <= cap; ++g)
            if (f[i][g] != 0.0) total += f[i][g] * std::pow(ps.discount, static_cast<double>(g));
    return total;
}

}  // namespace

GainVector theta_counts(const Sequence& y, const PatternSet& ps) {
    GainVector theta(ps.patterns.size(), 0.0);
    for (std::size_t i = 0; i < ps.patterns.size(); ++i) theta[i] = count_pattern(y, ps.patterns[i], ps);
    return theta;
}

double dot(const GainVector& a, const GainVector& b) {
    if (a.size() != b.size()) throw InvalidArgument("gain vectors differ in length");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double max_theta_component(const PatternSet& ps, std::size_t max_length) {
    double best = 0.0;
    const double L = static_cast<double>(max_length);
    for (auto r : ps.lengths()) {
        if (r > max_length) continue;
        const std::size_t limit = ps.gap_limit(r, max_length);
        double total = 0.0;
        double binom = 1.0;  // C(r + k - 2, k)
        for (std::size_t k = 0; k <= limit; ++k) {
            if (k > 0) binom = binom * static_cast<double>(r + k - 2) / static_cast<double>(k);
            const double windows = L - static_cast<double>(r + k) + 1.0;
            total += std::pow(ps.discount, static_cast<double>(k)) * windows * (r >= 2 ? binom : 1.0);
        }
        best = std::max(best, total);
    }
    return best;
}

// --- symbols ------------------------------------------------------------------

std::string ContextSymbol::to_string() const {
    std::string s = "#";
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i) s += '+';
        s += names[i];
    }
    s += '@';
    s += std::to_string(gap);
    return s;
}

ContextSymbol ContextSymbol::parse(std::string_view text) {
    if (text.size() < 3 || text.front() != '#') throw InvalidArgument("not a context symbol: " + std::string(text));
    const auto at = text.rfind('@');
    if (at == std::string_view::npos || at == 1 || at + 1 == text.size())
        throw InvalidArgument("not a context symbol: " + std::string(text));
    ContextSymbol sym;
    std::size_t gap = 0;
    for (char c : text.substr(at + 1)) {
        if (c < '0' || c > '9') throw InvalidArgument("bad gap in context symbol: " + std::string(text));
        gap = gap * 10 + static_cast<std::size_t>(c - '0');
    }
    sym.gap = gap;
    auto body = text.substr(1, at - 1);
    std::size_t start = 0;
    while (true) {
        auto plus = body.find('+', start);
        auto part = body.substr(start, plus == std::string_view::npos ? std::string_view::npos : plus - start);
        if (part.empty()) throw InvalidArgument("empty name in context symbol: " + std::string(text));
        sym.names.emplace_back(part);
        if (plus == std::string_view::npos) break;
        start = plus + 1;
    }
    return sym;
}

bool emission_less(const ContextSymbol& a, const ContextSymbol& b) {
    if (a.gap != b.gap) return a.gap < b.gap;
    return a.names < b.names;
}

// --- rules --------------------------------------------------------------------

namespace {

void check_names(const Automaton& a) {
    automata::validate_expert(a);
    for (const auto& t : a.arcs())
        if (t.name.find_first_of("+@") != std::string::npos || t.name.front() == '#')
            throw InvalidArgument("transition name may not contain '+' or '@' or start with '#': " + t.name);
}

// Window shapes in use: (pattern length, total gap) pairs.
struct Shapes {
    std::vector<std::pair<std::size_t, std::size_t>> shapes;
    std::size_t longest_window = 0;
};

Shapes window_shapes(const PatternSet& ps, std::size_t longest) {
    Shapes s;
    for (auto r : ps.lengths()) {
        if (r > longest) continue;
        for (std::size_t k = 0; k <= ps.gap_limit(r, longest); ++k) {
            s.shapes.emplace_back(r, k);
            s.longest_window = std::max(s.longest_window, r + k);
        }
    }
    return s;
}

// All endpoint-anchored subsequences of length r of `window`.
void anchored_subsequences(const Sequence& window, std::size_t r, std::size_t gap, std::vector<ContextSymbol>& out) {
    const std::size_t L = window.size();
    if (r == 1) {
        if (L == 1) out.push_back({{window[0]}, 0});
        return;
    }
    std::vector<std::size_t> pick;
    std::function<void(std::size_t)> rec = [&](std::size_t from) {
        if (pick.size() == r - 2) {
            ContextSymbol s;
            s.gap = gap;
            s.names.push_back(window.front());
            for (auto i : pick) s.names.push_back(window[i]);
            s.names.push_back(window.back());
            out.push_back(std::move(s));
            return;
        }
        for (std::size_t i = from; i + 1 < L; ++i) {
            pick.push_back(i);
            rec(i + 1);
            pick.pop_back();
        }
    };
    rec(1);
}

// Symbols emitted when the last name of `recent` has just been read;
// `recent` holds the most recent names of the path (at least the longest
// window, or the whole path so far).
std::vector<ContextSymbol> step_emission(const Shapes& shapes, const Sequence& recent) {
    std::vector<ContextSymbol> out;
    for (auto [r, k] : shapes.shapes) {
        const std::size_t L = r + k;
        if (recent.size() < L) continue;
        Sequence window(recent.end() - static_cast<std::ptrdiff_t>(L), recent.end());
        anchored_subsequences(window, r, k, out);
    }
    std::sort(out.begin(), out.end(), emission_less);
    return out;
}

}  // namespace

std::vector<Rule> generate_rules(const Automaton& a, const PatternSet& ps) {
    ps.validate();
    check_names(a);
    const auto shapes = window_shapes(ps, automata::longest_path_length(a));
    std::vector<Rule> rules;
    if (shapes.shapes.empty()) return rules;

    // Every path segment up to the longest window length.
    Sequence segment;
    std::function<void(StateId)> extend = [&](StateId q) {
        if (segment.size() == shapes.longest_window) return;
        for (auto i : a.outgoing(q)) {
            segment.push_back(a.name(i));
            for (auto [r, k] : shapes.shapes) {
                if (r + k != segment.size()) continue;
                std::vector<ContextSymbol> outs;
                anchored_subsequences(segment, r, k, outs);
                for (auto& o : outs) rules.push_back({segment, std::move(o)});
            }
            extend(a.arc(i).dst);
            segment.pop_back();
        }
    };
    for (StateId q = 0; q < a.num_states(); ++q) extend(q);
    std::sort(rules.begin(), rules.end(), [](const Rule& x, const Rule& y) {
        return std::tie(x.window, x.output) < std::tie(y.window, y.output);
    });
    return rules;
}

Transducer build_rule_transducer(const std::vector<Rule>& rules) {
    // Matching automaton over rule windows: the state is the longest suffix
    // of the input read so far that is a proper prefix of some window.
    std::map<Sequence, std::vector<ContextSymbol>> by_window;
    std::set<Sequence> prefixes{Sequence{}};
    std::set<std::string> alphabet;
    std::set<std::size_t> window_lengths;
    for (const auto& rule : rules) {
        by_window[rule.window].push_back(rule.output);
        window_lengths.insert(rule.window.size());
        for (std::size_t len = 0; len < rule.window.size(); ++len)
            prefixes.insert(Sequence(rule.window.begin(), rule.window.begin() + static_cast<std::ptrdiff_t>(len)));
        alphabet.insert(rule.window.begin(), rule.window.end());
    }

    Transducer t;
    std::map<Sequence, StateId> id;
    // Shorter histories first, so the empty history is state 0.
    std::vector<Sequence> ordered(prefixes.begin(), prefixes.end());
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const Sequence& x, const Sequence& y) { return x.size() < y.size(); });
    for (const auto& p : ordered) {
        id[p] = t.add_state();
        t.set_final(id[p]);
    }
    t.set_initial(0);

    const std::string eps(automata::kEpsilon);
    for (const auto& h : ordered) {
        const StateId src = id[h];
        for (const auto& x : alphabet) {
            Sequence s = h;
            s.push_back(x);
            std::vector<ContextSymbol> outs;
            for (auto L : window_lengths) {
                if (L > s.size()) continue;
                Sequence w(s.end() - static_cast<std::ptrdiff_t>(L), s.end());
                auto it = by_window.find(w);
                if (it != by_window.end()) outs.insert(outs.end(), it->second.begin(), it->second.end());
            }
            std::sort(outs.begin(), outs.end(), emission_less);
            std::size_t drop = 0;
            while (!prefixes.contains(Sequence(s.begin() + static_cast<std::ptrdiff_t>(drop), s.end()))) ++drop;
            const StateId dst = id[Sequence(s.begin() + static_cast<std::ptrdiff_t>(drop), s.end())];
            if (outs.empty()) {
                if (dst != 0) t.add_transition(src, dst, x, eps);
                continue;
            }
            StateId from = src;
            for (std::size_t j = 0; j < outs.size(); ++j) {
                const bool last = j + 1 == outs.size();
                StateId to = last ? dst : t.add_state();
                if (!last) t.set_final(to, false);
                t.add_transition(from, to, j == 0 ? x : eps, outs[j].to_string());
                from = to;
            }
        }
        t.add_transition(src, 0, std::string(automata::kRho), eps);
    }
    return t;
}

Transducer build_rule_transducer(const Automaton& a, const PatternSet& ps) {
    return build_rule_transducer(generate_rules(a, ps));
}

// --- A′ -------------------------------------------------------------------------

bool ContextAutomaton::equalized() const {
    if (machine.empty()) return true;
    // Every state must sit at a single distance from the initial state, and
    // final states must be sinks at one common distance.
    constexpr std::size_t kUnset = SIZE_MAX;
    std::vector<std::size_t> depth(machine.num_states(), kUnset);
    depth[machine.initial()] = 0;
    for (auto q : automata::topological_order(machine)) {
        if (depth[q] == kUnset) continue;
        for (auto i : machine.outgoing(q)) {
            auto& d = depth[machine.arc(i).dst];
            if (d == kUnset)
                d = depth[q] + 1;
            else if (d != depth[q] + 1)
                return false;
        }
    }
    std::size_t final_depth = kUnset;
    for (auto q : machine.finals()) {
        if (!machine.outgoing(q).empty()) return false;
        if (final_depth != kUnset && depth[q] != final_depth) return false;
        final_depth = depth[q];
    }
    return true;
}

namespace {

ContextAutomaton finish(const Automaton& a, const PatternSet& ps, Automaton machine) {
    ContextAutomaton ca;
    ca.source = a;
    ca.patterns = ps;
    ca.machine = std::move(machine);
    ca.symbols.reserve(ca.machine.num_arcs());
    for (const auto& t : ca.machine.arcs()) {
        if (t.name == kPadMarker)
            ca.symbols.emplace_back();
        else
            ca.symbols.emplace_back(ContextSymbol::parse(t.name));
    }
    return ca;
}

Shapes shapes_of(const ContextAutomaton& ca) {
    return window_shapes(ca.patterns, automata::longest_path_length(ca.source));
}

}  // namespace

ContextAutomaton build_context_automaton(const Automaton& a, const PatternSet& ps) {
    auto rules = generate_rules(a, ps);
    const auto t = build_rule_transducer(rules);
    auto machine = automata::epsilon_remove(automata::project_output(automata::compose(a, t)));
    auto ca = finish(a, ps, std::move(machine));
    ca.rules = std::move(rules);
    return ca;
}

ContextAutomaton build_context_automaton_direct(const Automaton& a, const PatternSet& ps) {
    ps.validate();
    check_names(a);
    const auto shapes = window_shapes(ps, automata::longest_path_length(a));
    const std::size_t keep = shapes.longest_window > 0 ? shapes.longest_window - 1 : 0;

    Automaton m;
    std::map<std::pair<StateId, Sequence>, StateId> id;
    std::vector<std::pair<StateId, Sequence>> todo;
    auto state_of = [&](StateId q, const Sequence& h) {
        auto [it, inserted] = id.try_emplace({q, h}, 0);
        if (inserted) {
            it->second = m.add_state();
            m.set_final(it->second, a.is_final(q));
            todo.emplace_back(q, h);
        }
        return it->second;
    };
    m.set_initial(state_of(a.initial(), {}));
    const std::string eps(automata::kEpsilon);
    for (std::size_t k = 0; k < todo.size(); ++k) {
        const auto [q, h] = todo[k];
        const StateId src = id.at({q, h});
        for (auto i : a.outgoing(q)) {
            Sequence recent = h;
            recent.push_back(a.name(i));
            auto outs = step_emission(shapes, recent);
            if (recent.size() > keep) recent.erase(recent.begin(), recent.end() - static_cast<std::ptrdiff_t>(keep));
            const StateId dst = state_of(a.arc(i).dst, recent);
            if (outs.empty()) {
                m.add_transition(src, dst, eps);
                continue;
            }
            StateId from = src;
            for (std::size_t j = 0; j < outs.size(); ++j) {
                StateId to = j + 1 == outs.size() ? dst : m.add_state();
                m.add_transition(from, to, outs[j].to_string());
                from = to;
            }
        }
    }
    return finish(a, ps, automata::epsilon_remove(m));
}

ContextAutomaton equalize(const ContextAutomaton& ca) {
    auto padded = automata::equalize_path_lengths(ca.machine, std::string(kPadMarker));
    ContextAutomaton out = finish(ca.source, ca.patterns, std::move(padded.machine));
    out.rules = ca.rules;
    return out;
}

std::vector<ContextSymbol> emit(const ContextAutomaton& ca, const Sequence& names) {
    const auto shapes = shapes_of(ca);
    std::vector<ContextSymbol> out;
    Sequence recent;
    for (const auto& x : names) {
        recent.push_back(x);
        if (recent.size() > shapes.longest_window) recent.erase(recent.begin());
        auto step = step_emission(shapes, recent);
        out.insert(out.end(), step.begin(), step.end());
    }
    return out;
}

namespace {

// Follows the transition labeled `sym` from q, passing through padding.
std::optional<std::pair<std::size_t, StateId>> follow(const ContextAutomaton& ca, StateId q, const ContextSymbol& sym,
                                                      Path& path) {
    while (true) {
        std::optional<std::size_t> pad;
        for (auto i : ca.machine.outgoing(q)) {
            if (!ca.symbols[i]) {
                pad = i;
            } else if (*ca.symbols[i] == sym) {
                path.arcs.push_back(i);
                return std::make_pair(i, ca.machine.arc(i).dst);
            }
        }
        if (!pad) return std::nullopt;
        path.arcs.push_back(*pad);
        q = ca.machine.arc(*pad).dst;
    }
}

}  // namespace

Path map_path(const ContextAutomaton& ca, const Path& pi) {
    if (!automata::is_accepting(ca.source, pi)) throw NotAccepting("path is not accepting in the expert automaton");
    Path out;
    if (ca.machine.empty()) throw NotAccepting("context automaton is empty");
    StateId q = ca.machine.initial();
    for (const auto& sym : emit(ca, automata::path_names(ca.source, pi))) {
        auto step = follow(ca, q, sym, out);
        if (!step) throw NotAccepting("no transition for " + sym.to_string());
        q = step->second;
    }
    while (!ca.machine.is_final(q)) {
        std::optional<std::size_t> pad;
        for (auto i : ca.machine.outgoing(q))
            if (!ca.symbols[i]) pad = i;
        if (!pad) throw NotAccepting("emission does not end in a final state");
        out.arcs.push_back(*pad);
        q = ca.machine.arc(*pad).dst;
    }
    return out;
}

Path representative_path(const ContextAutomaton& ca, const Path& pi_prime) {
    // Target label string without padding.
    std::vector<ContextSymbol> target;
    {
        StateId q = ca.machine.empty() ? automata::kNoState : ca.machine.initial();
        for (auto i : pi_prime.arcs) {
            if (q == automata::kNoState || i >= ca.machine.num_arcs() || ca.machine.arc(i).src != q)
                throw NotAccepting("path does not chain in the context automaton");
            if (ca.symbols[i]) target.push_back(*ca.symbols[i]);
            q = ca.machine.arc(i).dst;
        }
        if (q == automata::kNoState || !ca.machine.is_final(q))
            throw NotAccepting("path is not accepting in the context automaton");
    }

    const auto& a = ca.source;
    const auto shapes = shapes_of(ca);
    std::vector<std::vector<std::size_t>> sorted(a.num_states());
    for (StateId q = 0; q < a.num_states(); ++q) {
        auto out = a.outgoing(q);
        sorted[q].assign(out.begin(), out.end());
        std::sort(sorted[q].begin(), sorted[q].end(), [&](auto x, auto y) { return a.name(x) < a.name(y); });
    }
    Path path;
    Sequence recent;
    std::function<bool(StateId, std::size_t)> search = [&](StateId q, std::size_t matched) {
        if (matched == target.size() && a.is_final(q)) return true;
        for (auto i : sorted[q]) {
            Sequence saved = recent;
            recent.push_back(a.name(i));
            if (recent.size() > shapes.longest_window) recent.erase(recent.begin());
            const auto step = step_emission(shapes, recent);
            bool ok = matched + step.size() <= target.size() &&
                      std::equal(step.begin(), step.end(), target.begin() + static_cast<std::ptrdiff_t>(matched));
            if (ok) {
                path.arcs.push_back(i);
                if (search(a.arc(i).dst, matched + step.size())) return true;
                path.arcs.pop_back();
            }
            recent = std::move(saved);
        }
        return false;
    };
    if (a.empty() || !search(a.initial(), 0)) throw NotAccepting("no expert path maps to this path");
    return path;
}

// --- gains ----------------------------------------------------------------------

Sequence path_output(const Automaton& a, const Path& pi, const std::unordered_map<std::string, std::string>& out) {
    Sequence y;
    y.reserve(pi.arcs.size());
    for (auto i : pi.arcs) {
        auto it = out.find(a.name(i));
        if (it == out.end()) throw InvalidArgument("no output for transition " + a.name(i));
        y.push_back(it->second);
    }
    return y;
}

std::vector<double> assign_edge_gains(const ContextAutomaton& ca,
                                      const std::unordered_map<std::string, std::string>& out,
                                      const Sequence& y) {
    const auto theta = theta_counts(y, ca.patterns);
    std::map<Sequence, std::size_t> index;
    for (std::size_t i = 0; i < ca.patterns.patterns.size(); ++i) index.emplace(ca.patterns.patterns[i], i);

    std::vector<double> gains(ca.machine.num_arcs(), 0.0);
    Sequence content;
    for (std::size_t e = 0; e < gains.size(); ++e) {
        const auto& sym = ca.symbols[e];
        if (!sym) continue;
        content.clear();
        for (const auto& name : sym->names) {
            auto it = out.find(name);
            if (it == out.end()) throw InvalidArgument("no output for transition " + name);
            content.push_back(it->second);
        }
        auto hit = index.find(content);
        if (hit == index.end()) continue;
        const double factor = sym->gap == 0 ? 1.0 : std::pow(ca.patterns.discount, static_cast<double>(sym->gap));
        gains[e] = factor * theta[hit->second];
    }
    return gains;
}

double path_gain_oracle(const Automaton& a, const Path& pi, const std::unordered_map<std::string, std::string>& out,
                        const Sequence& y, const PatternSet& ps) {
    if (!automata::is_accepting(a, pi)) throw NotAccepting("path is not accepting");
    return dot(theta_counts(path_output(a, pi, out), ps), theta_counts(y, ps));
}

}  // namespace pathlearn::contextual
