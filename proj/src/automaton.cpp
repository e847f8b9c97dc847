#include "pathlearn/automaton.hpp"

#include <algorithm>
#include <tuple>
#include <unordered_set>

#include "pathlearn/algorithms.hpp"

namespace pathlearn::automata {

SymbolTable::SymbolTable() {
    intern(kEpsilon);
    intern(kRho);
}

Label SymbolTable::intern(std::string_view name) {
    auto it = index_.find(std::string(name));
    if (it != index_.end()) return it->second;
    const auto label = static_cast<Label>(names_.size());
    names_.emplace_back(name);
    index_.emplace(names_.back(), label);
    return label;
}

Label SymbolTable::find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? -1 : it->second;
}

WeightedAutomaton::WeightedAutomaton(std::shared_ptr<const SymbolTable> symbols) : symbols_(std::move(symbols)) {
    if (!symbols_) throw InvalidArgument("weighted automaton needs a symbol table");
}

std::size_t WeightedAutomaton::add_transition(StateId src, StateId dst, Label label, double weight) {
    if (!(weight >= 0.0)) throw InvalidArgument("transition weights must be non-negative");
    if (label < 0 || static_cast<std::size_t>(label) >= symbols_->size())
        throw InvalidArgument("label not in symbol table");
    stochastic_ = false;
    return add_arc(WeightedArc{src, dst, label, weight});
}

void WeightedAutomaton::set_final_weight(StateId q, double weight) {
    if (!(weight >= 0.0)) throw InvalidArgument("final weights must be non-negative");
    set_final(q, true);
    final_weight_[q] = weight;
    stochastic_ = false;
}

void WeightedAutomaton::clear_final(StateId q) {
    set_final(q, false);
    final_weight_[q] = 0.0;
    stochastic_ = false;
}

void WeightedAutomaton::set_weight(std::size_t arc_index, double weight) {
    if (!(weight >= 0.0)) throw InvalidArgument("transition weights must be non-negative");
    arcs_.at(arc_index).weight = weight;
    stochastic_ = false;
}

WeightedAutomaton to_weighted(const Automaton& a, double weight) {
    auto table = std::make_shared<SymbolTable>();
    for (const auto& t : a.arcs()) table->intern(t.name);
    WeightedAutomaton w(table);
    w.add_states(a.num_states());
    if (a.initial() != kNoState) w.set_initial(a.initial());
    for (StateId q = 0; q < a.num_states(); ++q)
        if (a.is_final(q)) w.set_final_weight(q, 1.0);
    for (const auto& t : a.arcs()) w.add_transition(t.src, t.dst, table->find(t.name), weight);
    return w;
}

std::vector<std::string> path_names(const Automaton& a, const Path& path) {
    std::vector<std::string> names;
    names.reserve(path.arcs.size());
    for (auto i : path.arcs) names.push_back(a.name(i));
    return names;
}

std::vector<std::string> path_names(const WeightedAutomaton& w, const Path& path) {
    std::vector<std::string> names;
    names.reserve(path.arcs.size());
    for (auto i : path.arcs) names.push_back(w.label_name(i));
    return names;
}

std::vector<double> incidence(std::size_t num_arcs, const Path& path) {
    std::vector<double> v(num_arcs, 0.0);
    for (auto i : path.arcs) v.at(i) = 1.0;
    return v;
}

bool is_accepting(const Automaton& a, const Path& path) {
    if (a.empty()) return false;
    StateId q = a.initial();
    for (auto i : path.arcs) {
        if (i >= a.num_arcs() || a.arc(i).src != q) return false;
        q = a.arc(i).dst;
    }
    return a.is_final(q);
}

namespace {

template <class G, class Key>
bool equal_shell(const G& a, const G& b, Key key) {
    if (a.num_states() != b.num_states() || a.num_arcs() != b.num_arcs()) return false;
    if (a.empty()) return true;
    if (a.initial() != b.initial()) return false;
    for (StateId q = 0; q < a.num_states(); ++q)
        if (a.is_final(q) != b.is_final(q)) return false;
    std::vector<decltype(key(a, 0))> ka, kb;
    for (std::size_t i = 0; i < a.num_arcs(); ++i) ka.push_back(key(a, i));
    for (std::size_t i = 0; i < b.num_arcs(); ++i) kb.push_back(key(b, i));
    std::sort(ka.begin(), ka.end());
    std::sort(kb.begin(), kb.end());
    return ka == kb;
}

}  // namespace

bool equal(const Automaton& a, const Automaton& b) {
    return equal_shell(a, b, [](const Automaton& m, std::size_t i) {
        const auto& t = m.arc(i);
        return std::make_tuple(t.src, t.dst, t.name);
    });
}

bool equal(const Transducer& a, const Transducer& b) {
    return equal_shell(a, b, [](const Transducer& m, std::size_t i) {
        const auto& t = m.arc(i);
        return std::make_tuple(t.src, t.dst, t.input, t.output);
    });
}

bool equal(const WeightedAutomaton& a, const WeightedAutomaton& b) {
    if (!equal_shell(a, b, [](const WeightedAutomaton& m, std::size_t i) {
            const auto& t = m.arc(i);
            return std::make_tuple(t.src, t.dst, m.symbols()->name(t.label), t.weight);
        }))
        return false;
    for (StateId q = 0; q < a.num_states(); ++q)
        if (a.final_weight(q) != b.final_weight(q)) return false;
    return true;
}

void validate_expert(const Automaton& a) {
    if (a.empty() || a.initial() == kNoState) throw InvalidArgument("expert automaton has no initial state");
    if (a.finals().empty()) throw InvalidArgument("expert automaton has no final state");
    if (!is_acyclic(a)) throw CyclicMachine("expert automaton must be acyclic");
    std::unordered_set<std::string> seen;
    for (const auto& t : a.arcs()) {
        if (is_epsilon(t.name) || is_rho(t.name))
            throw InvalidArgument("reserved token used as transition name: " + t.name);
        if (t.name.empty()) throw InvalidArgument("empty transition name");
        if (!seen.insert(t.name).second) throw InvalidArgument("duplicate transition name: " + t.name);
    }
}

}  // namespace pathlearn::automata
