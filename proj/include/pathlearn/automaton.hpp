#pragma once

// Acyclic machines used throughout the library: plain automata whose
// transitions carry a name, transducers with input/output labels, and
// weighted automata over the (R+, +, x) semiring.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pathlearn/errors.hpp"

namespace pathlearn::automata {

using StateId = std::uint32_t;
inline constexpr StateId kNoState = std::numeric_limits<StateId>::max();

// Reserved label tokens.
inline constexpr std::string_view kEpsilon = "<eps>";
inline constexpr std::string_view kRho = "<rho>";

inline bool is_epsilon(std::string_view label) { return label == kEpsilon; }
inline bool is_rho(std::string_view label) { return label == kRho; }

/// Shared graph shell: states are dense ids, arcs are stored in insertion
/// order and indexed per source state.
template <class Arc>
class Graph {
public:
    using arc_type = Arc;

    StateId add_state() {
        out_.emplace_back();
        final_.push_back(0);
        return static_cast<StateId>(out_.size() - 1);
    }

    void add_states(std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) add_state();
    }

    void set_initial(StateId q) {
        check_state(q);
        initial_ = q;
    }

    void set_final(StateId q, bool is_final = true) {
        check_state(q);
        final_[q] = is_final ? 1 : 0;
    }

    std::size_t add_arc(Arc arc) {
        check_state(arc.src);
        check_state(arc.dst);
        arcs_.push_back(std::move(arc));
        out_[arcs_.back().src].push_back(arcs_.size() - 1);
        return arcs_.size() - 1;
    }

    std::size_t num_states() const noexcept { return out_.size(); }
    std::size_t num_arcs() const noexcept { return arcs_.size(); }
    /// States plus transitions.
    std::size_t size() const noexcept { return num_states() + num_arcs(); }
    bool empty() const noexcept { return out_.empty(); }

    StateId initial() const noexcept { return initial_; }
    bool is_final(StateId q) const { return final_.at(q) != 0; }

    std::vector<StateId> finals() const {
        std::vector<StateId> result;
        for (StateId q = 0; q < final_.size(); ++q)
            if (final_[q]) result.push_back(q);
        return result;
    }

    const Arc& arc(std::size_t i) const { return arcs_.at(i); }
    Arc& mutable_arc(std::size_t i) { return arcs_.at(i); }
    const std::vector<Arc>& arcs() const noexcept { return arcs_; }

    std::span<const std::size_t> outgoing(StateId q) const { return out_.at(q); }

protected:
    void check_state(StateId q) const {
        if (q >= out_.size()) throw InvalidArgument("state id " + std::to_string(q) + " out of range");
    }

    std::vector<Arc> arcs_;
    std::vector<std::vector<std::size_t>> out_;
    std::vector<char> final_;
    StateId initial_ = kNoState;
};

struct Transition {
    StateId src = 0;
    StateId dst = 0;
    std::string name;
};

/// Unweighted acyclic automaton. Expert automata additionally carry unique
/// transition names (see validate_expert); an automaton produced by output
/// projection may carry <eps> labels.
class Automaton : public Graph<Transition> {
public:
    std::size_t add_transition(StateId src, StateId dst, std::string name) {
        return add_arc(Transition{src, dst, std::move(name)});
    }
    const std::string& name(std::size_t arc_index) const { return arc(arc_index).name; }
};

struct TransducerArc {
    StateId src = 0;
    StateId dst = 0;
    std::string input;
    std::string output;
};

/// Unweighted transducer; may be cyclic (the rule transducer reads
/// arbitrary strings). ρ is allowed on the input side only.
class Transducer : public Graph<TransducerArc> {
public:
    std::size_t add_transition(StateId src, StateId dst, std::string input, std::string output) {
        return add_arc(TransducerArc{src, dst, std::move(input), std::move(output)});
    }
};

// ---------------------------------------------------------------------------
// Weighted automata use interned integer labels.

using Label = std::int32_t;
inline constexpr Label kEpsilonLabel = 0;
inline constexpr Label kRhoLabel = 1;

/// String <-> label interning. Ids 0 and 1 are <eps> and <rho>.
class SymbolTable {
public:
    SymbolTable();

    Label intern(std::string_view name);
    Label find(std::string_view name) const;  // -1 when absent
    const std::string& name(Label label) const { return names_.at(static_cast<std::size_t>(label)); }
    std::size_t size() const noexcept { return names_.size(); }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, Label> index_;
};

struct WeightedArc {
    StateId src = 0;
    StateId dst = 0;
    Label label = kEpsilonLabel;
    double weight = 1.0;
};

/// Weighted automaton: path weight is the product of transition weights
/// times the destination's final weight. The stochastic flag is set by
/// weight pushing and cleared by any mutation of weights.
class WeightedAutomaton : public Graph<WeightedArc> {
public:
    WeightedAutomaton() : symbols_(std::make_shared<SymbolTable>()) {}
    explicit WeightedAutomaton(std::shared_ptr<const SymbolTable> symbols);

    StateId add_state() {
        final_weight_.push_back(0.0);
        return Graph::add_state();
    }
    void add_states(std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) add_state();
    }

    std::size_t add_transition(StateId src, StateId dst, Label label, double weight);
    void set_final_weight(StateId q, double weight);
    void clear_final(StateId q);
    double final_weight(StateId q) const { return is_final(q) ? final_weight_.at(q) : 0.0; }
    void set_weight(std::size_t arc_index, double weight);

    const std::shared_ptr<const SymbolTable>& symbols() const noexcept { return symbols_; }
    const std::string& label_name(std::size_t arc_index) const { return symbols_->name(arc(arc_index).label); }

    bool stochastic() const noexcept { return stochastic_; }
    void mark_stochastic(bool flag) noexcept { stochastic_ = flag; }

private:
    std::shared_ptr<const SymbolTable> symbols_;
    std::vector<double> final_weight_;
    bool stochastic_ = false;
};

/// Builds a weighted copy of a plain automaton (all weights 1, final
/// weights 1) with a fresh symbol table over its names.
WeightedAutomaton to_weighted(const Automaton& a, double weight = 1.0);

/// Sequence of transition indices into a particular machine.
struct Path {
    std::vector<std::size_t> arcs;

    bool operator==(const Path&) const = default;
    auto operator<=>(const Path&) const = default;
    std::size_t length() const noexcept { return arcs.size(); }
};

std::vector<std::string> path_names(const Automaton& a, const Path& path);
std::vector<std::string> path_names(const WeightedAutomaton& w, const Path& path);

/// 0/1 incidence vector over the machine's transitions.
std::vector<double> incidence(std::size_t num_arcs, const Path& path);

/// True if path chains from the initial state to a final state.
bool is_accepting(const Automaton& a, const Path& path);

// Structural equality: same state count, initial state, finality (and final
// weights), and the same multiset of transitions compared by label text.
bool equal(const Automaton& a, const Automaton& b);
bool equal(const Transducer& a, const Transducer& b);
bool equal(const WeightedAutomaton& a, const WeightedAutomaton& b);

/// Throws InvalidArgument unless `a` is a valid expert automaton: acyclic,
/// has an initial state and at least one final state, and its transition
/// names are unique and not reserved tokens.
void validate_expert(const Automaton& a);

}  // namespace pathlearn::automata
