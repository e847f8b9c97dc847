#pragma once

// From an expert automaton and a set of count-based patterns to the
// context-dependent automaton A′, on which the per-round gains are additive
// over transitions.

#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "pathlearn/automaton.hpp"

namespace pathlearn::contextual {

using automata::Automaton;
using automata::Path;
using automata::Transducer;

using Sequence = std::vector<std::string>;

struct PatternSet {
    std::vector<Sequence> patterns;
    /// Gap discount; 0 gives exact contiguous counting.
    double discount = 0.0;
    /// Cap on the total gap of an occurrence; nullopt means unbounded.
    std::optional<std::size_t> max_gap = 0;

    /// Throws InvalidArgument on empty/duplicate patterns or a discount
    /// outside [0, 1].
    void validate() const;
    /// Distinct pattern lengths, ascending.
    std::vector<std::size_t> lengths() const;
    /// Largest total gap worth representing for patterns of length `r` on
    /// paths of at most `longest` transitions.
    std::size_t gap_limit(std::size_t r, std::size_t longest) const;
    std::optional<std::size_t> index_of(const Sequence& content) const;
};

using GainVector = std::vector<double>;

/// Discounted occurrence counts of every pattern in `y`: each occurrence
/// i_1 < ... < i_r contributes discount^(i_r - i_1 + 1 - r) when that gap
/// is within max_gap (0^0 = 1).
GainVector theta_counts(const Sequence& y, const PatternSet& ps);

double dot(const GainVector& a, const GainVector& b);

/// Element of the context alphabet: a tuple of expert transition names and
/// the number of skipped transitions inside the window it was read from.
struct ContextSymbol {
    Sequence names;
    std::size_t gap = 0;

    std::string to_string() const;  // #e1+e2+e3@k
    static ContextSymbol parse(std::string_view text);

    auto operator<=>(const ContextSymbol&) const = default;
    bool operator==(const ContextSymbol&) const = default;
};

/// Order of several symbols emitted by one step: gap, then names.
bool emission_less(const ContextSymbol& a, const ContextSymbol& b);

/// Rewrite rule: when `window` (consecutive transitions of a path) has just
/// been read, emit `output`. Contexts are always empty.
struct Rule {
    Sequence window;
    ContextSymbol output;
};

/// One rule per path segment of each pattern length, and, for gappy
/// patterns, one per (segment, endpoint-anchored subsequence) with total
/// gap up to the effective limit. Sorted by window then output.
std::vector<Rule> generate_rules(const Automaton& a, const PatternSet& ps);

/// Deterministic transducer emitting, after each input name, the symbols of
/// all rules whose window ends there (in emission order, chained through
/// ε-input states). Inputs that match no literal arc take the ρ arc.
Transducer build_rule_transducer(const std::vector<Rule>& rules);
Transducer build_rule_transducer(const Automaton& a, const PatternSet& ps);

inline constexpr std::string_view kPadMarker = "<pad>";

struct ContextAutomaton {
    Automaton machine;
    Automaton source;
    PatternSet patterns;
    /// Parsed symbol per transition of `machine`; empty for padding.
    std::vector<std::optional<ContextSymbol>> symbols;
    /// Rules compiled into the transducer (pipeline construction only).
    std::vector<Rule> rules;

    std::size_t num_states() const { return machine.num_states(); }
    std::size_t num_arcs() const { return machine.num_arcs(); }
    /// All accepting paths have one length and final states are sinks.
    bool equalized() const;
};

/// Pipeline construction: ε-removal of the output projection of A ∘ T_A.
ContextAutomaton build_context_automaton(const Automaton& a, const PatternSet& ps);

/// Independent construction walking A with a window of recent names.
ContextAutomaton build_context_automaton_direct(const Automaton& a, const PatternSet& ps);

/// Pads all paths of ca.machine to a common length with `<pad>` arcs.
ContextAutomaton equalize(const ContextAutomaton& ca);

/// Emission of an expert name sequence: the symbol string T_A assigns it.
std::vector<ContextSymbol> emit(const ContextAutomaton& ca, const Sequence& names);

/// The unique A′ path whose labels are the emission of π (padding
/// transitions followed where present). Throws NotAccepting.
Path map_path(const ContextAutomaton& ca, const Path& pi);

/// Lexicographically smallest accepting A path that maps to `pi_prime`.
/// Throws NotAccepting.
Path representative_path(const ContextAutomaton& ca, const Path& pi_prime);

/// Per-round additive gains on A′: a transition labeled (#e_1..e_r)_k
/// gets discount^k * Θ_i(y) when out(e_1)..out(e_r) is pattern i.
/// `out` maps each transition name of A to its output symbol this round.
std::vector<double> assign_edge_gains(const ContextAutomaton& ca,
                                      const std::unordered_map<std::string, std::string>& out,
                                      const Sequence& y);

/// Output string of an A path under `out`.
Sequence path_output(const Automaton& a, const Path& pi, const std::unordered_map<std::string, std::string>& out);

/// Ground truth gain Θ(out(π))·Θ(y), computed without A′.
double path_gain_oracle(const Automaton& a, const Path& pi, const std::unordered_map<std::string, std::string>& out,
                        const Sequence& y, const PatternSet& ps);

/// Largest attainable single component of Θ(y) for |y| ≤ max_length.
double max_theta_component(const PatternSet& ps, std::size_t max_length);

}  // namespace pathlearn::contextual
