#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "pathlearn/automaton.hpp"
#include "pathlearn/random.hpp"

namespace pathlearn::automata {

// --- structure --------------------------------------------------------------

bool is_acyclic(const Automaton& a);
bool is_acyclic(const WeightedAutomaton& w);

/// Topological order of all states; throws CyclicMachine.
std::vector<StateId> topological_order(const Automaton& a);
std::vector<StateId> topological_order(const WeightedAutomaton& w);

/// Removes states that are not both accessible and co-accessible, then
/// renumbers states canonically: breadth-first discovery from the initial
/// state, refined into a topological order when the machine is acyclic.
/// A machine with an empty language becomes the empty machine (no states).
Automaton trim(const Automaton& a);
Transducer trim(const Transducer& t);
WeightedAutomaton trim(const WeightedAutomaton& w);

// Size queries for an acyclic automaton (K, N; Q and M are num_states and
// num_arcs).
std::size_t longest_path_length(const Automaton& a);
double count_paths(const Automaton& a);
/// Longest distance (in transitions) from the initial state to each state.
std::vector<std::size_t> depths(const Automaton& a);

// --- rational operations ----------------------------------------------------

/// Composition of an ε-free acyclic automaton with a transducer. A
/// transducer arc with input ρ matches any name that has no literal arc at
/// that state; ε-input arcs advance the transducer alone. The result is
/// trimmed and canonically numbered.
Transducer compose(const Automaton& a, const Transducer& t);

/// Keeps the output label of every transition (ε outputs become <eps>).
Automaton project_output(const Transducer& t);

/// Removes <eps> transitions from an acyclic automaton, preserving the
/// accepted string set. The result is trimmed and canonically numbered.
Automaton epsilon_remove(const Automaton& a);

/// Weighted intersection. `second` may use ρ arcs; `first` may not use ε.
/// A literal arc of `first` pairs with the literal arc of `second` carrying
/// the same label, or else with the ρ arc of `second`; a ρ arc of `first`
/// pairs only with a ρ arc of `second`. Labels are matched by name.
WeightedAutomaton intersect(const WeightedAutomaton& first, const WeightedAutomaton& second);

// --- weighted algorithms ------------------------------------------------------

enum class Direction { forward, backward };

/// Forward: total weight of all paths from the initial state into q.
/// Backward: total weight of all paths from q to final states, including
/// final weights. One topological sweep.
std::vector<double> shortest_distance(const WeightedAutomaton& w, Direction direction);

/// Reweights so that every state with positive backward mass is stochastic
/// while normalized path weights are preserved. Throws ZeroTotalMass.
WeightedAutomaton weight_push(const WeightedAutomaton& w);

/// Checks the stochastic property numerically (states with zero backward
/// mass are ignored).
bool is_stochastic(const WeightedAutomaton& w, double tolerance = 1e-12);

/// Weight of a path (product of transition weights and final weight).
double path_weight(const WeightedAutomaton& w, const Path& path);

/// Draws an accepting path from a stochastic machine. Throws NotStochastic.
Path sample_path(const WeightedAutomaton& w, Rng& rng);

/// Probability that a path drawn from the machine uses each transition.
/// Throws NotStochastic.
std::vector<double> edge_flow(const WeightedAutomaton& w);

// --- enumeration and search ---------------------------------------------------

inline constexpr std::size_t kDefaultPathCap = 1'000'000;

/// All accepting paths in lexicographic order of transition names (a path
/// precedes its extensions). Throws TooManyPaths beyond `cap`.
std::vector<Path> enumerate_paths(const Automaton& a, std::size_t cap = kDefaultPathCap);
std::vector<Path> enumerate_paths(const WeightedAutomaton& w, std::size_t cap = kDefaultPathCap);

/// Accepting path maximizing the summed transition gains; ties (within
/// 1e-9 relative) go to the lexicographically smallest name sequence.
Path best_path(const Automaton& a, const std::vector<double>& edge_gain);

struct Equalized {
    Automaton machine;
    /// For every transition of `machine`, the index of the original
    /// transition, or npos for added padding.
    std::vector<std::size_t> origin;
    std::size_t added_states = 0;
};

/// Pads an acyclic automaton so all accepting paths have the length K of
/// the longest one. States keep their longest distance from the initial
/// state as their layer; gaps are bridged with transitions labeled `marker`
/// through shared delay chains.
Equalized equalize_path_lengths(const Automaton& a, const std::string& marker);

}  // namespace pathlearn::automata
