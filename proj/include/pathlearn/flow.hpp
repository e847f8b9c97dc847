#pragma once

// Flows on acyclic automata: the unit-flow polytope (unit outflow at the
// initial state, conservation at every other non-final state), relative
// entropy projection onto it, path decompositions, covering path sets and
// path co-occurrence matrices.

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "pathlearn/automaton.hpp"

namespace pathlearn::flow {

using automata::Automaton;
using automata::Path;
using automata::WeightedAutomaton;

/// Largest violation of the polytope constraints (outflow of the initial
/// state minus one, inflow minus outflow at non-final states, negativity).
double polytope_violation(const Automaton& a, const std::vector<double>& w);

/// Every state splits its inflow equally among its outgoing transitions.
std::vector<double> uniform_flow(const Automaton& a);

struct ProjectionOptions {
    double tolerance = 1e-9;
    std::size_t max_sweeps = 100000;
};

/// Minimizes sum w ln(w/ŵ) + ŵ - w over the unit-flow polytope by cyclic
/// iterative scaling (one Bregman step per constraint, repeated until the
/// largest violation falls below the tolerance). Final states must have no
/// outgoing transitions. Throws NoConvergence.
std::vector<double> re_project(const Automaton& a, std::vector<double> w_hat, const ProjectionOptions& options = {});

struct Component {
    Path path;
    double coefficient = 0.0;
};

/// Convex combination of at most |E| accepting paths reproducing `w`: find
/// a path of positive weights, subtract its smallest weight, repeat. Throws
/// NotInPolytope when `w` violates the constraints by more than `tolerance`.
std::vector<Component> flow_decompose(const Automaton& a, const std::vector<double>& w, double tolerance = 1e-8);

/// Accepting paths that together use every transition. Paths are removed
/// one at a time from the not yet used transitions, which partitions a
/// machine whose non-final states are degree balanced; once that stalls,
/// each remaining transition is covered by a path through it.
std::vector<Path> covering_paths(const Automaton& a);

/// E[v v^T] for the path distribution proportional to path weights, with v
/// the transition incidence vector. Computed by pairwise path sums.
Eigen::MatrixXd second_moment(const WeightedAutomaton& w);

struct Cooccurrence {
    Eigen::MatrixXd matrix;
    Eigen::MatrixXd pinv;
    double lambda_min = 0.0;  // smallest non-zero eigenvalue
    std::size_t rank = 0;
};

/// Moore-Penrose pseudo-inverse of a symmetric PSD matrix; eigenvalues
/// below 1e-10 times the largest are treated as zero.
Cooccurrence pseudo_inverse(const Eigen::MatrixXd& m);

/// Co-occurrence model for the uniform distribution over accepting paths.
Cooccurrence cooccurrence(const Automaton& a);

}  // namespace pathlearn::flow
