#pragma once

// Ensemble structured prediction experiments: r experts each predicting
// one symbol per position, combined freely position by position; gains are
// n-gram count inner products with a noisy target.

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "pathlearn/contextual.hpp"
#include "pathlearn/learners.hpp"

namespace pathlearn::harness {

using automata::Automaton;
using automata::Path;
using contextual::ContextAutomaton;
using contextual::PatternSet;
using contextual::Sequence;
using learners::Algorithm;
using learners::Regime;
using Outputs = std::unordered_map<std::string, std::string>;

enum class Adversary { iid, drifting, adaptive };
std::string_view to_string(Adversary a);
Adversary parse_adversary(std::string_view s);  // throws ConfigError

struct EnsembleSpec {
    std::size_t experts = 2;    // r
    std::size_t positions = 6;  // ℓ
    std::size_t order = 2;      // n
    std::vector<std::string> alphabet{"a", "b", "c"};
    Adversary adversary = Adversary::iid;
    std::size_t horizon = 1000;  // T
    std::uint64_t seed = 0;
    /// Probability that a target position is replaced by a uniform symbol.
    double noise = 0.1;
    /// Mass of each transition's preferred symbol (1 gives point masses).
    double concentration = 0.6;
    double discount = 0.0;
    std::optional<std::size_t> max_gap = 0;

    void validate() const;  // throws ConfigError
    PatternSet patterns() const;
};

/// ℓ+1 states in a chain with transitions h<j>_<i> (expert j, position i).
Automaton build_ensemble_automaton(const EnsembleSpec& spec);

struct RoundData {
    Outputs out;
    Sequence y;
};

/// Generates (out_t, y_t). Targets copy the outputs of a hidden path, each
/// position replaced by a uniform symbol with probability `noise`.
/// iid: fixed per-transition distributions. drifting: at T/2 every expert
/// takes over the distribution (and hidden role) of the next expert.
/// adaptive: the transitions of the learner's most played path so far
/// output a symbol different from the target.
class AdversaryModel {
public:
    AdversaryModel(const EnsembleSpec& spec, const Automaton& a, Rng rng);
    /// `played` holds the learner's previous paths (all it has revealed).
    RoundData step(std::size_t t, const std::vector<Path>& played);
    /// Symbol distribution of expert j at position i in round t.
    const std::vector<double>& distribution(std::size_t t, std::size_t j, std::size_t i) const;

private:
    std::size_t rotate(std::size_t t, std::size_t j) const;

    EnsembleSpec spec_;
    Automaton a_;
    Rng rng_;
    std::vector<std::vector<std::vector<double>>> dist_;  // [position][expert][symbol]
    std::vector<std::size_t> hidden_;                      // expert per position
    std::vector<std::vector<std::size_t>> arc_;            // [position][expert] -> arc of A
};

/// Best path in hindsight from per-round A′ gains: the argmax of the summed
/// gains (ties to the smallest label sequence) and its A representative.
struct Comparator {
    Path path;          // in A
    Path context_path;  // in ca.machine
    double gain = 0;
};
Comparator best_fixed_path(const std::vector<RoundData>& history, const ContextAutomaton& ca);

/// Regret bound of each algorithm for the given sizes.
struct Bounds {
    double cdch = 0;
    double cdsb = 0;
    double cdcb = 0;
    double exp3ag = 0;
    double for_algorithm(Algorithm a) const;
};

struct BoundInputs {
    double T = 0, B = 0, U = 0, K = 0, M = 0, N = 0, C = 0, lambda_min = 0, delta = 0.1;
};
Bounds evaluate_bounds(const BoundInputs& in);

struct TraceRow {
    std::size_t t = 0;
    std::string chosen_path;  // names joined by spaces
    double realized_gain = 0;
    double expected_gain = 0;
    double comparator_gain = 0;  // cumulative gain of the best path so far
    double regret = 0;           // comparator_gain minus cumulative expected gain
    double bound = 0;            // regret bound of the algorithm at horizon t
    double best_path_gain = 0;   // this round's gain of the final best path
};

struct Metrics {
    std::size_t T = 0;
    double regret_expected = 0;
    double regret_realized = 0;
    /// Log-gain regret of the realized play; +inf when some realized gain
    /// is zero (unbounded), -inf when the comparator scores zero somewhere.
    double regret_log = 0;
    double alpha = 0;  // smallest realized gain
    bool log_regret_bounded() const { return alpha > 0; }
};
Metrics compute_metrics(const std::vector<TraceRow>& rows);

struct RunOptions {
    EnsembleSpec spec;
    Algorithm algorithm = Algorithm::cdch;
    Regime regime = Regime::full;
    learners::LearnerConfig learner;
    /// Expected gains of EXP3-AG need the path list; beyond this many paths
    /// the expected gain column repeats the realized gain.
    std::size_t enumeration_cap = 4096;
};

struct RunResult {
    std::vector<TraceRow> rows;
    learners::Tuning tuning;
    BoundInputs sizes;
    Bounds bounds;  // at the full horizon
    Metrics metrics;
    Comparator comparator;
    std::vector<std::string> notes;
};

/// Plays the online protocol for spec.horizon rounds. Throws
/// RegimeMismatch when the algorithm does not match the regime.
RunResult run_experiment(const RunOptions& options);

/// Builds the feedback a learner is allowed to see, and nothing else.
learners::Feedback make_feedback(Regime regime, const learners::Choice& played,
                                 const std::vector<double>& edge_gains, double path_gain);

/// Replays `rounds` rounds; each round the feedback is also computed from a
/// perturbed round (outputs changed on transitions off the played path)
/// and applied to a copy of the learner. True when the copies always end in
/// the same state as the learner (semi and bandit regimes).
bool audit_information_flow(const RunOptions& options, std::size_t rounds);

// --- outputs ------------------------------------------------------------------

std::string trace_csv(const std::vector<TraceRow>& rows);
std::string meta_text(const RunOptions& options, const RunResult& result);
/// Cumulative regret and bound against t as a small SVG line plot.
std::string regret_svg(const std::vector<TraceRow>& rows);

// --- non-additivity witness ---------------------------------------------------

struct NonAdditivityInstance {
    Automaton a;
    Outputs out;
    Sequence y;
    PatternSet patterns;
    std::vector<Path> paths;
};

/// Two translators over six positions; `order` sets the n-gram size and
/// `y` the reference (defaults to "He would like to eat cake").
NonAdditivityInstance translation_instance(std::size_t order = 4, Sequence y = {});

struct NonAdditivityReport {
    std::vector<double> gains;  // per listed path
    bool additive_feasible = true;
    double residual = 0;  // least-squares residual of the edge-additive system
    std::size_t rank_system = 0, rank_augmented = 0;
};

/// Solves for edge gains reproducing the path gains of the listed paths.
NonAdditivityReport verify_non_additivity(const NonAdditivityInstance& inst);

}  // namespace pathlearn::harness
