#pragma once

// Online learners behind one predict/update contract. CDCH, CDSB and CDCB
// run on an (equalized) context automaton, EXP3-AG on the expert automaton
// itself.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pathlearn/automaton.hpp"
#include "pathlearn/contextual.hpp"
#include "pathlearn/flow.hpp"
#include "pathlearn/random.hpp"

namespace pathlearn::learners {

using automata::Automaton;
using automata::Path;
using automata::WeightedAutomaton;
using contextual::ContextAutomaton;
using contextual::Sequence;

enum class Algorithm { cdch, cdsb, cdcb, exp3ag };
enum class Regime { full, semi, bandit };

std::string_view to_string(Algorithm a);
std::string_view to_string(Regime r);
Algorithm parse_algorithm(std::string_view s);  // throws ConfigError
Regime parse_regime(std::string_view s);
/// The feedback regime each algorithm is built for.
Regime regime_of(Algorithm a);

/// User-facing settings; unset values are filled in by default_tuning.
struct LearnerConfig {
    std::optional<double> learning_rate;      // η
    std::optional<double> mixing_rate;        // γ, CDSB/CDCB exploration
    std::optional<double> exploration_bonus;  // β, CDSB
    std::optional<double> gain_cap;           // B, per A′ transition
    std::optional<double> path_gain_cap;      // U, per path (EXP3-AG)
    std::optional<std::size_t> horizon;       // T
    double delta = 0.1;                       // confidence for the CDSB bound
    std::uint64_t seed = 0;
};

/// Sizes the default tunings depend on. Zero means unknown.
struct InstanceSizes {
    std::size_t K = 0;  // path length in A′ (or longest path in A)
    std::size_t M = 0;  // transitions of A′
    double N = 0;       // number of paths
    std::size_t C = 0;  // covering paths (CDSB)
    double lambda_min = 0;  // smallest non-zero eigenvalue under μ (CDCB)
};

struct Tuning {
    double eta = 0;
    double gamma = 0;
    double beta = 0;
    double B = 0;
    double U = 0;
    std::size_t T = 0;
    double delta = 0.1;
    std::uint64_t seed = 0;
    /// "key = value (source)" lines for run metadata.
    std::vector<std::string> notes;
};

/// Resolves every unset field. CDCH: η = sqrt(2 ln(KM)/T) / (BK).
/// EXP3-AG: η = sqrt(2 ln N/(TN)) / U with U = KB by default.
/// CDSB (gains scaled by 1/B): η = sqrt(ln N/(4TK²|C|)), γ = 2ηK|C|,
/// β = sqrt(K ln(M/δ)/(TM)). CDCB (gains scaled by 1/B):
/// η = sqrt(ln N/(T(M + 2K/λ))), γ = ηK/λ. Throws MissingSize.
Tuning default_tuning(Algorithm algorithm, const LearnerConfig& config, const InstanceSizes& sizes);

/// What a learner plays: an expert path, plus its A′ image for the
/// context-automaton learners (empty for EXP3-AG).
struct Choice {
    Path path;
    Path context_path;
};

/// Everything a learner may see after a round, per regime. Only the field
/// of the matching regime is read.
struct Feedback {
    Regime regime = Regime::full;
    std::vector<double> edge_gains;  // full: one gain per A′ transition
    std::vector<double> path_gains;  // semi: gains along the played A′ path
    double gain = 0;                 // bandit: the played path's gain
};

class Learner {
public:
    virtual ~Learner() = default;

    virtual Algorithm algorithm() const = 0;
    Regime regime() const { return regime_of(algorithm()); }
    const Tuning& tuning() const { return tuning_; }
    std::size_t round() const { return round_; }

    virtual Choice predict(Rng& rng) = 0;
    /// Throws RegimeMismatch when the feedback is of the wrong kind.
    void update(const Choice& played, const Feedback& feedback);

    /// Versioned text form of the full learner state.
    virtual std::string snapshot() const = 0;
    virtual void restore(std::string_view text) = 0;

protected:
    explicit Learner(Tuning t) : tuning_(std::move(t)) {}
    virtual void do_update(const Choice& played, const Feedback& feedback) = 0;

    Tuning tuning_;
    std::size_t round_ = 0;
};

/// Base for the learners on A′; exposes the probability that the next
/// prediction uses each A′ transition (for exact expected gains).
class ContextLearner : public Learner {
public:
    const ContextAutomaton& context() const { return *ca_; }
    virtual std::vector<double> marginals() const = 0;

protected:
    ContextLearner(std::shared_ptr<const ContextAutomaton> ca, Tuning t);
    Choice choice_for(Path context_path) const;

    std::shared_ptr<const ContextAutomaton> ca_;
};

/// Full information: a point of the unit-flow polytope, decomposed into
/// paths to predict; exponentiated update on losses B - g followed by
/// relative entropy projection.
class Cdch : public ContextLearner {
public:
    Cdch(std::shared_ptr<const ContextAutomaton> ca, const LearnerConfig& config);

    Algorithm algorithm() const override { return Algorithm::cdch; }
    Choice predict(Rng& rng) override;
    std::vector<double> marginals() const override { return w_; }
    const std::vector<double>& weights() const { return w_; }
    /// Decomposition used by the last predict call.
    const std::vector<flow::Component>& last_decomposition() const { return parts_; }

    std::string snapshot() const override;
    void restore(std::string_view text) override;

private:
    void do_update(const Choice& played, const Feedback& feedback) override;

    std::vector<double> w_;
    std::vector<flow::Component> parts_;
};

/// Semi-bandit: stochastic transition weights, mixed with the uniform
/// distribution over a covering path set for exploration.
class Cdsb : public ContextLearner {
public:
    Cdsb(std::shared_ptr<const ContextAutomaton> ca, const LearnerConfig& config);

    Algorithm algorithm() const override { return Algorithm::cdsb; }
    Choice predict(Rng& rng) override;
    std::vector<double> marginals() const override;
    const WeightedAutomaton& weights() const { return w_; }
    const std::vector<Path>& cover() const { return cover_; }
    /// Surrogate gains the update would use for a played path and its
    /// observed gains (already scaled by 1/B).
    std::vector<double> surrogate(const Path& played, const std::vector<double>& path_gains) const;

    std::string snapshot() const override;
    void restore(std::string_view text) override;

private:
    void do_update(const Choice& played, const Feedback& feedback) override;

    WeightedAutomaton w_;
    std::vector<Path> cover_;
    std::vector<double> cover_flow_;  // fraction of covering paths using each transition
};

/// Full bandit: ComBand-style surrogate g·P·v with P the pseudo-inverse of
/// the second moment of the sampling distribution.
class Cdcb : public ContextLearner {
public:
    Cdcb(std::shared_ptr<const ContextAutomaton> ca, const LearnerConfig& config);

    Algorithm algorithm() const override { return Algorithm::cdcb; }
    Choice predict(Rng& rng) override;
    std::vector<double> marginals() const override;
    const WeightedAutomaton& weights() const { return w_; }
    const flow::Cooccurrence& uniform_model() const { return mu_model_; }
    /// Second moment of the current sampling mixture q_t.
    Eigen::MatrixXd mixture_moment() const;
    /// g·P·v for the played A′ path with the current P (g scaled by 1/B).
    Eigen::VectorXd surrogate(const Path& played, double gain) const;

    std::string snapshot() const override;
    void restore(std::string_view text) override;

private:
    void do_update(const Choice& played, const Feedback& feedback) override;

    WeightedAutomaton w_;
    WeightedAutomaton mu_;
    flow::Cooccurrence mu_model_;
};

struct Growth {
    std::size_t before = 0;  // |W_t|, states plus transitions
    std::size_t update = 0;  // |V_t|
    std::size_t after = 0;   // |W_{t+1}|
};

/// The update machine for one round: a chain along the played names with ρ
/// exits to an absorbing state; every state is final with weight 1 except
/// the chain end, which gets exp(η·gain/probability).
WeightedAutomaton update_machine(const Sequence& played, double probability, double gain, double eta);

/// Bandit feedback, arbitrary gains: exponential weights over all paths of
/// A, kept as a deterministic weighted automaton refined by intersection.
class Exp3Ag : public Learner {
public:
    Exp3Ag(const Automaton& a, const LearnerConfig& config);

    Algorithm algorithm() const override { return Algorithm::exp3ag; }
    Choice predict(Rng& rng) override;
    const WeightedAutomaton& weights() const { return w_; }
    /// Probability of the path with these transition names (0 if absent).
    double path_probability(const Sequence& names) const;
    const std::vector<Growth>& growth() const { return growth_; }

    std::string snapshot() const override;
    void restore(std::string_view text) override;

private:
    void do_update(const Choice& played, const Feedback& feedback) override;

    Automaton a_;
    WeightedAutomaton w_;
    std::vector<Growth> growth_;
};

/// Sizes of `ca` as used by default_tuning (covering paths and λ_min are
/// only computed for the algorithms that need them).
InstanceSizes context_sizes(const ContextAutomaton& ca, Algorithm algorithm);

std::unique_ptr<Learner> make_learner(Algorithm algorithm, std::shared_ptr<const ContextAutomaton> ca,
                                      const LearnerConfig& config);

}  // namespace pathlearn::learners
