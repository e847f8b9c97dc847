#include "pathlearn/learners.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "pathlearn/algorithms.hpp"
#include "pathlearn/errors.hpp"
#include "pathlearn/text_format.hpp"

namespace pathlearn::learners {

using automata::format_double;
using automata::StateId;

std::string_view to_string(Algorithm a) {
    switch (a) {
        case Algorithm::cdch: return "cdch";
        case Algorithm::cdsb: return "cdsb";
        case Algorithm::cdcb: return "cdcb";
        case Algorithm::exp3ag: return "exp3ag";
    }
    return "?";
}

std::string_view to_string(Regime r) {
    switch (r) {
        case Regime::full: return "full";
        case Regime::semi: return "semi";
        case Regime::bandit: return "bandit";
    }
    return "?";
}

Algorithm parse_algorithm(std::string_view s) {
    for (auto a : {Algorithm::cdch, Algorithm::cdsb, Algorithm::cdcb, Algorithm::exp3ag})
        if (s == to_string(a)) return a;
    if (s == "exp3-ag") return Algorithm::exp3ag;
    throw ConfigError("unknown algorithm '" + std::string(s) + "'");
}

Regime parse_regime(std::string_view s) {
    for (auto r : {Regime::full, Regime::semi, Regime::bandit})
        if (s == to_string(r)) return r;
    throw ConfigError("unknown regime '" + std::string(s) + "'");
}

Regime regime_of(Algorithm a) {
    switch (a) {
        case Algorithm::cdch: return Regime::full;
        case Algorithm::cdsb: return Regime::semi;
        default: return Regime::bandit;
    }
}

// --- tuning -----------------------------------------------------------------

Tuning default_tuning(Algorithm algorithm, const LearnerConfig& config, const InstanceSizes& sizes) {
    Tuning t;
    t.delta = config.delta;
    t.seed = config.seed;
    auto note = [&](std::string_view key, double value, bool given) {
        t.notes.push_back(std::string(key) + " = " + format_double(value) + (given ? " (config)" : " (default)"));
    };
    auto need = [&](bool ok, std::string_view what) {
        if (!ok) throw MissingSize(std::string(what) + " is needed to tune " + std::string(to_string(algorithm)));
    };
    if (!(config.delta > 0.0 && config.delta < 1.0)) throw InvalidArgument("delta must lie in (0, 1)");

    t.T = config.horizon.value_or(0);
    const bool all_given = config.learning_rate.has_value() &&
                           (algorithm == Algorithm::cdch || algorithm == Algorithm::exp3ag ||
                            config.mixing_rate.has_value()) &&
                           (algorithm != Algorithm::cdsb || config.exploration_bonus.has_value());
    if (!all_given) need(t.T > 0, "horizon T");
    need(config.gain_cap.has_value() || algorithm == Algorithm::exp3ag, "gain cap B");
    t.B = config.gain_cap.value_or(0.0);
    if (config.gain_cap && !(t.B > 0.0)) throw InvalidArgument("gain cap B must be positive");
    note("B", t.B, config.gain_cap.has_value());

    const double T = static_cast<double>(t.T);
    const double K = static_cast<double>(sizes.K);
    const double M = static_cast<double>(sizes.M);
    const double N = sizes.N;
    const double C = static_cast<double>(sizes.C);
    switch (algorithm) {
        case Algorithm::cdch:
            if (!config.learning_rate) {
                need(sizes.K > 0 && sizes.M > 0, "K and M");
                t.eta = std::sqrt(2.0 * std::log(K * M) / T) / (t.B * K);
            }
            break;
        case Algorithm::exp3ag:
            need(config.path_gain_cap.has_value() || (sizes.K > 0 && config.gain_cap), "path gain cap U (or K and B)");
            t.U = config.path_gain_cap.value_or(K * t.B);
            if (!(t.U > 0.0)) throw InvalidArgument("path gain cap U must be positive");
            note("U", t.U, config.path_gain_cap.has_value());
            if (!config.learning_rate) {
                need(N >= 1, "N");
                t.eta = std::sqrt(2.0 * std::log(N) / (T * N)) / t.U;
            }
            break;
        case Algorithm::cdsb:
            need(sizes.K > 0 && sizes.M > 0 && sizes.C > 0 && N >= 1, "K, M, |C| and N");
            t.eta = config.learning_rate.value_or(std::sqrt(std::log(N) / (4.0 * T * K * K * C)));
            t.gamma = config.mixing_rate.value_or(std::min(1.0, 2.0 * t.eta * K * C));
            t.beta = config.exploration_bonus.value_or(std::sqrt(K * std::log(M / t.delta) / (T * M)));
            break;
        case Algorithm::cdcb:
            need(sizes.K > 0 && sizes.M > 0 && N >= 1 && sizes.lambda_min > 0, "K, M, N and lambda_min");
            t.eta = config.learning_rate.value_or(
                std::sqrt(std::log(N) / (T * (M + 2.0 * K / sizes.lambda_min))));
            t.gamma = config.mixing_rate.value_or(std::min(1.0, t.eta * K / sizes.lambda_min));
            break;
    }
    if (config.learning_rate) t.eta = *config.learning_rate;
    if (!(t.eta >= 0.0) || !std::isfinite(t.eta)) throw InvalidArgument("learning rate must be finite and >= 0");
    if (!(t.gamma >= 0.0 && t.gamma <= 1.0)) throw InvalidArgument("mixing rate must lie in [0, 1]");
    if (!(t.beta >= 0.0)) throw InvalidArgument("exploration bonus must be >= 0");
    note("eta", t.eta, config.learning_rate.has_value());
    if (algorithm == Algorithm::cdsb || algorithm == Algorithm::cdcb) note("gamma", t.gamma, config.mixing_rate.has_value());
    if (algorithm == Algorithm::cdsb) {
        note("beta", t.beta, config.exploration_bonus.has_value());
        note("delta", t.delta, true);
    }
    if (algorithm == Algorithm::cdsb || algorithm == Algorithm::cdcb)
        t.notes.push_back("gains are divided by B inside the update");
    if (algorithm == Algorithm::cdcb)
        t.notes.push_back("update multiplies by exp(+eta * surrogate gain) (gain maximization)");
    return t;
}

// --- shared -----------------------------------------------------------------

void Learner::update(const Choice& played, const Feedback& feedback) {
    if (feedback.regime != regime())
        throw RegimeMismatch(std::string(to_string(algorithm())) + " expects " + std::string(to_string(regime())) +
                             " feedback, got " + std::string(to_string(feedback.regime)));
    do_update(played, feedback);
    ++round_;
}

ContextLearner::ContextLearner(std::shared_ptr<const ContextAutomaton> ca, Tuning t)
    : Learner(std::move(t)), ca_(std::move(ca)) {
    if (!ca_) throw InvalidArgument("context automaton required");
    if (ca_->machine.empty()) throw InvalidArgument("context automaton has no paths");
}

Choice ContextLearner::choice_for(Path context_path) const {
    Choice c;
    c.path = contextual::representative_path(*ca_, context_path);
    c.context_path = std::move(context_path);
    return c;
}

namespace {

constexpr std::string_view kSnapshotHeader = "pathlearn-snapshot 1";

void check_gain(double g, double cap) {
    if (g > cap * (1.0 + 1e-12)) throw GainExceedsCap("gain " + format_double(g) + " exceeds cap " + format_double(cap));
    if (!(g >= 0.0)) throw InvalidArgument("gains must be non-negative");
}

WeightedAutomaton uniform_pushed(const Automaton& a) { return automata::weight_push(automata::to_weighted(a)); }

// Snapshot body shared by the A′ learners: "weights n" then n values,
// "finals m" then m "state weight" pairs.
std::string write_snapshot(Algorithm algorithm, std::size_t round, const std::vector<double>& weights,
                           const std::vector<std::pair<StateId, double>>& finals) {
    std::ostringstream out;
    out << kSnapshotHeader << '\n' << "algorithm " << to_string(algorithm) << '\n' << "round " << round << '\n';
    out << "weights " << weights.size() << '\n';
    for (double x : weights) out << format_double(x) << '\n';
    out << "finals " << finals.size() << '\n';
    for (const auto& [q, x] : finals) out << q << ' ' << format_double(x) << '\n';
    return out.str();
}

struct SnapshotData {
    std::size_t round = 0;
    std::vector<double> weights;
    std::vector<std::pair<StateId, double>> finals;
    std::string rest;  // everything after the round line
};

SnapshotData read_snapshot(std::string_view text, Algorithm algorithm, bool body) {
    std::istringstream in{std::string(text)};
    std::string line, word;
    if (!std::getline(in, line) || line != kSnapshotHeader) throw ParseError(1, "not a learner snapshot");
    if (!(in >> word) || word != "algorithm" || !(in >> word) || word != to_string(algorithm))
        throw ParseError(2, "snapshot is for another algorithm");
    SnapshotData d;
    if (!(in >> word) || word != "round" || !(in >> d.round)) throw ParseError(3, "missing round");
    if (!body) {
        std::getline(in, line);
        d.rest.assign(std::istreambuf_iterator<char>(in), {});
        return d;
    }
    std::size_t n = 0;
    if (!(in >> word) || word != "weights" || !(in >> n)) throw ParseError(4, "missing weights");
    d.weights.resize(n);
    for (auto& x : d.weights)
        if (!(in >> x)) throw ParseError(5, "truncated weights");
    if (!(in >> word) || word != "finals" || !(in >> n)) throw ParseError(5 + d.weights.size(), "missing finals");
    d.finals.resize(n);
    for (auto& [q, x] : d.finals)
        if (!(in >> q >> x)) throw ParseError(6 + d.weights.size(), "truncated finals");
    return d;
}

std::vector<std::pair<StateId, double>> finals_of(const WeightedAutomaton& w) {
    std::vector<std::pair<StateId, double>> f;
    for (auto q : w.finals()) f.emplace_back(q, w.final_weight(q));
    return f;
}

void load_weights(WeightedAutomaton& w, const SnapshotData& d) {
    if (d.weights.size() != w.num_arcs()) throw InvalidArgument("snapshot does not match the machine");
    for (std::size_t i = 0; i < d.weights.size(); ++i) w.set_weight(i, d.weights[i]);
    for (const auto& [q, x] : d.finals) w.set_final_weight(q, x);
    w.mark_stochastic(automata::is_stochastic(w, 1e-9));
}

std::vector<double> arc_weights(const WeightedAutomaton& w) {
    std::vector<double> x(w.num_arcs());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = w.arc(i).weight;
    return x;
}

}  // namespace

InstanceSizes context_sizes(const ContextAutomaton& ca, Algorithm algorithm) {
    InstanceSizes s;
    s.K = automata::longest_path_length(ca.machine);
    s.M = ca.num_arcs();
    s.N = automata::count_paths(ca.machine);
    if (algorithm == Algorithm::cdsb) s.C = flow::covering_paths(ca.machine).size();
    if (algorithm == Algorithm::cdcb) s.lambda_min = flow::cooccurrence(ca.machine).lambda_min;
    if (algorithm == Algorithm::exp3ag) {
        s.K = automata::longest_path_length(ca.source);
        s.M = ca.source.num_arcs();
        s.N = automata::count_paths(ca.source);
    }
    return s;
}

// --- CDCH -------------------------------------------------------------------

Cdch::Cdch(std::shared_ptr<const ContextAutomaton> ca, const LearnerConfig& config) : ContextLearner(std::move(ca), {}) {
    if (!ca_->equalized()) throw InvalidArgument("CDCH needs all A' paths of equal length; equalize first");
    tuning_ = default_tuning(Algorithm::cdch, config, context_sizes(*ca_, Algorithm::cdch));
    w_ = flow::uniform_flow(ca_->machine);
}

Choice Cdch::predict(Rng& rng) {
    parts_ = flow::flow_decompose(ca_->machine, w_);
    double total = 0.0;
    for (const auto& c : parts_) total += c.coefficient;
    const double u = rng.uniform() * total;
    double acc = 0.0;
    std::size_t pick = parts_.size() - 1;
    for (std::size_t k = 0; k < parts_.size(); ++k) {
        acc += parts_[k].coefficient;
        if (u < acc) {
            pick = k;
            break;
        }
    }
    return choice_for(parts_[pick].path);
}

void Cdch::do_update(const Choice&, const Feedback& feedback) {
    const auto& g = feedback.edge_gains;
    if (g.size() != w_.size()) throw InvalidArgument("one gain per A' transition expected");
    for (double x : g) check_gain(x, tuning_.B);
    if (tuning_.eta == 0.0) return;
    std::vector<double> w_hat(w_.size());
    for (std::size_t i = 0; i < w_.size(); ++i) w_hat[i] = w_[i] * std::exp(-tuning_.eta * (tuning_.B - g[i]));
    w_ = flow::re_project(ca_->machine, std::move(w_hat));
}

std::string Cdch::snapshot() const { return write_snapshot(algorithm(), round_, w_, {}); }

void Cdch::restore(std::string_view text) {
    auto d = read_snapshot(text, algorithm(), true);
    if (d.weights.size() != w_.size()) throw InvalidArgument("snapshot does not match the machine");
    w_ = std::move(d.weights);
    round_ = d.round;
}

// --- CDSB -------------------------------------------------------------------

Cdsb::Cdsb(std::shared_ptr<const ContextAutomaton> ca, const LearnerConfig& config) : ContextLearner(std::move(ca), {}) {
    cover_ = flow::covering_paths(ca_->machine);
    auto sizes = context_sizes(*ca_, Algorithm::cdch);
    sizes.C = cover_.size();
    tuning_ = default_tuning(Algorithm::cdsb, config, sizes);
    w_ = uniform_pushed(ca_->machine);
    cover_flow_.assign(ca_->num_arcs(), 0.0);
    for (const auto& p : cover_)
        for (auto i : p.arcs) cover_flow_[i] += 1.0 / static_cast<double>(cover_.size());
}

Choice Cdsb::predict(Rng& rng) {
    if (rng.uniform() < tuning_.gamma) return choice_for(cover_[rng.below(cover_.size())]);
    return choice_for(automata::sample_path(w_, rng));
}

std::vector<double> Cdsb::marginals() const {
    auto p = automata::edge_flow(w_);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = (1.0 - tuning_.gamma) * p[i] + tuning_.gamma * cover_flow_[i];
    return p;
}

std::vector<double> Cdsb::surrogate(const Path& played, const std::vector<double>& path_gains) const {
    if (path_gains.size() != played.arcs.size()) throw InvalidArgument("one gain per played transition expected");
    const auto q = marginals();
    std::vector<double> g(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (!(q[i] > 0.0)) throw ZeroFlow("transition with zero sampling probability");
        g[i] = tuning_.beta / q[i];
    }
    for (std::size_t k = 0; k < played.arcs.size(); ++k) {
        const auto i = played.arcs[k];
        g[i] = (path_gains[k] / tuning_.B + tuning_.beta) / q[i];
    }
    return g;
}

void Cdsb::do_update(const Choice& played, const Feedback& feedback) {
    for (double x : feedback.path_gains) check_gain(x, tuning_.B);
    const auto g = surrogate(played.context_path, feedback.path_gains);
    for (std::size_t i = 0; i < g.size(); ++i) w_.set_weight(i, w_.arc(i).weight * std::exp(tuning_.eta * g[i]));
    w_ = automata::weight_push(w_);
}

std::string Cdsb::snapshot() const { return write_snapshot(algorithm(), round_, arc_weights(w_), finals_of(w_)); }

void Cdsb::restore(std::string_view text) {
    auto d = read_snapshot(text, algorithm(), true);
    load_weights(w_, d);
    round_ = d.round;
}

// --- CDCB -------------------------------------------------------------------

Cdcb::Cdcb(std::shared_ptr<const ContextAutomaton> ca, const LearnerConfig& config) : ContextLearner(std::move(ca), {}) {
    mu_ = uniform_pushed(ca_->machine);
    w_ = mu_;
    mu_model_ = flow::pseudo_inverse(flow::second_moment(mu_));
    auto sizes = context_sizes(*ca_, Algorithm::cdch);
    sizes.lambda_min = mu_model_.lambda_min;
    tuning_ = default_tuning(Algorithm::cdcb, config, sizes);
}

Choice Cdcb::predict(Rng& rng) {
    const bool explore = rng.uniform() < tuning_.gamma;
    return choice_for(automata::sample_path(explore ? mu_ : w_, rng));
}

std::vector<double> Cdcb::marginals() const {
    auto p = automata::edge_flow(w_);
    const auto u = automata::edge_flow(mu_);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = (1.0 - tuning_.gamma) * p[i] + tuning_.gamma * u[i];
    return p;
}

Eigen::MatrixXd Cdcb::mixture_moment() const {
    return (1.0 - tuning_.gamma) * flow::second_moment(w_) + tuning_.gamma * mu_model_.matrix;
}

Eigen::VectorXd Cdcb::surrogate(const Path& played, double gain) const {
    const auto model = flow::pseudo_inverse(mixture_moment());
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ca_->num_arcs()));
    for (auto i : played.arcs) v(static_cast<Eigen::Index>(i)) += 1.0;
    return (gain / tuning_.B) * (model.pinv * v);
}

void Cdcb::do_update(const Choice& played, const Feedback& feedback) {
    check_gain(feedback.gain, tuning_.B * static_cast<double>(played.context_path.arcs.size()));
    if (feedback.gain == 0.0 || tuning_.eta == 0.0) return;
    const auto g = surrogate(played.context_path, feedback.gain);
    for (std::size_t i = 0; i < w_.num_arcs(); ++i)
        w_.set_weight(i, w_.arc(i).weight * std::exp(tuning_.eta * g(static_cast<Eigen::Index>(i))));
    w_ = automata::weight_push(w_);
}

std::string Cdcb::snapshot() const { return write_snapshot(algorithm(), round_, arc_weights(w_), finals_of(w_)); }

void Cdcb::restore(std::string_view text) {
    auto d = read_snapshot(text, algorithm(), true);
    load_weights(w_, d);
    round_ = d.round;
}

// --- EXP3-AG ----------------------------------------------------------------

WeightedAutomaton update_machine(const Sequence& played, double probability, double gain, double eta) {
    if (!(probability > 0.0)) throw InvalidArgument("played path must have positive probability");
    auto symbols = std::make_shared<automata::SymbolTable>();
    std::vector<automata::Label> labels;
    for (const auto& name : played) labels.push_back(symbols->intern(name));
    WeightedAutomaton v(symbols);
    const auto k = played.size();
    v.add_states(k + 2);
    const auto rest = static_cast<StateId>(k + 1);
    v.set_initial(0);
    for (std::size_t i = 0; i <= k; ++i) {
        const auto q = static_cast<StateId>(i);
        if (i < k) v.add_transition(q, q + 1, labels[i], 1.0);
        v.add_transition(q, rest, automata::kRhoLabel, 1.0);
        v.set_final_weight(q, 1.0);
    }
    v.set_final_weight(static_cast<StateId>(k), std::exp(eta * gain / probability));
    v.add_transition(rest, rest, automata::kRhoLabel, 1.0);
    v.set_final_weight(rest, 1.0);
    return v;
}

Exp3Ag::Exp3Ag(const Automaton& a, const LearnerConfig& config) : Learner({}), a_(a) {
    automata::validate_expert(a_);
    InstanceSizes sizes;
    sizes.K = automata::longest_path_length(a_);
    sizes.M = a_.num_arcs();
    sizes.N = automata::count_paths(a_);
    tuning_ = default_tuning(Algorithm::exp3ag, config, sizes);
    w_ = uniform_pushed(a_);
}

Choice Exp3Ag::predict(Rng& rng) {
    const auto p = automata::sample_path(w_, rng);
    const auto names = automata::path_names(w_, p);
    // Expert names are unique, so the A path is recovered by name.
    Choice c;
    StateId q = a_.initial();
    for (const auto& name : names) {
        auto out = a_.outgoing(q);
        auto it = std::find_if(out.begin(), out.end(), [&](auto i) { return a_.name(i) == name; });
        if (it == out.end()) throw NotAccepting("sampled path is not a path of A");
        c.path.arcs.push_back(*it);
        q = a_.arc(*it).dst;
    }
    return c;
}

double Exp3Ag::path_probability(const Sequence& names) const {
    StateId q = w_.initial();
    double p = 1.0;
    for (const auto& name : names) {
        bool moved = false;
        for (auto i : w_.outgoing(q))
            if (w_.label_name(i) == name) {
                p *= w_.arc(i).weight;
                q = w_.arc(i).dst;
                moved = true;
                break;
            }
        if (!moved) return 0.0;
    }
    return p * w_.final_weight(q);
}

void Exp3Ag::do_update(const Choice& played, const Feedback& feedback) {
    check_gain(feedback.gain, tuning_.U);
    const auto names = automata::path_names(a_, played.path);
    const double prob = path_probability(names);
    auto v = update_machine(names, prob, feedback.gain, tuning_.eta);
    Growth g;
    g.before = w_.size();
    g.update = v.size();
    auto next = automata::intersect(w_, v);
    g.after = next.size();
    w_ = automata::weight_push(next);
    growth_.push_back(g);
}

std::string Exp3Ag::snapshot() const {
    std::ostringstream out;
    out << kSnapshotHeader << '\n' << "algorithm " << to_string(algorithm()) << '\n' << "round " << round_ << '\n';
    out << automata::print(w_);
    return out.str();
}

void Exp3Ag::restore(std::string_view text) {
    auto d = read_snapshot(text, algorithm(), false);
    auto w = automata::parse_weighted(d.rest);
    w.mark_stochastic(automata::is_stochastic(w, 1e-9));
    if (!w.stochastic()) throw InvalidArgument("snapshot machine is not stochastic");
    w_ = std::move(w);
    round_ = d.round;
}

std::unique_ptr<Learner> make_learner(Algorithm algorithm, std::shared_ptr<const ContextAutomaton> ca,
                                      const LearnerConfig& config) {
    if (!ca) throw InvalidArgument("context automaton required");
    switch (algorithm) {
        case Algorithm::cdch: {
            if (!ca->equalized()) ca = std::make_shared<const ContextAutomaton>(contextual::equalize(*ca));
            return std::make_unique<Cdch>(std::move(ca), config);
        }
        case Algorithm::cdsb: return std::make_unique<Cdsb>(std::move(ca), config);
        case Algorithm::cdcb: return std::make_unique<Cdcb>(std::move(ca), config);
        case Algorithm::exp3ag: return std::make_unique<Exp3Ag>(ca->source, config);
    }
    throw InvalidArgument("unknown algorithm");
}

}  // namespace pathlearn::learners
