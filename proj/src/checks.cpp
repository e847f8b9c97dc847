#include "pathlearn/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include <Eigen/Dense>

#include "pathlearn/algorithms.hpp"
#include "pathlearn/contextual.hpp"
#include "pathlearn/errors.hpp"
#include "pathlearn/flow.hpp"
#include "pathlearn/harness.hpp"
#include "pathlearn/learners.hpp"
#include "pathlearn/patterns_io.hpp"

namespace pathlearn::checks {

using automata::Automaton;
using automata::Path;
using automata::StateId;
using automata::WeightedAutomaton;
using contextual::PatternSet;
using contextual::Sequence;
using Outputs = std::unordered_map<std::string, std::string>;

Level parse_level(std::string_view s) {
    if (s == "quick") return Level::quick;
    if (s == "full") return Level::full;
    throw ConfigError("unknown verify level '" + std::string(s) + "' (quick or full)");
}

namespace {

// A failed expectation; the message ends up in the report.
struct Failure {
    std::string what;
};

void expect(bool ok, const std::string& what) {
    if (!ok) throw Failure{what};
}

std::string num(double x) {
    std::ostringstream s;
    s.precision(6);
    s << x;
    return s.str();
}

Sequence letters(std::size_t sigma) {
    Sequence s;
    for (std::size_t i = 0; i < sigma; ++i) s.push_back(std::string(1, static_cast<char>('a' + i)));
    return s;
}

Automaton random_dag(Rng& rng, std::size_t max_states = 8, std::size_t max_arcs = 14) {
    for (;;) {
        const std::size_t n = 2 + rng.below(max_states - 1);
        Automaton a;
        a.add_states(n);
        a.set_initial(0);
        std::size_t arcs = 0;
        const std::size_t target = n - 1 + rng.below(max_arcs - (n - 1) + 1);
        for (StateId q = 0; q + 1 < n; ++q)
            a.add_transition(q, static_cast<StateId>(q + 1 + rng.below(n - q - 1)), "e" + std::to_string(arcs++));
        while (arcs < target) {
            const auto s = static_cast<StateId>(rng.below(n - 1));
            a.add_transition(s, static_cast<StateId>(s + 1 + rng.below(n - s - 1)), "e" + std::to_string(arcs++));
        }
        a.set_final(static_cast<StateId>(n - 1));
        for (StateId q = 1; q + 1 < n; ++q)
            if (rng.bernoulli(0.25)) a.set_final(q);
        auto t = automata::trim(a);
        if (t.num_arcs() > 0) return t;
    }
}

Automaton ensemble(std::size_t r, std::size_t l) {
    harness::EnsembleSpec s;
    s.experts = r;
    s.positions = l;
    s.order = 1;
    return harness::build_ensemble_automaton(s);
}

struct Instance {
    Automaton a;
    PatternSet ps;
    Outputs out;
    Sequence y;
};

Instance random_instance(Rng& rng, double discount) {
    Instance in;
    in.a = random_dag(rng);
    const auto sigma = 1 + rng.below(3);
    const auto alphabet = letters(sigma);
    const auto all = contextual::all_ngrams(alphabet, 1 + rng.below(3));
    for (const auto& p : all.patterns)
        if (rng.bernoulli(0.6)) in.ps.patterns.push_back(p);
    if (in.ps.patterns.empty()) in.ps.patterns.push_back(all.patterns.front());
    in.ps.discount = discount;
    in.ps.max_gap = discount > 0 && rng.bernoulli(0.5) ? std::optional<std::size_t>(rng.below(3)) : std::nullopt;
    if (discount == 0) in.ps.max_gap = 0;
    for (const auto& t : in.a.arcs()) in.out[t.name] = alphabet[rng.below(sigma)];
    const auto m = rng.below(9);
    for (std::size_t i = 0; i < m; ++i) in.y.push_back(alphabet[rng.below(sigma)]);
    return in;
}

// Discounted occurrences of theta in y by scanning every index subset.
double subset_count(const Sequence& y, const Sequence& theta, double discount, std::optional<std::size_t> max_gap) {
    const auto m = y.size(), r = theta.size();
    if (r == 0 || m < r) return 0.0;
    double total = 0.0;
    for (unsigned mask = 0; mask < (1u << m); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcount(mask)) != r) continue;
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < m; ++i)
            if (mask & (1u << i)) idx.push_back(i);
        bool ok = true;
        for (std::size_t j = 0; j < r && ok; ++j) ok = y[idx[j]] == theta[j];
        if (!ok) continue;
        const auto gap = idx.back() - idx.front() + 1 - r;
        if (max_gap && gap > *max_gap) continue;
        total += std::pow(discount, static_cast<double>(gap));
    }
    return total;
}

double direct_gain(const Instance& in, const Path& pi) {
    Sequence outs;
    for (auto i : pi.arcs) outs.push_back(in.out.at(in.a.name(i)));
    const auto cap = in.ps.discount == 0.0 ? std::optional<std::size_t>(0) : in.ps.max_gap;
    double g = 0.0;
    for (const auto& theta : in.ps.patterns)
        g += subset_count(outs, theta, in.ps.discount, cap) * subset_count(in.y, theta, in.ps.discount, cap);
    return g;
}

std::string additivity(Rng rng, const std::vector<double>& discounts, int trials, bool flip, bool exact) {
    std::size_t paths = 0;
    for (double discount : discounts)
        for (int trial = 0; trial < trials; ++trial) {
            const auto in = random_instance(rng, discount);
            const auto ca = contextual::build_context_automaton(in.a, in.ps);
            auto gains = contextual::assign_edge_gains(ca, in.out, in.y);
            if (flip)
                for (auto& g : gains) g = -g;
            for (const auto& pi : automata::enumerate_paths(in.a)) {
                double sum = 0.0;
                for (auto e : contextual::map_path(ca, pi).arcs) sum += gains[e];
                const double want = direct_gain(in, pi);
                const bool ok = exact ? sum == want : std::abs(sum - want) <= 1e-9 * std::max(1.0, want);
                expect(ok, "discount " + num(discount) + ", trial " + std::to_string(trial) + ": edge sum " + num(sum) +
                               " vs direct count " + num(want));
                ++paths;
            }
        }
    return std::to_string(discounts.size() * static_cast<std::size_t>(trials)) + " instances, " +
           std::to_string(paths) + " paths";
}

std::string gappy_value() {
    PatternSet ps;
    ps.patterns = {{"a", "a", "b"}};
    ps.discount = 0.5;
    ps.max_gap = std::nullopt;
    const Sequence y{"b", "a", "b", "b", "a", "a", "b", "a", "a"};
    const double v = contextual::theta_counts(y, ps)[0];
    expect(std::abs(v - 1.25) < 1e-12, "aab in babbaabaa at discount 0.5 gives " + num(v));
    return "aab/babbaabaa = 1.25";
}

std::string uniqueness(Rng rng, int trials) {
    std::size_t pairs = 0;
    for (int trial = 0; trial < trials; ++trial) {
        const auto in = random_instance(rng, trial % 2 ? 0.5 : 0.0);
        const auto ca = contextual::build_context_automaton(in.a, in.ps);
        std::map<Path, Path> seen;
        for (const auto& pi : automata::enumerate_paths(in.a)) {
            const auto image = contextual::map_path(ca, pi);
            auto [it, fresh] = seen.emplace(image, pi);
            if (!fresh) {
                ++pairs;
                expect(contextual::emit(ca, automata::path_names(in.a, pi)).empty() &&
                           contextual::emit(ca, automata::path_names(in.a, it->second)).empty(),
                       "two paths with non-empty emissions share an image");
            }
        }
    }
    return std::to_string(trials) + " instances, " + std::to_string(pairs) + " empty-emission merges";
}

std::size_t ipow(std::size_t b, std::size_t e) {
    std::size_t x = 1;
    while (e--) x *= b;
    return x;
}

std::string sizes() {
    std::size_t cases = 0;
    for (std::size_t r : {2, 3})
        for (std::size_t n : {2, 3})
            for (std::size_t l = 4; l <= 7; ++l) {
                const auto a = ensemble(r, l);
                const auto ca = contextual::build_context_automaton(a, contextual::all_ngrams({"a", "b"}, n));
                const std::string tag = "r=" + std::to_string(r) + " n=" + std::to_string(n) + " l=" + std::to_string(l);
                expect(ca.num_arcs() == ipow(r, n) * (l - n + 1), tag + ": M = " + std::to_string(ca.num_arcs()));
                expect(automata::longest_path_length(ca.machine) == l - n + 1, tag + ": K");
                expect(automata::count_paths(a) == std::pow(r, l), tag + ": N");
                // initial, r^(n-1) histories per inner layer, one final state
                expect(ca.num_states() == 2 + ipow(r, n - 1) * (l - n), tag + ": Q = " + std::to_string(ca.num_states()));
                ++cases;
            }
    return std::to_string(cases) + " ensembles";
}

std::string weight_push(Rng rng, int trials) {
    for (int trial = 0; trial < trials; ++trial) {
        auto w = automata::to_weighted(random_dag(rng));
        for (std::size_t i = 0; i < w.num_arcs(); ++i) w.set_weight(i, 0.05 + 3.0 * rng.uniform());
        for (auto q : w.finals()) w.set_final_weight(q, 0.1 + rng.uniform());
        const auto pushed = automata::weight_push(w);
        for (StateId q = 0; q < pushed.num_states(); ++q) {
            double out = pushed.final_weight(q);
            for (auto i : pushed.outgoing(q)) out += pushed.arc(i).weight;
            expect(out == 0.0 || std::abs(out - 1.0) <= 1e-12, "state " + std::to_string(q) + " outflow " + num(out));
        }
        auto product = [](const WeightedAutomaton& m, const Path& p) {
            double x = 1.0;
            StateId q = m.initial();
            for (auto i : p.arcs) {
                x *= m.arc(i).weight;
                q = m.arc(i).dst;
            }
            return x * m.final_weight(q);
        };
        const auto paths = automata::enumerate_paths(w, 500);
        double total = 0.0;
        for (const auto& p : paths) total += product(w, p);
        for (const auto& p : paths) {
            const double want = product(w, p) / total, got = product(pushed, p);
            expect(std::abs(got - want) <= 1e-12 * std::max(1.0, want), "normalized path weight " + num(got) + " vs " + num(want));
        }
    }
    return std::to_string(trials) + " machines";
}

std::string exp3_flat(Rng rng) {
    const auto a = ensemble(2, 5);
    const auto paths = automata::enumerate_paths(a);
    std::map<Sequence, std::size_t> index;
    for (std::size_t i = 0; i < paths.size(); ++i) index[automata::path_names(a, paths[i])] = i;
    learners::LearnerConfig c;
    c.horizon = 200;
    c.path_gain_cap = 5.0;
    learners::Exp3Ag learner(a, c);
    const double eta = learner.tuning().eta;
    std::vector<double> cumulative(paths.size(), 0.0);
    auto flat = [&] {
        const double top = *std::max_element(cumulative.begin(), cumulative.end());
        std::vector<double> p(cumulative.size());
        double z = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) z += p[i] = std::exp(eta * (cumulative[i] - top));
        for (auto& x : p) x /= z;
        return p;
    };
    Rng play = rng.child("play"), gains = rng.child("gains");
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
        const auto p = flat();
        for (std::size_t i = 0; i < paths.size(); ++i)
            worst = std::max(worst, std::abs(p[i] - learner.path_probability(automata::path_names(a, paths[i]))));
        const auto choice = learner.predict(play);
        learners::Feedback fb;
        fb.regime = learners::Regime::bandit;
        fb.gain = 5.0 * gains.uniform();
        learner.update(choice, fb);
        const auto k = index.at(automata::path_names(a, choice.path));
        cumulative[k] += fb.gain / p[k];
        const auto& g = learner.growth().back();
        expect(g.after <= g.before + g.update, "round " + std::to_string(t) + ": machine grew past |W| + |V|");
    }
    expect(worst < 1e-9, "largest probability gap " + num(worst));
    return "32 paths, 200 rounds, largest gap " + num(worst);
}

std::string polytope(Rng rng, int rounds) {
    auto ca = std::make_shared<const contextual::ContextAutomaton>(
        contextual::equalize(contextual::build_context_automaton(ensemble(2, 5), contextual::all_ngrams({"a", "b"}, 2))));
    learners::LearnerConfig c;
    c.horizon = static_cast<std::size_t>(rounds);
    c.gain_cap = contextual::max_theta_component(ca->patterns, 5);
    learners::Cdch cdch(ca, c);
    Rng play = rng.child("play"), data = rng.child("data");
    double worst = 0.0, rebuild = 0.0;
    std::size_t most_parts = 0;
    for (int t = 0; t < rounds; ++t) {
        const auto choice = cdch.predict(play);
        std::vector<double> sum(ca->num_arcs(), 0.0);
        for (const auto& part : cdch.last_decomposition())
            for (auto i : part.path.arcs) sum[i] += part.coefficient;
        for (std::size_t i = 0; i < sum.size(); ++i) rebuild = std::max(rebuild, std::abs(sum[i] - cdch.weights()[i]));
        most_parts = std::max(most_parts, cdch.last_decomposition().size());
        Outputs out;
        for (const auto& arc : ca->source.arcs()) out[arc.name] = data.bernoulli(0.5) ? "a" : "b";
        Sequence y;
        for (int i = 0; i < 5; ++i) y.push_back(data.bernoulli(0.5) ? "a" : "b");
        learners::Feedback fb;
        fb.edge_gains = contextual::assign_edge_gains(*ca, out, y);
        cdch.update(choice, fb);
        worst = std::max(worst, flow::polytope_violation(ca->machine, cdch.weights()));
    }
    expect(worst < 1e-8, "flow violation " + num(worst));
    expect(rebuild < 1e-8, "decomposition error " + num(rebuild));
    expect(most_parts <= ca->num_arcs(), "decomposition used " + std::to_string(most_parts) + " paths");
    return std::to_string(rounds) + " rounds, violation " + num(worst);
}

// Optimality certificate of the projection: log(w / w_hat) is a potential
// difference, so it sums to the same value along every accepting path.
std::string projection(Rng rng, int trials) {
    int done = 0;
    while (done < trials) {
        auto a = random_dag(rng, 7, 13);
        if (a.finals().size() != 1 || !a.outgoing(a.finals()[0]).empty()) continue;
        std::vector<double> w_hat(a.num_arcs());
        for (auto& x : w_hat) x = 0.05 + 2.0 * rng.uniform();
        const auto w = flow::re_project(a, w_hat);
        expect(flow::polytope_violation(a, w) < 1e-8, "projection left the polytope");
        double lo = INFINITY, hi = -INFINITY;
        for (const auto& p : automata::enumerate_paths(a)) {
            double s = 0.0;
            for (auto i : p.arcs) s += std::log(w[i] / w_hat[i]);
            lo = std::min(lo, s);
            hi = std::max(hi, s);
        }
        expect(hi - lo < 1e-6, "log-ratio spread " + num(hi - lo));
        ++done;
    }
    return std::to_string(trials) + " projections";
}

std::string covering() {
    std::size_t cases = 0;
    for (std::size_t r : {2, 3})
        for (std::size_t n : {1, 2, 3})
            for (std::size_t l = std::max<std::size_t>(n, 3); l <= 6; ++l) {
                const auto ca = contextual::build_context_automaton(ensemble(r, l), contextual::all_ngrams({"a", "b"}, n));
                const auto cover = flow::covering_paths(ca.machine);
                expect(cover.size() == ipow(r, n), "|C| = " + std::to_string(cover.size()));
                std::vector<int> used(ca.num_arcs(), 0);
                for (const auto& p : cover)
                    for (auto i : p.arcs) ++used[i];
                for (auto u : used) expect(u == 1, "a transition is covered " + std::to_string(u) + " times");
                ++cases;
            }
    return std::to_string(cases) + " ensembles";
}

std::string cooccurrence() {
    const auto ca = contextual::build_context_automaton(ensemble(2, 3), contextual::all_ngrams({"a", "b"}, 2));
    const auto model = flow::cooccurrence(ca.machine);
    const auto paths = automata::enumerate_paths(ca.machine);
    const auto m = static_cast<Eigen::Index>(ca.num_arcs());
    Eigen::MatrixXd want = Eigen::MatrixXd::Zero(m, m);
    for (const auto& p : paths)
        for (auto i : p.arcs)
            for (auto j : p.arcs) want(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += 1.0;
    want /= static_cast<double>(paths.size());
    expect((model.matrix - want).cwiseAbs().maxCoeff() < 1e-15, "moment differs from enumeration");
    const auto& A = model.matrix;
    const auto& P = model.pinv;
    expect((A * P * A - A).cwiseAbs().maxCoeff() < 1e-8, "A P A != A");
    expect((P * A * P - P).cwiseAbs().maxCoeff() < 1e-8, "P A P != P");
    expect(((A * P).transpose() - A * P).cwiseAbs().maxCoeff() < 1e-8, "A P not symmetric");
    expect(((P * A).transpose() - P * A).cwiseAbs().maxCoeff() < 1e-8, "P A not symmetric");
    return std::to_string(paths.size()) + " paths, rank " + std::to_string(model.rank);
}

std::string non_additivity() {
    const auto rep = harness::verify_non_additivity(harness::translation_instance());
    expect(rep.gains == std::vector<double>{1, 0, 0, 0}, "gains differ from (1, 0, 0, 0)");
    expect(!rep.additive_feasible, "edge-additive system is feasible");
    return "gains (1, 0, 0, 0), residual " + num(rep.residual);
}

std::string regret(std::uint64_t seed) {
    std::ostringstream s;
    for (auto alg : {learners::Algorithm::cdch, learners::Algorithm::cdsb, learners::Algorithm::cdcb,
                     learners::Algorithm::exp3ag}) {
        for (std::uint64_t k = 0; k < 3; ++k) {
            harness::RunOptions o;
            o.spec.horizon = 5000;
            o.spec.seed = seed + k;
            o.algorithm = alg;
            o.regime = learners::regime_of(alg);
            const auto r = harness::run_experiment(o);
            const double bound = r.bounds.for_algorithm(alg);
            expect(r.metrics.regret_expected <= bound, std::string(learners::to_string(alg)) + " regret " +
                                                          num(r.metrics.regret_expected) + " above bound " + num(bound));
        }
        s << learners::to_string(alg) << " ok; ";
    }
    return s.str();
}

struct Check {
    std::string name;
    bool full_only;
    std::function<std::string(Rng, const CheckOptions&)> run;
};

std::vector<Check> registry() {
    auto quick = [](const CheckOptions& o, int q, int f) { return o.level == Level::quick ? q : f; };
    return {
        {"additivity", false,
         [=](Rng r, const CheckOptions& o) { return additivity(r, {0.0}, quick(o, 50, 200), o.flip_gain_sign, true); }},
        {"gappy-additivity", false,
         [=](Rng r, const CheckOptions& o) {
             return gappy_value() + "; " + additivity(r, {0.5, 1.0}, quick(o, 25, 200), o.flip_gain_sign, false);
         }},
        {"path-map-uniqueness", false, [=](Rng r, const CheckOptions& o) { return uniqueness(r, quick(o, 30, 200)); }},
        {"ensemble-sizes", false, [](Rng, const CheckOptions&) { return sizes(); }},
        {"weight-push", false, [](Rng r, const CheckOptions&) { return weight_push(r, 100); }},
        {"exp3ag-flat-equivalence", false, [](Rng r, const CheckOptions&) { return exp3_flat(r); }},
        {"cdch-polytope", false, [=](Rng r, const CheckOptions& o) { return polytope(r, quick(o, 200, 1000)); }},
        {"projection-optimality", false, [=](Rng r, const CheckOptions& o) { return projection(r, quick(o, 30, 200)); }},
        {"covering-partition", false, [](Rng, const CheckOptions&) { return covering(); }},
        {"cooccurrence", false, [](Rng, const CheckOptions&) { return cooccurrence(); }},
        {"non-additivity", false, [](Rng, const CheckOptions&) { return non_additivity(); }},
        {"regret-bounds", true, [](Rng, const CheckOptions& o) { return regret(o.seed); }},
    };
}

}  // namespace

std::vector<std::string> check_names(Level level) {
    std::vector<std::string> names;
    for (const auto& c : registry())
        if (level == Level::full || !c.full_only) names.push_back(c.name);
    return names;
}

std::vector<CheckResult> run_checks(const CheckOptions& options) {
    std::vector<CheckResult> results;
    const Rng root(options.seed);
    for (const auto& c : registry()) {
        if (c.full_only && options.level == Level::quick) continue;
        if (!options.filter.empty() && c.name.find(options.filter) == std::string::npos) continue;
        CheckResult r;
        r.name = c.name;
        const auto start = std::chrono::steady_clock::now();
        try {
            r.detail = c.run(root.child(c.name), options);
            r.passed = true;
        } catch (const Failure& f) {
            r.detail = f.what;
        } catch (const std::exception& e) {
            r.detail = std::string("error: ") + e.what();
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        results.push_back(std::move(r));
    }
    return results;
}

}  // namespace pathlearn::checks
