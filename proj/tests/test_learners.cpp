#include "doctest.h"

#include <cmath>
#include <map>

#include "pathlearn/learners.hpp"
#include "support.hpp"

using namespace pathlearn;
using namespace pathlearn::learners;
using automata::StateId;
using testing::Strings;

namespace {

std::shared_ptr<const ContextAutomaton> context(const Automaton& a, const contextual::PatternSet& ps,
                                                bool equalized = false) {
    auto ca = contextual::build_context_automaton(a, ps);
    if (equalized) ca = contextual::equalize(ca);
    return std::make_shared<const ContextAutomaton>(std::move(ca));
}

LearnerConfig config(std::size_t T, double B) {
    LearnerConfig c;
    c.horizon = T;
    c.gain_cap = B;
    return c;
}

Automaton single_path(std::size_t n) {
    Automaton a;
    a.add_states(n + 1);
    a.set_initial(0);
    for (std::size_t i = 0; i < n; ++i)
        a.add_transition(static_cast<StateId>(i), static_cast<StateId>(i + 1), "e" + std::to_string(i + 1));
    a.set_final(static_cast<StateId>(n));
    return a;
}

// Probability of every A′ path under the mixture a learner samples from.
std::vector<std::pair<Path, double>> mixture_paths(const WeightedAutomaton& p, double gamma,
                                                   const std::function<double(const Path&)>& explore) {
    std::vector<std::pair<Path, double>> out;
    for (const auto& [path, weight] : testing::weighted_paths(p))
        out.emplace_back(path, (1.0 - gamma) * weight + gamma * explore(path));
    return out;
}

struct Round {
    std::unordered_map<std::string, std::string> out;
    Strings y;
};

}  // namespace

TEST_CASE("CDCH starts at the uniform flow") {
    auto ca = context(testing::ensemble(2, 4), testing::ngrams(2), true);
    Cdch cdch(ca, config(100, 3));
    for (double x : cdch.weights()) CHECK(x == doctest::Approx(0.25).epsilon(1e-15));
    auto one = context(single_path(4), testing::ngrams(2), true);
    Cdch c1(one, config(100, 3));
    for (double x : c1.weights()) CHECK(x == 1.0);
    CHECK(flow::polytope_violation(ca->machine, cdch.weights()) < 1e-12);
}

TEST_CASE("CDCH prediction samples its decomposition") {
    auto ca = context(testing::ensemble(2, 5), testing::ngrams(2), true);
    Cdch cdch(ca, config(100, 4));
    Rng rng(1), data(2);
    for (int t = 0; t < 20; ++t) {
        Round r{testing::random_outputs(data, ca->source), testing::random_word(data, 5)};
        auto played = cdch.predict(rng);
        const auto& parts = cdch.last_decomposition();
        CHECK(parts.size() <= ca->num_arcs());
        std::vector<double> expect(ca->num_arcs(), 0.0);
        double total = 0.0;
        for (const auto& c : parts) {
            total += c.coefficient;
            for (auto i : c.path.arcs) expect[i] += c.coefficient;
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-8));
        for (std::size_t i = 0; i < expect.size(); ++i) CHECK(std::abs(expect[i] - cdch.weights()[i]) < 1e-8);
        CHECK(contextual::map_path(*ca, played.path) == played.context_path);
        Feedback fb;
        fb.edge_gains = contextual::assign_edge_gains(*ca, r.out, r.y);
        cdch.update(played, fb);
    }
}

TEST_CASE("CDCH update edge cases") {
    auto ca = context(testing::ensemble(2, 4), testing::ngrams(2), true);
    Cdch cdch(ca, config(100, 3));
    const auto w0 = cdch.weights();
    Rng rng(3);
    auto played = cdch.predict(rng);
    Feedback fb;
    fb.edge_gains.assign(ca->num_arcs(), 2.0);
    cdch.update(played, fb);
    for (std::size_t i = 0; i < w0.size(); ++i) CHECK(std::abs(cdch.weights()[i] - w0[i]) < 1e-8);

    auto c = config(100, 3);
    c.learning_rate = 0.0;
    Cdch frozen(ca, c);
    Rng data(4);
    fb.edge_gains = contextual::assign_edge_gains(*ca, testing::random_outputs(data, ca->source), testing::random_word(data, 4));
    frozen.update(played, fb);
    CHECK(frozen.weights() == w0);

    fb.edge_gains.assign(ca->num_arcs(), 0.0);
    fb.edge_gains[0] = 3.5;
    CHECK_THROWS_AS(cdch.update(played, fb), GainExceedsCap);
    Feedback wrong;
    wrong.regime = Regime::bandit;
    CHECK_THROWS_AS(cdch.update(played, wrong), RegimeMismatch);
}

TEST_CASE("projection examples") {
    Automaton two;
    two.add_states(2);
    two.set_initial(0);
    two.add_transition(0, 1, "a");
    two.add_transition(0, 1, "b");
    two.set_final(1);
    auto w = flow::re_project(two, {2.0, 6.0});
    CHECK(w[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(w[1] == doctest::Approx(0.75).epsilon(1e-12));

    Rng rng(5);
    for (const auto& toy : testing::toy_polytopes())
        for (int t = 0; t < 10; ++t) {
            std::vector<double> w_hat(3);
            for (auto& x : w_hat) x = 0.05 + 3.0 * rng.uniform();
            auto got = flow::re_project(toy.machine, w_hat);
            auto want = toy.minimizer(w_hat);
            for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(got[i] - want[i]) < 1e-4);
        }
}

TEST_CASE("flow decomposition examples") {
    auto a = single_path(3);
    auto parts = flow::flow_decompose(a, {1.0, 1.0, 1.0});
    REQUIRE(parts.size() == 1);
    CHECK(parts[0].coefficient == 1.0);

    Automaton diamond;
    diamond.add_states(4);
    diamond.set_initial(0);
    diamond.add_transition(0, 1, "a");
    diamond.add_transition(0, 2, "b");
    diamond.add_transition(1, 3, "c");
    diamond.add_transition(2, 3, "d");
    diamond.set_final(3);
    parts = flow::flow_decompose(diamond, {0.5, 0.5, 0.5, 0.5});
    REQUIRE(parts.size() == 2);
    CHECK(parts[0].coefficient == 0.5);
    CHECK(parts[1].coefficient == 0.5);
}

TEST_CASE("covering set of the small ensemble") {
    auto ca = context(testing::ensemble(2, 4), testing::ngrams(2));
    auto cover = flow::covering_paths(ca->machine);
    CHECK(cover.size() == 4);
    std::vector<int> hits(ca->num_arcs(), 0);
    for (const auto& p : cover) {
        CHECK(p.length() == 3);
        for (auto i : p.arcs) ++hits[i];
    }
    CHECK(ca->num_arcs() == 12);
    for (auto h : hits) CHECK(h == 1);
    auto one = context(single_path(3), testing::ngrams(1));
    CHECK(flow::covering_paths(one->machine).size() == 1);
}

TEST_CASE("CDSB samples only the covering set when gamma = 1") {
    auto ca = context(testing::ensemble(2, 4), testing::ngrams(2));
    auto c = config(100, 3);
    c.mixing_rate = 1.0;
    Cdsb cdsb(ca, c);
    std::map<Path, int> counts;
    Rng rng(6);
    const int draws = 20000;
    for (int i = 0; i < draws; ++i) ++counts[cdsb.predict(rng).context_path];
    CHECK(counts.size() == cdsb.cover().size());
    for (const auto& p : cdsb.cover())
        CHECK(std::abs(counts[p] / double(draws) - 1.0 / cdsb.cover().size()) < 0.02);
}

TEST_CASE("CDSB surrogate expectation and update") {
    Rng data(7);
    for (int trial = 0; trial < 5; ++trial) {
        auto ca = context(testing::ensemble(2, 4), testing::ngrams(2));
        const double B = 4.0;
        Cdsb cdsb(ca, config(200, B));
        // move away from uniform first
        Rng rng(8 + trial);
        for (int t = 0; t < 5; ++t) {
            auto played = cdsb.predict(rng);
            auto g = contextual::assign_edge_gains(*ca, testing::random_outputs(data, ca->source), testing::random_word(data, 4));
            Feedback fb;
            fb.regime = Regime::semi;
            for (auto i : played.context_path.arcs) fb.path_gains.push_back(g[i]);
            cdsb.update(played, fb);
        }
        auto g = contextual::assign_edge_gains(*ca, testing::random_outputs(data, ca->source), testing::random_word(data, 4));
        const auto& cover = cdsb.cover();
        const double gamma = cdsb.tuning().gamma, beta = cdsb.tuning().beta;
        auto paths = mixture_paths(cdsb.weights(), gamma, [&](const Path& p) {
            return std::count(cover.begin(), cover.end(), p) / double(cover.size());
        });
        // The estimator adds β/q on every transition, so its mean is g/B + β/q.
        const auto q_edge = cdsb.marginals();
        std::vector<double> mean(ca->num_arcs(), 0.0);
        double total = 0.0;
        for (const auto& [p, q] : paths) {
            total += q;
            std::vector<double> observed;
            for (auto i : p.arcs) observed.push_back(g[i]);
            auto s = cdsb.surrogate(p, observed);
            for (std::size_t i = 0; i < s.size(); ++i) mean[i] += q * s[i];
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
        for (std::size_t i = 0; i < mean.size(); ++i) CHECK(mean[i] == doctest::Approx(g[i] / B + beta / q_edge[i]).epsilon(1e-9));

        // p_{t+1}(π′) ∝ p_t(π′) Π exp(η g̃)
        auto played = cdsb.predict(rng);
        std::vector<double> observed;
        for (auto i : played.context_path.arcs) observed.push_back(g[i]);
        const auto s = cdsb.surrogate(played.context_path, observed);
        std::map<Path, double> expected;
        double z = 0.0;
        for (const auto& [p, w] : testing::weighted_paths(cdsb.weights())) {
            double x = w;
            for (auto i : p.arcs) x *= std::exp(cdsb.tuning().eta * s[i]);
            expected[p] = x;
            z += x;
        }
        Feedback fb;
        fb.regime = Regime::semi;
        fb.path_gains = observed;
        cdsb.update(played, fb);
        CHECK(automata::is_stochastic(cdsb.weights()));
        double sum = 0.0;
        for (const auto& [p, w] : testing::weighted_paths(cdsb.weights())) {
            sum += w;
            CHECK(w == doctest::Approx(expected[p] / z).epsilon(1e-10));
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("CDSB on a single path keeps its distribution") {
    auto ca = context(single_path(3), testing::ngrams(1));
    auto c = config(50, 2);
    c.exploration_bonus = 0.0;
    Cdsb cdsb(ca, c);
    Rng rng(9);
    auto played = cdsb.predict(rng);
    Feedback fb;
    fb.regime = Regime::semi;
    fb.path_gains.assign(played.context_path.length(), 1.0);
    cdsb.update(played, fb);
    for (const auto& arc : cdsb.weights().arcs()) CHECK(arc.weight == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("CDCB zero gain leaves the state unchanged") {
    auto ca = context(testing::ensemble(2, 3), testing::ngrams(2));
    Cdcb cdcb(ca, config(100, 2));
    const auto before = cdcb.snapshot();
    Rng rng(10);
    auto played = cdcb.predict(rng);
    Feedback fb;
    fb.regime = Regime::bandit;
    fb.gain = 0.0;
    cdcb.update(played, fb);
    auto after = cdcb.snapshot();
    CHECK(after.substr(after.find("weights")) == before.substr(before.find("weights")));
}

TEST_CASE("CDCB surrogate expectation identity") {
    auto ca = context(testing::ensemble(2, 3), testing::ngrams(2));
    const double B = 2.0;
    Cdcb cdcb(ca, config(300, B));
    Rng rng(11), data(12);
    for (int t = 0; t < 10; ++t) {
        auto played = cdcb.predict(rng);
        auto g = contextual::assign_edge_gains(*ca, testing::random_outputs(data, ca->source), testing::random_word(data, 3));
        Feedback fb;
        fb.regime = Regime::bandit;
        for (auto i : played.context_path.arcs) fb.gain += g[i];
        cdcb.update(played, fb);
    }
    auto g = contextual::assign_edge_gains(*ca, testing::random_outputs(data, ca->source), testing::random_word(data, 3));
    const auto m = static_cast<Eigen::Index>(ca->num_arcs());
    Eigen::VectorXd g_edge(m);
    for (Eigen::Index i = 0; i < m; ++i) g_edge(i) = g[static_cast<std::size_t>(i)];
    const double gamma = cdcb.tuning().gamma;
    const double n = automata::count_paths(ca->machine);
    auto paths = mixture_paths(cdcb.weights(), gamma, [&](const Path&) { return 1.0 / n; });
    CHECK(paths.size() == 8);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(m);
    Eigen::MatrixXd moment = Eigen::MatrixXd::Zero(m, m);
    for (const auto& [p, q] : paths) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(m);
        for (auto i : p.arcs) v(static_cast<Eigen::Index>(i)) = 1.0;
        mean += q * cdcb.surrogate(p, v.dot(g_edge));
        moment += q * v * v.transpose();
    }
    CHECK((moment - cdcb.mixture_moment()).cwiseAbs().maxCoeff() < 1e-12);
    const auto pinv = flow::pseudo_inverse(moment).pinv;
    Eigen::VectorXd want = pinv * moment * g_edge / B;
    CHECK((mean - want).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("CDCB exploration samples paths uniformly") {
    auto ca = context(testing::ensemble(2, 3), testing::ngrams(2));
    auto c = config(100, 2);
    c.mixing_rate = 1.0;
    c.learning_rate = 0.1;
    Cdcb cdcb(ca, c);
    std::map<Path, int> counts;
    Rng rng(13);
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) ++counts[cdcb.predict(rng).path];
    CHECK(counts.size() == 8);
    for (const auto& [p, k] : counts) CHECK(std::abs(k / double(draws) - 1.0 / 8) < 0.01);
}

TEST_CASE("update machine weights") {
    auto a = testing::ensemble(2, 3);
    const Strings played{"h1_1", "h2_2", "h1_3"};
    auto v = update_machine(played, 0.25, 1.5, 0.4);
    auto product = automata::intersect(automata::to_weighted(a), v);
    for (const auto& [p, weight] : testing::weighted_paths(product)) {
        const bool same = automata::path_names(product, p) == played;
        CHECK(weight == doctest::Approx(same ? std::exp(0.4 * 1.5 / 0.25) : 1.0).epsilon(1e-14));
    }
    CHECK(testing::weighted_paths(product).size() == 8);
}

TEST_CASE("EXP3-AG on two experts matches the closed form") {
    Automaton a;
    a.add_states(2);
    a.set_initial(0);
    a.add_transition(0, 1, "x");
    a.add_transition(0, 1, "y");
    a.set_final(1);
    auto ca = context(a, testing::ngrams(1));
    LearnerConfig c;
    c.learning_rate = 0.3;
    c.path_gain_cap = 1.0;
    Exp3Ag learner(a, c);
    Rng rng(14);
    auto played = learner.predict(rng);
    Feedback fb;
    fb.regime = Regime::bandit;
    fb.gain = 1.0;
    learner.update(played, fb);
    const auto name = a.name(played.path.arcs[0]);
    const double boosted = std::exp(0.3 * 1.0 / 0.5);
    CHECK(learner.path_probability({name}) == doctest::Approx(boosted / (boosted + 1.0)).epsilon(1e-12));
    CHECK(learner.path_probability({name == "x" ? "y" : "x"}) ==
          doctest::Approx(1.0 / (boosted + 1.0)).epsilon(1e-12));
}

TEST_CASE("EXP3-AG with zero gains stays uniform") {
    auto a = testing::ensemble(2, 4);
    LearnerConfig c;
    c.learning_rate = 0.5;
    c.path_gain_cap = 5.0;
    Exp3Ag learner(a, c);
    Rng rng(15);
    for (int t = 0; t < 20; ++t) {
        Feedback fb;
        fb.regime = Regime::bandit;
        learner.update(learner.predict(rng), fb);
    }
    for (const auto& p : automata::enumerate_paths(a))
        CHECK(learner.path_probability(automata::path_names(a, p)) == doctest::Approx(1.0 / 16).epsilon(1e-12));
}

TEST_CASE("EXP3-AG equals flat EXP3 over enumerated paths") {
    auto a = testing::ensemble(2, 5);
    const auto paths = automata::enumerate_paths(a);
    REQUIRE(paths.size() == 32);
    std::map<Strings, std::size_t> index;
    for (std::size_t i = 0; i < paths.size(); ++i) index[automata::path_names(a, paths[i])] = i;
    LearnerConfig c;
    c.horizon = 200;
    c.path_gain_cap = 5.0;
    Exp3Ag learner(a, c);
    testing::FlatExp3 flat(paths.size(), learner.tuning().eta);
    Rng rng(16), gains(17);
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
        auto p = flat.probabilities();
        for (std::size_t i = 0; i < paths.size(); ++i)
            worst = std::max(worst, std::abs(p[i] - learner.path_probability(automata::path_names(a, paths[i]))));
        auto played = learner.predict(rng);
        Feedback fb;
        fb.regime = Regime::bandit;
        fb.gain = 5.0 * gains.uniform();
        learner.update(played, fb);
        flat.update(index.at(automata::path_names(a, played.path)), fb.gain);
        const auto& g = learner.growth().back();
        CHECK(g.after <= g.before + g.update);
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("default tuning") {
    InstanceSizes s;
    s.K = 5;
    s.M = 20;
    s.N = 64;
    s.C = 4;
    s.lambda_min = 0.05;
    LearnerConfig c = config(1000, 2.0);
    double last = INFINITY;
    for (std::size_t T : {10u, 100u, 1000u, 100000u}) {
        c.horizon = T;
        const double eta = default_tuning(Algorithm::cdch, c, s).eta;
        CHECK(eta < last);
        last = eta;
    }
    c.horizon = 1000;
    const double eta = default_tuning(Algorithm::cdch, c, s).eta;
    c.gain_cap = 4.0;
    CHECK(default_tuning(Algorithm::cdch, c, s).eta == doctest::Approx(eta / 2).epsilon(1e-15));
    CHECK(eta == doctest::Approx(std::sqrt(2 * std::log(100.0) / 1000) / 10).epsilon(1e-15));

    c.learning_rate = 0.123;
    c.mixing_rate = 0.2;
    c.exploration_bonus = 0.01;
    auto t = default_tuning(Algorithm::cdsb, c, s);
    CHECK(t.eta == 0.123);
    CHECK(t.gamma == 0.2);
    CHECK(t.beta == 0.01);

    LearnerConfig bare;
    bare.gain_cap = 1.0;
    CHECK_THROWS_AS(default_tuning(Algorithm::cdch, bare, s), MissingSize);
    bare.horizon = 10;
    CHECK_THROWS_AS(default_tuning(Algorithm::cdcb, bare, InstanceSizes{5, 20, 64, 0, 0}), MissingSize);
    auto e = default_tuning(Algorithm::exp3ag, bare, s);
    CHECK(e.U == 5.0);
    CHECK(e.eta == doctest::Approx(std::sqrt(2 * std::log(64.0) / (10 * 64)) / 5).epsilon(1e-15));
}

TEST_CASE("CDCH stays in the polytope over many rounds") {
    Rng data(18), rng(19);
    auto ca = context(testing::ensemble(2, 5), testing::ngrams(2), true);
    const double B = contextual::max_theta_component(ca->patterns, 5);
    Cdch cdch(ca, config(1000, B));
    double worst = 0.0, worst_rebuild = 0.0;
    for (int t = 0; t < 1000; ++t) {
        auto played = cdch.predict(rng);
        std::vector<double> rebuilt(ca->num_arcs(), 0.0);
        for (const auto& c : cdch.last_decomposition())
            for (auto i : c.path.arcs) rebuilt[i] += c.coefficient;
        for (std::size_t i = 0; i < rebuilt.size(); ++i)
            worst_rebuild = std::max(worst_rebuild, std::abs(rebuilt[i] - cdch.weights()[i]));
        Feedback fb;
        fb.edge_gains = contextual::assign_edge_gains(*ca, testing::random_outputs(data, ca->source), testing::random_word(data, 5));
        cdch.update(played, fb);
        worst = std::max(worst, flow::polytope_violation(ca->machine, cdch.weights()));
    }
    CHECK(worst < 1e-8);
    CHECK(worst_rebuild < 1e-8);
}

TEST_CASE("snapshots restore the learner exactly") {
    Rng data(20);
    auto ca = context(testing::ensemble(2, 4), testing::ngrams(2));
    for (auto alg : {Algorithm::cdch, Algorithm::cdsb, Algorithm::cdcb, Algorithm::exp3ag}) {
        auto c = config(100, 3);
        c.path_gain_cap = 9.0;
        auto learner = make_learner(alg, ca, c);
        Rng rng(21);
        for (int t = 0; t < 5; ++t) {
            auto played = learner->predict(rng);
            auto cctx = dynamic_cast<const ContextLearner*>(learner.get());
            const auto& machine = cctx ? cctx->context() : *ca;
            auto g = contextual::assign_edge_gains(machine, testing::random_outputs(data, ca->source), testing::random_word(data, 4));
            Feedback fb;
            fb.regime = learner->regime();
            fb.edge_gains = g;
            for (auto i : played.context_path.arcs) {
                fb.path_gains.push_back(g[i]);
                fb.gain += g[i];
            }
            if (alg == Algorithm::exp3ag)
                fb.gain = contextual::path_gain_oracle(ca->source, played.path, testing::random_outputs(data, ca->source),
                                                       testing::random_word(data, 4), ca->patterns);
            learner->update(played, fb);
        }
        const auto text = learner->snapshot();
        auto copy = make_learner(alg, ca, c);
        copy->restore(text);
        CHECK(copy->round() == 5);
        CHECK(copy->snapshot() == text);
        Rng r1(22), r2(22);
        for (int k = 0; k < 10; ++k) CHECK(learner->predict(r1).path == copy->predict(r2).path);
        CHECK_THROWS_AS(copy->restore("garbage"), ParseError);
    }
}
