#include "doctest.h"

#include <cmath>
#include <map>

#include "pathlearn/flow.hpp"
#include "pathlearn/patterns_io.hpp"
#include "support.hpp"

using namespace pathlearn;
using namespace pathlearn::flow;
using automata::StateId;

namespace {

// Random DAG whose only final state is the last one (a sink), as needed by
// the projection.
Automaton sink_dag(Rng& rng, std::size_t max_states = 7, std::size_t max_arcs = 13) {
    for (;;) {
        auto a = testing::random_dag(rng, max_states, max_arcs);
        bool ok = true;
        for (auto q : a.finals()) ok = ok && a.outgoing(q).empty();
        if (ok && a.finals().size() == 1) return a;
    }
}

Automaton ensemble(std::size_t r, std::size_t l) {
    Automaton a;
    a.add_states(l + 1);
    a.set_initial(0);
    for (std::size_t i = 0; i < l; ++i)
        for (std::size_t j = 0; j < r; ++j)
            a.add_transition(static_cast<StateId>(i), static_cast<StateId>(i + 1),
                             "h" + std::to_string(j + 1) + "_" + std::to_string(i + 1));
    a.set_final(static_cast<StateId>(l));
    return a;
}

// Optimality of the projection: ln(w/w_hat) = phi(src) - phi(dst) for
// some potential with phi = 0 at the final state, so every accepting path
// has the same total log ratio. Returns the spread over all paths.
double log_ratio_spread(const Automaton& a, const std::vector<double>& w, const std::vector<double>& w_hat) {
    double lo = 1e300, hi = -1e300;
    for (const auto& [p, v] : testing::weighted_paths(automata::to_weighted(a))) {
        double s = 0.0;
        for (auto i : p.arcs) s += std::log(w[i] / w_hat[i]);
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    return hi - lo;
}

}  // namespace

TEST_CASE("uniform flow lies in the polytope") {
    Rng rng(11);
    for (int t = 0; t < 50; ++t) {
        auto a = sink_dag(rng);
        auto w = uniform_flow(a);
        CHECK(polytope_violation(a, w) < 1e-12);
    }
}

TEST_CASE("projection satisfies the optimality conditions") {
    Rng rng(12);
    for (int t = 0; t < 60; ++t) {
        auto a = sink_dag(rng);
        std::vector<double> w_hat(a.num_arcs());
        for (auto& x : w_hat) x = 0.01 + 4.0 * rng.uniform();
        auto w = re_project(a, w_hat);
        CHECK(polytope_violation(a, w) < 1e-9);
        for (double x : w) CHECK(x > 0.0);
        CHECK(log_ratio_spread(a, w, w_hat) < 1e-6);
    }
}

TEST_CASE("projection of a point already in the polytope is the identity") {
    Rng rng(13);
    auto a = sink_dag(rng);
    auto w = uniform_flow(a);
    auto p = re_project(a, w);
    for (std::size_t i = 0; i < w.size(); ++i) CHECK(p[i] == doctest::Approx(w[i]).epsilon(1e-9));
}

TEST_CASE("projection on a two-path machine") {
    // 0 -a-> 1 -b-> 2 and 0 -c-> 2. With x on the upper path, x^2 = 6c and
    // x + 4c = 1, so (2/3)x^2 + x - 1 = 0.
    Automaton a;
    a.add_states(3);
    a.set_initial(0);
    a.add_transition(0, 1, "a");
    a.add_transition(1, 2, "b");
    a.add_transition(0, 2, "c");
    a.set_final(2);
    auto w = re_project(a, {2.0, 3.0, 4.0});
    const double x = (-1.0 + std::sqrt(1.0 + 8.0 / 3.0)) / (4.0 / 3.0);
    CHECK(w[0] == doctest::Approx(x).epsilon(1e-8));
    CHECK(w[1] == doctest::Approx(x).epsilon(1e-8));
    CHECK(w[2] == doctest::Approx(1.0 - x).epsilon(1e-8));
}

TEST_CASE("projection errors") {
    Automaton a;
    a.add_states(2);
    a.set_initial(0);
    a.add_transition(0, 1, "a");
    a.set_final(1);
    CHECK_THROWS_AS(re_project(a, {0.0}), ZeroFlow);
    CHECK_THROWS_AS(re_project(a, {-1.0}), InvalidArgument);
    CHECK_THROWS_AS(re_project(a, {1.0, 2.0}), InvalidArgument);
}

TEST_CASE("flow decomposition reproduces the flow") {
    Rng rng(14);
    for (int t = 0; t < 60; ++t) {
        auto a = sink_dag(rng);
        std::vector<double> w_hat(a.num_arcs());
        for (auto& x : w_hat) x = 0.01 + rng.uniform();
        auto w = re_project(a, w_hat);
        auto parts = flow_decompose(a, w);
        CHECK(parts.size() <= a.num_arcs());
        std::vector<double> back(a.num_arcs(), 0.0);
        double total = 0.0;
        for (const auto& c : parts) {
            CHECK(c.coefficient > 0.0);
            CHECK(automata::is_accepting(a, c.path));
            total += c.coefficient;
            for (auto i : c.path.arcs) back[i] += c.coefficient;
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-8));
        for (std::size_t i = 0; i < w.size(); ++i) CHECK(std::abs(back[i] - w[i]) < 1e-8);
    }
    Automaton a;
    a.add_states(2);
    a.set_initial(0);
    a.add_transition(0, 1, "a");
    a.set_final(1);
    CHECK_THROWS_AS(flow_decompose(a, {0.5}), NotInPolytope);
}

TEST_CASE("covering paths use every transition") {
    Rng rng(15);
    for (int t = 0; t < 80; ++t) {
        auto a = testing::random_dag(rng);
        auto cover = covering_paths(a);
        std::vector<int> hits(a.num_arcs(), 0);
        for (const auto& p : cover) {
            CHECK(automata::is_accepting(a, p));
            for (auto i : p.arcs) ++hits[i];
        }
        for (auto h : hits) CHECK(h > 0);
        CHECK(cover.size() <= a.num_arcs());
    }
}

TEST_CASE("covering paths partition the ensemble context automaton") {
    for (std::size_t r : {2u, 3u})
        for (std::size_t n : {1u, 2u, 3u}) {
            const std::size_t l = n + 2;
            std::vector<std::string> alphabet{"a", "b"};
            auto ca = contextual::build_context_automaton(ensemble(r, l), contextual::all_ngrams(alphabet, n));
            auto cover = covering_paths(ca.machine);
            std::vector<int> hits(ca.num_arcs(), 0);
            for (const auto& p : cover)
                for (auto i : p.arcs) ++hits[i];
            for (auto h : hits) CHECK(h == 1);
            CHECK(cover.size() * (l - n + 1) == ca.num_arcs());
        }
}

TEST_CASE("second moment matches enumeration") {
    Rng rng(16);
    for (int t = 0; t < 40; ++t) {
        auto w = testing::random_weighted(rng);
        auto m = second_moment(w);
        const auto k = static_cast<Eigen::Index>(w.num_arcs());
        Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(k, k);
        double z = 0.0;
        for (const auto& [p, v] : testing::weighted_paths(w)) {
            z += v;
            Eigen::VectorXd x = Eigen::VectorXd::Zero(k);
            for (auto i : p.arcs) x(static_cast<Eigen::Index>(i)) += 1.0;
            expected += v * x * x.transpose();
        }
        expected /= z;
        CHECK((m - expected).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("uniform co-occurrence counts on the ensemble are exact") {
    auto a = ensemble(3, 4);
    auto c = cooccurrence(a);
    // Same position, same transition: 1/3. Same position, different: 0.
    // Different positions: 1/9.
    for (Eigen::Index i = 0; i < c.matrix.rows(); ++i)
        for (Eigen::Index j = 0; j < c.matrix.cols(); ++j) {
            const bool same_layer = a.arc(static_cast<std::size_t>(i)).src == a.arc(static_cast<std::size_t>(j)).src;
            const double want = i == j ? 1.0 / 3 : same_layer ? 0.0 : 1.0 / 9;
            CHECK(c.matrix(i, j) == doctest::Approx(want).epsilon(1e-12));
        }
    // Rank: l(r-1) + 1 for the ensemble.
    CHECK(c.rank == 4 * 2 + 1);
    CHECK(c.lambda_min > 0.0);
}

TEST_CASE("pseudo-inverse satisfies the Moore-Penrose identities") {
    Rng rng(17);
    for (int t = 0; t < 30; ++t) {
        auto w = testing::random_weighted(rng);
        auto c = pseudo_inverse(second_moment(w));
        const auto& m = c.matrix;
        const auto& p = c.pinv;
        const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
        CHECK((m * p * m - m).cwiseAbs().maxCoeff() < 1e-7 * scale);
        CHECK((p * m * p - p).cwiseAbs().maxCoeff() < 1e-7 * std::max(1.0, p.cwiseAbs().maxCoeff()));
        CHECK(((m * p).transpose() - m * p).cwiseAbs().maxCoeff() < 1e-7);
        CHECK(((p * m).transpose() - p * m).cwiseAbs().maxCoeff() < 1e-7);
        // Smallest positive eigenvalue against a direct eigen solve.
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
        double lo = 1e300;
        std::size_t rank = 0;
        for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i)
            if (eig.eigenvalues()(i) > 1e-9 * eig.eigenvalues().maxCoeff()) {
                lo = std::min(lo, eig.eigenvalues()(i));
                ++rank;
            }
        CHECK(c.rank == rank);
        CHECK(c.lambda_min == doctest::Approx(lo).epsilon(1e-6));
    }
}
