#pragma once

// Shared test helpers: random instance generators and brute-force oracles
// that deliberately avoid the library code paths they are checking.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <tuple>
#include <vector>

#include "pathlearn/algorithms.hpp"
#include "pathlearn/automaton.hpp"
#include "pathlearn/contextual.hpp"
#include "pathlearn/patterns_io.hpp"
#include "pathlearn/random.hpp"

namespace testing {

using pathlearn::Rng;
using pathlearn::automata::Automaton;
using pathlearn::automata::Path;
using pathlearn::automata::StateId;
using pathlearn::automata::Transducer;
using pathlearn::automata::WeightedAutomaton;
using Strings = std::vector<std::string>;

// Random acyclic automaton on states 0..n-1 with forward arcs, unique names
// e0, e1, ... and every state on some accepting path.
inline Automaton random_dag(Rng& rng, std::size_t max_states = 8, std::size_t max_arcs = 14) {
    for (;;) {
        const std::size_t n = 2 + rng.below(max_states - 1);
        Automaton a;
        a.add_states(n);
        a.set_initial(0);
        std::size_t arcs = 0, target = n - 1 + rng.below(max_arcs - (n - 1) + 1);
        // spine so that the graph is connected
        for (StateId q = 0; q + 1 < n; ++q) {
            StateId d = static_cast<StateId>(q + 1 + rng.below(n - q - 1));
            a.add_transition(q, d, "e" + std::to_string(arcs++));
        }
        while (arcs < target) {
            StateId s = static_cast<StateId>(rng.below(n - 1));
            StateId d = static_cast<StateId>(s + 1 + rng.below(n - s - 1));
            a.add_transition(s, d, "e" + std::to_string(arcs++));
        }
        a.set_final(static_cast<StateId>(n - 1));
        for (StateId q = 1; q + 1 < n; ++q)
            if (rng.bernoulli(0.25)) a.set_final(q);
        auto t = pathlearn::automata::trim(a);
        if (t.num_arcs() == 0) continue;
        return t;
    }
}

// Random weighted DAG with positive weights on arcs and final states.
inline WeightedAutomaton random_weighted(Rng& rng, std::size_t max_states = 8, std::size_t max_arcs = 14) {
    auto a = random_dag(rng, max_states, max_arcs);
    auto w = pathlearn::automata::to_weighted(a);
    for (std::size_t i = 0; i < w.num_arcs(); ++i) w.set_weight(i, 0.05 + 3.0 * rng.uniform());
    for (auto q : w.finals()) w.set_final_weight(q, 0.1 + rng.uniform());
    return w;
}

// Every accepting path as a name sequence, by plain recursion over arcs in
// insertion order.
inline std::vector<Strings> all_strings(const Automaton& a) {
    std::vector<Strings> out;
    if (a.empty()) return out;
    Strings cur;
    auto rec = [&](auto&& self, StateId q) -> void {
        if (a.is_final(q)) out.push_back(cur);
        for (std::size_t i = 0; i < a.num_arcs(); ++i) {
            if (a.arc(i).src != q) continue;
            cur.push_back(a.arc(i).name);
            self(self, a.arc(i).dst);
            cur.pop_back();
        }
    };
    rec(rec, a.initial());
    return out;
}

inline std::set<Strings> string_set(const Automaton& a, bool drop_eps = true) {
    std::set<Strings> s;
    for (auto x : all_strings(a)) {
        if (drop_eps) std::erase(x, std::string(pathlearn::automata::kEpsilon));
        s.insert(x);
    }
    return s;
}

// Paths as arc-index sequences with their weights (product of weights and
// final weight), found by plain recursion.
inline std::vector<std::pair<Path, double>> weighted_paths(const WeightedAutomaton& w) {
    std::vector<std::pair<Path, double>> out;
    if (w.empty()) return out;
    Path cur;
    auto rec = [&](auto&& self, StateId q, double acc) -> void {
        if (w.is_final(q)) out.emplace_back(cur, acc * w.final_weight(q));
        for (std::size_t i = 0; i < w.num_arcs(); ++i) {
            if (w.arc(i).src != q) continue;
            cur.arcs.push_back(i);
            self(self, w.arc(i).dst, acc * w.arc(i).weight);
            cur.arcs.pop_back();
        }
    };
    rec(rec, w.initial(), 1.0);
    return out;
}

// All outputs a (possibly ρ-using) transducer produces for input x; ε-input
// arcs are followed freely (assumed acyclic among themselves).
inline std::set<Strings> transduce(const Transducer& t, const Strings& x) {
    using pathlearn::automata::is_epsilon;
    using pathlearn::automata::is_rho;
    std::set<Strings> results;
    Strings out;
    auto rec = [&](auto&& self, StateId q, std::size_t pos) -> void {
        if (pos == x.size() && t.is_final(q)) results.insert(out);
        bool literal = false;
        if (pos < x.size())
            for (const auto& arc : t.arcs())
                if (arc.src == q && arc.input == x[pos]) literal = true;
        for (const auto& arc : t.arcs()) {
            if (arc.src != q) continue;
            bool eps_in = is_epsilon(arc.input);
            bool match = pos < x.size() && (arc.input == x[pos] || (is_rho(arc.input) && !literal));
            if (!eps_in && !match) continue;
            if (!is_epsilon(arc.output)) out.push_back(arc.output);
            self(self, arc.dst, eps_in ? pos : pos + 1);
            if (!is_epsilon(arc.output)) out.pop_back();
        }
    };
    rec(rec, t.initial(), 0);
    return results;
}

// Θ component by scanning every index subset (bitmask), independent of the
// library's dynamic program.
inline double brute_theta(const Strings& y, const Strings& theta, double discount, long max_gap) {
    const std::size_t m = y.size(), r = theta.size();
    if (r == 0 || m < r || m > 20) return 0.0;
    double total = 0.0;
    for (unsigned mask = 0; mask < (1u << m); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcount(mask)) != r) continue;
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < m; ++i)
            if (mask & (1u << i)) idx.push_back(i);
        bool ok = true;
        for (std::size_t j = 0; j < r; ++j) ok = ok && y[idx[j]] == theta[j];
        if (!ok) continue;
        const long gap = static_cast<long>(idx.back() - idx.front() + 1 - r);
        if (max_gap >= 0 && gap > max_gap) continue;
        total += std::pow(discount, static_cast<double>(gap));
    }
    return total;
}

// Number of states of the ensemble context automaton counted layer by
// layer: the initial state, r^(n-1) histories after each position
// p = n..l-1, and a single final state once the last position is read
// (nothing can follow it, so no history is kept).
inline std::size_t ensemble_context_states(std::size_t r, std::size_t n, std::size_t l) {
    std::size_t per_layer = 1;
    for (std::size_t i = 0; i + 1 < n; ++i) per_layer *= r;
    return 2 + per_layer * (l - n);
}

// Chain of l+1 states with r parallel transitions h<j>_<i> per layer.
inline Automaton ensemble(std::size_t r, std::size_t l) {
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

// All n-grams over the first `sigma` letters.
inline pathlearn::contextual::PatternSet ngrams(std::size_t n, std::size_t sigma = 2) {
    Strings alphabet;
    for (std::size_t i = 0; i < sigma; ++i) alphabet.push_back(std::string(1, static_cast<char>('a' + i)));
    return pathlearn::contextual::all_ngrams(alphabet, n);
}

// Random output symbol per transition name.
inline std::unordered_map<std::string, std::string> random_outputs(Rng& rng, const Automaton& a, std::size_t sigma = 2) {
    std::unordered_map<std::string, std::string> out;
    for (const auto& arc : a.arcs()) out[arc.name] = std::string(1, static_cast<char>('a' + rng.below(sigma)));
    return out;
}

inline Strings random_word(Rng& rng, std::size_t length, std::size_t sigma = 2) {
    Strings y;
    for (std::size_t i = 0; i < length; ++i) y.push_back(std::string(1, static_cast<char>('a' + rng.below(sigma))));
    return y;
}

inline std::size_t ipow(std::size_t b, std::size_t e) {
    std::size_t x = 1;
    while (e--) x *= b;
    return x;
}

// Exponential weights over an explicit list of experts with importance
// weighted bandit gains, written out directly.
struct FlatExp3 {
    double eta = 0;
    std::vector<double> cumulative;

    FlatExp3(std::size_t n, double eta_) : eta(eta_), cumulative(n, 0.0) {}

    std::vector<double> probabilities() const {
        const double top = *std::max_element(cumulative.begin(), cumulative.end());
        std::vector<double> p(cumulative.size());
        double z = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) z += p[i] = std::exp(eta * (cumulative[i] - top));
        for (auto& x : p) x /= z;
        return p;
    }
    void update(std::size_t played, double gain) { cumulative[played] += gain / probabilities()[played]; }
};

// Unnormalized relative entropy, 0 ln 0 = 0.
inline double divergence(const std::vector<double>& w, const std::vector<double>& w_hat) {
    double d = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] < 0.0) return INFINITY;
        d += (w[i] > 0.0 ? w[i] * std::log(w[i] / w_hat[i]) : 0.0) + w_hat[i] - w[i];
    }
    return d;
}

// Minimizer of a convex function on [lo, hi] by golden-section search.
inline double golden_min(const std::function<double(double)>& f, double lo, double hi) {
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(c), fd = f(d);
    for (int i = 0; i < 120; ++i) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    return (a + b) / 2.0;
}

// Three-transition machines whose flow polytope is written out by hand, so
// the divergence minimizer can be found by direct search over it.
struct ToyPolytope {
    std::string name;
    Automaton machine;
    std::function<std::vector<double>(const std::vector<double>&)> minimizer;
};

inline std::vector<ToyPolytope> toy_polytopes() {
    std::vector<ToyPolytope> toys;
    auto machine = [](std::size_t states, std::vector<std::tuple<StateId, StateId, std::string>> arcs) {
        Automaton a;
        a.add_states(states);
        a.set_initial(0);
        for (auto& [s, d, n] : arcs) a.add_transition(s, d, n);
        a.set_final(static_cast<StateId>(states - 1));
        return a;
    };
    using W = std::vector<double>;
    toys.push_back({"three parallel", machine(2, {{0, 1, "a"}, {0, 1, "b"}, {0, 1, "c"}}), [](const W& h) {
                        auto at = [](double x, double y) { return W{x, y, 1.0 - x - y}; };
                        auto inner = [&](double x) {
                            return golden_min([&](double y) { return divergence(at(x, y), h); }, 0.0, 1.0 - x);
                        };
                        const double x =
                            golden_min([&](double x) { return divergence(at(x, inner(x)), h); }, 0.0, 1.0);
                        return at(x, inner(x));
                    }});
    toys.push_back({"bypass", machine(3, {{0, 1, "a"}, {1, 2, "b"}, {0, 2, "c"}}), [](const W& h) {
                        auto at = [](double x) { return W{x, x, 1.0 - x}; };
                        return at(golden_min([&](double x) { return divergence(at(x), h); }, 0.0, 1.0));
                    }});
    toys.push_back({"fork", machine(3, {{0, 1, "a"}, {1, 2, "b"}, {1, 2, "c"}}), [](const W& h) {
                        auto at = [](double x) { return W{1.0, x, 1.0 - x}; };
                        return at(golden_min([&](double x) { return divergence(at(x), h); }, 0.0, 1.0));
                    }});
    toys.push_back({"join", machine(3, {{0, 1, "a"}, {0, 1, "b"}, {1, 2, "c"}}), [](const W& h) {
                        auto at = [](double x) { return W{x, 1.0 - x, 1.0}; };
                        return at(golden_min([&](double x) { return divergence(at(x), h); }, 0.0, 1.0));
                    }});
    return toys;
}

}  // namespace testing
