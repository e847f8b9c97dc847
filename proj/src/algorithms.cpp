#include "pathlearn/algorithms.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <map>
#include <queue>
#include <unordered_map>

namespace pathlearn::automata {

namespace {

template <class G>
std::vector<std::size_t> in_degrees(const G& g) {
    std::vector<std::size_t> indeg(g.num_states(), 0);
    for (const auto& a : g.arcs()) ++indeg[a.dst];
    return indeg;
}

// Kahn's algorithm; returns fewer than num_states entries on a cycle.
template <class G>
std::vector<StateId> kahn(const G& g) {
    auto indeg = in_degrees(g);
    std::vector<StateId> order;
    order.reserve(g.num_states());
    std::deque<StateId> ready;
    for (StateId q = 0; q < g.num_states(); ++q)
        if (indeg[q] == 0) ready.push_back(q);
    while (!ready.empty()) {
        StateId q = ready.front();
        ready.pop_front();
        order.push_back(q);
        for (auto i : g.outgoing(q))
            if (--indeg[g.arc(i).dst] == 0) ready.push_back(g.arc(i).dst);
    }
    return order;
}

template <class G>
std::vector<StateId> checked_topological(const G& g) {
    auto order = kahn(g);
    if (order.size() != g.num_states()) throw CyclicMachine("machine has a cycle");
    return order;
}

struct TrimPlan {
    // new id per old state, kNoState when dropped
    std::vector<StateId> remap;
    // old states in new order
    std::vector<StateId> order;
    // old arc indices in output order
    std::vector<std::size_t> arcs;
};

template <class G>
TrimPlan plan_trim(const G& g) {
    TrimPlan plan;
    const auto n = g.num_states();
    plan.remap.assign(n, kNoState);
    if (g.empty() || g.initial() == kNoState) return plan;

    std::vector<char> acc(n, 0), coacc(n, 0);
    {
        std::deque<StateId> queue{g.initial()};
        acc[g.initial()] = 1;
        while (!queue.empty()) {
            auto q = queue.front();
            queue.pop_front();
            for (auto i : g.outgoing(q)) {
                auto d = g.arc(i).dst;
                if (!acc[d]) {
                    acc[d] = 1;
                    queue.push_back(d);
                }
            }
        }
    }
    {
        std::vector<std::vector<StateId>> preds(n);
        for (const auto& a : g.arcs()) preds[a.dst].push_back(a.src);
        std::deque<StateId> queue;
        for (StateId q = 0; q < n; ++q)
            if (g.is_final(q)) {
                coacc[q] = 1;
                queue.push_back(q);
            }
        while (!queue.empty()) {
            auto q = queue.front();
            queue.pop_front();
            for (auto p : preds[q])
                if (!coacc[p]) {
                    coacc[p] = 1;
                    queue.push_back(p);
                }
        }
    }
    auto keep = [&](StateId q) { return acc[q] && coacc[q]; };
    if (!keep(g.initial())) return plan;

    // Breadth-first discovery over kept arcs.
    std::vector<std::size_t> discovery(n, SIZE_MAX);
    std::vector<StateId> bfs{g.initial()};
    discovery[g.initial()] = 0;
    for (std::size_t head = 0; head < bfs.size(); ++head) {
        for (auto i : g.outgoing(bfs[head])) {
            auto d = g.arc(i).dst;
            if (keep(d) && discovery[d] == SIZE_MAX) {
                discovery[d] = bfs.size();
                bfs.push_back(d);
            }
        }
    }

    // Refine to a topological order (ties by discovery) when acyclic.
    std::vector<std::size_t> indeg(n, 0);
    for (const auto& a : g.arcs())
        if (keep(a.src) && keep(a.dst)) ++indeg[a.dst];
    std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
    for (auto q : bfs)
        if (indeg[q] == 0) ready.push(discovery[q]);
    std::vector<StateId> topo;
    while (!ready.empty()) {
        auto q = bfs[ready.top()];
        ready.pop();
        topo.push_back(q);
        for (auto i : g.outgoing(q)) {
            auto d = g.arc(i).dst;
            if (keep(d) && --indeg[d] == 0) ready.push(discovery[d]);
        }
    }
    plan.order = topo.size() == bfs.size() ? std::move(topo) : std::move(bfs);
    for (StateId k = 0; k < plan.order.size(); ++k) plan.remap[plan.order[k]] = k;
    for (auto q : plan.order)
        for (auto i : g.outgoing(q))
            if (plan.remap[g.arc(i).dst] != kNoState) plan.arcs.push_back(i);
    return plan;
}

template <class G, class AddArc>
G apply_trim(const G& g, G result, AddArc add_arc) {
    auto plan = plan_trim(g);
    if (plan.order.empty()) return result;
    result.add_states(plan.order.size());
    result.set_initial(0);
    for (auto i : plan.arcs) {
        auto arc = g.arc(i);
        arc.src = plan.remap[arc.src];
        arc.dst = plan.remap[arc.dst];
        add_arc(result, std::move(arc));
    }
    return result;
}

}  // namespace

bool is_acyclic(const Automaton& a) { return kahn(a).size() == a.num_states(); }
bool is_acyclic(const WeightedAutomaton& w) { return kahn(w).size() == w.num_states(); }

std::vector<StateId> topological_order(const Automaton& a) { return checked_topological(a); }
std::vector<StateId> topological_order(const WeightedAutomaton& w) { return checked_topological(w); }

Automaton trim(const Automaton& a) {
    auto plan = plan_trim(a);
    Automaton result;
    if (plan.order.empty()) return result;
    result.add_states(plan.order.size());
    result.set_initial(0);
    for (StateId k = 0; k < plan.order.size(); ++k) result.set_final(k, a.is_final(plan.order[k]));
    for (auto i : plan.arcs) {
        const auto& t = a.arc(i);
        result.add_transition(plan.remap[t.src], plan.remap[t.dst], t.name);
    }
    return result;
}

Transducer trim(const Transducer& t) {
    auto plan = plan_trim(t);
    Transducer result;
    if (plan.order.empty()) return result;
    result.add_states(plan.order.size());
    result.set_initial(0);
    for (StateId k = 0; k < plan.order.size(); ++k) result.set_final(k, t.is_final(plan.order[k]));
    for (auto i : plan.arcs) {
        const auto& a = t.arc(i);
        result.add_transition(plan.remap[a.src], plan.remap[a.dst], a.input, a.output);
    }
    return result;
}

WeightedAutomaton trim(const WeightedAutomaton& w) {
    auto plan = plan_trim(w);
    WeightedAutomaton result(w.symbols());
    if (plan.order.empty()) return result;
    result.add_states(plan.order.size());
    result.set_initial(0);
    for (StateId k = 0; k < plan.order.size(); ++k)
        if (w.is_final(plan.order[k])) result.set_final_weight(k, w.final_weight(plan.order[k]));
    for (auto i : plan.arcs) {
        const auto& a = w.arc(i);
        result.add_transition(plan.remap[a.src], plan.remap[a.dst], a.label, a.weight);
    }
    return result;
}

std::vector<std::size_t> depths(const Automaton& a) {
    std::vector<std::size_t> depth(a.num_states(), 0);
    if (a.empty()) return depth;
    std::vector<char> reached(a.num_states(), 0);
    if (a.initial() != kNoState) reached[a.initial()] = 1;
    for (auto q : topological_order(a)) {
        if (!reached[q]) continue;
        for (auto i : a.outgoing(q)) {
            auto d = a.arc(i).dst;
            depth[d] = reached[d] ? std::max(depth[d], depth[q] + 1) : depth[q] + 1;
            reached[d] = 1;
        }
    }
    return depth;
}

std::size_t longest_path_length(const Automaton& a) {
    if (a.empty()) return 0;
    // Longest accepting path: depth restricted to co-accessible final states.
    const auto order = topological_order(a);
    std::vector<long long> best(a.num_states(), -1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        auto q = *it;
        long long b = a.is_final(q) ? 0 : -1;
        for (auto i : a.outgoing(q)) {
            auto r = best[a.arc(i).dst];
            if (r >= 0) b = std::max(b, r + 1);
        }
        best[q] = b;
    }
    return a.initial() == kNoState || best[a.initial()] < 0 ? 0 : static_cast<std::size_t>(best[a.initial()]);
}

double count_paths(const Automaton& a) {
    if (a.empty() || a.initial() == kNoState) return 0.0;
    const auto order = topological_order(a);
    std::vector<double> count(a.num_states(), 0.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        auto q = *it;
        double c = a.is_final(q) ? 1.0 : 0.0;
        for (auto i : a.outgoing(q)) c += count[a.arc(i).dst];
        count[q] = c;
    }
    return count[a.initial()];
}

// --- rational operations ------------------------------------------------------

Transducer compose(const Automaton& a, const Transducer& t) {
    Transducer result;
    if (a.empty() || t.empty() || a.initial() == kNoState || t.initial() == kNoState) return result;

    // Per transducer state: literal input -> arcs, plus ρ and ε arcs.
    struct Index {
        std::unordered_map<std::string, std::vector<std::size_t>> literal;
        std::vector<std::size_t> rho, eps;
    };
    std::vector<Index> index(t.num_states());
    for (std::size_t i = 0; i < t.num_arcs(); ++i) {
        const auto& arc = t.arc(i);
        if (is_epsilon(arc.input))
            index[arc.src].eps.push_back(i);
        else if (is_rho(arc.input))
            index[arc.src].rho.push_back(i);
        else
            index[arc.src].literal[arc.input].push_back(i);
    }

    std::map<std::pair<StateId, StateId>, StateId> ids;
    std::vector<std::pair<StateId, StateId>> pairs;
    auto state_of = [&](StateId qa, StateId qt) {
        auto [it, inserted] = ids.try_emplace({qa, qt}, static_cast<StateId>(pairs.size()));
        if (inserted) {
            pairs.emplace_back(qa, qt);
            result.add_state();
        }
        return it->second;
    };
    result.set_initial(state_of(a.initial(), t.initial()));
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        auto [qa, qt] = pairs[k];
        const auto src = static_cast<StateId>(k);
        if (a.is_final(qa) && t.is_final(qt)) result.set_final(src);
        for (auto i : index[qt].eps) {
            const auto& arc = t.arc(i);
            auto dst = state_of(qa, arc.dst);
            result.add_transition(src, dst, std::string(kEpsilon), arc.output);
        }
        for (auto j : a.outgoing(qa)) {
            const auto& ta = a.arc(j);
            auto lit = index[qt].literal.find(ta.name);
            const auto& matches = lit != index[qt].literal.end() ? lit->second : index[qt].rho;
            for (auto i : matches) {
                const auto& arc = t.arc(i);
                auto dst = state_of(ta.dst, arc.dst);
                result.add_transition(src, dst, ta.name, arc.output);
            }
        }
    }
    return trim(result);
}

Automaton project_output(const Transducer& t) {
    Automaton result;
    result.add_states(t.num_states());
    if (t.initial() != kNoState) result.set_initial(t.initial());
    for (StateId q = 0; q < t.num_states(); ++q) result.set_final(q, t.is_final(q));
    for (const auto& arc : t.arcs()) result.add_transition(arc.src, arc.dst, arc.output);
    return result;
}

Automaton epsilon_remove(const Automaton& a) {
    Automaton result;
    if (a.empty() || a.initial() == kNoState) return result;
    const auto order = topological_order(a);
    const auto n = a.num_states();

    // ε-closure of every state, computed in reverse topological order.
    std::vector<std::vector<StateId>> closure(n);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        auto q = *it;
        std::vector<char> seen(n, 0);
        std::vector<StateId> c{q};
        seen[q] = 1;
        for (auto i : a.outgoing(q)) {
            const auto& t = a.arc(i);
            if (!is_epsilon(t.name)) continue;
            for (auto p : closure[t.dst])
                if (!seen[p]) {
                    seen[p] = 1;
                    c.push_back(p);
                }
        }
        closure[q] = std::move(c);
    }

    result.add_states(n);
    result.set_initial(a.initial());
    for (StateId q = 0; q < n; ++q) {
        bool final = false;
        std::map<std::pair<StateId, std::string>, bool> added;
        for (auto p : closure[q]) {
            final = final || a.is_final(p);
            for (auto i : a.outgoing(p)) {
                const auto& t = a.arc(i);
                if (is_epsilon(t.name)) continue;
                if (added.try_emplace({t.dst, t.name}, true).second) result.add_transition(q, t.dst, t.name);
            }
        }
        result.set_final(q, final);
    }
    return trim(result);
}

WeightedAutomaton intersect(const WeightedAutomaton& first, const WeightedAutomaton& second) {
    WeightedAutomaton result(first.symbols());
    if (first.empty() || second.empty() || first.initial() == kNoState || second.initial() == kNoState)
        return result;

    // Translate first's labels into second's table once.
    const auto& s1 = *first.symbols();
    const auto& s2 = *second.symbols();
    std::vector<Label> translate(s1.size(), -1);
    for (std::size_t l = 0; l < s1.size(); ++l) translate[l] = s2.find(s1.name(static_cast<Label>(l)));

    struct Index {
        std::unordered_map<Label, std::vector<std::size_t>> literal;
        std::vector<std::size_t> rho;
    };
    std::vector<Index> index(second.num_states());
    for (std::size_t i = 0; i < second.num_arcs(); ++i) {
        const auto& arc = second.arc(i);
        if (arc.label == kEpsilonLabel) throw InvalidArgument("intersection does not support <eps> arcs");
        if (arc.label == kRhoLabel)
            index[arc.src].rho.push_back(i);
        else
            index[arc.src].literal[arc.label].push_back(i);
    }

    std::unordered_map<std::uint64_t, StateId> ids;
    std::vector<std::pair<StateId, StateId>> pairs;
    auto state_of = [&](StateId q1, StateId q2) {
        const auto key = (static_cast<std::uint64_t>(q1) << 32) | q2;
        auto [it, inserted] = ids.try_emplace(key, static_cast<StateId>(pairs.size()));
        if (inserted) {
            pairs.emplace_back(q1, q2);
            result.add_state();
        }
        return it->second;
    };
    result.set_initial(state_of(first.initial(), second.initial()));
    static const std::vector<std::size_t> none;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        auto [q1, q2] = pairs[k];
        const auto src = static_cast<StateId>(k);
        if (first.is_final(q1) && second.is_final(q2))
            result.set_final_weight(src, first.final_weight(q1) * second.final_weight(q2));
        for (auto j : first.outgoing(q1)) {
            const auto& a1 = first.arc(j);
            if (a1.label == kEpsilonLabel) throw InvalidArgument("intersection does not support <eps> arcs");
            const std::vector<std::size_t>* matches = &index[q2].rho;
            if (a1.label != kRhoLabel) {
                auto l2 = translate[static_cast<std::size_t>(a1.label)];
                auto lit = l2 < 0 ? index[q2].literal.end() : index[q2].literal.find(l2);
                if (lit != index[q2].literal.end()) matches = &lit->second;
            }
            for (auto i : *matches) {
                const auto& a2 = second.arc(i);
                auto dst = state_of(a1.dst, a2.dst);
                result.add_transition(src, dst, a1.label, a1.weight * a2.weight);
            }
        }
    }
    return trim(result);
}

// --- weighted algorithms ------------------------------------------------------

std::vector<double> shortest_distance(const WeightedAutomaton& w, Direction direction) {
    std::vector<double> d(w.num_states(), 0.0);
    if (w.empty()) return d;
    const auto order = topological_order(w);
    if (direction == Direction::forward) {
        if (w.initial() == kNoState) return d;
        d[w.initial()] = 1.0;
        for (auto q : order)
            for (auto i : w.outgoing(q)) {
                const auto& a = w.arc(i);
                d[a.dst] += d[q] * a.weight;
            }
    } else {
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            auto q = *it;
            double s = w.final_weight(q);
            for (auto i : w.outgoing(q)) {
                const auto& a = w.arc(i);
                s += a.weight * d[a.dst];
            }
            d[q] = s;
        }
    }
    return d;
}

WeightedAutomaton weight_push(const WeightedAutomaton& w) {
    if (w.empty() || w.initial() == kNoState) throw ZeroTotalMass("empty machine has no mass");
    const auto d = shortest_distance(w, Direction::backward);
    if (!(d[w.initial()] > 0.0)) throw ZeroTotalMass("total path weight is zero");
    if (!std::isfinite(d[w.initial()])) throw ZeroTotalMass("total path weight is not finite");
    WeightedAutomaton result(w.symbols());
    result.add_states(w.num_states());
    result.set_initial(w.initial());
    for (StateId q = 0; q < w.num_states(); ++q)
        if (w.is_final(q)) result.set_final_weight(q, d[q] > 0.0 ? w.final_weight(q) / d[q] : 0.0);
    for (const auto& a : w.arcs()) {
        const double weight = d[a.src] > 0.0 ? a.weight * d[a.dst] / d[a.src] : 0.0;
        result.add_transition(a.src, a.dst, a.label, weight);
    }
    result.mark_stochastic(true);
    return result;
}

bool is_stochastic(const WeightedAutomaton& w, double tolerance) {
    if (w.empty()) return false;
    const auto d = shortest_distance(w, Direction::backward);
    for (StateId q = 0; q < w.num_states(); ++q) {
        if (!(d[q] > 0.0)) continue;
        double s = w.final_weight(q);
        for (auto i : w.outgoing(q)) s += w.arc(i).weight;
        if (std::abs(s - 1.0) > tolerance) return false;
    }
    return true;
}

double path_weight(const WeightedAutomaton& w, const Path& path) {
    if (w.empty()) throw NotAccepting("empty machine");
    StateId q = w.initial();
    double weight = 1.0;
    for (auto i : path.arcs) {
        if (i >= w.num_arcs() || w.arc(i).src != q) throw NotAccepting("path does not chain in machine");
        weight *= w.arc(i).weight;
        q = w.arc(i).dst;
    }
    if (!w.is_final(q)) throw NotAccepting("path does not end in a final state");
    return weight * w.final_weight(q);
}

Path sample_path(const WeightedAutomaton& w, Rng& rng) {
    if (!w.stochastic()) throw NotStochastic("sampling requires a pushed machine");
    Path path;
    StateId q = w.initial();
    for (;;) {
        const double u = rng.uniform();
        double acc = w.final_weight(q);
        if (u < acc) return path;
        std::size_t chosen = SIZE_MAX, last_positive = SIZE_MAX;
        for (auto i : w.outgoing(q)) {
            const double weight = w.arc(i).weight;
            if (weight <= 0.0) continue;
            last_positive = i;
            acc += weight;
            if (u < acc) {
                chosen = i;
                break;
            }
        }
        // Rounding can leave u just above the accumulated mass.
        if (chosen == SIZE_MAX) chosen = last_positive;
        if (chosen == SIZE_MAX) return path;
        path.arcs.push_back(chosen);
        q = w.arc(chosen).dst;
    }
}

std::vector<double> edge_flow(const WeightedAutomaton& w) {
    if (!w.stochastic()) throw NotStochastic("edge flow requires a pushed machine");
    const auto alpha = shortest_distance(w, Direction::forward);
    std::vector<double> flow(w.num_arcs());
    for (std::size_t i = 0; i < w.num_arcs(); ++i) flow[i] = alpha[w.arc(i).src] * w.arc(i).weight;
    return flow;
}

// --- enumeration and search ---------------------------------------------------

namespace {

template <class G, class NameOf>
std::vector<Path> enumerate_impl(const G& g, std::size_t cap, NameOf name_of) {
    std::vector<Path> result;
    if (g.empty() || g.initial() == kNoState) return result;
    topological_order(g);  // rejects cycles

    // Outgoing arcs of each state sorted by name.
    std::vector<std::vector<std::size_t>> sorted(g.num_states());
    for (StateId q = 0; q < g.num_states(); ++q) {
        auto out = g.outgoing(q);
        sorted[q].assign(out.begin(), out.end());
        std::stable_sort(sorted[q].begin(), sorted[q].end(),
                         [&](std::size_t x, std::size_t y) { return name_of(x) < name_of(y); });
    }
    Path current;
    std::function<void(StateId)> visit = [&](StateId q) {
        if (g.is_final(q)) {
            if (result.size() >= cap) throw TooManyPaths("more than " + std::to_string(cap) + " paths");
            result.push_back(current);
        }
        for (auto i : sorted[q]) {
            current.arcs.push_back(i);
            visit(g.arc(i).dst);
            current.arcs.pop_back();
        }
    };
    visit(g.initial());
    return result;
}

}  // namespace

std::vector<Path> enumerate_paths(const Automaton& a, std::size_t cap) {
    return enumerate_impl(a, cap, [&](std::size_t i) -> const std::string& { return a.name(i); });
}

std::vector<Path> enumerate_paths(const WeightedAutomaton& w, std::size_t cap) {
    return enumerate_impl(w, cap, [&](std::size_t i) -> const std::string& { return w.label_name(i); });
}

Path best_path(const Automaton& a, const std::vector<double>& edge_gain) {
    if (edge_gain.size() != a.num_arcs()) throw InvalidArgument("one gain per transition expected");
    Path path;
    if (a.empty() || a.initial() == kNoState) return path;
    const auto order = topological_order(a);
    constexpr double kNone = -std::numeric_limits<double>::infinity();
    constexpr std::size_t kStop = SIZE_MAX;
    std::vector<double> value(a.num_states(), kNone);
    std::vector<std::size_t> choice(a.num_states(), kStop);

    auto tied = [](double x, double y) { return std::abs(x - y) <= 1e-9 * std::max({1.0, std::abs(x), std::abs(y)}); };
    // Lexicographic comparison of two suffixes given by a first arc (or stop).
    auto suffix_less = [&](std::size_t x, std::size_t y) {
        while (true) {
            if (x == y) return false;
            if (x == kStop) return true;
            if (y == kStop) return false;
            if (a.name(x) != a.name(y)) return a.name(x) < a.name(y);
            x = choice[a.arc(x).dst];
            y = choice[a.arc(y).dst];
        }
    };

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        auto q = *it;
        double best = a.is_final(q) ? 0.0 : kNone;
        std::size_t pick = kStop;
        for (auto i : a.outgoing(q)) {
            const double tail = value[a.arc(i).dst];
            if (tail == kNone) continue;
            const double v = edge_gain[i] + tail;
            if (best == kNone || (!tied(v, best) && v > best) || (tied(v, best) && suffix_less(i, pick))) {
                best = v;
                pick = i;
            }
        }
        value[q] = best;
        choice[q] = pick;
    }
    if (value[a.initial()] == kNone) throw NotAccepting("automaton accepts no path");
    for (auto i = choice[a.initial()]; i != kStop; i = choice[a.arc(i).dst]) path.arcs.push_back(i);
    return path;
}

Equalized equalize_path_lengths(const Automaton& a, const std::string& marker) {
    Equalized out;
    auto& m = out.machine;
    if (a.empty() || a.initial() == kNoState) return out;
    const auto depth = depths(a);
    const std::size_t K = longest_path_length(a);
    const auto n = a.num_states();
    m.add_states(n);
    m.set_initial(a.initial());

    // Sink at depth K: reuse an existing final state there, else add one.
    StateId sink = kNoState;
    for (StateId q = 0; q < n; ++q)
        if (a.is_final(q) && depth[q] == K) {
            sink = q;
            break;
        }
    auto need_sink = [&]() {
        if (sink == kNoState) {
            sink = m.add_state();
            m.set_final(sink);
            ++out.added_states;
        }
        return sink;
    };

    // Each state owns one delay chain: chain[q][j] is the state at layer
    // depth[q] + 1 + j reached from q through marked transitions.
    std::vector<std::vector<StateId>> chain(n);
    auto delayed = [&](StateId q, std::size_t layer) {
        // state at `layer` (> depth[q]) on q's chain; layer == depth[q] is q
        if (layer == depth[q]) return q;
        auto& c = chain[q];
        while (depth[q] + c.size() < layer) {
            StateId prev = c.empty() ? q : c.back();
            StateId next = m.add_state();
            ++out.added_states;
            out.origin.push_back(static_cast<std::size_t>(-1));
            m.add_transition(prev, next, marker);
            c.push_back(next);
        }
        return c[layer - depth[q] - 1];
    };

    for (StateId q = 0; q < n; ++q) {
        for (auto i : a.outgoing(q)) {
            const auto& t = a.arc(i);
            const auto from = delayed(q, depth[t.dst] - 1);
            m.add_transition(from, t.dst, t.name);
            out.origin.push_back(i);
        }
        if (a.is_final(q) && depth[q] < K) {
            m.set_final(q, false);
            const auto from = delayed(q, K - 1);
            m.add_transition(from, need_sink(), marker);
            out.origin.push_back(static_cast<std::size_t>(-1));
        } else if (a.is_final(q)) {
            m.set_final(q);
        }
    }
    return out;
}

}  // namespace pathlearn::automata
