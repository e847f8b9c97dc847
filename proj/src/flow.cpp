#include "pathlearn/flow.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "pathlearn/algorithms.hpp"

namespace pathlearn::flow {

using automata::StateId;

namespace {

std::vector<std::vector<std::size_t>> incoming(const Automaton& a) {
    std::vector<std::vector<std::size_t>> in(a.num_states());
    for (std::size_t i = 0; i < a.num_arcs(); ++i) in[a.arc(i).dst].push_back(i);
    return in;
}

void check_size(const Automaton& a, const std::vector<double>& w) {
    if (w.size() != a.num_arcs()) throw InvalidArgument("one weight per transition expected");
}

}  // namespace

double polytope_violation(const Automaton& a, const std::vector<double>& w) {
    check_size(a, w);
    if (a.empty()) return 0.0;
    const auto in = incoming(a);
    double worst = 0.0;
    for (double x : w) worst = std::max(worst, -x);
    double out0 = 0.0;
    for (auto i : a.outgoing(a.initial())) out0 += w[i];
    if (!(a.is_final(a.initial()) && a.num_arcs() == 0)) worst = std::max(worst, std::abs(out0 - 1.0));
    for (StateId q = 0; q < a.num_states(); ++q) {
        if (q == a.initial() || a.is_final(q)) continue;
        double s = 0.0;
        for (auto i : in[q]) s += w[i];
        for (auto i : a.outgoing(q)) s -= w[i];
        worst = std::max(worst, std::abs(s));
    }
    return worst;
}

std::vector<double> uniform_flow(const Automaton& a) {
    std::vector<double> w(a.num_arcs(), 0.0);
    if (a.empty()) return w;
    std::vector<double> inflow(a.num_states(), 0.0);
    inflow[a.initial()] = 1.0;
    for (auto q : automata::topological_order(a)) {
        const auto out = a.outgoing(q);
        if (out.empty()) continue;
        const double share = inflow[q] / static_cast<double>(out.size());
        for (auto i : out) {
            w[i] = share;
            inflow[a.arc(i).dst] += share;
        }
    }
    return w;
}

std::vector<double> re_project(const Automaton& a, std::vector<double> w, const ProjectionOptions& options) {
    check_size(a, w);
    if (a.empty() || a.num_arcs() == 0) return w;
    for (double x : w)
        if (!(x >= 0.0) || !std::isfinite(x)) throw InvalidArgument("projection needs finite non-negative weights");
    for (auto q : a.finals())
        if (!a.outgoing(q).empty() && q != a.initial())
            throw InvalidArgument("projection needs final states without outgoing transitions");

    const auto in = incoming(a);
    std::vector<StateId> inner;
    for (auto q : automata::topological_order(a))
        if (q != a.initial() && !a.is_final(q)) inner.push_back(q);

    auto scale = [&](auto arcs, double factor) {
        for (auto i : arcs) w[i] *= factor;
    };
    for (std::size_t sweep = 0; sweep < options.max_sweeps; ++sweep) {
        double out0 = 0.0;
        for (auto i : a.outgoing(a.initial())) out0 += w[i];
        if (!(out0 > 0.0)) throw ZeroFlow("no weight leaves the initial state");
        scale(a.outgoing(a.initial()), 1.0 / out0);
        for (auto q : inner) {
            double I = 0.0, O = 0.0;
            for (auto i : in[q]) I += w[i];
            for (auto i : a.outgoing(q)) O += w[i];
            if (I == O) continue;
            if (I == 0.0 || O == 0.0) {
                scale(in[q], 0.0);
                scale(a.outgoing(q), 0.0);
                continue;
            }
            const double ratio = std::sqrt(O / I);
            scale(std::span<const std::size_t>(in[q]), ratio);
            scale(a.outgoing(q), 1.0 / ratio);
        }
        if (polytope_violation(a, w) < options.tolerance) return w;
    }
    throw NoConvergence("relative entropy projection did not converge");
}

std::vector<Component> flow_decompose(const Automaton& a, const std::vector<double>& w, double tolerance) {
    check_size(a, w);
    if (a.empty()) throw NotInPolytope("empty machine");
    if (polytope_violation(a, w) > tolerance) throw NotInPolytope("weights are not a unit flow");
    std::vector<Component> parts;
    if (a.num_arcs() == 0) {
        parts.push_back({Path{}, 1.0});
        return parts;
    }

    constexpr double kZero = 1e-13;
    std::vector<double> residual = w;
    std::vector<std::vector<std::size_t>> by_weight(a.num_states());
    for (std::size_t round = 0; round <= a.num_arcs(); ++round) {
        double left = 0.0;
        for (auto i : a.outgoing(a.initial())) left += std::max(0.0, residual[i]);
        if (left <= kZero) break;

        // Depth-first search over positive transitions, heaviest first.
        std::vector<char> dead(a.num_states(), 0);
        Path path;
        std::function<bool(StateId)> find = [&](StateId q) {
            auto out = a.outgoing(q);
            if (out.empty()) return a.is_final(q);
            std::vector<std::size_t> order(out.begin(), out.end());
            std::stable_sort(order.begin(), order.end(),
                             [&](auto x, auto y) { return residual[x] > residual[y]; });
            for (auto i : order) {
                if (residual[i] <= kZero) break;
                const auto d = a.arc(i).dst;
                if (dead[d]) continue;
                path.arcs.push_back(i);
                if (find(d)) return true;
                path.arcs.pop_back();
            }
            dead[q] = 1;
            return false;
        };
        if (!find(a.initial())) break;
        std::size_t argmin = path.arcs.front();
        for (auto i : path.arcs)
            if (residual[i] < residual[argmin]) argmin = i;
        const double c = residual[argmin];
        for (auto i : path.arcs) residual[i] -= c;
        residual[argmin] = 0.0;
        parts.push_back({std::move(path), c});
    }
    return parts;
}

std::vector<Path> covering_paths(const Automaton& a) {
    std::vector<Path> cover;
    if (a.empty()) return cover;
    if (a.num_arcs() == 0) {
        if (a.is_final(a.initial())) cover.push_back(Path{});
        return cover;
    }
    std::vector<char> used(a.num_arcs(), 0);
    std::vector<std::vector<std::size_t>> sorted(a.num_states());
    for (StateId q = 0; q < a.num_states(); ++q) {
        auto out = a.outgoing(q);
        sorted[q].assign(out.begin(), out.end());
        std::stable_sort(sorted[q].begin(), sorted[q].end(), [&](auto x, auto y) { return a.name(x) < a.name(y); });
    }
    auto remaining = [&] { return std::count(used.begin(), used.end(), 0); };

    // Peel paths made only of unused transitions.
    while (remaining() > 0) {
        std::vector<char> dead(a.num_states(), 0);
        Path path;
        std::function<bool(StateId)> find = [&](StateId q) {
            for (auto i : sorted[q]) {
                if (used[i] || dead[a.arc(i).dst]) continue;
                path.arcs.push_back(i);
                if (find(a.arc(i).dst)) return true;
                path.arcs.pop_back();
            }
            if (a.is_final(q)) return true;
            dead[q] = 1;
            return false;
        };
        if (!find(a.initial()) || path.arcs.empty()) break;
        for (auto i : path.arcs) used[i] = 1;
        cover.push_back(std::move(path));
    }

    // Cover what is left, one path per remaining transition, each path
    // picking up as many unused transitions as possible.
    if (remaining() > 0) {
        const auto order = automata::topological_order(a);
        std::vector<std::size_t> arcs_by_name(a.num_arcs());
        for (std::size_t i = 0; i < arcs_by_name.size(); ++i) arcs_by_name[i] = i;
        std::stable_sort(arcs_by_name.begin(), arcs_by_name.end(),
                         [&](auto x, auto y) { return a.name(x) < a.name(y); });
        constexpr long kNone = std::numeric_limits<long>::min();
        for (auto e : arcs_by_name) {
            if (used[e]) continue;
            std::vector<long> fwd(a.num_states(), kNone), bwd(a.num_states(), kNone);
            std::vector<std::size_t> fwd_arc(a.num_states(), SIZE_MAX), bwd_arc(a.num_states(), SIZE_MAX);
            fwd[a.initial()] = 0;
            for (auto q : order) {
                if (fwd[q] == kNone) continue;
                for (auto i : sorted[q]) {
                    const long v = fwd[q] + (used[i] ? 0 : 1);
                    if (v > fwd[a.arc(i).dst]) {
                        fwd[a.arc(i).dst] = v;
                        fwd_arc[a.arc(i).dst] = i;
                    }
                }
            }
            for (auto it = order.rbegin(); it != order.rend(); ++it) {
                const auto q = *it;
                if (a.is_final(q)) bwd[q] = 0;
                for (auto i : sorted[q]) {
                    const auto d = a.arc(i).dst;
                    if (bwd[d] == kNone) continue;
                    const long v = bwd[d] + (used[i] ? 0 : 1);
                    if (v > bwd[q]) {
                        bwd[q] = v;
                        bwd_arc[q] = i;
                    }
                }
            }
            Path path;
            for (StateId q = a.arc(e).src; q != a.initial(); q = a.arc(fwd_arc[q]).src) path.arcs.push_back(fwd_arc[q]);
            std::reverse(path.arcs.begin(), path.arcs.end());
            path.arcs.push_back(e);
            for (StateId q = a.arc(e).dst; bwd_arc[q] != SIZE_MAX; q = a.arc(bwd_arc[q]).dst) {
                if (a.is_final(q) && bwd[q] == 0) break;
                path.arcs.push_back(bwd_arc[q]);
            }
            for (auto i : path.arcs) used[i] = 1;
            cover.push_back(std::move(path));
        }
    }
    return cover;
}

Eigen::MatrixXd second_moment(const WeightedAutomaton& w) {
    const auto m = w.num_arcs();
    Eigen::MatrixXd result = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    if (w.empty() || m == 0) return result;
    const auto alpha = automata::shortest_distance(w, automata::Direction::forward);
    const auto beta = automata::shortest_distance(w, automata::Direction::backward);
    const double z = beta[w.initial()];
    if (!(z > 0.0)) throw ZeroTotalMass("machine has no path weight");
    const auto order = automata::topological_order(w);
    const auto n = w.num_states();

    // reach[u][v]: total weight of paths from u to v.
    std::vector<std::vector<double>> reach(n, std::vector<double>(n, 0.0));
    std::vector<std::size_t> position(n);
    for (std::size_t k = 0; k < order.size(); ++k) position[order[k]] = k;
    for (StateId u = 0; u < n; ++u) {
        auto& r = reach[u];
        r[u] = 1.0;
        for (std::size_t k = position[u]; k < order.size(); ++k) {
            const auto q = order[k];
            if (r[q] == 0.0) continue;
            for (auto i : w.outgoing(q)) r[w.arc(i).dst] += r[q] * w.arc(i).weight;
        }
    }
    for (std::size_t e = 0; e < m; ++e) {
        const auto& x = w.arc(e);
        const auto ei = static_cast<Eigen::Index>(e);
        result(ei, ei) = alpha[x.src] * x.weight * beta[x.dst] / z;
        for (std::size_t f = 0; f < m; ++f) {
            if (f == e) continue;
            const auto& y = w.arc(f);
            const double between = reach[x.dst][y.src];
            if (between == 0.0) continue;
            const double v = alpha[x.src] * x.weight * between * y.weight * beta[y.dst] / z;
            const auto fi = static_cast<Eigen::Index>(f);
            result(ei, fi) = v;
            result(fi, ei) = v;
        }
    }
    return result;
}

Cooccurrence pseudo_inverse(const Eigen::MatrixXd& m) {
    Cooccurrence c;
    c.matrix = m;
    c.pinv = Eigen::MatrixXd::Zero(m.rows(), m.cols());
    if (m.size() == 0) return c;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
    const auto& values = eig.eigenvalues();
    const auto& vectors = eig.eigenvectors();
    const double top = values.cwiseAbs().maxCoeff();
    const double cutoff = 1e-10 * top;
    c.lambda_min = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        if (values(i) <= cutoff) continue;
        ++c.rank;
        c.lambda_min = std::min(c.lambda_min, values(i));
        c.pinv.noalias() += (1.0 / values(i)) * vectors.col(i) * vectors.col(i).transpose();
    }
    if (c.rank == 0) c.lambda_min = 0.0;
    return c;
}

Cooccurrence cooccurrence(const Automaton& a) { return pseudo_inverse(second_moment(automata::to_weighted(a))); }

}  // namespace pathlearn::flow
