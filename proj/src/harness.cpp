#include "pathlearn/harness.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <Eigen/Dense>

#include "pathlearn/algorithms.hpp"
#include "pathlearn/errors.hpp"
#include "pathlearn/flow.hpp"
#include "pathlearn/patterns_io.hpp"
#include "pathlearn/text_format.hpp"

namespace pathlearn::harness {

using automata::format_double;
using automata::StateId;
using learners::Choice;
using learners::ContextLearner;
using learners::Feedback;

std::string_view to_string(Adversary a) {
    switch (a) {
        case Adversary::iid: return "iid-categorical";
        case Adversary::drifting: return "drifting";
        case Adversary::adaptive: return "adaptive-worst-edge";
    }
    return "?";
}

Adversary parse_adversary(std::string_view s) {
    if (s == "iid" || s == "iid-categorical") return Adversary::iid;
    if (s == "drifting") return Adversary::drifting;
    if (s == "adaptive" || s == "adaptive-worst-edge") return Adversary::adaptive;
    throw ConfigError("unknown adversary '" + std::string(s) + "'");
}

void EnsembleSpec::validate() const {
    if (experts < 1) throw ConfigError("experts must be >= 1");
    if (positions < 1) throw ConfigError("positions must be >= 1");
    if (order < 1 || order > positions) throw ConfigError("order must lie in [1, positions]");
    if (alphabet.empty()) throw ConfigError("alphabet must not be empty");
    auto sorted = alphabet;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) throw ConfigError("alphabet has duplicates");
    for (const auto& s : alphabet)
        if (s.empty()) throw ConfigError("alphabet symbols must not be empty");
    if (!(noise >= 0.0 && noise <= 1.0)) throw ConfigError("noise must lie in [0, 1]");
    if (!(concentration >= 0.0 && concentration <= 1.0)) throw ConfigError("concentration must lie in [0, 1]");
    if (!(discount >= 0.0 && discount <= 1.0)) throw ConfigError("discount must lie in [0, 1]");
    if (adversary == Adversary::adaptive && alphabet.size() < 2)
        throw ConfigError("the adaptive adversary needs at least two symbols");
}

PatternSet EnsembleSpec::patterns() const {
    auto ps = contextual::all_ngrams(alphabet, order);
    ps.discount = discount;
    ps.max_gap = max_gap;
    return ps;
}

namespace {

std::string arc_name(std::size_t expert, std::size_t position) {
    return "h" + std::to_string(expert + 1) + "_" + std::to_string(position + 1);
}

std::string join(const Sequence& names) {
    std::string s;
    for (const auto& n : names) {
        if (!s.empty()) s += ' ';
        s += n;
    }
    return s;
}

}  // namespace

Automaton build_ensemble_automaton(const EnsembleSpec& spec) {
    spec.validate();
    Automaton a;
    a.add_states(spec.positions + 1);
    a.set_initial(0);
    for (std::size_t i = 0; i < spec.positions; ++i)
        for (std::size_t j = 0; j < spec.experts; ++j)
            a.add_transition(static_cast<StateId>(i), static_cast<StateId>(i + 1), arc_name(j, i));
    a.set_final(static_cast<StateId>(spec.positions));
    return a;
}

// --- adversary ----------------------------------------------------------------

AdversaryModel::AdversaryModel(const EnsembleSpec& spec, const Automaton& a, Rng rng)
    : spec_(spec), a_(a), rng_(rng.child("rounds")) {
    spec_.validate();
    Rng setup = rng.child("instance");
    const auto sigma = spec_.alphabet.size();
    dist_.assign(spec_.positions, std::vector<std::vector<double>>(spec_.experts));
    for (auto& layer : dist_)
        for (auto& d : layer) {
            const auto preferred = setup.below(sigma);
            const double rest = sigma > 1 ? (1.0 - spec_.concentration) / static_cast<double>(sigma - 1) : 0.0;
            d.assign(sigma, rest);
            d[preferred] = sigma > 1 ? spec_.concentration : 1.0;
        }
    hidden_.resize(spec_.positions);
    for (auto& h : hidden_) h = setup.below(spec_.experts);
    arc_.assign(spec_.positions, std::vector<std::size_t>(spec_.experts, SIZE_MAX));
    for (std::size_t i = 0; i < a_.num_arcs(); ++i) {
        const auto& name = a_.name(i);
        const auto us = name.find('_');
        const auto j = std::stoul(name.substr(1, us - 1)) - 1;
        const auto p = std::stoul(name.substr(us + 1)) - 1;
        arc_.at(p).at(j) = i;
    }
}

std::size_t AdversaryModel::rotate(std::size_t t, std::size_t j) const {
    if (spec_.adversary == Adversary::drifting && 2 * t >= spec_.horizon) return (j + 1) % spec_.experts;
    return j;
}

const std::vector<double>& AdversaryModel::distribution(std::size_t t, std::size_t j, std::size_t i) const {
    return dist_.at(i).at(rotate(t, j));
}

RoundData AdversaryModel::step(std::size_t t, const std::vector<Path>& played) {
    const auto sigma = spec_.alphabet.size();
    auto draw = [&](const std::vector<double>& d) {
        const double u = rng_.uniform();
        double acc = 0.0;
        for (std::size_t s = 0; s < d.size(); ++s) {
            acc += d[s];
            if (u < acc) return s;
        }
        return d.size() - 1;
    };
    RoundData r;
    std::vector<std::vector<std::size_t>> symbol(spec_.positions, std::vector<std::size_t>(spec_.experts));
    for (std::size_t i = 0; i < spec_.positions; ++i)
        for (std::size_t j = 0; j < spec_.experts; ++j) {
            symbol[i][j] = draw(distribution(t, j, i));
            r.out[arc_name(j, i)] = spec_.alphabet[symbol[i][j]];
        }
    std::vector<std::size_t> target(spec_.positions);
    for (std::size_t i = 0; i < spec_.positions; ++i) {
        // After a drift the hidden role moves along with the distributions.
        std::size_t h = hidden_[i];
        for (std::size_t j = 0; j < spec_.experts; ++j)
            if (rotate(t, j) == hidden_[i]) h = j;
        target[i] = symbol[i][h];
        if (rng_.bernoulli(spec_.noise)) target[i] = rng_.below(sigma);
        r.y.push_back(spec_.alphabet[target[i]]);
    }
    if (spec_.adversary == Adversary::adaptive && !played.empty()) {
        std::map<Path, std::size_t> counts;
        for (const auto& p : played) ++counts[p];
        const Path* modal = nullptr;
        std::size_t best = 0;
        for (const auto& [p, c] : counts)
            if (c > best) {
                best = c;
                modal = &p;
            }
        for (auto e : modal->arcs) {
            const auto& name = a_.name(e);
            const auto p = std::stoul(name.substr(name.find('_') + 1)) - 1;
            r.out[name] = spec_.alphabet[(target[p] + 1) % sigma];
        }
    }
    return r;
}

// --- comparator and bounds ----------------------------------------------------

Comparator best_fixed_path(const std::vector<RoundData>& history, const ContextAutomaton& ca) {
    std::vector<double> total(ca.num_arcs(), 0.0);
    for (const auto& r : history) {
        const auto g = contextual::assign_edge_gains(ca, r.out, r.y);
        for (std::size_t i = 0; i < g.size(); ++i) total[i] += g[i];
    }
    Comparator c;
    c.context_path = automata::best_path(ca.machine, total);
    c.path = contextual::representative_path(ca, c.context_path);
    for (auto i : c.context_path.arcs) c.gain += total[i];
    return c;
}

double Bounds::for_algorithm(Algorithm a) const {
    switch (a) {
        case Algorithm::cdch: return cdch;
        case Algorithm::cdsb: return cdsb;
        case Algorithm::cdcb: return cdcb;
        case Algorithm::exp3ag: return exp3ag;
    }
    return 0.0;
}

Bounds evaluate_bounds(const BoundInputs& in) {
    Bounds b;
    const double lkm = std::log(in.K * in.M);
    b.cdch = std::sqrt(2.0 * in.T * in.B * in.B * in.K * in.K * lkm) + in.B * in.K * lkm;
    const double ln_n = std::log(in.N);
    b.cdsb = 2.0 * in.B * std::sqrt(in.T * in.K) *
             (std::sqrt(4.0 * in.K * in.C * ln_n) + std::sqrt(in.M * std::log(in.M / in.delta)));
    b.cdcb = in.lambda_min > 0.0
                 ? 2.0 * in.B * std::sqrt((2.0 * in.K / (in.M * in.lambda_min) + 1.0) * in.T * in.M * ln_n)
                 : std::numeric_limits<double>::infinity();
    b.exp3ag = in.U * std::sqrt(2.0 * in.T * in.N * ln_n);
    return b;
}

Metrics compute_metrics(const std::vector<TraceRow>& rows) {
    Metrics m;
    m.T = rows.size();
    if (rows.empty()) return m;
    double realized = 0.0, expected = 0.0, best = 0.0, log_regret = 0.0;
    m.alpha = std::numeric_limits<double>::infinity();
    for (const auto& r : rows) {
        realized += r.realized_gain;
        expected += r.expected_gain;
        best += r.best_path_gain;
        m.alpha = std::min(m.alpha, r.realized_gain);
        log_regret += std::log(r.best_path_gain) - std::log(r.realized_gain);
    }
    m.regret_expected = best - expected;
    m.regret_realized = best - realized;
    m.regret_log = m.alpha > 0.0 ? log_regret : std::numeric_limits<double>::infinity();
    return m;
}

// --- runs ---------------------------------------------------------------------

Feedback make_feedback(Regime regime, const Choice& played, const std::vector<double>& edge_gains, double path_gain) {
    Feedback fb;
    fb.regime = regime;
    switch (regime) {
        case Regime::full: fb.edge_gains = edge_gains; break;
        case Regime::semi:
            for (auto i : played.context_path.arcs) fb.path_gains.push_back(edge_gains.at(i));
            break;
        case Regime::bandit: fb.gain = path_gain; break;
    }
    return fb;
}

namespace {

struct Setup {
    EnsembleSpec spec;
    Automaton a;
    PatternSet ps;
    std::shared_ptr<const ContextAutomaton> base;
    learners::LearnerConfig config;
    std::unique_ptr<learners::Learner> learner;
    const ContextAutomaton* context = nullptr;  // the machine the learner plays on
    Rng rng;
    std::unique_ptr<AdversaryModel> adversary;
    std::vector<Path> paths;         // all A paths (EXP3-AG expected gains)
    std::vector<Sequence> names;     // their names
    std::vector<Path> mapped;        // their images in base
};

Setup prepare(const RunOptions& o) {
    o.spec.validate();
    if (o.regime != learners::regime_of(o.algorithm))
        throw RegimeMismatch(std::string(learners::to_string(o.algorithm)) + " runs in the " +
                             std::string(learners::to_string(learners::regime_of(o.algorithm))) + " regime, not " +
                             std::string(learners::to_string(o.regime)));
    Setup s{o.spec, build_ensemble_automaton(o.spec), o.spec.patterns(), nullptr, o.learner, nullptr, nullptr,
            Rng(o.spec.seed), nullptr, {}, {}, {}};
    s.base = std::make_shared<const ContextAutomaton>(contextual::build_context_automaton(s.a, s.ps));
    if (!s.config.gain_cap) s.config.gain_cap = contextual::max_theta_component(s.ps, o.spec.positions);
    if (!s.config.horizon) s.config.horizon = o.spec.horizon;
    s.config.seed = o.spec.seed;
    s.learner = learners::make_learner(o.algorithm, s.base, s.config);
    auto* cl = dynamic_cast<const ContextLearner*>(s.learner.get());
    s.context = cl ? &cl->context() : s.base.get();
    Rng master(o.spec.seed);
    s.rng = master.child("learner");
    s.adversary = std::make_unique<AdversaryModel>(o.spec, s.a, master.child("adversary"));
    if (o.algorithm == Algorithm::exp3ag && automata::count_paths(s.a) <= static_cast<double>(o.enumeration_cap)) {
        s.paths = automata::enumerate_paths(s.a);
        for (const auto& p : s.paths) {
            s.names.push_back(automata::path_names(s.a, p));
            s.mapped.push_back(contextual::map_path(*s.base, p));
        }
    }
    return s;
}

std::vector<double> gains_on(const ContextAutomaton& ca, const RoundData& r) {
    return contextual::assign_edge_gains(ca, r.out, r.y);
}

}  // namespace

RunResult run_experiment(const RunOptions& options) {
    auto s = prepare(options);
    RunResult result;
    result.tuning = s.learner->tuning();

    auto& in = result.sizes;
    in.K = static_cast<double>(automata::longest_path_length(s.base->machine));
    in.M = static_cast<double>(s.base->num_arcs());
    in.N = automata::count_paths(s.a);
    in.C = static_cast<double>(flow::covering_paths(s.base->machine).size());
    in.lambda_min = flow::cooccurrence(s.base->machine).lambda_min;
    in.B = *s.config.gain_cap;
    in.U = result.tuning.U > 0.0 ? result.tuning.U : in.K * in.B;
    in.delta = s.config.delta;

    const auto T = options.spec.horizon;
    std::vector<double> cumulative(s.base->num_arcs(), 0.0);
    std::vector<std::vector<double>> base_gains;
    std::vector<Path> played;
    double cum_expected = 0.0;
    auto* context_learner = dynamic_cast<const ContextLearner*>(s.learner.get());
    auto* exp3 = dynamic_cast<const learners::Exp3Ag*>(s.learner.get());
    for (std::size_t t = 0; t < T; ++t) {
        const auto round = s.adversary->step(t, played);
        auto g_base = gains_on(*s.base, round);
        const auto g_learner = s.context == s.base.get() ? g_base : gains_on(*s.context, round);

        double expected = 0.0;
        bool have_expected = true;
        if (context_learner) {
            const auto q = context_learner->marginals();
            for (std::size_t i = 0; i < q.size(); ++i) expected += q[i] * g_learner[i];
        } else if (exp3 && !s.paths.empty()) {
            for (std::size_t k = 0; k < s.paths.size(); ++k) {
                double g = 0.0;
                for (auto i : s.mapped[k].arcs) g += g_base[i];
                expected += exp3->path_probability(s.names[k]) * g;
            }
        } else {
            have_expected = false;
        }

        const auto choice = s.learner->predict(s.rng);
        const double realized = contextual::path_gain_oracle(s.a, choice.path, round.out, round.y, s.ps);
        if (!have_expected) expected = realized;
        s.learner->update(choice, make_feedback(options.regime, choice, g_learner, realized));
        played.push_back(choice.path);

        for (std::size_t i = 0; i < cumulative.size(); ++i) cumulative[i] += g_base[i];
        const auto best = automata::best_path(s.base->machine, cumulative);
        double comparator = 0.0;
        for (auto i : best.arcs) comparator += cumulative[i];
        cum_expected += expected;

        TraceRow row;
        row.t = t + 1;
        row.chosen_path = join(automata::path_names(s.a, choice.path));
        row.realized_gain = realized;
        row.expected_gain = expected;
        row.comparator_gain = comparator;
        row.regret = comparator - cum_expected;
        auto at_t = in;
        at_t.T = static_cast<double>(t + 1);
        row.bound = evaluate_bounds(at_t).for_algorithm(options.algorithm);
        result.rows.push_back(std::move(row));
        base_gains.push_back(std::move(g_base));
    }

    result.comparator.context_path = automata::best_path(s.base->machine, cumulative);
    result.comparator.path = contextual::representative_path(*s.base, result.comparator.context_path);
    for (auto i : result.comparator.context_path.arcs) result.comparator.gain += cumulative[i];
    for (std::size_t t = 0; t < T; ++t) {
        double g = 0.0;
        for (auto i : result.comparator.context_path.arcs) g += base_gains[t][i];
        result.rows[t].best_path_gain = g;
    }
    in.T = static_cast<double>(T);
    result.bounds = evaluate_bounds(in);
    result.metrics = compute_metrics(result.rows);
    result.notes = {
        "path decomposition subtracts the smallest weight on each extracted path",
        "relative entropy projection: cyclic scaling over the flow constraints, tolerance 1e-9",
        "pseudo-inverse drops eigenvalues below 1e-10 times the largest",
        "default B: largest attainable pattern count for targets of length positions; default U = K * B",
        "regret is measured against the best fixed path in hindsight using exact expected learner gains",
        "bound sums over rounds run to the horizon T",
        "targets: outputs of a hidden path with per-position symbol noise",
    };
    if (options.algorithm == Algorithm::cdcb)
        result.notes.push_back("update multiplies weights by exp(+eta * surrogate gain)");
    if (options.algorithm == Algorithm::cdsb || options.algorithm == Algorithm::cdcb)
        result.notes.push_back("a derived mixing rate above 1 is capped at 1 (short horizons)");
    return result;
}

bool audit_information_flow(const RunOptions& options, std::size_t rounds) {
    auto s = prepare(options);
    if (options.regime == Regime::full) return true;
    std::vector<Path> played;
    for (std::size_t t = 0; t < rounds; ++t) {
        const auto round = s.adversary->step(t, played);
        const auto choice = s.learner->predict(s.rng);

        // Change every output the played path does not use.
        auto perturbed = round;
        std::vector<char> on_path(s.a.num_arcs(), 0);
        for (auto i : choice.path.arcs) on_path[i] = 1;
        const auto& sigma = options.spec.alphabet;
        for (std::size_t i = 0; i < s.a.num_arcs(); ++i) {
            if (on_path[i]) continue;
            auto& sym = perturbed.out[s.a.name(i)];
            auto it = std::find(sigma.begin(), sigma.end(), sym);
            sym = sigma[(static_cast<std::size_t>(it - sigma.begin()) + 1) % sigma.size()];
        }

        const auto before = s.learner->snapshot();
        const double gain = contextual::path_gain_oracle(s.a, choice.path, round.out, round.y, s.ps);
        const double gain2 = contextual::path_gain_oracle(s.a, choice.path, perturbed.out, perturbed.y, s.ps);
        if (gain != gain2) return false;
        auto copy = learners::make_learner(options.algorithm, s.base, s.config);
        copy->restore(before);
        s.learner->update(choice, make_feedback(options.regime, choice, gains_on(*s.context, round), gain));
        copy->update(choice, make_feedback(options.regime, choice, gains_on(*s.context, perturbed), gain2));
        if (copy->snapshot() != s.learner->snapshot()) return false;
        played.push_back(choice.path);
    }
    return true;
}

// --- outputs ------------------------------------------------------------------

std::string trace_csv(const std::vector<TraceRow>& rows) {
    std::ostringstream out;
    out << "t,chosen_path,realized_gain,expected_gain,comparator_gain,regret,bound\n";
    for (const auto& r : rows)
        out << r.t << ',' << r.chosen_path << ',' << format_double(r.realized_gain) << ','
            << format_double(r.expected_gain) << ',' << format_double(r.comparator_gain) << ','
            << format_double(r.regret) << ',' << format_double(r.bound) << '\n';
    return out.str();
}

std::string meta_text(const RunOptions& o, const RunResult& r) {
    std::ostringstream out;
    const auto& s = o.spec;
    out << "algorithm = " << learners::to_string(o.algorithm) << '\n';
    out << "regime = " << learners::to_string(o.regime) << '\n';
    out << "seed = " << s.seed << '\n';
    out << "experts = " << s.experts << '\n';
    out << "positions = " << s.positions << '\n';
    out << "order = " << s.order << '\n';
    out << "alphabet = " << join(s.alphabet) << '\n';
    out << "adversary = " << to_string(s.adversary) << '\n';
    out << "horizon = " << s.horizon << '\n';
    out << "noise = " << format_double(s.noise) << '\n';
    out << "concentration = " << format_double(s.concentration) << '\n';
    out << "discount = " << format_double(s.discount) << '\n';
    out << "max_gap = " << (s.max_gap ? std::to_string(*s.max_gap) : std::string("inf")) << '\n';
    out << "\n[tuning]\n";
    for (const auto& n : r.tuning.notes) out << n << '\n';
    out << "\n[sizes]\n";
    out << "K = " << format_double(r.sizes.K) << "\nM = " << format_double(r.sizes.M)
        << "\nN = " << format_double(r.sizes.N) << "\nC = " << format_double(r.sizes.C)
        << "\nlambda_min = " << format_double(r.sizes.lambda_min) << "\nB = " << format_double(r.sizes.B)
        << "\nU = " << format_double(r.sizes.U) << "\ndelta = " << format_double(r.sizes.delta) << '\n';
    out << "\n[bounds]\n";
    out << "cdch = " << format_double(r.bounds.cdch) << "\ncdsb = " << format_double(r.bounds.cdsb)
        << "\ncdcb = " << format_double(r.bounds.cdcb) << "\nexp3ag = " << format_double(r.bounds.exp3ag) << '\n';
    out << "\n[metrics]\n";
    out << "regret_expected = " << format_double(r.metrics.regret_expected) << '\n';
    out << "regret_realized = " << format_double(r.metrics.regret_realized) << '\n';
    out << "regret_log = " << (r.metrics.log_regret_bounded() ? format_double(r.metrics.regret_log) : "unbounded")
        << '\n';
    out << "alpha = " << format_double(r.metrics.alpha) << '\n';
    out << "comparator = " << join(automata::path_names(build_ensemble_automaton(s), r.comparator.path)) << '\n';
    out << "\n[choices]\n";
    for (const auto& n : r.notes) out << "- " << n << '\n';
    return out.str();
}

std::string regret_svg(const std::vector<TraceRow>& rows) {
    const double width = 640, height = 400, pad = 50;
    double top = 1.0;
    for (const auto& r : rows) top = std::max({top, r.regret, std::isfinite(r.bound) ? r.bound : 0.0});
    const double n = std::max<double>(1.0, static_cast<double>(rows.size()));
    auto x = [&](double t) { return pad + (width - 2 * pad) * t / n; };
    auto y = [&](double v) { return height - pad - (height - 2 * pad) * std::max(0.0, v) / top; };
    auto line = [&](auto value, const char* colour) {
        std::ostringstream p;
        p << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
        // at most ~600 points
        const std::size_t step = std::max<std::size_t>(1, rows.size() / 600);
        for (std::size_t i = 0; i < rows.size(); i += step)
            p << format_double(std::round(x(static_cast<double>(rows[i].t)) * 10) / 10) << ','
              << format_double(std::round(y(value(rows[i])) * 10) / 10) << ' ';
        p << "\"/>\n";
        return p.str();
    };
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<line x1=\"" << pad << "\" y1=\"" << height - pad << "\" x2=\"" << width - pad << "\" y2=\""
        << height - pad << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\"" << height - pad
        << "\" stroke=\"black\"/>\n";
    out << line([](const TraceRow& r) { return r.regret; }, "steelblue");
    out << line([](const TraceRow& r) { return std::isfinite(r.bound) ? r.bound : 0.0; }, "firebrick");
    out << "<text x=\"" << pad << "\" y=\"" << pad - 10 << "\" font-size=\"12\">regret (blue), bound (red); max "
        << format_double(std::round(top)) << "</text>\n";
    out << "<text x=\"" << width - pad << "\" y=\"" << height - pad + 20
        << "\" font-size=\"12\" text-anchor=\"end\">t = " << rows.size() << "</text>\n";
    out << "</svg>\n";
    return out.str();
}

// --- non-additivity -----------------------------------------------------------

NonAdditivityInstance translation_instance(std::size_t order, Sequence y) {
    NonAdditivityInstance inst;
    const Sequence first{"He", "would", "like", "to", "have", "tea"};
    const Sequence second{"She", "would", "love", "to", "drink", "chai"};
    auto& a = inst.a;
    a.add_states(7);
    a.set_initial(0);
    for (std::size_t i = 0; i < 6; ++i) {
        const auto e = "e" + std::to_string(i + 1);
        a.add_transition(static_cast<StateId>(i), static_cast<StateId>(i + 1), e);
        a.add_transition(static_cast<StateId>(i), static_cast<StateId>(i + 1), e + "'");
        inst.out[e] = first[i];
        inst.out[e + "'"] = second[i];
    }
    a.set_final(6);
    inst.y = y.empty() ? Sequence{"He", "would", "like", "to", "eat", "cake"} : std::move(y);
    if (order < 1) throw InvalidArgument("order must be >= 1");
    // Patterns: every n-gram of the target (all others score zero anyway).
    for (std::size_t i = 0; i + order <= inst.y.size(); ++i) {
        Sequence g(inst.y.begin() + static_cast<std::ptrdiff_t>(i),
                   inst.y.begin() + static_cast<std::ptrdiff_t>(i + order));
        if (!inst.patterns.index_of(g)) inst.patterns.patterns.push_back(std::move(g));
    }
    if (inst.patterns.patterns.empty()) inst.patterns.patterns.push_back(Sequence(order, inst.y.front()));
    // π1 = e1 e2 ... e6, π2 swaps e1, π3 swaps e3, π4 swaps both.
    auto path = [&](bool swap1, bool swap3) {
        Path p;
        for (std::size_t i = 0; i < 6; ++i) p.arcs.push_back(2 * i + ((i == 0 && swap1) || (i == 2 && swap3) ? 1 : 0));
        return p;
    };
    inst.paths = {path(false, false), path(true, false), path(false, true), path(true, true)};
    return inst;
}

NonAdditivityReport verify_non_additivity(const NonAdditivityInstance& inst) {
    NonAdditivityReport r;
    const auto m = static_cast<Eigen::Index>(inst.a.num_arcs());
    const auto k = static_cast<Eigen::Index>(inst.paths.size());
    Eigen::MatrixXd system = Eigen::MatrixXd::Zero(k, m);
    Eigen::VectorXd rhs(k);
    for (Eigen::Index row = 0; row < k; ++row) {
        const auto& p = inst.paths[static_cast<std::size_t>(row)];
        const double g = contextual::path_gain_oracle(inst.a, p, inst.out, inst.y, inst.patterns);
        r.gains.push_back(g);
        rhs(row) = g;
        for (auto i : p.arcs) system(row, static_cast<Eigen::Index>(i)) += 1.0;
    }
    Eigen::MatrixXd augmented(k, m + 1);
    augmented << system, rhs;
    r.rank_system = static_cast<std::size_t>(Eigen::FullPivLU<Eigen::MatrixXd>(system).rank());
    r.rank_augmented = static_cast<std::size_t>(Eigen::FullPivLU<Eigen::MatrixXd>(augmented).rank());
    const Eigen::VectorXd x = system.completeOrthogonalDecomposition().solve(rhs);
    r.residual = (system * x - rhs).norm();
    r.additive_feasible = r.rank_system == r.rank_augmented;
    return r;
}

}  // namespace pathlearn::harness
