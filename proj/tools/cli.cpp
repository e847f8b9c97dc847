#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "pathlearn/algorithms.hpp"
#include "pathlearn/checks.hpp"
#include "pathlearn/contextual.hpp"
#include "pathlearn/errors.hpp"
#include "pathlearn/harness.hpp"
#include "pathlearn/patterns_io.hpp"
#include "pathlearn/text_format.hpp"

namespace pathlearn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// --- config --------------------------------------------------------------------

void only_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, _] : j.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ConfigError("unknown key '" + key + "' in " + where);
}

template <class T>
T get(const json& j, const std::string& key, const std::string& where) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + " has the wrong type");
    }
}

template <class T>
void read(const json& j, const std::string& key, T& into, const std::string& where) {
    if (j.contains(key)) into = get<T>(j, key, where);
}

template <class T>
void read(const json& j, const std::string& key, std::optional<T>& into, const std::string& where) {
    if (j.contains(key)) into = get<T>(j, key, where);
}

harness::RunOptions parse_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    only_keys(root, {"algorithm", "regime", "ensemble", "learner", "enumeration_cap"}, "config");
    harness::RunOptions o;
    if (!root.contains("algorithm")) throw ConfigError("config needs an algorithm");
    o.algorithm = learners::parse_algorithm(get<std::string>(root, "algorithm", "config"));
    o.regime = root.contains("regime") ? learners::parse_regime(get<std::string>(root, "regime", "config"))
                                       : learners::regime_of(o.algorithm);
    read(root, "enumeration_cap", o.enumeration_cap, "config");

    if (root.contains("ensemble")) {
        const auto& e = root["ensemble"];
        only_keys(e,
                  {"experts", "positions", "order", "alphabet", "adversary", "horizon", "seed", "noise",
                   "concentration", "discount", "max_gap"},
                  "ensemble");
        auto& s = o.spec;
        read(e, "experts", s.experts, "ensemble");
        read(e, "positions", s.positions, "ensemble");
        read(e, "order", s.order, "ensemble");
        read(e, "alphabet", s.alphabet, "ensemble");
        if (e.contains("adversary")) s.adversary = harness::parse_adversary(get<std::string>(e, "adversary", "ensemble"));
        read(e, "horizon", s.horizon, "ensemble");
        read(e, "seed", s.seed, "ensemble");
        read(e, "noise", s.noise, "ensemble");
        read(e, "concentration", s.concentration, "ensemble");
        read(e, "discount", s.discount, "ensemble");
        if (e.contains("max_gap")) {
            if (e["max_gap"].is_null() || e["max_gap"] == "inf")
                s.max_gap = std::nullopt;
            else
                s.max_gap = get<std::size_t>(e, "max_gap", "ensemble");
        }
    }
    if (root.contains("learner")) {
        const auto& l = root["learner"];
        only_keys(l,
                  {"learning_rate", "mixing_rate", "exploration_bonus", "gain_cap", "path_gain_cap", "horizon",
                   "delta"},
                  "learner");
        auto& c = o.learner;
        read(l, "learning_rate", c.learning_rate, "learner");
        read(l, "mixing_rate", c.mixing_rate, "learner");
        read(l, "exploration_bonus", c.exploration_bonus, "learner");
        read(l, "gain_cap", c.gain_cap, "learner");
        read(l, "path_gain_cap", c.path_gain_cap, "learner");
        read(l, "horizon", c.horizon, "learner");
        read(l, "delta", c.delta, "learner");
    }
    o.spec.validate();
    return o;
}

// --- subcommands ---------------------------------------------------------------

int build_context(const std::string& automaton_file, const std::string& pattern_file, const std::string& output,
                  bool equalize, std::ostream& out) {
    const auto a = automata::parse_automaton(automata::read_file(automaton_file));
    const auto ps = contextual::parse_patterns(automata::read_file(pattern_file));
    auto ca = contextual::build_context_automaton(a, ps);
    if (equalize) ca = contextual::equalize(ca);
    const auto text = automata::print(ca.machine);
    if (output.empty())
        out << text;
    else
        automata::write_file(output, text);
    out << "K = " << automata::longest_path_length(ca.machine) << '\n';
    out << "M = " << ca.num_arcs() << '\n';
    out << "Q = " << ca.num_states() << '\n';
    out << "N = " << automata::format_double(automata::count_paths(a)) << '\n';
    return kOk;
}

void write_run(const harness::RunOptions& o, const fs::path& dir, bool svg) {
    const auto result = harness::run_experiment(o);
    fs::create_directories(dir);
    automata::write_file((dir / "trace.csv").string(), harness::trace_csv(result.rows));
    automata::write_file((dir / "meta.txt").string(), harness::meta_text(o, result));
    if (svg) automata::write_file((dir / "regret.svg").string(), harness::regret_svg(result.rows));
}

int run(const std::string& config_file, std::optional<std::uint64_t> seed, const std::string& output,
        std::size_t seeds, std::size_t jobs, bool svg, std::ostream& out) {
    auto base = parse_config(automata::read_file(config_file));
    if (seed) base.spec.seed = *seed;
    // Fail early on regime mismatches, before any directory is created.
    if (base.regime != learners::regime_of(base.algorithm))
        throw RegimeMismatch(std::string(learners::to_string(base.algorithm)) + " cannot run in the " +
                             std::string(learners::to_string(base.regime)) + " regime");
    if (seeds <= 1) {
        write_run(base, output, svg);
        out << "wrote " << (fs::path(output) / "trace.csv").string() << " (seed " << base.spec.seed << ")\n";
        return kOk;
    }
    std::vector<harness::RunOptions> runs(seeds, base);
    for (std::size_t k = 0; k < seeds; ++k) runs[k].spec.seed = base.spec.seed + k;
    std::vector<std::string> errors(seeds);
    auto work = [&](std::size_t k) {
        try {
            write_run(runs[k], fs::path(output) / ("seed-" + std::to_string(runs[k].spec.seed)), svg);
        } catch (const std::exception& e) {
            errors[k] = e.what();
        }
    };
    jobs = std::max<std::size_t>(1, std::min(jobs, seeds));
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j)
        pool.emplace_back([&, j] {
            for (std::size_t k = j; k < seeds; k += jobs) work(k);
        });
    for (auto& t : pool) t.join();
    for (std::size_t k = 0; k < seeds; ++k) {
        if (!errors[k].empty()) throw Error("seed " + std::to_string(runs[k].spec.seed) + ": " + errors[k]);
        out << "wrote " << (fs::path(output) / ("seed-" + std::to_string(runs[k].spec.seed))).string() << '\n';
    }
    return kOk;
}

int verify(const std::string& level, std::uint64_t seed, bool flip, const std::string& filter, std::ostream& out) {
    checks::CheckOptions o;
    o.level = checks::parse_level(level);
    o.seed = seed;
    o.flip_gain_sign = flip;
    o.filter = filter;
    const auto results = checks::run_checks(o);
    std::size_t failed = 0;
    double total = 0.0;
    for (const auto& r : results) {
        char time[32];
        std::snprintf(time, sizeof time, "%.2f", r.seconds);
        out << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << time << " s): " << r.detail << '\n';
        failed += r.passed ? 0 : 1;
        total += r.seconds;
    }
    out << results.size() - failed << '/' << results.size() << " checks passed in " << automata::format_double(std::round(total * 100) / 100) << " s\n";
    return failed == 0 ? kOk : kVerifyFailed;
}

int demo(std::size_t order, const std::string& target, std::ostream& out) {
    contextual::Sequence y;
    std::istringstream words(target);
    for (std::string w; words >> w;) y.push_back(w);
    const auto inst = harness::translation_instance(order, y);
    const auto rep = harness::verify_non_additivity(inst);
    out << "target: ";
    for (const auto& w : inst.y) out << w << ' ';
    out << "\npatterns: " << inst.patterns.patterns.size() << " of order " << order << '\n';
    for (std::size_t k = 0; k < inst.paths.size(); ++k) {
        out << "pi" << k + 1 << ':';
        for (auto i : inst.paths[k].arcs) out << ' ' << inst.a.name(i);
        out << " |";
        for (auto i : inst.paths[k].arcs) out << ' ' << inst.out.at(inst.a.name(i));
        out << " | gain " << automata::format_double(rep.gains[k]) << '\n';
    }
    out << "rank(system) = " << rep.rank_system << ", rank(augmented) = " << rep.rank_augmented
        << ", least-squares residual = " << automata::format_double(rep.residual) << '\n';
    out << (rep.additive_feasible ? "edge-additive gains exist\n" : "no edge-additive gains reproduce these path gains\n");
    return kOk;
}

// Outputs file: one "transition symbol" pair per line.
harness::Outputs parse_outputs(const std::string& text) {
    harness::Outputs o;
    std::istringstream in(text);
    std::size_t number = 0;
    for (std::string line; std::getline(in, line);) {
        ++number;
        std::istringstream fields(line);
        std::string name, symbol, extra;
        if (!(fields >> name)) continue;
        if (!(fields >> symbol) || (fields >> extra)) throw ParseError(number, "expected '<transition> <symbol>'");
        if (!o.emplace(name, symbol).second) throw ParseError(number, "transition '" + name + "' listed twice");
    }
    return o;
}

int oracle(const std::string& automaton_file, const std::string& pattern_file, const std::string& outputs_file,
           const std::string& target, std::ostream& out) {
    const auto a = automata::parse_automaton(automata::read_file(automaton_file));
    const auto ps = contextual::parse_patterns(automata::read_file(pattern_file));
    const auto outputs = parse_outputs(automata::read_file(outputs_file));
    for (const auto& arc : a.arcs())
        if (!outputs.count(arc.name)) throw ConfigError("no output given for transition '" + arc.name + "'");
    contextual::Sequence y;
    std::istringstream words(target);
    for (std::string w; words >> w;) y.push_back(w);
    const auto ca = contextual::build_context_automaton(a, ps);
    const auto gains = contextual::assign_edge_gains(ca, outputs, y);
    std::size_t mismatches = 0;
    for (const auto& p : automata::enumerate_paths(a)) {
        const double direct = contextual::path_gain_oracle(a, p, outputs, y, ps);
        double sum = 0.0;
        for (auto i : contextual::map_path(ca, p).arcs) sum += gains[i];
        const bool ok = std::abs(sum - direct) <= 1e-9 * std::max(1.0, direct);
        mismatches += ok ? 0 : 1;
        for (const auto& n : automata::path_names(a, p)) out << n << ' ';
        out << "| gain " << automata::format_double(direct) << " | edge sum " << automata::format_double(sum)
            << (ok ? "" : "  MISMATCH") << '\n';
    }
    return mismatches == 0 ? kOk : kVerifyFailed;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Online path learning with count-based gains over acyclic automata", "pathlearn"};
    app.require_subcommand(1);

    std::string automaton_file, pattern_file, output, config_file, level = "quick", filter, target, outputs_file;
    std::optional<std::uint64_t> seed;
    std::uint64_t verify_seed = 1;
    std::size_t seeds = 1, jobs = 1, order = 4;
    bool equalize = false, svg = false, flip = false;

    auto* bc = app.add_subcommand("build-context", "Build the context automaton A' and report its sizes");
    bc->add_option("--automaton", automaton_file, "Expert automaton file")->required();
    bc->add_option("--patterns", pattern_file, "Pattern file")->required();
    bc->add_option("-o,--output", output, "Write A' here instead of standard output");
    bc->add_flag("--equalize", equalize, "Pad paths to a common length");

    auto* rn = app.add_subcommand("run", "Run an online learning experiment");
    rn->add_option("-c,--config", config_file, "JSON run configuration")->required();
    rn->add_option("--seed", seed, "Override the configured seed");
    rn->add_option("-o,--output", output, "Output directory")->required();
    rn->add_option("--seeds", seeds, "Sweep this many consecutive seeds, one directory each")->check(CLI::PositiveNumber);
    rn->add_option("-j,--jobs", jobs, "Parallel runs during a sweep")->check(CLI::PositiveNumber);
    rn->add_flag("--svg", svg, "Also write regret.svg");

    auto* vf = app.add_subcommand("verify", "Run the invariant checks");
    vf->add_option("--level", level, "quick or full")->check(CLI::IsMember({"quick", "full"}));
    vf->add_option("--seed", verify_seed, "Seed for the random instances");
    vf->add_option("--filter", filter, "Only checks whose name contains this");
    vf->add_flag("--flip-gain-sign", flip, "Test hook: negate edge gains (additivity checks must fail)");

    auto* dm = app.add_subcommand("demo-nonadditive", "Show that n-gram gains need not be edge-additive");
    dm->add_option("--order", order, "n-gram order")->check(CLI::PositiveNumber);
    dm->add_option("--target", target, "Reference sentence (words separated by spaces)");

    auto* orc = app.add_subcommand("oracle", "Brute-force path gains next to A' edge sums");
    orc->add_option("--automaton", automaton_file, "Expert automaton file")->required();
    orc->add_option("--patterns", pattern_file, "Pattern file")->required();
    orc->add_option("--outputs", outputs_file, "Lines of '<transition> <symbol>'")->required();
    orc->add_option("--target", target, "Target sequence (symbols separated by spaces)")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    }

    try {
        if (*bc) return build_context(automaton_file, pattern_file, output, equalize, out);
        if (*rn) return run(config_file, seed, output, seeds, jobs, svg, out);
        if (*vf) return verify(level, verify_seed, flip, filter, out);
        if (*dm) return demo(order, target, out);
        if (*orc) return oracle(automaton_file, pattern_file, outputs_file, target, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const RegimeMismatch& e) {
        err << "regime mismatch: " << e.what() << '\n';
        return kConfigError;
    } catch (const ParseError& e) {
        err << "parse error: " << e.what() << '\n';
        return kConfigError;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    }
    return kOk;
}

}  // namespace pathlearn::cli
