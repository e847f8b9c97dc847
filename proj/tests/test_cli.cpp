#include "doctest.h"

#include <filesystem>
#include <sstream>

#include "cli.hpp"
#include "pathlearn/text_format.hpp"

using namespace pathlearn;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result invoke(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("pathlearn_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string write(const fs::path& dir, const std::string& name, const std::string& text) {
    automata::write_file((dir / name).string(), text);
    return (dir / name).string();
}

const char* kEnsemble = "0\t1\th1_1\n0\t1\th2_1\n1\t2\th1_2\n1\t2\th2_2\n2\t3\th1_3\n2\t3\th2_3\n3\t4\th1_4\n3\t4\th2_4\n4\n";

}  // namespace

TEST_CASE("help and usage errors") {
    auto r = invoke({"--help"});
    CHECK(r.code == 0);
    for (const char* sub : {"build-context", "run", "verify", "demo-nonadditive", "oracle"})
        CHECK(r.out.find(sub) != std::string::npos);
    CHECK(invoke({}).code == cli::kConfigError);
    CHECK(invoke({"frobnicate"}).code == cli::kConfigError);
    CHECK(invoke({"verify", "--level", "medium"}).code == cli::kConfigError);
}

TEST_CASE("build-context reports sizes and is deterministic") {
    const auto dir = scratch("build");
    const auto a = write(dir, "a.txt", kEnsemble);
    const auto p = write(dir, "p.txt", "a a\na b\nb a\nb b\n");
    auto r = invoke({"build-context", "--automaton", a, "--patterns", p, "-o", (dir / "x.txt").string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("K = 3\n") != std::string::npos);
    CHECK(r.out.find("M = 12\n") != std::string::npos);
    CHECK(r.out.find("N = 16\n") != std::string::npos);
    CHECK(r.out.find("Q = 6\n") != std::string::npos);
    REQUIRE(invoke({"build-context", "--automaton", a, "--patterns", p, "-o", (dir / "y.txt").string()}).code == 0);
    CHECK(automata::read_file((dir / "x.txt").string()) == automata::read_file((dir / "y.txt").string()));

    const auto empty = write(dir, "empty.txt", "\n");
    r = invoke({"build-context", "--automaton", a, "--patterns", empty});
    CHECK(r.code == cli::kConfigError);
    CHECK(r.err.find("no patterns") != std::string::npos);

    const auto broken = write(dir, "broken.txt", "0\t1\tx\n1\t2\n");
    r = invoke({"build-context", "--automaton", broken, "--patterns", p});
    CHECK(r.code == cli::kConfigError);
    CHECK(r.err.find("line 2") != std::string::npos);
}

TEST_CASE("run writes a trace and is byte-identical under a fixed seed") {
    const auto dir = scratch("run");
    const auto cfg = write(dir, "c.json", R"({"algorithm": "cdch", "ensemble": {"horizon": 1, "positions": 4}})");
    REQUIRE(invoke({"run", "-c", cfg, "-o", (dir / "one").string(), "--seed", "5"}).code == 0);
    const auto trace = automata::read_file((dir / "one" / "trace.csv").string());
    std::istringstream lines(trace);
    std::string line;
    std::size_t count = 0;
    while (std::getline(lines, line)) ++count;
    CHECK(count == 2);
    CHECK(automata::read_file((dir / "one" / "meta.txt").string()).find("seed = 5\n") != std::string::npos);

    const auto longer = write(dir, "d.json", R"({"algorithm": "cdsb", "ensemble": {"horizon": 40, "seed": 2}})");
    REQUIRE(invoke({"run", "-c", longer, "-o", (dir / "a").string(), "--svg"}).code == 0);
    REQUIRE(invoke({"run", "-c", longer, "-o", (dir / "b").string()}).code == 0);
    CHECK(automata::read_file((dir / "a" / "trace.csv").string()) == automata::read_file((dir / "b" / "trace.csv").string()));
    CHECK(automata::read_file((dir / "a" / "meta.txt").string()) == automata::read_file((dir / "b" / "meta.txt").string()));
    CHECK(fs::exists(dir / "a" / "regret.svg"));
}

TEST_CASE("seed sweeps write one directory per seed") {
    const auto dir = scratch("sweep");
    const auto cfg = write(dir, "c.json", R"({"algorithm": "exp3ag", "ensemble": {"horizon": 10, "seed": 100}})");
    REQUIRE(invoke({"run", "-c", cfg, "-o", (dir / "s").string(), "--seeds", "10", "-j", "4"}).code == 0);
    std::size_t dirs = 0;
    for (const auto& e : fs::directory_iterator(dir / "s")) dirs += e.is_directory() ? 1 : 0;
    CHECK(dirs == 10);
    CHECK(fs::exists(dir / "s" / "seed-109" / "trace.csv"));
    // A sweep entry equals the single run with that seed.
    REQUIRE(invoke({"run", "-c", cfg, "-o", (dir / "single").string(), "--seed", "103"}).code == 0);
    CHECK(automata::read_file((dir / "s" / "seed-103" / "trace.csv").string()) ==
          automata::read_file((dir / "single" / "trace.csv").string()));
}

TEST_CASE("config errors exit with code 2") {
    const auto dir = scratch("config");
    auto run = [&](const std::string& text) {
        return invoke({"run", "-c", write(dir, "c.json", text), "-o", (dir / "o").string()});
    };
    CHECK(run(R"({"algorithm": "cdch", "regime": "bandit"})").code == cli::kConfigError);
    CHECK(run(R"({"algorithm": "cdch", "colour": 1})").code == cli::kConfigError);
    CHECK(run(R"({"algorithm": "cdch", "ensemble": {"expert": 2}})").code == cli::kConfigError);
    CHECK(run(R"({"algorithm": "cdch", "learner": {"eta": 2}})").code == cli::kConfigError);
    CHECK(run(R"({"algorithm": "cdch", "ensemble": {"horizon": "many"}})").code == cli::kConfigError);
    CHECK(run(R"({"algorithm": "nope"})").code == cli::kConfigError);
    CHECK(run(R"({"ensemble": {}})").code == cli::kConfigError);
    CHECK(run("{not json").code == cli::kConfigError);
    auto r = run(R"({"algorithm": "cdcb", "regime": "semi"})");
    CHECK(r.code == cli::kConfigError);
    CHECK(r.err.find("regime") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "o"));
}

TEST_CASE("verify passes, and fails under the sign flip hook") {
    auto r = invoke({"verify", "--level", "quick"});
    CHECK(r.code == 0);
    CHECK(r.out.find("FAIL") == std::string::npos);
    CHECK(r.out.find("PASS additivity (") != std::string::npos);
    r = invoke({"verify", "--flip-gain-sign", "--filter", "additivity"});
    CHECK(r.code == cli::kVerifyFailed);
    CHECK(r.out.find("FAIL additivity") != std::string::npos);
}

TEST_CASE("demo-nonadditive") {
    auto r = invoke({"demo-nonadditive"});
    CHECK(r.code == 0);
    CHECK(r.out.find("pi1: e1 e2 e3 e4 e5 e6 | He would like to have tea | gain 1") != std::string::npos);
    CHECK(r.out.find("no edge-additive gains") != std::string::npos);
    r = invoke({"demo-nonadditive", "--order", "1"});
    CHECK(r.out.find("edge-additive gains exist") != std::string::npos);
}

TEST_CASE("oracle lists every path") {
    const auto dir = scratch("oracle");
    const auto a = write(dir, "a.txt", kEnsemble);
    const auto p = write(dir, "p.txt", "a b\nb b\n");
    std::string outs;
    for (int i = 1; i <= 4; ++i) outs += "h1_" + std::to_string(i) + " a\nh2_" + std::to_string(i) + " b\n";
    const auto o = write(dir, "o.txt", outs);
    auto r = invoke({"oracle", "--automaton", a, "--patterns", p, "--outputs", o, "--target", "a b b b"});
    CHECK(r.code == 0);
    CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 16);
    CHECK(r.out.find("h1_1 h2_2 h2_3 h2_4 | gain 5 | edge sum 5") != std::string::npos);
    CHECK(r.out.find("MISMATCH") == std::string::npos);
    const auto missing = write(dir, "m.txt", "h1_1 a\n");
    CHECK(invoke({"oracle", "--automaton", a, "--patterns", p, "--outputs", missing, "--target", "a"}).code ==
          cli::kConfigError);
}
