#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "bbmlab/io.hpp"

using namespace bbmlab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& leaf) {
    const fs::path p = fs::temp_directory_path() / "bbmlab_cli_io" / leaf;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run(const std::string& args) {
    const int rc = std::system(("./bbmlab " + args + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(rc);
}

} // namespace

TEST_CASE("format_number: shortest round-trip") {
    CHECK(format_number(30.0) == "30");
    CHECK(format_number(-4.0) == "-4");
    CHECK(format_number(0.5) == "0.5");
    CHECK(format_number(0.1) == "0.1");
    for (double v : {1.0 / 3.0, 1e-300, 3.141592653589793, -0.8590775804594164})
        CHECK(std::strtod(format_number(v).c_str(), nullptr) == v);
}

TEST_CASE("dsv writer: single hash header, tab separated") {
    const fs::path dir = scratch("dsv");
    {
        DsvWriter d(dir / "t.dsv", {"x", "y"});
        d.row({1.0, 2.5});
        d.row({3.0, -1.0});
    }
    CHECK(slurp(dir / "t.dsv") == "#\tx\ty\n1\t2.5\n3\t-1\n");
}

TEST_CASE("config reader: comments, whitespace, errors") {
    const fs::path dir = scratch("cfg");
    {
        std::ofstream out(dir / "good.cfg");
        out << "# a comment\n"
               "  mu =  3.5 # trailing\n"
               "\n"
               "n_max=250\n";
    }
    const auto kv = read_config(dir / "good.cfg");
    REQUIRE(kv.size() == 2);
    CHECK(kv.at("mu") == "3.5");
    CHECK(kv.at("n_max") == "250");

    { std::ofstream(dir / "bad.cfg") << "just words\n"; }
    CHECK_THROWS_AS(read_config(dir / "bad.cfg"), io_error);
    CHECK_THROWS_AS(read_config(dir / "missing.cfg"), io_error);
}

TEST_CASE("output dir: flag wins over environment") {
    const fs::path a = scratch("dir_flag");
    const fs::path b = scratch("dir_env");
    setenv("BBMLAB_OUTPUT_DIR", b.c_str(), 1);
    CHECK(resolve_output_dir(a.string()) == a);
    CHECK(resolve_output_dir("") == b);
    unsetenv("BBMLAB_OUTPUT_DIR");
}

TEST_CASE("cli: exit codes") {
    const fs::path dir = scratch("codes");
    const std::string od = " --output-dir " + dir.string();
    CHECK(run("series --mu 2" + od) == 0);
    CHECK(run("series --mu 1" + od) == 2);  // below the critical drift
    CHECK(run("series") == 2);              // missing required flag
    CHECK(run("no-such-command") == 2);
    CHECK(run("mc --mu 2 --x0 1 --s 99 --replicas 10" + od) == 2); // s beyond s0
    // impossible gap tolerance: the three-way comparison must report failure
    CHECK(run("crosscheck --mu 2 --replicas 500 --tol-gap 1e-18" + od) == 4);
}

TEST_CASE("cli: reruns reproduce byte-identical data files") {
    const fs::path a = scratch("rerun_a");
    const fs::path b = scratch("rerun_b");
    const std::string cmd = "mc --mu 2 --x0 1 --replicas 2000 --histogram 6 --seed 9";
    REQUIRE(run(cmd + " --output-dir " + a.string()) == 0);
    REQUIRE(run(cmd + " --output-dir " + b.string()) == 0);
    for (const char* f : {"mc_summary.txt", "mc_histogram.dsv"})
        CHECK(slurp(a / f) == slurp(b / f));
    // the manifest differs only by its timestamp line
    CHECK(slurp(a / "mc_manifest.txt").find("artifact_version = ") == 0);
}

TEST_CASE("cli: config file overrides flags") {
    const fs::path dir = scratch("override");
    { std::ofstream(dir / "run.cfg") << "mu = 3\nn_max = 123\n"; }
    REQUIRE(run("series --mu 1.5 --n-max 50 --config " + (dir / "run.cfg").string() +
                " --output-dir " + dir.string()) == 0);
    const std::string summary = slurp(dir / "series_summary.txt");
    CHECK(summary.find("mu = 3\n") != std::string::npos);
    CHECK(summary.find("n_max = 123\n") != std::string::npos);

    { std::ofstream(dir / "bad.cfg") << "no_such_knob = 1\n"; }
    CHECK(run("series --mu 3 --config " + (dir / "bad.cfg").string() + " --output-dir " +
              dir.string()) == 2);
}
