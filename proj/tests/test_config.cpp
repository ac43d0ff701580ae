#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ssep/commands.hpp"
#include "ssep/config.hpp"
#include "ssep/errors.hpp"

#include "json.hpp"

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ssep;
using namespace ssep::cli;
namespace fs = std::filesystem;

namespace
{
    std::string error_of(const std::string& text)
    {
        try
        {
            parse_manifest(text, "m.yaml");
        }
        catch (const ConfigError& e)
        {
            return e.what();
        }
        return "";
    }

    std::string slurp(const fs::path& p)
    {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    fs::path scratch(const std::string& name)
    {
        const fs::path p = fs::temp_directory_path() / ("ssep-test-" + std::to_string(::getpid()) + "-" + name);
        fs::remove_all(p);
        return p;
    }

    const char* kLinear = R"(d: 2
profile:
  - {c: 1, alpha: 1}
t: 50
replicas: 40
record:
  - [[2, 0], [3, 0]]
)";
}

TEST_CASE("round trip is the identity on canonical text")
{
    const char* texts[] = {
        kLinear,
        R"(d: 3
profile:
  - {c: 0.5, alpha: 2, r: 1.25}
  - {constant: 1.5}
density: [1, 0.5]
schedule: {t0: 100, ratio: 4, n: 3}
x: [-1, 0, 0.1]
dynamics: independent
init: bernoulli
seed: 18446744073709551615
threads: 3
)",
        R"(initial_sites:
  - [0, 0]
  - [1, 0]
box: {lo: [0, 0], hi: [3, 2]}
t: [0.5, 2]
z: 1
depth: 7
max_particles: 5e7
)",
        R"(d: 2
profile:
  - {grid: [0, 1, 2.5], values: [0, 1, 2], derivatives: [1, 1, 0.5]}
t: 10
trunc_eps: 1e-9
acceptance_scale: 0.1
)",
    };
    for (const char* text : texts)
    {
        const Manifest a = parse_manifest(text);
        const std::string once = to_yaml(a);
        const Manifest b = parse_manifest(once);
        CHECK(to_yaml(b) == once);
        CHECK(a.times() == b.times());
        CHECK(a.seed == b.seed);
        CHECK(a.replicas == b.replicas);
        CHECK(a.record == b.record);
        CHECK(a.initial_sites == b.initial_sites);
        CHECK(a.depth == b.depth);
        CHECK(a.x == b.x);
        CHECK(a.z == b.z);
        CHECK(a.trunc_eps == b.trunc_eps);
        CHECK(a.profile.has_value() == b.profile.has_value());
    }
}

TEST_CASE("unknown keys and bad values name file, line and field")
{
    CHECK(error_of("d: 2\nprofile:\n  - {c: 1, alpha: 1}\nt: 5\nreplica: 10\n") ==
          "m.yaml:5: replica: unknown key");
    CHECK(error_of("d: 2\nprofile:\n  - {c: 1, alhpa: 1}\nt: 5\n").find("m.yaml:3: profile[0].alhpa: unknown key") !=
          std::string::npos);
    CHECK(error_of("d: 1\nprofile: []\nt: 5\n").find("m.yaml:1: d: must be >= 2") != std::string::npos);
    CHECK(error_of("d: 2\nprofile:\n  - {c: 1, alpha: 1}\nt: 5\nseed: -3\n").find("m.yaml:5: seed") !=
          std::string::npos);
    CHECK(error_of("d: 2\nprofile:\n  - {c: 1, alpha: 1}\nt: 5\nreplicas: 2.5\n").find("must be an integer") !=
          std::string::npos);
    CHECK(error_of("d: 2\nprofile:\n  - {c: 1, alpha: 1}\n").find("t: t or schedule is required") !=
          std::string::npos);
    CHECK(error_of("d: 3\nprofile:\n  - {c: 1, alpha: 1}\nt: 5\n").find("expected 2 shape records") !=
          std::string::npos);
    CHECK(error_of("initial_sites: [[0, 0]]\nt: 5\n").find("z: required without a profile") != std::string::npos);
    CHECK(error_of("d: 2\nprofile:\n  - {c: 1, alpha: 1}\nt: 5\ndynamics: voter\n").find("m.yaml:5: dynamics") !=
          std::string::npos);
    CHECK(error_of("d: 2\nprofile: [\n").find("syntax") != std::string::npos);
    CHECK_THROWS_AS(load_manifest("/nonexistent/m.yaml"), ConfigError);
}

TEST_CASE("schedule ladder and levels")
{
    const Manifest m = parse_manifest("d: 2\nprofile:\n  - {c: 1, alpha: 1}\nschedule: {t0: 100, ratio: 4, n: 3}\n"
                                      "x: [0, 1]\n");
    CHECK(m.times() == std::vector<double>{100, 400, 1600});
    const auto lv = m.levels(400);
    REQUIRE(lv.size() == 2);
    CHECK(lv[0].first == 0.0);
    CHECK(lv[1].second > lv[0].second);
    const Manifest e = parse_manifest("initial_sites: [[0, 0]]\nt: 5\nz: 2\n");
    CHECK(std::isnan(e.levels(5).front().first));
    CHECK(e.levels(5).front().second == 2.0);
    CHECK(e.dim() == 2);
}

TEST_CASE("fnv1a reference values")
{
    CHECK(hex64(fnv1a64("")) == "cbf29ce484222325");
    CHECK(hex64(fnv1a64("a")) == "af63dc4c8601ec8c");
    CHECK(hex64(fnv1a64("foobar")) == "85944171f73967e8");
}

TEST_CASE("simulate output is byte-identical across runs and thread counts")
{
    Manifest m = parse_manifest(kLinear);
    const fs::path a = scratch("a"), b = scratch("b");
    REQUIRE(run_command(Command::simulate, m, a) == 0);
    m.threads = 3;
    const fs::path b_out = b;
    REQUIRE(run_command(Command::simulate, m, b_out) == 0);
    // threads is part of the manifest, so its hash differs; the results must not
    for (const char* f : {"histogram.csv", "replicas.ndjson"})
    {
        INFO(f);
        CHECK(slurp(a / f) == slurp(b / f));
        CHECK(!slurp(a / f).empty());
    }
    CHECK(nlohmann::json::parse(slurp(a / "summary.json"))["experiments"] ==
          nlohmann::json::parse(slurp(b / "summary.json"))["experiments"]);
    m.threads = 1;
    const fs::path c = scratch("c");
    REQUIRE(run_command(Command::simulate, m, c) == 0);
    for (const auto& e : fs::directory_iterator(a))
        CHECK(slurp(e.path()) == slurp(c / e.path().filename()));
    CHECK(slurp(a / "manifest.yaml") == to_yaml(m));
    fs::remove_all(a);
    fs::remove_all(b);
    fs::remove_all(c);
}

TEST_CASE("output directory is replaced only with force and never left partial")
{
    const Manifest m = parse_manifest(kLinear);
    const fs::path out = scratch("force");
    REQUIRE(run_command(Command::theory, m, out) == 0);
    CHECK(fs::exists(out / "theory.json"));
    CHECK_THROWS_AS(run_command(Command::theory, m, out), ConfigError);
    RunOptions f;
    f.force = true;
    CHECK(run_command(Command::simulate, m, out, f) == 0);
    CHECK(fs::exists(out / "summary.json"));
    CHECK(!fs::exists(out / "theory.json"));

    // a failing run leaves no directory and no temporary behind
    Manifest bad = parse_manifest("initial_sites: [[0, 0]]\nt: 5\nz: 2\n");
    const fs::path none = scratch("none");
    CHECK_THROWS_AS(run_command(Command::theory, bad, none), ConfigError);
    CHECK(!fs::exists(none));
    for (const auto& e : fs::directory_iterator(none.parent_path()))
        CHECK(e.path().filename().string().find(".ssep-test-" + std::to_string(::getpid())) == std::string::npos);
    fs::remove_all(out);
}

TEST_CASE("sweep needs three times and writes the gap trend")
{
    Manifest m = parse_manifest(kLinear);
    CHECK_THROWS_AS(run_command(Command::sweep, m, scratch("sw0")), ConfigError);
    m.t.clear();
    m.schedule = Schedule{20, 2, 3};
    m.record.clear();
    const fs::path out = scratch("sw");
    REQUIRE(run_command(Command::sweep, m, out) == 0);
    for (const char* f : {"theory.json", "summary.json", "gap.json", "histogram_0.csv", "histogram_2.csv",
                          "manifest.yaml", "manifest.fnv1a"})
        CHECK(fs::exists(out / f));
    CHECK(!fs::exists(out / "replicas.ndjson"));
    const auto gap = nlohmann::json::parse(slurp(out / "gap.json"));
    CHECK(gap["trends"][0]["trend"]["points"].size() == 3);
    CHECK(gap["manifest_fnv1a"] == nlohmann::json::parse(slurp(out / "summary.json"))["manifest_fnv1a"]);
    fs::remove_all(out);
}
