#include "ssep/acceptance.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>

int main(int argc, char** argv)
{
    CLI::App app{"Acceptance suite: one PASS/FAIL line per criterion"};
    ssep::acceptance::Options opt;
    std::string json_path;
    app.add_option("--scale", opt.scale, "replica multiplier")->check(CLI::PositiveNumber);
    app.add_option("--seed", opt.seed);
    app.add_option("--threads", opt.threads)->check(CLI::PositiveNumber);
    app.add_option("--only", opt.only, "criterion ids")->check(CLI::Range(1, 10));
    app.add_option("--json", json_path, "write the full report here");
    app.add_flag("--inject-seed-fault", opt.inject_seed_fault);
    CLI11_PARSE(app, argc, argv);

    opt.on_result = [](const ssep::acceptance::Criterion& c) { std::cout << ssep::acceptance::line(c) << std::endl; };
    const auto cs = ssep::acceptance::run_all(opt);
    const nlohmann::json j = ssep::acceptance::to_json(cs, opt);
    if (!json_path.empty())
        std::ofstream(json_path) << j.dump(2) << '\n';
    int passed = 0;
    for (const auto& c : cs)
        passed += c.pass ? 1 : 0;
    std::cout << passed << "/" << cs.size() << " criteria passed" << std::endl;
    return passed == static_cast<int>(cs.size()) ? 0 : 1;
}
