#include "ssep/commands.hpp"
#include "ssep/config.hpp"
#include "ssep/errors.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <optional>

int main(int argc, char** argv)
{
    CLI::App app{"Exclusion-process extremes: theory, simulation and validation"};
    app.require_subcommand(1);

    std::string config, out;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> replicas;
    std::optional<int> threads;
    bool force = false, inject = false;

    const std::pair<const char*, ssep::cli::Command> cmds[] = {
        {"theory", ssep::cli::Command::theory},
        {"simulate", ssep::cli::Command::simulate},
        {"validate", ssep::cli::Command::validate},
        {"sweep", ssep::cli::Command::sweep},
    };
    std::optional<ssep::cli::Command> chosen;
    for (const auto& [name, cmd] : cmds)
    {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config, "manifest (YAML)")->check(CLI::ExistingFile);
        sub->add_option("--out", out, "output directory")->required();
        sub->add_option("--seed", seed, "override manifest seed");
        sub->add_option("--replicas", replicas, "override replica count")->check(CLI::PositiveNumber);
        sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
        sub->add_flag("--force", force, "replace an existing output directory");
        sub->add_flag("--inject-seed-fault", inject)->group("");
        const ssep::cli::Command c = cmd;
        sub->callback([&chosen, c] { chosen = c; });
    }
    CLI11_PARSE(app, argc, argv);

    try
    {
        ssep::cli::Manifest m;
        if (!config.empty())
            m = ssep::cli::load_manifest(config);
        else if (*chosen == ssep::cli::Command::validate)
        {
            // the suite fixes its own systems; the manifest only carries seed, threads and scale
            m.profile = ssep::Profile::linear(2);
            m.t = {100.0};
            m.seed = 20240611;
        }
        else
            throw ssep::ConfigError("--config is required for this command");
        if (seed)
            m.seed = *seed;
        if (replicas)
            m.replicas = *replicas;
        if (threads)
            m.threads = *threads;
        ssep::cli::RunOptions ro;
        ro.force = force;
        ro.inject_seed_fault = inject;
        ro.log = *chosen == ssep::cli::Command::validate ? &std::cout : &std::cerr;
        return ssep::cli::run_command(*chosen, m, out, ro);
    }
    catch (const std::exception& e)
    {
        std::cerr << "ssep: " << e.what() << '\n';
        return 2;
    }
}
