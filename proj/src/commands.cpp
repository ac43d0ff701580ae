#include "ssep/commands.hpp"

#include "ssep/acceptance.hpp"
#include "ssep/errors.hpp"
#include "ssep/stats.hpp"
#include "ssep/theory.hpp"

#include <unistd.h>

#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

namespace ssep::cli
{
    namespace
    {
        namespace fs = std::filesystem;

        void write_file(const fs::path& dir, const std::string& name, const std::string& bytes)
        {
            std::ofstream f(dir / name, std::ios::binary);
            f << bytes;
            if (!f)
                throw std::runtime_error("cannot write " + (dir / name).string());
        }

        nlohmann::json x_json(double x)
        {
            return std::isnan(x) ? nlohmann::json(nullptr) : nlohmann::json(x);
        }

        void say(const RunOptions& opt, const std::string& msg)
        {
            if (opt.log)
                *opt.log << msg << '\n' << std::flush;
        }

        nlohmann::json theory_json(const Manifest& m, const std::string& hash)
        {
            if (!m.profile)
                throw ConfigError(m.source + ": profile: theory needs a profile");
            nlohmann::json reports = nlohmann::json::array();
            for (double t : m.times())
            {
                for (const auto& [x, z] : m.levels(t))
                {
                    if (!std::isnan(x))
                    {
                        reports.push_back(theory::to_json(theory::make_report(*m.profile, t, x, m.trunc_eps)));
                        continue;
                    }
                    // explicit level: the quantities that do not need the lambda scaling
                    const theory::CovBound cb = theory::cov_bound(*m.profile, t, z);
                    reports.push_back({{"t", t},
                                       {"z", z},
                                       {"mean_exact", theory::mean_N_exact(*m.profile, t, z)},
                                       {"ss_bound", theory::ss_bound(*m.profile, t, z)},
                                       {"cov_bound_full", cb.full},
                                       {"cov_bound_simplified", cb.simplified},
                                       {"truncation_depth", theory::truncation_depth(*m.profile, t, z, m.trunc_eps)},
                                       {"truncation_eps", m.trunc_eps}});
                }
            }
            return {{"manifest_fnv1a", hash}, {"reports", reports}};
        }

        struct Point
        {
            double x;
            std::size_t level;
            stats::ExperimentResult result;
        };

        std::vector<Point> simulate_into(const Manifest& m, const std::string& hash, const fs::path& dir,
                                         const RunOptions& opt)
        {
            std::vector<Point> points;
            std::ofstream nd(dir / "replicas.ndjson", std::ios::binary);
            std::uint64_t index = 0;
            for (double t : m.times())
            {
                const auto levels = m.levels(t);
                for (std::size_t li = 0; li < levels.size(); ++li)
                {
                    const auto [x, z] = levels[li];
                    const sim::SimConfig cfg = m.sim_config(t, z);
                    stats::ExperimentOptions eo;
                    eo.threads = m.threads;
                    if (m.profile)
                    {
                        eo.poisson_lambda = theory::mean_N_exact(*m.profile, t, z);
                        if (!std::isnan(x))
                        {
                            try
                            {
                                const auto lim = theory::lambda_limit(*m.profile, x);
                                eo.gumbel = stats::GumbelRef{lim.M, lim.beta};
                            }
                            catch (const CapabilityError&)
                            {
                            }
                        }
                    }
                    const std::uint64_t point = index;
                    if (!m.record.empty())
                        eo.on_replica = [&nd, point](std::uint64_t r, const sim::ReplicaSummary& s)
                        {
                            nlohmann::json j = stats::to_json(s, r);
                            if (j.is_null())
                                return;
                            j["point"] = point;
                            nd << j.dump() << '\n';
                        };
                    say(opt, "simulate: t=" + std::to_string(t) + " z=" + std::to_string(z) +
                                 " R=" + std::to_string(m.replicas));
                    // distinct points draw from distinct seeds
                    stats::ExperimentResult r = stats::run_experiment(cfg, m.replicas, m.seed + index, eo);
                    points.push_back({x, li, std::move(r)});
                    ++index;
                }
            }
            nd.close();
            if (m.record.empty())
                fs::remove(dir / "replicas.ndjson");

            nlohmann::json ex = nlohmann::json::array();
            for (std::size_t i = 0; i < points.size(); ++i)
            {
                nlohmann::json j = stats::to_json(points[i].result);
                j["point"] = i;
                j["x"] = x_json(points[i].x);
                ex.push_back(std::move(j));
                const std::string name =
                    points.size() == 1 ? "histogram.csv" : "histogram_" + std::to_string(i) + ".csv";
                write_file(dir, name, stats::histogram_csv(points[i].result.N_hist));
            }
            nlohmann::json summary{{"manifest_fnv1a", hash}, {"experiments", ex}};
            write_file(dir, "summary.json", summary.dump(2) + "\n");
            return points;
        }

        nlohmann::json gap_json(const Manifest& m, const std::string& hash, const std::vector<Point>& points)
        {
            nlohmann::json trends = nlohmann::json::array();
            const std::size_t nlev = m.levels(m.times().front()).size();
            for (std::size_t li = 0; li < nlev; ++li)
            {
                std::vector<stats::ExperimentResult> rs;
                double x = 0.0;
                for (const Point& p : points)
                {
                    if (p.level != li)
                        continue;
                    rs.push_back(p.result);
                    x = p.x;
                }
                trends.push_back({{"x", x_json(x)}, {"trend", stats::to_json(stats::mean_var_gap(rs, *m.profile))}});
            }
            return {{"manifest_fnv1a", hash}, {"trends", trends}};
        }
    } // namespace

    std::map<std::string, std::string> manifest_files(const Manifest& m)
    {
        const std::string text = to_yaml(m);
        return {{"manifest.yaml", text}, {"manifest.fnv1a", hex64(fnv1a64(text)) + "\n"}};
    }

    int run_command(Command cmd, const Manifest& m, const fs::path& out, const RunOptions& opt)
    {
        if (fs::exists(out) && !opt.force)
            throw ConfigError(out.string() + ": output directory exists; pass --force to replace it");
        if (cmd == Command::sweep)
        {
            if (m.times().size() < 3)
                throw ConfigError(m.source + ": schedule: sweep needs at least 3 times");
            if (!m.profile)
                throw ConfigError(m.source + ": profile: sweep needs a profile");
        }

        const fs::path target = fs::absolute(out);
        const fs::path parent = target.parent_path();
        fs::create_directories(parent);
        const fs::path tmp = parent / ("." + target.filename().string() + ".tmp-" + std::to_string(::getpid()));
        fs::remove_all(tmp);
        fs::create_directory(tmp);

        int status = 0;
        try
        {
            const auto files = manifest_files(m);
            for (const auto& [name, bytes] : files)
                write_file(tmp, name, bytes);
            const std::string hash = hex64(fnv1a64(files.at("manifest.yaml")));

            switch (cmd)
            {
            case Command::theory:
                write_file(tmp, "theory.json", theory_json(m, hash).dump(2) + "\n");
                break;
            case Command::simulate:
                simulate_into(m, hash, tmp, opt);
                break;
            case Command::sweep:
            {
                write_file(tmp, "theory.json", theory_json(m, hash).dump(2) + "\n");
                const auto points = simulate_into(m, hash, tmp, opt);
                write_file(tmp, "gap.json", gap_json(m, hash, points).dump(2) + "\n");
                break;
            }
            case Command::validate:
            {
                acceptance::Options ao;
                ao.scale = m.acceptance_scale;
                ao.seed = m.seed;
                ao.threads = m.threads;
                ao.inject_seed_fault = opt.inject_seed_fault;
                ao.on_result = [&opt](const acceptance::Criterion& c) { say(opt, acceptance::line(c)); };
                const auto cs = acceptance::run_all(ao);
                nlohmann::json j = acceptance::to_json(cs, ao);
                j["manifest_fnv1a"] = hash;
                write_file(tmp, "validate.json", j.dump(2) + "\n");
                status = j["all_pass"].get<bool>() ? 0 : 1;
                break;
            }
            }

            if (fs::exists(target))
                fs::remove_all(target);
            fs::rename(tmp, target);
        }
        catch (...)
        {
            std::error_code ec;
            fs::remove_all(tmp, ec);
            throw;
        }
        return status;
    }
} // namespace ssep::cli
