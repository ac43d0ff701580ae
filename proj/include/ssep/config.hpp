#pragma once

#include "ssep/profile.hpp"
#include "ssep/simulator.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ssep::cli
{
    /// Geometric ladder t0, t0 * ratio, ..., n values.
    struct Schedule
    {
        double t0 = 0.0;
        double ratio = 1.0;
        int n = 1;
    };

    struct Manifest
    {
        std::string source = "<config>"; // not serialized

        std::optional<Profile> profile;
        std::vector<sim::Site> initial_sites;
        std::optional<sim::Box> box;

        std::optional<Schedule> schedule; // either a ladder ...
        std::vector<double> t;            // ... or explicit times
        std::vector<double> x{0.0};       // Gumbel-scale positions, z = b_t (x + a_t)
        std::optional<double> z;          // explicit level, replaces x

        double trunc_eps = 1e-4;
        std::optional<std::int64_t> depth;
        sim::Dynamics dynamics = sim::Dynamics::exclusion;
        sim::Init init = sim::Init::deterministic;
        std::uint64_t seed = 1;
        std::int64_t replicas = 1000;
        int threads = 1;
        int order_stats_m_max = 2;
        std::vector<std::pair<sim::Site, sim::Site>> record;
        std::int64_t max_particles = 50'000'000;
        double acceptance_scale = 1.0; // replica multiplier for `validate`

        int dim() const;
        std::vector<double> times() const;
        /// (x or NaN, z) pairs at time t.
        std::vector<std::pair<double, double>> levels(double t) const;
        sim::SimConfig sim_config(double t, double z) const;
    };

    /// Strict parse: unknown keys and bad values raise ConfigError naming source, line and field.
    Manifest parse_manifest(const std::string& text, const std::string& source = "<config>");
    Manifest load_manifest(const std::string& path);
    /// Canonical YAML; parse(to_yaml(m)) reproduces m.
    std::string to_yaml(const Manifest& m);

    std::uint64_t fnv1a64(std::string_view bytes);
    std::string hex64(std::uint64_t v);
} // namespace ssep::cli
