#pragma once

#include "ssep/profile.hpp"
#include "ssep/rng.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace ssep::sim
{
    using Site = std::vector<std::int64_t>;

    enum class Dynamics
    {
        exclusion,
        independent,
    };

    enum class Init
    {
        deterministic,
        bernoulli,
    };

    /// Closed box [lo_i, hi_i]; jumps that would leave it are suppressed.
    struct Box
    {
        Site lo;
        Site hi;
    };

    struct SimConfig
    {
        std::optional<Profile> profile;
        /// Explicit initial particles; replaces the profile region when nonempty.
        std::vector<Site> initial_sites;
        double t_end = 0.0;
        double z = 0.0;
        double trunc_eps = 1e-4;
        /// Overrides the truncation depth computed from trunc_eps.
        std::optional<std::int64_t> depth;
        Dynamics dynamics = Dynamics::exclusion;
        Init init = Init::deterministic;
        std::uint64_t seed = 0;
        std::vector<std::pair<Site, Site>> record;
        std::vector<Site> observe;
        int order_stats_m_max = 2;
        std::optional<Box> box;
        std::int64_t max_particles = 50'000'000;

        int dim() const;
    };

    /// Sentinel for X^(m) when fewer than m + 1 particles exist.
    inline constexpr std::int64_t kMinusInfinity = std::numeric_limits<std::int64_t>::min();

    struct ReplicaSummary
    {
        std::int64_t N = 0;
        std::vector<std::int64_t> X; // X^(0) >= X^(1) >= ...
        std::vector<std::pair<std::uint32_t, std::uint32_t>> pair_indicators;
        std::vector<std::uint32_t> site_indicators;
        std::uint64_t wall_events = 0; // jump attempts
        std::uint64_t moves = 0;       // executed jumps
    };

    /// Occupied sites of Z^d stored in a dense window that grows on demand.
    class LatticeState
    {
    public:
        LatticeState(int d, Dynamics dynamics, std::optional<Box> box = std::nullopt);

        int dim() const noexcept { return d_; }
        Dynamics dynamics() const noexcept { return dynamics_; }
        std::int64_t particle_count() const noexcept { return static_cast<std::int64_t>(count_); }
        double clock = 0.0;

        /// Throws DomainError on a doubly occupied site in exclusion mode or a site outside the box.
        void add(std::span<const std::int64_t> x);
        /// Grow the exclusion window to cover [lo, hi] (no-op for independent dynamics or a box).
        void reserve(std::span<const std::int64_t> lo, std::span<const std::int64_t> hi);
        /// Number of particles at x (0/1 under exclusion).
        std::uint32_t occupancy(std::span<const std::int64_t> x) const;
        /// First coordinates of all particles (with multiplicity).
        std::vector<std::int64_t> first_coordinates() const;
        std::vector<Site> sites() const;

        /// Advance to `until` with constant total attempt rate particle_count.
        void evolve(double until, CounterRng& rng, std::uint64_t& attempts, std::uint64_t& moves);

        /// Expensive structural check: set cardinality equals particle count, no double occupancy.
        bool consistent() const;

    private:
        static constexpr std::uint8_t kVacant = 0;
        static constexpr std::uint8_t kOccupied = 1;
        static constexpr std::uint8_t kHalo = 2;
        static constexpr std::uint8_t kWall = 3;

        void ensure_window(std::span<const std::int64_t> x);
        void rebuild(std::vector<std::int64_t> lo, std::vector<std::int64_t> ext);
        std::int64_t encode(std::span<const std::int64_t> x) const;
        void decode(std::int64_t idx, std::int64_t* out) const;
        bool in_window(std::span<const std::int64_t> x) const;
        bool in_box(std::span<const std::int64_t> x) const;
        void grow_around(std::int64_t idx);

        int d_;
        Dynamics dynamics_;
        std::optional<Box> box_;
        std::size_t count_ = 0;

        // exclusion: dense window [lo_, lo_ + ext_) with a one-cell halo or wall ring
        std::vector<std::int64_t> lo_, ext_, stride_;
        std::vector<std::uint8_t> grid_;
        std::vector<std::int64_t> cell_; // per-particle cell index
        std::vector<std::int64_t> offset_; // 2d neighbour offsets

        // independent: raw coordinates, row-major n x d
        std::vector<std::int64_t> coords_;
    };

    /// Truncation depth L used for the profile region (x_1 >= -L).
    std::int64_t initial_depth(const SimConfig& config);
    /// Number of particles a deterministic initial condition places.
    std::int64_t initial_particle_count(const SimConfig& config);

    LatticeState init_state(const SimConfig& config, CounterRng& rng);
    ReplicaSummary run(LatticeState& state, const SimConfig& config, CounterRng& rng);
    /// Stream seed xor replica for both the initial condition and the dynamics.
    ReplicaSummary run_replica(const SimConfig& config, std::uint64_t replica);

    struct OccupationEstimate
    {
        Site site;
        double mean = 0.0;
        double se = 0.0;
    };
    std::vector<OccupationEstimate> estimate_occupation(const SimConfig& config, const std::vector<Site>& sites,
                                                        std::int64_t replicas, int threads = 1);
} // namespace ssep::sim
