#pragma once

#include "ssep/simulator.hpp"

#include <cstdint>
#include <vector>

namespace ssep::oracle
{
    using sim::Box;
    using sim::Site;

    /// SSEP restricted to a box of Z^d; jumps leaving the box are suppressed.
    class SmallSystem
    {
    public:
        SmallSystem(Box box, std::vector<Site> occupied);
        /// Sites 0..n-1 of Z, particles on `occupied`.
        static SmallSystem segment(std::int64_t n, std::vector<std::int64_t> occupied);

        int dim() const noexcept { return d_; }
        const Box& box() const noexcept { return box_; }
        const std::vector<Site>& sites() const noexcept { return sites_; }
        const std::vector<std::vector<int>>& neighbours() const noexcept { return adj_; }
        std::uint64_t initial_mask() const noexcept { return initial_; }
        int particle_count() const noexcept;
        int site_index(const Site& x) const; // -1 outside the box

        /// Simulator configuration with the same box and initial particles.
        sim::SimConfig sim_config(double t_end, double z) const;

    private:
        int d_;
        Box box_;
        std::vector<Site> sites_;
        std::vector<std::vector<int>> adj_;
        std::uint64_t initial_ = 0;
    };

    inline constexpr std::size_t kMaxStates = 100'000;

    struct ExactLaw
    {
        std::vector<std::uint64_t> states; // occupation bit masks, ascending
        std::vector<double> prob;
        double poisson_tail = 0.0; // bound on the neglected uniformization mass
        std::int64_t terms = 0;
    };

    /// Number of C(sites, particles) configurations; CapabilityError above kMaxStates.
    std::size_t state_count(const SmallSystem& system);

    /// e^{tQ} delta_init by uniformization at rate rate_factor * particle_count.
    /// Any rate_factor >= 1 gives the same law; the tests compare 1 and 2.
    ExactLaw exact_distribution(const SmallSystem& system, double t, double rate_factor = 1.0);

    struct Marginals
    {
        std::vector<double> mean;             // E[eta_t(x)] per site
        std::vector<std::vector<double>> cov; // Cov(eta_t(x), eta_t(y))
        double max_offdiag_cov = 0.0;
        bool negatively_correlated = true; // every off-diagonal Cov <= 1e-12
    };

    Marginals exact_marginals(const SmallSystem& system, double t);
    Marginals marginals_of(const SmallSystem& system, const ExactLaw& law);

    /// Law of N_t = #{occupied x : x_1 > z}, indexed by k = 0..particle_count.
    std::vector<double> law_of_N(const SmallSystem& system, const ExactLaw& law, double z);

    double total_variation(const std::vector<double>& p, const std::vector<double>& q);
} // namespace ssep::oracle
