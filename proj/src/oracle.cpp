#include "ssep/oracle.hpp"

#include "ssep/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

namespace ssep::oracle
{
    namespace
    {
        constexpr double kTolerance = 1e-13;
        constexpr double kPieceMean = 30.0; // uniformization steps per piece, on average

        struct Generator
        {
            std::vector<std::size_t> start; // CSR over source states
            std::vector<std::uint32_t> target;
            std::vector<double> stay; // 1 - exit / Lambda
            double step = 0.0;        // rate of each allowed move / Lambda
        };

        std::vector<std::uint64_t> enumerate(int sites, int particles)
        {
            if (particles == 0)
                return {0};
            const std::uint64_t limit = sites == 64 ? ~0ULL : (1ULL << sites) - 1;
            std::vector<std::uint64_t> out;
            std::uint64_t v = particles == 64 ? ~0ULL : (1ULL << particles) - 1;
            while (true)
            {
                out.push_back(v);
                // Gosper's hack: next larger integer with the same popcount
                const std::uint64_t c = v & (~v + 1);
                const std::uint64_t r = v + c;
                if (r == 0)
                    break;
                const std::uint64_t next = (((r ^ v) >> 2) / c) | r;
                if (next > limit)
                    break;
                v = next;
            }
            return out;
        }

        Generator build(const SmallSystem& sys, const std::vector<std::uint64_t>& states, double lambda)
        {
            Generator g;
            const double rate = 1.0 / (2.0 * sys.dim());
            g.step = rate / lambda;
            g.start.reserve(states.size() + 1);
            g.start.push_back(0);
            const auto& adj = sys.neighbours();
            for (std::uint64_t s : states)
            {
                std::size_t moves = 0;
                for (std::size_t i = 0; i < adj.size(); ++i)
                {
                    if (!(s >> i & 1))
                        continue;
                    for (int j : adj[i])
                    {
                        if (s >> j & 1)
                            continue;
                        const std::uint64_t next = s ^ (1ULL << i) ^ (1ULL << j);
                        const auto it = std::lower_bound(states.begin(), states.end(), next);
                        g.target.push_back(static_cast<std::uint32_t>(it - states.begin()));
                        ++moves;
                    }
                }
                g.start.push_back(g.target.size());
                g.stay.push_back(1.0 - static_cast<double>(moves) * g.step);
            }
            return g;
        }

        std::vector<double> step_once(const Generator& g, const std::vector<double>& p)
        {
            std::vector<double> out(p.size(), 0.0);
            for (std::size_t s = 0; s < p.size(); ++s)
            {
                if (p[s] == 0.0)
                    continue;
                out[s] += p[s] * g.stay[s];
                const double flow = p[s] * g.step;
                for (std::size_t k = g.start[s]; k < g.start[s + 1]; ++k)
                    out[g.target[k]] += flow;
            }
            return out;
        }
    } // namespace

    SmallSystem::SmallSystem(Box box, std::vector<Site> occupied) : d_(static_cast<int>(box.lo.size())), box_(std::move(box))
    {
        if (d_ < 1 || box_.hi.size() != box_.lo.size())
            throw DomainError("box needs matching lo/hi corners of dimension >= 1");
        std::int64_t total = 1;
        for (int i = 0; i < d_; ++i)
        {
            const std::int64_t side = box_.hi[static_cast<std::size_t>(i)] - box_.lo[static_cast<std::size_t>(i)] + 1;
            if (side < 1)
                throw DomainError("box has an empty side");
            total *= side;
            if (total > 64)
                throw CapabilityError("small systems are limited to 64 sites");
        }
        // row-major enumeration, first coordinate fastest
        Site x = box_.lo;
        for (std::int64_t k = 0; k < total; ++k)
        {
            sites_.push_back(x);
            for (int i = 0; i < d_; ++i)
            {
                const auto u = static_cast<std::size_t>(i);
                if (x[u] < box_.hi[u])
                {
                    ++x[u];
                    break;
                }
                x[u] = box_.lo[u];
            }
        }
        adj_.resize(sites_.size());
        for (std::size_t a = 0; a < sites_.size(); ++a)
        {
            for (int i = 0; i < d_; ++i)
            {
                for (int sgn : {1, -1})
                {
                    Site y = sites_[a];
                    y[static_cast<std::size_t>(i)] += sgn;
                    const int b = site_index(y);
                    if (b >= 0)
                        adj_[a].push_back(b);
                }
            }
        }
        for (const Site& y : occupied)
        {
            const int b = site_index(y);
            if (b < 0)
                throw DomainError("occupied site outside the box");
            if (initial_ >> b & 1)
                throw DomainError("site listed twice");
            initial_ |= 1ULL << b;
        }
    }

    SmallSystem SmallSystem::segment(std::int64_t n, std::vector<std::int64_t> occupied)
    {
        std::vector<Site> sites;
        for (std::int64_t x : occupied)
            sites.push_back({x});
        return SmallSystem(Box{{0}, {n - 1}}, std::move(sites));
    }

    int SmallSystem::particle_count() const noexcept { return std::popcount(initial_); }

    int SmallSystem::site_index(const Site& x) const
    {
        if (x.size() != static_cast<std::size_t>(d_))
            return -1;
        std::int64_t idx = 0, stride = 1;
        for (int i = 0; i < d_; ++i)
        {
            const auto u = static_cast<std::size_t>(i);
            if (x[u] < box_.lo[u] || x[u] > box_.hi[u])
                return -1;
            idx += (x[u] - box_.lo[u]) * stride;
            stride *= box_.hi[u] - box_.lo[u] + 1;
        }
        return static_cast<int>(idx);
    }

    sim::SimConfig SmallSystem::sim_config(double t_end, double z) const
    {
        sim::SimConfig c;
        c.box = box_;
        for (std::size_t i = 0; i < sites_.size(); ++i)
        {
            if (initial_ >> i & 1)
                c.initial_sites.push_back(sites_[i]);
        }
        c.t_end = t_end;
        c.z = z;
        return c;
    }

    std::size_t state_count(const SmallSystem& system)
    {
        const auto S = static_cast<std::uint64_t>(system.sites().size());
        const auto n = static_cast<std::uint64_t>(system.particle_count());
        // C(S, n) with early exit
        double c = 1.0;
        for (std::uint64_t k = 1; k <= n; ++k)
        {
            c = c * static_cast<double>(S - n + k) / static_cast<double>(k);
            if (c > static_cast<double>(kMaxStates) + 0.5)
                throw CapabilityError("state space of C(" + std::to_string(S) + ", " + std::to_string(n) +
                                      ") configurations exceeds " + std::to_string(kMaxStates));
        }
        return static_cast<std::size_t>(std::llround(c));
    }

    ExactLaw exact_distribution(const SmallSystem& system, double t, double rate_factor)
    {
        if (!(t >= 0.0) || !std::isfinite(t))
            throw DomainError("t must be finite and nonnegative");
        if (!(rate_factor >= 1.0))
            throw DomainError("rate_factor must be >= 1");
        state_count(system);
        ExactLaw law;
        law.states = enumerate(static_cast<int>(system.sites().size()), system.particle_count());
        law.prob.assign(law.states.size(), 0.0);
        const auto init = std::lower_bound(law.states.begin(), law.states.end(), system.initial_mask());
        law.prob[static_cast<std::size_t>(init - law.states.begin())] = 1.0;
        const double lambda = rate_factor * std::max(system.particle_count(), 1);
        if (t == 0.0)
            return law;

        const Generator g = build(system, law.states, lambda);
        const auto pieces = static_cast<std::int64_t>(std::ceil(lambda * t / kPieceMean));
        const double mu = lambda * t / static_cast<double>(pieces);
        const double tol = kTolerance / static_cast<double>(pieces);
        for (std::int64_t piece = 0; piece < pieces; ++piece)
        {
            std::vector<double> term = law.prob;
            std::vector<double> acc(term.size(), 0.0);
            double w = std::exp(-mu); // Poisson(mu) weight of k
            for (std::int64_t k = 0;; ++k)
            {
                for (std::size_t s = 0; s < acc.size(); ++s)
                    acc[s] += w * term[s];
                ++law.terms;
                const double next = w * mu / static_cast<double>(k + 1);
                // tail beyond k is at most next / (1 - mu / (k + 2)) once k + 2 > mu
                if (static_cast<double>(k + 2) > 2.0 * mu)
                {
                    const double tail = next / (1.0 - mu / static_cast<double>(k + 2));
                    if (tail < tol)
                    {
                        law.poisson_tail += tail;
                        break;
                    }
                }
                term = step_once(g, term);
                w = next;
            }
            law.prob = std::move(acc);
        }
        return law;
    }

    Marginals marginals_of(const SmallSystem& system, const ExactLaw& law)
    {
        const std::size_t S = system.sites().size();
        Marginals m;
        m.mean.assign(S, 0.0);
        std::vector<std::vector<double>> joint(S, std::vector<double>(S, 0.0));
        for (std::size_t k = 0; k < law.states.size(); ++k)
        {
            const double p = law.prob[k];
            const std::uint64_t s = law.states[k];
            for (std::size_t i = 0; i < S; ++i)
            {
                if (!(s >> i & 1))
                    continue;
                m.mean[i] += p;
                for (std::size_t j = 0; j < S; ++j)
                {
                    if (s >> j & 1)
                        joint[i][j] += p;
                }
            }
        }
        m.cov.assign(S, std::vector<double>(S, 0.0));
        m.max_offdiag_cov = S > 1 ? -1.0 : 0.0;
        for (std::size_t i = 0; i < S; ++i)
        {
            for (std::size_t j = 0; j < S; ++j)
            {
                m.cov[i][j] = joint[i][j] - m.mean[i] * m.mean[j];
                if (i != j)
                    m.max_offdiag_cov = std::max(m.max_offdiag_cov, m.cov[i][j]);
            }
        }
        m.negatively_correlated = m.max_offdiag_cov <= 1e-12;
        return m;
    }

    Marginals exact_marginals(const SmallSystem& system, double t)
    {
        return marginals_of(system, exact_distribution(system, t));
    }

    std::vector<double> law_of_N(const SmallSystem& system, const ExactLaw& law, double z)
    {
        std::uint64_t above = 0;
        for (std::size_t i = 0; i < system.sites().size(); ++i)
        {
            if (static_cast<double>(system.sites()[i][0]) > z)
                above |= 1ULL << i;
        }
        std::vector<double> out(static_cast<std::size_t>(system.particle_count()) + 1, 0.0);
        for (std::size_t k = 0; k < law.states.size(); ++k)
            out[static_cast<std::size_t>(std::popcount(law.states[k] & above))] += law.prob[k];
        return out;
    }

    double total_variation(const std::vector<double>& p, const std::vector<double>& q)
    {
        const std::size_t n = std::max(p.size(), q.size());
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
        {
            const double a = i < p.size() ? p[i] : 0.0;
            const double b = i < q.size() ? q[i] : 0.0;
            s += std::abs(a - b);
        }
        return 0.5 * s;
    }
} // namespace ssep::oracle
