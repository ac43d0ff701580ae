#include "ssep/simulator.hpp"

#include "ssep/errors.hpp"
#include "ssep/theory.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <mutex>
#include <thread>

namespace ssep::sim
{
    namespace
    {
        constexpr std::int64_t kMaxWindowCells = 1'500'000'000;

        std::int64_t margin_for(double t_end, int d)
        {
            return 8 + static_cast<std::int64_t>(3.0 * std::sqrt(t_end / std::max(d, 1)));
        }

        // One batch of events with the dimension known at compile time (fast division by 2D).
        template <int D>
        void exclusion_events(std::uint64_t events, std::uint64_t n, CounterRng& rng, std::vector<std::uint8_t>& grid,
                              std::vector<std::int64_t>& cell, const std::vector<std::int64_t>& offset,
                              std::uint64_t& moves, std::uint64_t& done, std::int64_t& halo_hit)
        {
            constexpr std::uint64_t two_d = 2 * D;
            std::int64_t off[two_d];
            for (std::uint64_t i = 0; i < two_d; ++i)
                off[i] = offset[i];
            std::uint8_t* g = grid.data();
            std::int64_t* c = cell.data();
            const std::uint64_t slots = n * two_d;
            std::uint64_t mv = 0;
            // local copy: byte stores into the grid would otherwise force the counter through memory
            CounterRng local = rng;
            for (std::uint64_t e = 0; e < events; ++e)
            {
                const std::uint64_t k = local.below(slots);
                const std::uint64_t p = k / two_d;
                const std::uint64_t dir = k - p * two_d;
                const std::int64_t cur = c[p];
                const std::int64_t tgt = cur + off[dir];
                const std::uint8_t v = g[tgt];
                if (v == 2) [[unlikely]]
                {
                    // leave the move to the caller, which grows the window and replays it
                    halo_hit = static_cast<std::int64_t>(p * two_d + dir);
                    done += e;
                    moves += mv;
                    rng = local;
                    return;
                }
                // branch-free accept: about half of all attempts are blocked, unpredictably
                const std::uint8_t ok = v == 0;
                assert(g[cur] == 1 && (ok || v != 0));
                g[cur] = static_cast<std::uint8_t>(1 - ok);
                g[tgt] = static_cast<std::uint8_t>(v | ok);
                c[p] = ok ? tgt : cur;
                mv += ok;
            }
            done += events;
            moves += mv;
            rng = local;
            halo_hit = -1;
        }

        using BatchFn = void (*)(std::uint64_t, std::uint64_t, CounterRng&, std::vector<std::uint8_t>&,
                                 std::vector<std::int64_t>&, const std::vector<std::int64_t>&, std::uint64_t&,
                                 std::uint64_t&, std::int64_t&);

        BatchFn batch_for(int d)
        {
            switch (d)
            {
            case 1: return &exclusion_events<1>;
            case 2: return &exclusion_events<2>;
            case 3: return &exclusion_events<3>;
            case 4: return &exclusion_events<4>;
            case 5: return &exclusion_events<5>;
            case 6: return &exclusion_events<6>;
            case 7: return &exclusion_events<7>;
            case 8: return &exclusion_events<8>;
            default: throw CapabilityError("exclusion dynamics support d <= 8");
            }
        }

        std::uint64_t poisson_count(double mean, CounterRng& rng)
        {
            if (mean <= 0.0)
                return 0;
            std::poisson_distribution<std::uint64_t> dist(mean);
            return dist(rng);
        }
    } // namespace

    int SimConfig::dim() const
    {
        if (!initial_sites.empty())
            return static_cast<int>(initial_sites.front().size());
        if (profile)
            return profile->dim();
        throw ConfigError("configuration has neither a profile nor initial sites");
    }

    LatticeState::LatticeState(int d, Dynamics dynamics, std::optional<Box> box)
        : d_(d), dynamics_(dynamics), box_(std::move(box))
    {
        if (d < 1)
            throw DomainError("lattice dimension must be >= 1");
        if (box_)
        {
            if (box_->lo.size() != static_cast<std::size_t>(d) || box_->hi.size() != static_cast<std::size_t>(d))
                throw DomainError("box dimension does not match the lattice");
            for (int i = 0; i < d; ++i)
            {
                if (box_->hi[static_cast<std::size_t>(i)] < box_->lo[static_cast<std::size_t>(i)])
                    throw DomainError("box has an empty side");
            }
        }
        if (dynamics_ == Dynamics::exclusion)
        {
            if (box_)
            {
                std::vector<std::int64_t> ext(static_cast<std::size_t>(d));
                for (int i = 0; i < d; ++i)
                    ext[static_cast<std::size_t>(i)] =
                        box_->hi[static_cast<std::size_t>(i)] - box_->lo[static_cast<std::size_t>(i)] + 1;
                rebuild(box_->lo, ext);
            }
            else
            {
                rebuild(std::vector<std::int64_t>(static_cast<std::size_t>(d), -4),
                        std::vector<std::int64_t>(static_cast<std::size_t>(d), 9));
            }
        }
    }

    bool LatticeState::in_box(std::span<const std::int64_t> x) const
    {
        if (!box_)
            return true;
        for (int i = 0; i < d_; ++i)
        {
            const auto u = static_cast<std::size_t>(i);
            if (x[u] < box_->lo[u] || x[u] > box_->hi[u])
                return false;
        }
        return true;
    }

    bool LatticeState::in_window(std::span<const std::int64_t> x) const
    {
        for (int i = 0; i < d_; ++i)
        {
            const auto u = static_cast<std::size_t>(i);
            if (x[u] < lo_[u] || x[u] >= lo_[u] + ext_[u])
                return false;
        }
        return true;
    }

    std::int64_t LatticeState::encode(std::span<const std::int64_t> x) const
    {
        std::int64_t idx = 0;
        for (int i = 0; i < d_; ++i)
        {
            const auto u = static_cast<std::size_t>(i);
            idx += (x[u] - lo_[u] + 1) * stride_[u];
        }
        return idx;
    }

    void LatticeState::decode(std::int64_t idx, std::int64_t* out) const
    {
        for (int i = d_ - 1; i >= 0; --i)
        {
            const auto u = static_cast<std::size_t>(i);
            out[u] = idx / stride_[u] - 1 + lo_[u];
            idx %= stride_[u];
        }
    }

    void LatticeState::rebuild(std::vector<std::int64_t> lo, std::vector<std::int64_t> ext)
    {
        // decode current particles before the geometry changes
        std::vector<std::int64_t> old(cell_.size() * static_cast<std::size_t>(d_));
        for (std::size_t p = 0; p < cell_.size(); ++p)
            decode(cell_[p], old.data() + p * static_cast<std::size_t>(d_));

        std::vector<std::int64_t> stride(static_cast<std::size_t>(d_));
        std::int64_t total = 1;
        for (int i = 0; i < d_; ++i)
        {
            const auto u = static_cast<std::size_t>(i);
            stride[u] = total;
            total *= ext[u] + 2;
            if (total > kMaxWindowCells)
                throw ConfigError("lattice window would exceed " + std::to_string(kMaxWindowCells) + " cells");
        }
        lo_ = std::move(lo);
        ext_ = std::move(ext);
        stride_ = std::move(stride);
        grid_.assign(static_cast<std::size_t>(total), kVacant);

        // ring cells: halo on the open lattice, wall inside a box
        const std::uint8_t ring = box_ ? kWall : kHalo;
        for (std::int64_t idx = 0; idx < total; ++idx)
        {
            std::int64_t rem = idx;
            bool edge = false;
            for (int i = d_ - 1; i >= 0; --i)
            {
                const auto u = static_cast<std::size_t>(i);
                const std::int64_t q = rem / stride_[u];
                rem %= stride_[u];
                edge = edge || q == 0 || q == ext_[u] + 1;
            }
            if (edge)
                grid_[static_cast<std::size_t>(idx)] = ring;
        }

        offset_.assign(static_cast<std::size_t>(2 * d_), 0);
        for (int i = 0; i < d_; ++i)
        {
            offset_[static_cast<std::size_t>(2 * i)] = stride_[static_cast<std::size_t>(i)];
            offset_[static_cast<std::size_t>(2 * i + 1)] = -stride_[static_cast<std::size_t>(i)];
        }

        for (std::size_t p = 0; p < cell_.size(); ++p)
        {
            const std::int64_t idx = encode({old.data() + p * static_cast<std::size_t>(d_), static_cast<std::size_t>(d_)});
            cell_[p] = idx;
            grid_[static_cast<std::size_t>(idx)] = kOccupied;
        }
    }

    void LatticeState::ensure_window(std::span<const std::int64_t> x)
    {
        if (in_window(x))
            return;
        if (box_)
            throw DomainError("site outside the box");
        std::vector<std::int64_t> lo = lo_, ext = ext_;
        for (int i = 0; i < d_; ++i)
        {
            const auto u = static_cast<std::size_t>(i);
            const std::int64_t margin = std::max<std::int64_t>(8, ext_[u] / 2);
            std::int64_t hi = lo_[u] + ext_[u] - 1;
            if (x[u] < lo_[u])
                lo[u] = x[u] - margin;
            if (x[u] > hi)
                hi = x[u] + margin;
            ext[u] = hi - lo[u] + 1;
        }
        rebuild(std::move(lo), std::move(ext));
    }

    void LatticeState::reserve(std::span<const std::int64_t> lo, std::span<const std::int64_t> hi)
    {
        if (dynamics_ == Dynamics::independent || box_)
            return;
        std::vector<std::int64_t> nlo = lo_, ext = ext_;
        bool grow = false;
        for (int i = 0; i < d_; ++i)
        {
            const auto u = static_cast<std::size_t>(i);
            const std::int64_t a = std::min(lo[u], lo_[u]);
            const std::int64_t b = std::max(hi[u], lo_[u] + ext_[u] - 1);
            grow = grow || a != lo_[u] || b - a + 1 != ext_[u];
            nlo[u] = a;
            ext[u] = b - a + 1;
        }
        if (grow)
            rebuild(std::move(nlo), std::move(ext));
    }

    void LatticeState::grow_around(std::int64_t idx)
    {
        std::vector<std::int64_t> x(static_cast<std::size_t>(d_));
        decode(idx, x.data());
        ensure_window(x);
    }

    void LatticeState::add(std::span<const std::int64_t> x)
    {
        if (x.size() != static_cast<std::size_t>(d_))
            throw DomainError("site dimension does not match the lattice");
        if (!in_box(x))
            throw DomainError("initial site outside the box");
        if (dynamics_ == Dynamics::independent)
        {
            coords_.insert(coords_.end(), x.begin(), x.end());
            ++count_;
            return;
        }
        ensure_window(x);
        const std::int64_t idx = encode(x);
        if (grid_[static_cast<std::size_t>(idx)] != kVacant)
            throw DomainError("site already occupied");
        grid_[static_cast<std::size_t>(idx)] = kOccupied;
        cell_.push_back(idx);
        ++count_;
    }

    std::uint32_t LatticeState::occupancy(std::span<const std::int64_t> x) const
    {
        if (x.size() != static_cast<std::size_t>(d_))
            throw DomainError("site dimension does not match the lattice");
        if (dynamics_ == Dynamics::independent)
        {
            std::uint32_t n = 0;
            for (std::size_t p = 0; p < count_; ++p)
            {
                if (std::equal(x.begin(), x.end(), coords_.begin() + static_cast<std::ptrdiff_t>(p * d_)))
                    ++n;
            }
            return n;
        }
        if (!in_window(x))
            return 0;
        return grid_[static_cast<std::size_t>(encode(x))] == kOccupied ? 1 : 0;
    }

    std::vector<std::int64_t> LatticeState::first_coordinates() const
    {
        std::vector<std::int64_t> out(count_);
        if (dynamics_ == Dynamics::independent)
        {
            for (std::size_t p = 0; p < count_; ++p)
                out[p] = coords_[p * static_cast<std::size_t>(d_)];
            return out;
        }
        const std::int64_t ring = ext_[0] + 2;
        for (std::size_t p = 0; p < count_; ++p)
            out[p] = cell_[p] % ring - 1 + lo_[0];
        return out;
    }

    std::vector<Site> LatticeState::sites() const
    {
        std::vector<Site> out(count_, Site(static_cast<std::size_t>(d_)));
        for (std::size_t p = 0; p < count_; ++p)
        {
            if (dynamics_ == Dynamics::independent)
                std::copy_n(coords_.begin() + static_cast<std::ptrdiff_t>(p * d_), d_, out[p].begin());
            else
                decode(cell_[p], out[p].data());
        }
        return out;
    }

    bool LatticeState::consistent() const
    {
        if (dynamics_ == Dynamics::independent)
            return coords_.size() == count_ * static_cast<std::size_t>(d_);
        std::size_t occupied = 0;
        for (std::uint8_t v : grid_)
            occupied += v == kOccupied ? 1 : 0;
        if (occupied != count_ || cell_.size() != count_)
            return false;
        for (std::int64_t c : cell_)
        {
            if (grid_[static_cast<std::size_t>(c)] != kOccupied)
                return false;
        }
        return true;
    }

    void LatticeState::evolve(double until, CounterRng& rng, std::uint64_t& attempts, std::uint64_t& moves)
    {
        if (until < clock)
            throw DomainError("cannot evolve backwards in time");
        const double dt = until - clock;
        clock = until;
        if (count_ == 0 || dt == 0.0)
            return;
        // Each particle attempts jumps at rate 1, so the attempt count over dt is Poisson(n dt)
        // and the attempts are i.i.d. uniform (particle, direction) marks.
        const std::uint64_t events = poisson_count(static_cast<double>(count_) * dt, rng);
        attempts += events;
        const std::uint64_t n = count_;
        const std::uint64_t two_d = 2 * static_cast<std::uint64_t>(d_);

        if (dynamics_ == Dynamics::independent)
        {
            for (std::uint64_t e = 0; e < events; ++e)
            {
                const std::uint64_t k = rng.below(n * two_d);
                const std::uint64_t p = k / two_d;
                const std::uint64_t dir = k % two_d;
                const std::size_t axis = dir / 2;
                std::int64_t& xi = coords_[p * static_cast<std::size_t>(d_) + axis];
                const std::int64_t next = xi + ((dir & 1) ? -1 : 1);
                if (box_ && (next < box_->lo[axis] || next > box_->hi[axis]))
                    continue;
                xi = next;
                ++moves;
            }
            return;
        }

        const BatchFn batch = batch_for(d_);
        std::uint64_t done = 0;
        while (done < events)
        {
            std::int64_t halo = -1;
            batch(events - done, n, rng, grid_, cell_, offset_, moves, done, halo);
            if (halo < 0)
                break;
            // grow the window around the blocked target, then perform that move
            const auto p = static_cast<std::size_t>(halo) / two_d;
            const auto dir = static_cast<std::size_t>(halo) % two_d;
            grow_around(cell_[p] + offset_[dir]);
            const std::int64_t tgt = cell_[p] + offset_[dir];
            grid_[static_cast<std::size_t>(cell_[p])] = kVacant;
            grid_[static_cast<std::size_t>(tgt)] = kOccupied;
            cell_[p] = tgt;
            ++moves;
            ++done;
        }
    }

    std::int64_t initial_depth(const SimConfig& config)
    {
        if (!config.initial_sites.empty())
            return 0;
        if (!config.profile)
            throw ConfigError("configuration has neither a profile nor initial sites");
        if (config.depth)
        {
            if (*config.depth < 0)
                throw ConfigError("depth must be nonnegative");
            return *config.depth;
        }
        if (!(config.trunc_eps > 0.0))
            throw ConfigError("trunc_eps must be positive");
        return theory::truncation_depth(*config.profile, config.t_end, config.z, config.trunc_eps);
    }

    std::int64_t initial_particle_count(const SimConfig& config)
    {
        if (!config.initial_sites.empty())
            return static_cast<std::int64_t>(config.initial_sites.size());
        const std::int64_t L = initial_depth(config);
        std::int64_t n = 0;
        for (std::int64_t j = 0; j <= L; ++j)
        {
            n += cross_section_count(*config.profile, j);
            if (n > config.max_particles)
                break;
        }
        return n;
    }

    LatticeState init_state(const SimConfig& config, CounterRng& rng)
    {
        if (!(config.t_end >= 0.0))
            throw ConfigError("t_end must be nonnegative");
        const int d = config.dim();
        LatticeState state(d, config.dynamics, config.box);

        if (!config.initial_sites.empty())
        {
            for (const Site& s : config.initial_sites)
                state.add(s);
            return state;
        }

        const Profile& profile = *config.profile;
        const std::int64_t L = initial_depth(config);
        const std::int64_t count = initial_particle_count(config);
        if (count > config.max_particles)
        {
            throw ConfigError("initial condition needs " + std::to_string(count) + "+ particles (depth " +
                              std::to_string(L) + "), above the budget of " + std::to_string(config.max_particles));
        }

        // pre-size the window: the region plus a diffusive margin
        if (config.dynamics == Dynamics::exclusion && !config.box)
        {
            const std::int64_t m = margin_for(config.t_end, d);
            Site lo(static_cast<std::size_t>(d)), hi(static_cast<std::size_t>(d));
            lo[0] = -L - m;
            hi[0] = m;
            for (int i = 2; i <= d; ++i)
            {
                const std::int64_t G = profile.shape(i).floor_at(static_cast<double>(L));
                lo[static_cast<std::size_t>(i - 1)] = -G - m;
                hi[static_cast<std::size_t>(i - 1)] = G + m;
            }
            state.reserve(lo, hi);
        }

        Site x(static_cast<std::size_t>(d));
        std::vector<std::int64_t> G(static_cast<std::size_t>(d), 0);
        for (std::int64_t j = 0; j <= L; ++j)
        {
            const double rho = profile.slab_weight(j);
            x[0] = -j;
            for (int i = 2; i <= d; ++i)
            {
                G[static_cast<std::size_t>(i - 1)] = profile.shape(i).floor_at(static_cast<double>(j));
                x[static_cast<std::size_t>(i - 1)] = -G[static_cast<std::size_t>(i - 1)];
            }
            while (true)
            {
                const bool keep = config.init == Init::deterministic || rng.uniform() < rho;
                if (keep)
                    state.add(x);
                int i = 1;
                for (; i < d; ++i)
                {
                    const auto u = static_cast<std::size_t>(i);
                    if (x[u] < G[u])
                    {
                        ++x[u];
                        break;
                    }
                    x[u] = -G[u];
                }
                if (i == d)
                    break;
            }
        }
        return state;
    }

    ReplicaSummary run(LatticeState& state, const SimConfig& config, CounterRng& rng)
    {
        if (state.clock > config.t_end)
            throw DomainError("state clock is already past t_end");
        ReplicaSummary out;
        state.evolve(config.t_end, rng, out.wall_events, out.moves);

        std::vector<std::int64_t> first = state.first_coordinates();
        for (std::int64_t v : first)
            out.N += static_cast<double>(v) > config.z ? 1 : 0;

        const int m_max = std::max(config.order_stats_m_max, 0);
        const auto keep = std::min<std::size_t>(first.size(), static_cast<std::size_t>(m_max) + 1);
        std::partial_sort(first.begin(), first.begin() + static_cast<std::ptrdiff_t>(keep), first.end(),
                          std::greater<>());
        out.X.assign(static_cast<std::size_t>(m_max) + 1, kMinusInfinity);
        std::copy_n(first.begin(), keep, out.X.begin());
        for (int m = 0; m <= m_max; ++m)
        {
            const std::int64_t xm = out.X[static_cast<std::size_t>(m)];
            const bool below = xm == kMinusInfinity || static_cast<double>(xm) <= config.z;
            if (below != (out.N <= m))
                throw std::logic_error("order statistics disagree with N_t at m = " + std::to_string(m));
        }

        for (const auto& [a, b] : config.record)
            out.pair_indicators.emplace_back(state.occupancy(a), state.occupancy(b));
        for (const Site& s : config.observe)
            out.site_indicators.push_back(state.occupancy(s));
        return out;
    }

    ReplicaSummary run_replica(const SimConfig& config, std::uint64_t replica)
    {
        CounterRng init_rng = CounterRng::for_replica(config.seed, replica, 1);
        CounterRng dyn_rng = CounterRng::for_replica(config.seed, replica, 0);
        LatticeState state = init_state(config, init_rng);
        return run(state, config, dyn_rng);
    }

    std::vector<OccupationEstimate> estimate_occupation(const SimConfig& config, const std::vector<Site>& sites,
                                                        std::int64_t replicas, int threads)
    {
        if (replicas < 100)
            throw DomainError("estimate_occupation needs at least 100 replicas");
        SimConfig cfg = config;
        cfg.observe = sites;
        cfg.record.clear();
        const auto R = static_cast<std::size_t>(replicas);
        std::vector<std::vector<std::uint32_t>> hits(R);

        const int T = std::max(1, threads);
        std::vector<std::thread> pool;
        std::exception_ptr failure;
        std::mutex failure_lock;
        for (int w = 0; w < T; ++w)
        {
            pool.emplace_back([&, w] {
                try
                {
                    for (std::size_t r = static_cast<std::size_t>(w); r < R; r += static_cast<std::size_t>(T))
                        hits[r] = run_replica(cfg, r).site_indicators;
                }
                catch (...)
                {
                    std::lock_guard lock(failure_lock);
                    failure = std::current_exception();
                }
            });
        }
        for (auto& th : pool)
            th.join();
        if (failure)
            std::rethrow_exception(failure);

        std::vector<OccupationEstimate> out;
        for (std::size_t s = 0; s < sites.size(); ++s)
        {
            double sum = 0.0, sq = 0.0;
            for (std::size_t r = 0; r < R; ++r)
            {
                const double v = hits[r][s];
                sum += v;
                sq += v * v;
            }
            const double mean = sum / static_cast<double>(R);
            const double var = std::max(0.0, (sq - static_cast<double>(R) * mean * mean) / static_cast<double>(R - 1));
            out.push_back({sites[s], mean, std::sqrt(var / static_cast<double>(R))});
        }
        return out;
    }
} // namespace ssep::sim
