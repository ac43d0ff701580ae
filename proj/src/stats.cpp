#include "ssep/stats.hpp"

#include "ssep/errors.hpp"
#include "ssep/theory.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace ssep::stats
{
    namespace
    {
        constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

        double root(double v) { return std::sqrt(std::max(v, 0.0)); }

        // Cov estimate with delta-method SE from a joint table of integer pairs.
        Estimate pair_covariance(const std::map<std::pair<std::uint32_t, std::uint32_t>, std::int64_t>& table)
        {
            long double n = 0, sa = 0, sb = 0;
            for (const auto& [ab, c] : table)
            {
                n += c;
                sa += static_cast<long double>(c) * ab.first;
                sb += static_cast<long double>(c) * ab.second;
            }
            const long double ma = sa / n, mb = sb / n;
            long double cov = 0;
            for (const auto& [ab, c] : table)
                cov += c * (ab.first - ma) * (ab.second - mb);
            cov /= n;
            long double var_psi = 0;
            for (const auto& [ab, c] : table)
            {
                const long double psi = (ab.first - ma) * (ab.second - mb) - cov;
                var_psi += c * psi * psi;
            }
            var_psi /= n;
            const double N = static_cast<double>(n);
            return {static_cast<double>(cov) * N / (N - 1), root(static_cast<double>(var_psi) / (N - 1))};
        }
    } // namespace

    void histogram_moments(const std::vector<std::int64_t>& hist, Estimate& mean, Estimate& var, Estimate& gap)
    {
        long double n = 0, s = 0;
        for (std::size_t k = 0; k < hist.size(); ++k)
        {
            n += hist[k];
            s += static_cast<long double>(hist[k]) * static_cast<long double>(k);
        }
        if (n < 2)
            throw DomainError("moments need at least two observations");
        const long double mu = s / n;
        long double m2 = 0, m3 = 0, m4 = 0;
        for (std::size_t k = 0; k < hist.size(); ++k)
        {
            const long double e = static_cast<long double>(k) - mu;
            m2 += hist[k] * e * e;
            m3 += hist[k] * e * e * e;
            m4 += hist[k] * e * e * e * e;
        }
        m2 /= n;
        m3 /= n;
        m4 /= n;
        const double N = static_cast<double>(n);
        const double c2 = static_cast<double>(m2), c3 = static_cast<double>(m3), c4 = static_cast<double>(m4);
        mean = {static_cast<double>(mu), root(c2 / (N - 1))};
        // influence functions: var -> (N - mu)^2 - m2, gap -> (N - mu) - ((N - mu)^2 - m2)
        var = {c2 * N / (N - 1), root((c4 - c2 * c2) / (N - 1))};
        gap = {mean.value - var.value, root((c2 - 2 * c3 + c4 - c2 * c2) / (N - 1))};
    }

    ExperimentResult run_experiment(const sim::SimConfig& config, std::int64_t R, std::uint64_t seed,
                                    const ExperimentOptions& options)
    {
        if (R < 2)
            throw DomainError("run_experiment needs R >= 2");
        sim::SimConfig cfg = config;
        cfg.seed = seed;
        // fail fast on configuration problems before starting workers
        const std::int64_t particles = sim::initial_particle_count(cfg);
        if (particles > cfg.max_particles)
        {
            CounterRng probe(0);
            sim::init_state(cfg, probe); // throws the budget error with the count
        }

        const auto start = std::chrono::steady_clock::now();
        const auto budget_over = [&] {
            return options.wall_budget && std::chrono::steady_clock::now() - start >= *options.wall_budget;
        };

        const int T = std::max(1, options.threads);
        std::vector<std::vector<std::pair<std::int64_t, sim::ReplicaSummary>>> parts(static_cast<std::size_t>(T));
        std::atomic<std::int64_t> next{0};
        std::atomic<bool> stop{false};
        std::exception_ptr failure;
        std::mutex failure_lock;
        auto worker = [&](std::size_t w) {
            while (!stop.load())
            {
                if (budget_over())
                    break;
                const std::int64_t r = next.fetch_add(1);
                if (r >= R)
                    break;
                try
                {
                    parts[w].emplace_back(r, sim::run_replica(cfg, static_cast<std::uint64_t>(r)));
                }
                catch (...)
                {
                    std::lock_guard lock(failure_lock);
                    if (!failure)
                        failure = std::current_exception();
                    stop = true;
                }
            }
        };
        if (T == 1)
            worker(0);
        else
        {
            std::vector<std::thread> pool;
            for (int i = 0; i < T; ++i)
                pool.emplace_back(worker, static_cast<std::size_t>(i));
            for (auto& th : pool)
                th.join();
        }
        if (failure)
            std::rethrow_exception(failure);

        // every index handed out has finished, so the completed replicas are a prefix
        const std::int64_t done = std::min(next.load(), R);
        if (done < 2)
            throw DomainError("wall budget ended before two replicas completed");
        std::vector<sim::ReplicaSummary> out(static_cast<std::size_t>(done));
        for (auto& part : parts)
        {
            for (auto& [r, summary] : part)
                out[static_cast<std::size_t>(r)] = std::move(summary);
        }

        ExperimentResult res;
        res.requested = R;
        res.R = done;
        res.budget_exhausted = done < R;
        res.t = cfg.t_end;
        res.z = cfg.z;
        res.seed = seed;
        res.particles = particles;
        const std::size_t m_count = static_cast<std::size_t>(std::max(cfg.order_stats_m_max, 0)) + 1;
        res.orderstat_samples.assign(m_count, {});
        std::vector<std::map<std::pair<std::uint32_t, std::uint32_t>, std::int64_t>> tables(cfg.record.size());
        for (const sim::ReplicaSummary& s : out)
        {
            const auto k = static_cast<std::size_t>(s.N);
            if (res.N_hist.size() <= k)
                res.N_hist.resize(k + 1, 0);
            ++res.N_hist[k];
            for (std::size_t m = 0; m < m_count; ++m)
                res.orderstat_samples[m].push_back(s.X[m]);
            for (std::size_t p = 0; p < tables.size(); ++p)
                ++tables[p][s.pair_indicators[p]];
            res.attempts += s.wall_events;
            res.moves += s.moves;
        }
        histogram_moments(res.N_hist, res.mean_N, res.var_N, res.mean_minus_var);
        for (const auto& table : tables)
            res.pair_cov.push_back(pair_covariance(table));

        if (options.poisson_lambda)
            res.poisson = poisson_gof(res.N_hist, *options.poisson_lambda);
        if (options.gumbel)
        {
            const auto sc = theory::scaling_for(cfg.dim(), options.gumbel->beta, cfg.t_end, 0.0);
            for (std::size_t m = 0; m < m_count; ++m)
                res.ks_gumbel.push_back(gumbel_gof(res.orderstat_samples[m], static_cast<int>(m), sc.a_t, sc.b_t,
                                                   options.gumbel->M, options.gumbel->beta));
        }
        res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

        if (options.on_replica)
        {
            for (std::size_t r = 0; r < out.size(); ++r)
                options.on_replica(r, out[r]);
        }
        return res;
    }

    double poisson_pmf(std::int64_t k, double lambda)
    {
        if (k < 0)
            return 0.0;
        if (lambda == 0.0)
            return k == 0 ? 1.0 : 0.0;
        return std::exp(static_cast<double>(k) * std::log(lambda) - lambda - std::lgamma(static_cast<double>(k) + 1));
    }

    PoissonGof poisson_gof(const std::vector<std::int64_t>& hist, double lambda)
    {
        if (!(lambda > 0.0) || !std::isfinite(lambda))
            throw DomainError("poisson_gof needs lambda > 0");
        std::int64_t n = 0;
        for (std::int64_t c : hist)
            n += c;
        if (n == 0)
            throw DomainError("empty histogram");

        // cells 0..K individually (K: first k with cdf > 1 - 1e-9), one cell for k > K
        std::int64_t K = 0;
        while (boost::math::gamma_q(static_cast<double>(K) + 1, lambda) <= 1.0 - 1e-9)
            ++K;
        std::vector<double> expected, observed;
        for (std::int64_t k = 0; k <= K + 1; ++k)
        {
            double ok = 0.0;
            if (k <= K)
            {
                expected.push_back(poisson_pmf(k, lambda));
                if (k < static_cast<std::int64_t>(hist.size()))
                    ok = static_cast<double>(hist[static_cast<std::size_t>(k)]);
            }
            else
            {
                expected.push_back(boost::math::gamma_p(static_cast<double>(K) + 1, lambda));
                for (std::size_t j = static_cast<std::size_t>(k); j < hist.size(); ++j)
                    ok += static_cast<double>(hist[j]);
            }
            observed.push_back(ok / static_cast<double>(n));
        }

        PoissonGof g;
        g.lambda = lambda;
        for (std::size_t i = 0; i < expected.size(); ++i)
            g.tv += std::abs(observed[i] - expected[i]);
        g.tv *= 0.5;

        std::vector<double> E, O;
        double e = 0.0, o = 0.0;
        for (std::size_t i = 0; i < expected.size(); ++i)
        {
            e += expected[i] * static_cast<double>(n);
            o += observed[i] * static_cast<double>(n);
            if (e >= 5.0)
            {
                E.push_back(e);
                O.push_back(o);
                e = o = 0.0;
            }
        }
        if (!E.empty())
        {
            E.back() += e;
            O.back() += o;
        }
        for (std::size_t i = 0; i < E.size(); ++i)
            g.chisq += (O[i] - E[i]) * (O[i] - E[i]) / E[i];
        g.dof = static_cast<int>(E.size()) - 1;
        g.chisq_pvalue = g.dof >= 1 ? boost::math::gamma_q(0.5 * g.dof, 0.5 * g.chisq) : kNaN;
        return g;
    }

    double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf)
    {
        if (samples.empty())
            throw DomainError("KS needs samples");
        std::sort(samples.begin(), samples.end());
        const double n = static_cast<double>(samples.size());
        double d = 0.0;
        for (std::size_t i = 0; i < samples.size(); ++i)
        {
            const double F = cdf(samples[i]);
            d = std::max({d, static_cast<double>(i + 1) / n - F, F - static_cast<double>(i) / n});
        }
        return d;
    }

    double ks_lattice(std::vector<std::int64_t> samples, const std::function<double(std::int64_t)>& cdf)
    {
        if (samples.empty())
            throw DomainError("KS needs samples");
        std::sort(samples.begin(), samples.end());
        const double n = static_cast<double>(samples.size());
        double d = 0.0, below = 0.0; // empirical CDF just below the current value
        for (std::size_t i = 0; i < samples.size();)
        {
            const std::int64_t v = samples[i];
            std::size_t j = i;
            while (j < samples.size() && samples[j] == v)
                ++j;
            // flat stretch of the empirical CDF up to v - 1, then its jump at v
            if (v != std::numeric_limits<std::int64_t>::min())
                d = std::max(d, std::abs(below - cdf(v - 1)));
            const double here = static_cast<double>(j) / n;
            d = std::max(d, std::abs(here - cdf(v)));
            below = here;
            i = j;
        }
        return d;
    }

    double gumbel_gof(const std::vector<std::int64_t>& samples, int m, double a_t, double b_t, double M, double beta)
    {
        if (samples.empty())
            throw DomainError("gumbel_gof needs samples");
        return ks_lattice(samples, [&](std::int64_t k) {
            if (k == std::numeric_limits<std::int64_t>::min())
                return 0.0;
            return theory::gumbel_cdf(m, static_cast<double>(k) / b_t - a_t, M, beta);
        });
    }

    GapTrend mean_var_gap(const std::vector<ExperimentResult>& results, const Profile& profile)
    {
        if (results.size() < 3)
            throw DomainError("mean_var_gap needs at least 3 schedule points");
        GapTrend g;
        g.decreasing = true;
        g.positive = true;
        for (std::size_t i = 0; i < results.size(); ++i)
        {
            const ExperimentResult& r = results[i];
            GapPoint p;
            p.t = r.t;
            p.gap = r.mean_minus_var;
            p.envelope = theory::ss_bound(profile, r.t, r.z) + theory::cov_bound(profile, r.t, r.z).full;
            if (i > 0)
            {
                const Estimate& prev = g.points.back().gap;
                if (!(p.gap.value < prev.value + 2.0 * std::hypot(p.gap.se, prev.se)))
                    g.decreasing = false;
            }
            if (!(p.gap.value > 0.0))
                g.positive = false;
            g.points.push_back(p);
        }
        return g;
    }

    nlohmann::json to_json(const ExperimentResult& r)
    {
        auto est = [](const Estimate& e) { return nlohmann::json{{"value", e.value}, {"se", e.se}}; };
        nlohmann::json j;
        j["requested"] = r.requested;
        j["R"] = r.R;
        j["budget_exhausted"] = r.budget_exhausted;
        j["t"] = r.t;
        j["z"] = r.z;
        j["seed"] = r.seed;
        j["particles"] = r.particles;
        j["N_hist"] = r.N_hist;
        j["mean_N"] = est(r.mean_N);
        j["var_N"] = est(r.var_N);
        j["mean_minus_var"] = est(r.mean_minus_var);
        j["pair_cov"] = nlohmann::json::array();
        for (const Estimate& e : r.pair_cov)
            j["pair_cov"].push_back(est(e));
        nlohmann::json gof;
        if (r.poisson)
        {
            gof["lambda"] = r.poisson->lambda;
            gof["tv_poisson"] = r.poisson->tv;
            gof["chisq"] = r.poisson->chisq;
            gof["chisq_dof"] = r.poisson->dof;
            gof["chisq_pvalue"] = r.poisson->chisq_pvalue;
        }
        if (!r.ks_gumbel.empty())
            gof["ks_gumbel"] = r.ks_gumbel;
        j["gof"] = gof.is_null() ? nlohmann::json::object() : gof;
        nlohmann::json top = nlohmann::json::array();
        for (const auto& samples : r.orderstat_samples)
        {
            const auto mx = std::max_element(samples.begin(), samples.end());
            top.push_back(mx == samples.end() ? nlohmann::json() : nlohmann::json(*mx));
        }
        j["orderstat_max"] = top;
        j["attempts"] = r.attempts;
        j["moves"] = r.moves;
        return j;
    }

    nlohmann::json to_json(const GapTrend& g)
    {
        nlohmann::json j;
        j["decreasing"] = g.decreasing;
        j["positive"] = g.positive;
        j["points"] = nlohmann::json::array();
        for (const GapPoint& p : g.points)
            j["points"].push_back({{"t", p.t}, {"gap", p.gap.value}, {"se", p.gap.se}, {"envelope", p.envelope}});
        return j;
    }

    nlohmann::json to_json(const sim::ReplicaSummary& s, std::uint64_t replica)
    {
        nlohmann::json j;
        j["replica"] = replica;
        j["N"] = s.N;
        nlohmann::json X = nlohmann::json::array();
        for (std::int64_t x : s.X)
            X.push_back(x == sim::kMinusInfinity ? nlohmann::json() : nlohmann::json(x));
        j["X"] = X;
        nlohmann::json pairs = nlohmann::json::array();
        for (const auto& [a, b] : s.pair_indicators)
            pairs.push_back({a, b});
        j["pairs"] = pairs;
        j["sites"] = s.site_indicators;
        j["attempts"] = s.wall_events;
        j["moves"] = s.moves;
        return j;
    }

    std::string histogram_csv(const std::vector<std::int64_t>& hist)
    {
        std::ostringstream os;
        os << "k,count\n";
        for (std::size_t k = 0; k < hist.size(); ++k)
            os << k << ',' << hist[k] << '\n';
        return os.str();
    }
} // namespace ssep::stats
