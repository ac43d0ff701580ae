#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ssep/errors.hpp"
#include "ssep/oracle.hpp"
#include "ssep/rw_core.hpp"
#include "ssep/stats.hpp"
#include "ssep/theory.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace ssep;
using namespace ssep::stats;

namespace
{
    std::vector<std::int64_t> poisson_hist(double lambda, int n, std::mt19937_64& gen)
    {
        // inverse-cdf sampling
        std::uniform_real_distribution<double> U(0.0, 1.0);
        std::vector<std::int64_t> h;
        for (int i = 0; i < n; ++i)
        {
            const double u = U(gen);
            std::int64_t k = 0;
            double p = std::exp(-lambda), c = p;
            while (c < u && k < 200)
            {
                ++k;
                p *= lambda / static_cast<double>(k);
                c += p;
            }
            if (static_cast<std::int64_t>(h.size()) <= k)
                h.resize(static_cast<std::size_t>(k) + 1, 0);
            ++h[static_cast<std::size_t>(k)];
        }
        return h;
    }

    double gumbel0(double x) { return std::exp(-std::pow(2.0, -1.5) * std::exp(-2 * x)); }
}

TEST_CASE("moments from a histogram match raw-sample formulas")
{
    const std::vector<std::int64_t> hist{3, 5, 0, 2, 1};
    std::vector<double> raw;
    for (std::size_t k = 0; k < hist.size(); ++k)
        for (std::int64_t c = 0; c < hist[k]; ++c)
            raw.push_back(static_cast<double>(k));
    const double n = static_cast<double>(raw.size());
    double mu = 0;
    for (double v : raw)
        mu += v / n;
    double s2 = 0;
    for (double v : raw)
        s2 += (v - mu) * (v - mu) / (n - 1);
    Estimate m, v, g;
    histogram_moments(hist, m, v, g);
    CHECK(m.value == doctest::Approx(mu).epsilon(1e-14));
    CHECK(v.value == doctest::Approx(s2).epsilon(1e-14));
    CHECK(g.value == doctest::Approx(mu - s2).epsilon(1e-14));
    CHECK(m.se == doctest::Approx(std::sqrt(s2 * (n - 1) / n / (n - 1))).epsilon(1e-12));
    CHECK(v.se > 0.0);
    CHECK(g.se > 0.0);
    CHECK_THROWS_AS(histogram_moments({1}, m, v, g), DomainError);
}

TEST_CASE("gap standard error is calibrated on Poisson samples")
{
    std::mt19937_64 gen(11);
    int outside = 0;
    const int trials = 300;
    for (int i = 0; i < trials; ++i)
    {
        Estimate m, v, g;
        histogram_moments(poisson_hist(2.0, 800, gen), m, v, g);
        outside += std::abs(g.value) > 2 * g.se;
    }
    // nominal 4.6 percent
    CHECK(outside < 0.10 * trials);
    CHECK(outside > 0);
}

TEST_CASE("poisson_gof")
{
    PoissonGof pm = poisson_gof({10}, 1.0);
    CHECK(pm.tv == doctest::Approx(1 - std::exp(-1.0)).epsilon(1e-12));
    CHECK_THROWS_AS(poisson_gof({}, 1.0), DomainError);
    CHECK_THROWS_AS(poisson_gof({0, 0}, 1.0), DomainError);
    CHECK_THROWS_AS(poisson_gof({4}, 0.0), DomainError);

    // null calibration: p-values roughly uniform
    std::mt19937_64 gen(5);
    std::vector<double> pv;
    for (int i = 0; i < 300; ++i)
    {
        PoissonGof g = poisson_gof(poisson_hist(3.0, 1000, gen), 3.0);
        CHECK(g.tv >= 0.0);
        CHECK(g.tv <= 1.0);
        CHECK(g.dof >= 5);
        pv.push_back(g.chisq_pvalue);
    }
    const double ks = ks_statistic(pv, [](double u) { return std::clamp(u, 0.0, 1.0); });
    CHECK(ks < 1.63 / std::sqrt(300.0)); // 1 percent level
    int small = 0;
    for (double p : pv)
        small += p < 0.05;
    CHECK(small < 30);

    // a wrong lambda is detected
    PoissonGof off = poisson_gof(poisson_hist(3.0, 2000, gen), 3.5);
    CHECK(off.chisq_pvalue < 1e-4);
    CHECK(off.tv > 0.05);
}

TEST_CASE("KS null calibration")
{
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const int R = 1000, trials = 300;
    int exceed = 0;
    for (int i = 0; i < trials; ++i)
    {
        std::vector<double> s(R);
        for (double& x : s)
            x = -0.5 * std::log(-std::log(U(gen)) / std::pow(2.0, -1.5)); // inverse of F_0
        exceed += ks_statistic(s, gumbel0) > 1.36 / std::sqrt(R);
    }
    CHECK(exceed < 0.10 * trials);
    CHECK(exceed > 0);
}

TEST_CASE("lattice KS")
{
    // hand example: samples {0, 0, 1}, cdf(k) = 0.3, 0.8, 1 at k = -1?, 0, 1
    auto cdf = [](std::int64_t k) { return k < 0 ? 0.0 : (k == 0 ? 0.5 : 1.0); };
    CHECK(ks_lattice({0, 0, 1}, cdf) == doctest::Approx(2.0 / 3 - 0.5));
    CHECK(ks_lattice({1, 1}, cdf) == doctest::Approx(0.5));
    CHECK(ks_lattice({0, 1}, cdf) == doctest::Approx(0.0));

    // integer data from a discretised Gumbel: the lattice statistic is calibrated where the naive one is not
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const double a = 0.0, b = 4.0; // y = k / b - a, coarse lattice
    auto Fk = [&](std::int64_t k) { return gumbel0(static_cast<double>(k) / b - a); };
    int exceed_lattice = 0, exceed_naive = 0;
    const int R = 1000, trials = 200;
    for (int i = 0; i < trials; ++i)
    {
        std::vector<std::int64_t> ks;
        std::vector<double> ys;
        for (int r = 0; r < R; ++r)
        {
            // P(X <= k) = F(k / b): X = ceil(b * Y) for Y ~ F
            const double y = -0.5 * std::log(-std::log(U(gen)) / std::pow(2.0, -1.5));
            const auto k = static_cast<std::int64_t>(std::ceil(b * y));
            ks.push_back(k);
            ys.push_back(static_cast<double>(k) / b);
        }
        exceed_lattice += ks_lattice(ks, Fk) > 1.36 / std::sqrt(R);
        exceed_naive += ks_statistic(ys, gumbel0) > 1.36 / std::sqrt(R);
        CHECK(gumbel_gof(ks, 0, a, b, std::pow(2.0, -1.5), 2.0) == doctest::Approx(ks_lattice(ks, Fk)));
    }
    CHECK(exceed_lattice < 0.10 * trials);
    CHECK(exceed_naive > 0.5 * trials);
}

TEST_CASE("run_experiment basics")
{
    sim::SimConfig c;
    c.profile = Profile::linear(2);
    c.t_end = 0.0;
    c.depth = 10;
    c.z = 0.0;
    ExperimentResult r0 = run_experiment(c, 50, 1);
    CHECK(r0.N_hist == std::vector<std::int64_t>{50});
    CHECK(r0.mean_N.value == 0.0);
    CHECK(r0.R == 50);
    CHECK_THROWS_AS(run_experiment(c, 1, 1), DomainError);

    // one independent walker: mean_N = P(walk > z) at time t / d
    sim::SimConfig one;
    one.initial_sites = {{0, 0}};
    one.dynamics = sim::Dynamics::independent;
    one.t_end = 30.0;
    one.z = 2.5;
    ExperimentResult r1 = run_experiment(one, 20000, 9);
    const double p = rw::walk_tail(15.0, 2.5);
    CHECK(std::abs(r1.mean_N.value - p) <= 3 * r1.mean_N.se);
    CHECK(r1.var_N.value == doctest::Approx(r1.mean_N.value * (1 - r1.mean_N.value)).epsilon(1e-3));

    // frozen box: Var = 0, gap = E[N]
    oracle::SmallSystem packed = oracle::SmallSystem::segment(6, {0, 1, 2, 3, 4, 5});
    ExperimentResult rf = run_experiment(packed.sim_config(10.0, 2.5), 20, 4);
    CHECK(rf.mean_N.value == 3.0);
    CHECK(rf.var_N.value == 0.0);
    CHECK(rf.mean_minus_var.value == 3.0);
}

TEST_CASE("mean_N agrees with the exact mean at t = 100")
{
    sim::SimConfig c;
    c.profile = Profile::linear(2);
    c.t_end = 100.0;
    c.z = theory::scaling_for(2, 2.0, 100.0, 0.0).z;
    ExperimentResult r = run_experiment(c, 3000, 21);
    const double exact = theory::mean_N_exact(*c.profile, 100.0, c.z);
    CHECK(std::abs(r.mean_N.value - exact) <= 3 * r.mean_N.se);
    CHECK(r.mean_N.value >= 0.0);
    CHECK(r.var_N.value >= 0.0);
}

TEST_CASE("independent system: gap equals the sum of squared tails")
{
    sim::SimConfig c;
    c.profile = Profile::linear(2);
    c.t_end = 100.0;
    c.z = 5.0;
    c.dynamics = sim::Dynamics::independent;
    ExperimentResult r = run_experiment(c, 4000, 33);
    const double ref = theory::independent_gap(*c.profile, 100.0, 5.0);
    CHECK(ref > 0.0);
    CHECK(std::abs(r.mean_minus_var.value - ref) <= 3 * r.mean_minus_var.se);
}

TEST_CASE("determinism, threads and order statistics")
{
    sim::SimConfig c;
    c.profile = Profile::linear(2);
    c.t_end = 60.0;
    c.z = 3.0;
    c.depth = 20;
    c.record = {{{2, 0}, {3, 0}}};
    ExperimentOptions o1, o3;
    o3.threads = 3;
    o1.poisson_lambda = o3.poisson_lambda = 0.8;
    o1.gumbel = o3.gumbel = GumbelRef{std::pow(2.0, -1.5), 2.0};
    ExperimentResult a = run_experiment(c, 300, 77, o1);
    ExperimentResult b = run_experiment(c, 300, 77, o3);
    CHECK(to_json(a).dump() == to_json(b).dump());
    CHECK(a.orderstat_samples == b.orderstat_samples);
    REQUIRE(a.ks_gumbel.size() == 3);

    // X^(m) <= X^(m-1) replica-wise, so the empirical CDFs are ordered
    for (std::size_t m = 1; m < 3; ++m)
        for (std::size_t r = 0; r < 300; ++r)
            CHECK(a.orderstat_samples[m][r] <= a.orderstat_samples[m - 1][r]);

    std::vector<std::uint64_t> order;
    ExperimentOptions cb;
    cb.threads = 2;
    cb.on_replica = [&](std::uint64_t r, const sim::ReplicaSummary&) { order.push_back(r); };
    run_experiment(c, 40, 1, cb);
    CHECK(order.size() == 40);
    CHECK(std::is_sorted(order.begin(), order.end()));
    CHECK(a.pair_cov.size() == 1);
    CHECK(a.pair_cov[0].se > 0.0);
}

TEST_CASE("wall budget stops early and reports it")
{
    sim::SimConfig c;
    c.profile = Profile::linear(2);
    c.t_end = 50.0;
    c.depth = 15;
    ExperimentOptions o;
    o.wall_budget = std::chrono::duration<double>(0.2);
    ExperimentResult r = run_experiment(c, 10'000'000, 3, o);
    CHECK(r.budget_exhausted);
    CHECK(r.R < r.requested);
    std::int64_t total = 0;
    for (auto v : r.N_hist)
        total += v;
    CHECK(total == r.R);
}

TEST_CASE("gap trend")
{
    auto mk = [](double t, double gap, double se) {
        ExperimentResult r;
        r.t = t;
        r.z = theory::scaling_for(2, 2.0, t, 0.0).z;
        r.mean_minus_var = {gap, se};
        return r;
    };
    const Profile p = Profile::linear(2);
    GapTrend g = mean_var_gap({mk(100, 0.3, 0.01), mk(400, 0.2, 0.01), mk(1600, 0.1, 0.01)}, p);
    CHECK(g.decreasing);
    CHECK(g.positive);
    CHECK(g.points[0].envelope > g.points[2].envelope);
    GapTrend up = mean_var_gap({mk(100, 0.1, 0.01), mk(400, 0.2, 0.01), mk(1600, 0.05, 0.01)}, p);
    CHECK_FALSE(up.decreasing);
    GapTrend slack = mean_var_gap({mk(100, 0.1, 0.02), mk(400, 0.12, 0.02), mk(1600, -0.01, 0.02)}, p);
    CHECK(slack.decreasing);
    CHECK_FALSE(slack.positive);
    CHECK_THROWS_AS(mean_var_gap({mk(100, 0.1, 0.01), mk(400, 0.1, 0.01)}, p), DomainError);
    CHECK(to_json(g)["points"].size() == 3);
}

TEST_CASE("serialisation")
{
    CHECK(histogram_csv({3, 0, 2}) == "k,count\n0,3\n1,0\n2,2\n");
    sim::ReplicaSummary s;
    s.N = 1;
    s.X = {4, sim::kMinusInfinity};
    s.pair_indicators = {{1, 0}};
    const auto j = to_json(s, 12);
    CHECK(j["replica"] == 12);
    CHECK(j["X"][1].is_null());
    CHECK(j["pairs"][0][0] == 1);
}
