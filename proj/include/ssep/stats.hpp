#pragma once

#include "ssep/simulator.hpp"

#include "json.hpp"

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ssep::stats
{
    struct Estimate
    {
        double value = 0.0;
        double se = 0.0;
    };

    struct PoissonGof
    {
        double lambda = 0.0;
        double tv = 0.0;
        double chisq = 0.0;
        int dof = 0;
        double chisq_pvalue = 0.0; // NaN when fewer than two pooled cells remain
    };

    struct GumbelRef
    {
        double M = 0.0;
        double beta = 1.0;
    };

    struct ExperimentOptions
    {
        int threads = 1;
        std::optional<double> poisson_lambda; // reference for the Poisson fit
        std::optional<GumbelRef> gumbel;      // reference for the order-statistic fits
        /// Stop launching replicas after this much wall time; the result then has completed < requested.
        std::optional<std::chrono::duration<double>> wall_budget;
        /// Called once per replica, in replica order, after all replicas finished.
        std::function<void(std::uint64_t, const sim::ReplicaSummary&)> on_replica;
    };

    struct ExperimentResult
    {
        std::int64_t requested = 0;
        std::int64_t R = 0; // completed replicas
        bool budget_exhausted = false;
        double t = 0.0;
        double z = 0.0;
        std::uint64_t seed = 0;
        std::int64_t particles = 0; // initial particle count of replica 0
        std::vector<std::int64_t> N_hist; // N_hist[k] = #{replicas with N_t = k}
        Estimate mean_N, var_N, mean_minus_var;
        std::vector<std::vector<std::int64_t>> orderstat_samples; // [m][replica], kMinusInfinity sentinel
        std::vector<Estimate> pair_cov;
        std::optional<PoissonGof> poisson;
        std::vector<double> ks_gumbel; // per m, when a Gumbel reference is given
        std::uint64_t attempts = 0;
        std::uint64_t moves = 0;
        double seconds = 0.0;
    };

    /// Runs replicas 0..R-1 of `config` with `seed` (overriding config.seed). Aggregates are computed from
    /// integer histograms, so they do not depend on the order replicas finish in.
    ExperimentResult run_experiment(const sim::SimConfig& config, std::int64_t R, std::uint64_t seed,
                                    const ExperimentOptions& options = {});

    /// Moments from a histogram of a nonnegative integer variable, with delta-method SEs.
    void histogram_moments(const std::vector<std::int64_t>& hist, Estimate& mean, Estimate& var, Estimate& gap);

    double poisson_pmf(std::int64_t k, double lambda);
    /// TV (tail lumped past the 1 - 1e-9 quantile) and chi-square with cells pooled to expected >= 5.
    PoissonGof poisson_gof(const std::vector<std::int64_t>& hist, double lambda);

    /// Plain two-sided KS statistic of continuous samples against cdf.
    double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);
    /// KS of integer samples, comparing the empirical CDF with cdf(k) only at integers k.
    double ks_lattice(std::vector<std::int64_t> samples, const std::function<double(std::int64_t)>& cdf);

    /// KS of y = X^(m) / b_t - a_t against F_m(y) = sum_{k<=m} (M e^{-beta y})^k / k! exp(-M e^{-beta y}).
    double gumbel_gof(const std::vector<std::int64_t>& samples, int m, double a_t, double b_t, double M, double beta);

    struct GapPoint
    {
        double t = 0.0;
        Estimate gap;
        double envelope = 0.0; // ss_bound + cov_bound.full (uncalibrated)
    };

    struct GapTrend
    {
        std::vector<GapPoint> points;
        bool decreasing = false; // gap_i < gap_{i-1} + 2 sqrt(se_i^2 + se_{i-1}^2)
        bool positive = false;   // every gap estimate > 0
    };

    GapTrend mean_var_gap(const std::vector<ExperimentResult>& results, const Profile& profile);

    nlohmann::json to_json(const ExperimentResult& r);
    nlohmann::json to_json(const GapTrend& g);
    nlohmann::json to_json(const sim::ReplicaSummary& s, std::uint64_t replica);
    /// Columns k,count.
    std::string histogram_csv(const std::vector<std::int64_t>& hist);
} // namespace ssep::stats
