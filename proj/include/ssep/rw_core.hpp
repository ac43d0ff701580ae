#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace ssep::rw
{
    // Continuous-time simple random walk on Z with total jump rate 1, started at 0,
    // and the standard Gaussian functionals used to approximate it.

    /// P_0(zeta_t = k), summed directly from the Poisson mixture of +-1 steps.
    double walk_pmf(double t, std::int64_t k);

    /// Chernoff exponent I(k) with P_0(zeta_t >= k) <= exp(-I(k)) for k > 0.
    double chernoff_exponent(double t, double k);

    /// Cached law of zeta_t on [-reach, reach]. Immutable after construction.
    class WalkKernel
    {
    public:
        /// Caches every site whose mass is not negligible plus at least `min_reach` sites.
        explicit WalkKernel(double t, std::int64_t min_reach = 0);

        double time() const noexcept { return t_; }
        std::int64_t reach() const noexcept { return reach_; }
        /// Upper bound on the mass outside the cached window.
        double truncation_tail() const noexcept { return truncation_tail_; }

        /// P_0(zeta_t = k); sites beyond the cache are summed on the fly.
        double pmf(std::int64_t k) const;
        /// P_0(zeta_t >= k).
        double tail_ge(std::int64_t k) const;
        /// P_0(zeta_t > z) for real z.
        double tail_gt(double z) const;

    private:
        double t_;
        std::int64_t reach_;
        double truncation_tail_;
        std::vector<double> pmf_;   // index |k|
        std::vector<double> upper_; // upper_[k] = P(zeta >= k), k in [0, reach + 1]
    };

    /// P_0(zeta_t > z). Exact for negative z as well.
    double walk_tail(double t, double z);

    /// H nondecreasing with derivative h; growth bound h(u) <= C (1 + u^(beta-1)).
    struct TailFunctional
    {
        std::function<double(double)> H;
        std::function<double(double)> h;
        double C = 1.0;
        double beta = 1.0;

        /// Pointwise majorant of H implied by the growth bound.
        double H_bound(double u) const;
    };

    /// Nondecreasing weight with w(u) <= C (1 + u^p).
    struct WeightFunction
    {
        std::function<double(double)> w;
        double C = 1.0;
        double p = 0.0;
    };

    /// Functional with H(u) = u^beta (beta >= 0), h = beta u^(beta-1).
    TailFunctional power_functional(double beta);
    /// Functional with H(u) = sum_i coef_i u^exp_i, all coefficients and exponents nonnegative.
    TailFunctional polynomial_functional(std::vector<double> coefs, std::vector<double> exps);

    /// E_0[H(zeta_t - z) 1(zeta_t > z)].
    double expect_tail_functional(const WalkKernel& kernel, double z, const TailFunctional& F);
    double expect_tail_functional(double t, double z, const TailFunctional& F);

    /// sum_{j >= 0} w(j) P_0(zeta_t > z + j).
    double sum_weighted_tails(const WalkKernel& kernel, double z, const WeightFunction& h);
    double sum_weighted_tails(double t, double z, const WeightFunction& h);

    // Standard Gaussian helpers.
    double gauss_density(double u);
    /// log P(X > u), finite for every real u.
    double log_gauss_tail(double u);
    /// P(X > u); underflows to 0 beyond u ~ 38.
    double gauss_tail(double u);

    /// E[(X - u)_+^beta] by adaptive quadrature (relative accuracy ~1e-10).
    double gauss_partial_moment(double u, double beta);
    /// Large-u form Gamma(beta+1) phi(u) / u^(beta+1).
    double gauss_partial_moment_asymptotic(double u, double beta);

    /// E[H(sigma X - z) 1(sigma X > z)] by quadrature, for comparison with walk functionals.
    double gauss_tail_functional(double sigma, double z, const std::function<double(double)>& H);

    /// P_0(zeta_t > u sqrt(t)) / P(X > u) - 1. Throws DomainError when P(X > u) underflows.
    double ld_ratio(double t, double u);

    struct PmfRegularity
    {
        double sup_pmf;
        double diff_sum;
    };

    /// sup_k P_0(zeta_t = k) and sum_a |P_0(zeta_t = a) - P_0(zeta_t = a + b)|.
    PmfRegularity pmf_regularity_checks(const WalkKernel& kernel, std::int64_t b);
    PmfRegularity pmf_regularity_checks(double t, std::int64_t b);
} // namespace ssep::rw
