#include "ssep/rw_core.hpp"

#include "ssep/errors.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace ssep::rw
{
    namespace
    {
        constexpr double kSeriesCutoff = 1e-17;
        // Log-mass excluded on each side of the cached window (~1e-16 per side).
        constexpr double kWindowLogMass = 37.0;
        // Sites whose Chernoff bound is below exp(-760) are below the double range.
        constexpr double kUnderflowLogMass = 760.0;
        constexpr double kRemainderRel = 1e-12;
        constexpr double kGuardRel = 1e-9;
        constexpr double kTinyAbs = 1e-300;
        constexpr std::int64_t kExtensionCap = 10'000'000;

        void require_time(double t)
        {
            if (!(t >= 0.0) || !std::isfinite(t))
            {
                throw DomainError("walk time must be finite and nonnegative, got " + std::to_string(t));
            }
        }

        // Bernstein radius a with a^2 / (2 (t + a/3)) >= L; dominates the Chernoff radius.
        double bernstein_radius(double t, double log_mass)
        {
            return log_mass / 3.0 + std::sqrt(log_mass * log_mass / 9.0 + 2.0 * log_mass * t);
        }

        std::int64_t floor_to_site(double z)
        {
            constexpr double lim = 4.0e18;
            if (z >= lim)
                return static_cast<std::int64_t>(lim);
            if (z <= -lim)
                return -static_cast<std::int64_t>(lim);
            return static_cast<std::int64_t>(std::floor(z));
        }

        // max over components of Hb(u+1)/Hb(u) for Hb = A + B u + C u^beta, u > 0.
        double majorant_step_ratio(double u, double power)
        {
            if (u <= 0.0)
                return std::numeric_limits<double>::infinity();
            return std::pow((u + 1.0) / u, std::max(1.0, power));
        }

        // Geometric tail sum of a bound sequence whose first term is `first`
        // and whose successive ratios never exceed `ratio`.
        double geometric_remainder(double first, double ratio)
        {
            if (first == 0.0)
                return 0.0;
            if (!(ratio < 1.0))
                return std::numeric_limits<double>::infinity();
            return first / (1.0 - ratio);
        }

        double step_decay(double t, double k)
        {
            if (t == 0.0)
                return 0.0;
            return std::exp(-std::asinh(k / t));
        }
    } // namespace

    double walk_pmf(double t, std::int64_t k)
    {
        require_time(t);
        const double kk = static_cast<double>(k < 0 ? -k : k);
        if (t == 0.0)
            return kk == 0.0 ? 1.0 : 0.0;

        // P(zeta_t = k) = sum_b exp(-t) (t/2)^(2b+k) / (b! (b+k)!), summed outward from the peak.
        const double half = 0.5 * t;
        const double q = half * half;
        double peak = std::floor(0.5 * (-(kk + 2.0) + std::sqrt(kk * kk + t * t)));
        peak = std::max(0.0, peak);
        const double log_peak = -t + (2.0 * peak + kk) * std::log(half) - std::lgamma(peak + 1.0) -
                                std::lgamma(peak + kk + 1.0);
        if (log_peak < -kUnderflowLogMass)
            return 0.0;

        double sum = 1.0;
        double term = 1.0;
        for (double b = peak;; b += 1.0)
        {
            const double ratio = q / ((b + 1.0) * (b + kk + 1.0));
            term *= ratio;
            sum += term;
            if (ratio < 1.0 && term * ratio / (1.0 - ratio) < kSeriesCutoff * sum)
                break;
        }
        term = 1.0;
        for (double b = peak; b > 0.0; b -= 1.0)
        {
            term *= b * (b + kk) / q;
            sum += term;
            if (term < kSeriesCutoff * sum)
                break;
        }
        const double log_value = log_peak + std::log(sum);
        return log_value < -745.0 ? 0.0 : std::exp(log_value);
    }

    double chernoff_exponent(double t, double k)
    {
        if (k <= 0.0)
            return 0.0;
        if (t == 0.0)
            return std::numeric_limits<double>::infinity();
        const double r = k / t;
        return k * std::asinh(r) - t * (std::sqrt(1.0 + r * r) - 1.0);
    }

    WalkKernel::WalkKernel(double t, std::int64_t min_reach) : t_(t)
    {
        require_time(t);
        const auto natural = static_cast<std::int64_t>(std::ceil(bernstein_radius(t, kWindowLogMass)));
        const auto underflow = static_cast<std::int64_t>(std::ceil(bernstein_radius(t, kUnderflowLogMass)));
        reach_ = std::max(natural, std::min(min_reach, underflow));
        truncation_tail_ = t == 0.0 ? 0.0 : 2.0 * std::exp(-chernoff_exponent(t, static_cast<double>(reach_ + 1)));

        pmf_.resize(static_cast<std::size_t>(reach_) + 1);
        for (std::int64_t k = 0; k <= reach_; ++k)
            pmf_[static_cast<std::size_t>(k)] = walk_pmf(t, k);

        upper_.assign(static_cast<std::size_t>(reach_) + 2, 0.0);
        double beyond = 0.0;
        for (std::int64_t k = reach_ + 1;; ++k)
        {
            const double p = walk_pmf(t, k);
            beyond += p;
            if (p == 0.0 || p < kSeriesCutoff * beyond)
                break;
        }
        upper_[static_cast<std::size_t>(reach_) + 1] = beyond;
        for (std::int64_t k = reach_; k >= 0; --k)
        {
            const auto i = static_cast<std::size_t>(k);
            upper_[i] = pmf_[i] + upper_[i + 1];
        }
    }

    double WalkKernel::pmf(std::int64_t k) const
    {
        const std::int64_t a = k < 0 ? -k : k;
        if (a <= reach_)
            return pmf_[static_cast<std::size_t>(a)];
        return walk_pmf(t_, a);
    }

    double WalkKernel::tail_ge(std::int64_t k) const
    {
        if (k >= 0)
        {
            if (k <= reach_ + 1)
                return upper_[static_cast<std::size_t>(k)];
            double sum = 0.0;
            for (std::int64_t j = k;; ++j)
            {
                const double p = walk_pmf(t_, j);
                sum += p;
                if (p == 0.0 || p < kSeriesCutoff * sum)
                    break;
            }
            return sum;
        }
        // P(zeta >= k) for k < 0: all mass at sites >= 0 plus sites 1..-k mirrored.
        if (-k <= reach_)
            return upper_[0] + upper_[1] - upper_[static_cast<std::size_t>(1 - k)];
        return upper_[0] + upper_[1] - tail_ge(1 - k);
    }

    double WalkKernel::tail_gt(double z) const
    {
        const std::int64_t m = floor_to_site(z);
        if (m == std::numeric_limits<std::int64_t>::max())
            return 0.0;
        return tail_ge(m + 1);
    }

    double walk_tail(double t, double z)
    {
        return WalkKernel(t).tail_gt(z);
    }

    double TailFunctional::H_bound(double u) const
    {
        const double h0 = H ? H(0.0) : 0.0;
        if (u <= 0.0)
            return h0;
        // Integrating h <= C (1 + u^(beta-1)); the extra C keeps the bound valid near u = 0.
        return h0 + C * (1.0 + u + std::pow(u, beta) / std::max(beta, 1e-300));
    }

    TailFunctional power_functional(double beta)
    {
        if (!(beta >= 0.0))
            throw DomainError("power functional needs beta >= 0");
        TailFunctional F;
        F.H = [beta](double u) { return u <= 0.0 ? (beta == 0.0 ? 1.0 : 0.0) : std::pow(u, beta); };
        F.h = [beta](double u) {
            if (beta == 0.0)
                return 0.0;
            if (u <= 0.0)
                return beta < 1.0 ? std::numeric_limits<double>::infinity() : (beta == 1.0 ? 1.0 : 0.0);
            return beta * std::pow(u, beta - 1.0);
        };
        // h(u) = beta u^(beta-1) <= beta (1 + u^(beta-1)) for beta >= 1; the beta < 1 case
        // is bounded through H directly, so use exponent max(beta, 1).
        F.C = std::max(beta, 1.0);
        F.beta = std::max(beta, 1.0);
        return F;
    }

    TailFunctional polynomial_functional(std::vector<double> coefs, std::vector<double> exps)
    {
        if (coefs.size() != exps.size())
            throw DomainError("polynomial functional: coefficient and exponent counts differ");
        double C = 0.0;
        double top = 1.0;
        for (std::size_t i = 0; i < coefs.size(); ++i)
        {
            if (coefs[i] < 0.0 || exps[i] < 0.0)
                throw DomainError("polynomial functional needs nonnegative coefficients and exponents");
            if (exps[i] > 0.0)
            {
                C += coefs[i] * std::max(exps[i], 1.0);
                top = std::max(top, exps[i]);
            }
        }
        TailFunctional F;
        F.H = [coefs, exps](double u) {
            double s = 0.0;
            for (std::size_t i = 0; i < coefs.size(); ++i)
                s += coefs[i] * (exps[i] == 0.0 ? 1.0 : (u <= 0.0 ? 0.0 : std::pow(u, exps[i])));
            return s;
        };
        F.h = [coefs, exps](double u) {
            double s = 0.0;
            for (std::size_t i = 0; i < coefs.size(); ++i)
            {
                if (exps[i] == 0.0)
                    continue;
                if (u <= 0.0)
                    s += exps[i] == 1.0 ? coefs[i] : (exps[i] < 1.0 ? std::numeric_limits<double>::infinity() : 0.0);
                else
                    s += coefs[i] * exps[i] * std::pow(u, exps[i] - 1.0);
            }
            return s;
        };
        F.C = std::max(C, 1e-300);
        F.beta = top;
        return F;
    }

    double expect_tail_functional(const WalkKernel& kernel, double z, const TailFunctional& F)
    {
        const double t = kernel.time();
        const std::int64_t K = kernel.reach();
        const std::int64_t first = floor_to_site(z) + 1;

        double sum = 0.0;
        std::int64_t lo = std::max(first, -K);
        std::int64_t hi = std::max(lo - 1, K);
        for (std::int64_t k = lo; k <= hi; ++k)
        {
            const double p = kernel.pmf(k);
            if (p != 0.0)
                sum += F.H(static_cast<double>(k) - z) * p;
        }

        auto upper_remainder = [&](std::int64_t last) {
            if (t == 0.0)
                return 0.0;
            const double next = static_cast<double>(last + 1);
            const double u0 = next - z;
            const double first_bound = F.H_bound(u0) * std::exp(-chernoff_exponent(t, next));
            const double ratio = majorant_step_ratio(u0, F.beta) * step_decay(t, next);
            return geometric_remainder(first_bound, ratio);
        };
        auto lower_remainder = [&](std::int64_t lowest) {
            if (t == 0.0 || lowest <= first)
                return 0.0;
            // H is nondecreasing, so every omitted site k < lowest contributes at most H(lowest - 1 - z).
            const double below = static_cast<double>(lowest - 1);
            return F.H(below - z) * std::exp(-chernoff_exponent(t, -below));
        };

        std::int64_t chunk = std::max<std::int64_t>(64, K / 4);
        double rem_hi = upper_remainder(hi);
        while (rem_hi > kRemainderRel * sum && rem_hi > kTinyAbs && hi - K < kExtensionCap)
        {
            for (std::int64_t k = hi + 1; k <= hi + chunk; ++k)
                sum += F.H(static_cast<double>(k) - z) * kernel.pmf(k);
            hi += chunk;
            chunk *= 2;
            rem_hi = upper_remainder(hi);
        }
        chunk = std::max<std::int64_t>(64, K / 4);
        double rem_lo = lower_remainder(lo);
        while (rem_lo > kRemainderRel * sum && rem_lo > kTinyAbs && -K - lo < kExtensionCap)
        {
            const std::int64_t stop = std::max(first, lo - chunk);
            for (std::int64_t k = lo - 1; k >= stop; --k)
                sum += F.H(static_cast<double>(k) - z) * kernel.pmf(k);
            lo = stop;
            chunk *= 2;
            rem_lo = lower_remainder(lo);
        }
        const double rem = rem_hi + rem_lo;
        if (rem > kGuardRel * sum && rem > kTinyAbs)
        {
            throw TruncationError("tail functional remainder " + std::to_string(rem) +
                                  " exceeds 1e-9 of the partial sum " + std::to_string(sum));
        }
        return sum;
    }

    double expect_tail_functional(double t, double z, const TailFunctional& F)
    {
        return expect_tail_functional(WalkKernel(t), z, F);
    }

    double sum_weighted_tails(const WalkKernel& kernel, double z, const WeightFunction& h)
    {
        const double t = kernel.time();
        const std::int64_t base = floor_to_site(z) + 1; // P(zeta > z + j) = P(zeta >= base + j)
        const std::int64_t K = kernel.reach();

        double sum = 0.0;
        std::int64_t j = 0;
        const std::int64_t natural_end = std::max<std::int64_t>(0, K - base);
        if (natural_end > kExtensionCap)
            throw TruncationError("weighted tail sum needs more than 1e7 terms (level far below the walk)");
        for (; j <= natural_end; ++j)
            sum += h.w(static_cast<double>(j)) * kernel.tail_ge(base + j);

        auto remainder = [&](std::int64_t next_j) {
            if (t == 0.0)
                return base + next_j > 0 ? 0.0 : std::numeric_limits<double>::infinity();
            const double site = static_cast<double>(base + next_j);
            if (site <= 0.0)
                return std::numeric_limits<double>::infinity();
            const double jj = static_cast<double>(next_j);
            const double first_bound = h.C * (1.0 + std::pow(jj, h.p)) * std::exp(-chernoff_exponent(t, site));
            const double ratio = majorant_step_ratio(std::max(jj, 1.0), h.p) * step_decay(t, site);
            return geometric_remainder(first_bound, ratio);
        };

        std::int64_t chunk = std::max<std::int64_t>(64, K / 4);
        double rem = remainder(j);
        while (rem > kRemainderRel * sum && rem > kTinyAbs && j < kExtensionCap)
        {
            for (const std::int64_t stop = j + chunk; j < stop; ++j)
                sum += h.w(static_cast<double>(j)) * kernel.tail_ge(base + j);
            chunk *= 2;
            rem = remainder(j);
        }
        if (rem > kGuardRel * sum && rem > kTinyAbs)
        {
            throw TruncationError("weighted tail sum remainder " + std::to_string(rem) +
                                  " exceeds 1e-9 of the partial sum " + std::to_string(sum));
        }
        return sum;
    }

    double sum_weighted_tails(double t, double z, const WeightFunction& h)
    {
        return sum_weighted_tails(WalkKernel(t), z, h);
    }

    double gauss_density(double u)
    {
        return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
    }

    double log_gauss_tail(double u)
    {
        if (u < 5.0)
            return std::log(0.5 * std::erfc(u / std::numbers::sqrt2));
        // Mills ratio Q(u)/phi(u) = 1/(u + 1/(u + 2/(u + 3/(u + ...)))) by modified Lentz.
        constexpr double tiny = 1e-300;
        double f = u;
        double c = u;
        double d = 0.0;
        for (int n = 1; n < 500; ++n)
        {
            const double a = static_cast<double>(n);
            d = u + a * d;
            d = d == 0.0 ? tiny : d;
            c = u + a / c;
            c = c == 0.0 ? tiny : c;
            d = 1.0 / d;
            const double delta = c * d;
            f *= delta;
            if (std::abs(delta - 1.0) < 1e-16)
                break;
        }
        return -0.5 * u * u - 0.5 * std::log(2.0 * std::numbers::pi) - std::log(f);
    }

    double gauss_tail(double u)
    {
        return std::exp(log_gauss_tail(u));
    }

    namespace
    {
        // Integral over s in [0, inf) of H(s) exp(-(s + u)^2 / 2) / sqrt(2 pi).
        // For u >= 0 the factor phi(u) is pulled out so the integrand stays O(1).
        double gauss_shifted_integral(double u, const std::function<double(double)>& H)
        {
            boost::math::quadrature::tanh_sinh<double> integrator(18);
            constexpr double tol = 1e-13;
            if (u >= 0.0)
            {
                auto f = [&](double s) { return H(s) * std::exp(-u * s - 0.5 * s * s); };
                const double width = std::min(40.0, 40.0 / std::max(u, 1.0) + 12.0);
                double J = integrator.integrate(f, 0.0, width, tol);
                J += integrator.integrate(f, width, 40.0, tol);
                return gauss_density(u) * J;
            }
            const double peak = -u;
            auto f = [&](double s) {
                const double y = s + u;
                return H(s) * std::exp(-0.5 * y * y) / std::sqrt(2.0 * std::numbers::pi);
            };
            const double left = integrator.integrate(f, 0.0, peak, tol);
            const double right = integrator.integrate(f, peak, peak + 40.0, tol);
            return left + right;
        }
    } // namespace

    double gauss_partial_moment(double u, double beta)
    {
        if (!(beta >= 0.0))
            throw DomainError("gauss_partial_moment needs beta >= 0");
        if (beta == 0.0)
            return gauss_tail(u);
        return gauss_shifted_integral(u, [beta](double s) { return s <= 0.0 ? 0.0 : std::pow(s, beta); });
    }

    double gauss_partial_moment_asymptotic(double u, double beta)
    {
        if (!(beta >= 0.0))
            throw DomainError("gauss_partial_moment needs beta >= 0");
        return std::tgamma(beta + 1.0) * gauss_density(u) / std::pow(u, beta + 1.0);
    }

    double gauss_tail_functional(double sigma, double z, const std::function<double(double)>& H)
    {
        if (!(sigma > 0.0))
            throw DomainError("gauss_tail_functional needs sigma > 0");
        return gauss_shifted_integral(z / sigma, [&](double s) { return H(sigma * s); });
    }

    double ld_ratio(double t, double u)
    {
        if (!(t > 0.0))
            throw DomainError("ld_ratio needs t > 0");
        if (u > 38.0)
            throw DomainError("Gaussian tail underflows for u > 38");
        const double gauss = gauss_tail(u);
        return walk_tail(t, u * std::sqrt(t)) / gauss - 1.0;
    }

    PmfRegularity pmf_regularity_checks(const WalkKernel& kernel, std::int64_t b)
    {
        const std::int64_t K = kernel.reach();
        const std::int64_t shift = b < 0 ? -b : b;
        double sup = 0.0;
        for (std::int64_t k = -K; k <= K; ++k)
            sup = std::max(sup, kernel.pmf(k));
        double diff = 0.0;
        if (shift != 0)
        {
            for (std::int64_t a = -K - shift; a <= K + shift; ++a)
                diff += std::abs(kernel.pmf(a) - kernel.pmf(a + shift));
        }
        return {sup, diff};
    }

    PmfRegularity pmf_regularity_checks(double t, std::int64_t b)
    {
        if (!(t > 0.0))
            throw DomainError("pmf_regularity_checks needs t > 0");
        return pmf_regularity_checks(WalkKernel(t), b);
    }
} // namespace ssep::rw
