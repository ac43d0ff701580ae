#include "ssep/theory.hpp"

#include "ssep/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>

namespace ssep::theory
{
    namespace
    {
        constexpr std::int64_t kDepthCap = 10'000'000;

        // f(u) <= C (1 + u^p) for u >= 1.
        struct Growth
        {
            double C = 1.0;
            double p = 0.0;
        };

        Growth factor_growth(const ShapeFunction& g)
        {
            if (g.is_closed_form())
            {
                const PolynomialShape s = g.as_polynomial();
                if (s.alpha == 0.0)
                    return {2.0 * (s.c + s.r) + 1.0, 0.0};
                return {std::max(2.0 * s.c, 2.0 * s.r + 1.0), s.alpha};
            }
            const auto& tab = std::get<TabulatedShape>(g.kind());
            const double top = *std::max_element(tab.values.begin(), tab.values.end());
            const double slope = g.growth_degree() > 0.0 ? g.value(tab.grid.back() + 1.0) - g.value(tab.grid.back()) : 0.0;
            if (slope <= 0.0)
                return {2.0 * top + 1.0, 0.0};
            return {std::max(2.0 * top + 1.0, 2.0 * slope), 1.0};
        }

        // Growth of G over all indices, and of a single derivative factor bound.
        Growth G_growth(const Profile& profile)
        {
            Growth out{1.0, 0.0};
            int k = 0;
            for (const auto& g : profile.shapes())
            {
                const Growth f = factor_growth(g);
                out.C *= f.C;
                out.p += f.p;
                ++k;
            }
            out.C *= std::pow(3.0, std::max(0, k - 1));
            return out;
        }

        double max_derivative(const ShapeFunction& g)
        {
            if (g.is_closed_form())
            {
                const PolynomialShape s = g.as_polynomial();
                return s.alpha == 0.0 ? 0.0 : s.c * std::max(1.0, s.alpha);
            }
            const auto& tab = std::get<TabulatedShape>(g.kind());
            double m = 0.0;
            for (double v : tab.derivatives)
                m = std::max(m, std::abs(v));
            return std::max(m, std::abs(g.derivative(tab.grid.back() + 1.0)));
        }

        rw::TailFunctional make_functional(std::function<double(double)> H, Growth g)
        {
            rw::TailFunctional F;
            F.H = std::move(H);
            F.beta = std::max(g.p, 1.0);
            // C (1 + u + u^beta / beta) >= g.C (1 + u^p) once C = 2 g.C beta
            F.C = 2.0 * g.C * F.beta;
            return F;
        }

        rw::TailFunctional monomial_functional(const Monomials& m)
        {
            Growth g{0.0, m.max_exponent()};
            for (double c : m.coef)
                g.C += std::abs(c);
            return make_functional(m, g);
        }

        Monomials derivative_of(const Monomials& m)
        {
            Monomials out;
            for (std::size_t i = 0; i < m.coef.size(); ++i)
            {
                if (m.exp[i] == 0.0)
                    continue;
                out.coef.push_back(m.coef[i] * m.exp[i]);
                out.exp.push_back(m.exp[i] - 1.0);
            }
            return out;
        }

        Monomials hat_derivative(const Profile& profile, const IndexSet& A)
        {
            Monomials out;
            for (int i : A)
            {
                IndexSet rest;
                for (int l : A)
                {
                    if (l != i)
                        rest.push_back(l);
                }
                const Monomials term = expand_G(profile, rest);
                out.coef.insert(out.coef.end(), term.coef.begin(), term.coef.end());
                out.exp.insert(out.exp.end(), term.exp.begin(), term.exp.end());
            }
            return out;
        }

        struct Functionals
        {
            rw::TailFunctional G;
            rw::TailFunctional G_prime;
            rw::TailFunctional G_hat;
        };

        Functionals functionals_for(const Profile& profile, const IndexSet& A)
        {
            if (std::all_of(A.begin(), A.end(), [&](int i) { return profile.shape(i).is_closed_form(); }))
            {
                const Monomials G = expand_G(profile, A);
                Functionals f{monomial_functional(G), monomial_functional(derivative_of(G)),
                              monomial_functional(hat_derivative(profile, A).integral())};
                return f;
            }
            const Growth gg = G_growth(profile);
            double dmax = 0.0;
            for (int i : A)
                dmax = std::max(dmax, max_derivative(profile.shape(i)));
            const double k = static_cast<double>(A.size());
            Functionals f{
                make_functional([&profile, A](double u) { return eval_G(profile, A, std::max(u, 0.0)).G; }, gg),
                make_functional([&profile, A](double u) { return eval_G(profile, A, std::max(u, 0.0)).G_prime; },
                                Growth{2.0 * k * dmax * gg.C + 1e-300, gg.p}),
                make_functional([&profile, A](double u) { return eval_G(profile, A, std::max(u, 0.0)).G_hat; },
                                Growth{2.0 * k * gg.C, gg.p + 1.0}),
            };
            return f;
        }

        double safe_expect(const rw::WalkKernel& ker, double z, const rw::TailFunctional& F)
        {
            try
            {
                return rw::expect_tail_functional(ker, z, F);
            }
            catch (const TruncationError& e)
            {
                throw TruncationError(std::string(e.what()) +
                                      "; the shape grows too fast for the walk tail (Condition (C) fails)");
            }
        }

        void require_time(double t)
        {
            if (!(t >= 0.0) || !std::isfinite(t))
                throw DomainError("time must be finite and nonnegative");
        }

        double weight_at(const Profile& profile, std::int64_t j)
        {
            return static_cast<double>(cross_section_count(profile, j)) * profile.slab_weight(j);
        }
    } // namespace

    Scaling scaling_for(int d, double beta, double t, double x)
    {
        if (d < 1)
            throw DomainError("scaling needs d >= 1");
        if (!(beta > 0.0))
            throw DomainError("scaling needs beta > 0");
        if (!(t > std::numbers::e))
            throw DomainError("scaling needs t > e so that log t > 1, got t = " + std::to_string(t));
        Scaling s;
        s.d = d;
        s.beta = beta;
        s.x = x;
        s.t = t;
        const double lt = std::log(t);
        s.a_t = std::log(t / (std::pow(2.0 * std::numbers::pi, 1.0 / (2.0 * beta)) *
                              std::pow(lt, (beta + 1.0) / (2.0 * beta))));
        s.b_t = std::sqrt(beta * t / (static_cast<double>(d) * lt));
        s.z = s.b_t * (x + s.a_t);
        s.w = s.z / std::sqrt(t / static_cast<double>(d));

        const double expanded =
            s.b_t * (x - std::log(2.0 * std::numbers::pi) / (2.0 * beta) + lt - (beta + 1.0) / (2.0 * beta) * std::log(lt));
        if (std::abs(expanded - s.z) > 1e-10 * std::max(1.0, std::abs(s.z)))
            throw std::logic_error("scaling: expanded level disagrees with b_t (x + a_t)");
        return s;
    }

    double mean_N_exact(const Profile& profile, double t, double z)
    {
        require_time(t);
        const Growth g = G_growth(profile);
        const rw::WeightFunction w{[&profile](double j) { return weight_at(profile, static_cast<std::int64_t>(j)); },
                                   g.C, g.p};
        try
        {
            return rw::sum_weighted_tails(rw::WalkKernel(t / profile.dim()), z, w);
        }
        catch (const TruncationError& e)
        {
            throw TruncationError(std::string(e.what()) +
                                  "; the shape grows too fast for the walk tail (Condition (C) fails)");
        }
    }

    AsymptoticMean mean_N_asymptotic(const Profile& profile, double t, double z, std::int64_t horizon)
    {
        require_time(t);
        AsymptoticMean out;
        double Lprod = 1.0;
        for (int i = 2; i <= profile.dim(); ++i)
        {
            const ShapeFunction& g = profile.shape(i);
            bool bounded;
            if (g.is_closed_form())
                bounded = g.as_polynomial().alpha == 0.0;
            else
                bounded = !(g.value(static_cast<double>(horizon)) >= 10.0 * g.value(0.0) &&
                            g.value(static_cast<double>(horizon)) > g.value(0.0));
            if (bounded)
            {
                const double lim = 2.0 * static_cast<double>(g.floor_at(static_cast<double>(horizon))) + 1.0;
                out.B.push_back(i);
                out.L.push_back(lim);
                Lprod *= lim;
            }
            else
            {
                out.U.push_back(i);
            }
        }
        const double rho = profile.density() ? profile.density()->mean() : 1.0;

        const rw::WalkKernel ker(t / profile.dim());
        const Functionals f = functionals_for(profile, out.U);
        rw::TailFunctional integral;
        if (std::all_of(out.U.begin(), out.U.end(), [&](int i) { return profile.shape(i).is_closed_form(); }))
        {
            integral = monomial_functional(expand_G(profile, out.U).integral());
        }
        else
        {
            const Growth gg = G_growth(profile);
            const IndexSet U = out.U;
            integral = make_functional(
                [&profile, U](double v) {
                    if (v <= 0.0)
                        return 0.0;
                    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
                        [&](double s) { return eval_G(profile, U, s).G; }, 0.0, v, 10, 1e-12);
                },
                Growth{gg.C * 2.0, gg.p + 1.0});
        }
        out.value = rho * Lprod * safe_expect(ker, z, integral);
        out.error_bound = rho * Lprod * (safe_expect(ker, z, f.G) + safe_expect(ker, z, f.G_hat));
        return out;
    }

    LambdaLimit lambda_limit(const Profile& profile, double x)
    {
        if (!profile.all_closed_form())
            throw CapabilityError("the Poisson rate needs polynomial or constant shapes");
        LambdaLimit out;
        out.beta = profile.beta();
        const double d = profile.dim();
        double M = std::tgamma(out.beta) / (std::pow(d, out.beta / 2.0) * std::pow(out.beta, (out.beta + 1.0) / 2.0));
        for (const auto& g : profile.shapes())
        {
            const PolynomialShape s = g.as_polynomial();
            if (s.alpha == 0.0)
                M *= 2.0 * std::floor(s.c + s.r + 1e-12) + 1.0;
            else
                M *= 2.0 * s.c;
        }
        out.M = M;
        const double rho = profile.density() ? profile.density()->mean() : 1.0;
        out.lambda = rho * M * std::exp(-out.beta * x);
        return out;
    }

    double gumbel_cdf(int m, double x, double M, double beta)
    {
        if (m < 0)
            throw DomainError("order statistic index must be nonnegative");
        if (!(M > 0.0) || !(beta > 0.0))
            throw DomainError("gumbel_cdf needs M > 0 and beta > 0");
        const double lam = M * std::exp(-beta * x);
        if (lam == 0.0)
            return 1.0;
        if (!std::isfinite(lam))
            return 0.0;
        return boost::math::gamma_q(static_cast<double>(m) + 1.0, lam);
    }

    double gamma_d(double t, int d)
    {
        if (d < 2)
            throw DomainError("gamma_d needs d >= 2");
        if (!(t > 1.0))
            throw DomainError("gamma_d needs t > 1");
        if (d == 2)
            return std::sqrt(t);
        if (d == 3)
            return std::log(t);
        return 1.0;
    }

    ShapeFunctionals shape_functionals(const Profile& profile, double t, double z)
    {
        require_time(t);
        const rw::WalkKernel ker(t / profile.dim());
        const Functionals f = functionals_for(profile, all_indices(profile));
        return {safe_expect(ker, z, f.G), safe_expect(ker, z, f.G_prime), safe_expect(ker, z, f.G_hat)};
    }

    double ss_bound(const Profile& profile, double t, double z)
    {
        require_time(t);
        const rw::WalkKernel ker(t / profile.dim());
        const Functionals f = functionals_for(profile, all_indices(profile));
        return mean_N_exact(profile, t, z) * safe_expect(ker, z, f.G);
    }

    CovBound cov_bound(const Profile& profile, double t, double z)
    {
        CovBound out;
        out.functionals = shape_functionals(profile, t, z);
        const auto& e = out.functionals;
        const double gd = gamma_d(t, profile.dim());
        const double gd1 = gamma_d(t, profile.dim() + 1);
        out.full = gd * (e.E_G + e.E_G_prime) * (e.E_G + e.E_G_prime) + gd1 * e.E_G * e.E_G_hat;
        out.simplified = gd * e.E_G * e.E_G + gd1 * e.E_G;
        return out;
    }

    Cond23Point cond23_point(const Profile& profile, double t, double z)
    {
        const int d = profile.dim();
        if (d != 2 && d != 3)
            throw DomainError("the d = 2, 3 condition applies only to d in {2, 3}");
        if (!(t > 1.0))
            throw DomainError("the d = 2, 3 condition needs t > 1");
        Cond23Point p;
        p.t = t;
        p.z = z;
        const rw::WalkKernel ker(t / d);
        p.value = safe_expect(ker, z, functionals_for(profile, all_indices(profile)).G);
        p.threshold = d == 2 ? std::pow(t, -0.25) : 1.0 / std::sqrt(std::log(t));
        p.ratio = p.value / p.threshold;
        return p;
    }

    Cond23 cond23_value(const Profile& profile, std::span<const std::pair<double, double>> schedule)
    {
        Cond23 out;
        for (const auto& [t, z] : schedule)
            out.points.push_back(cond23_point(profile, t, z));
        out.pass = out.points.size() >= 2;
        for (std::size_t i = 1; i < out.points.size(); ++i)
            out.pass = out.pass && out.points[i].ratio < out.points[i - 1].ratio;
        return out;
    }

    std::int64_t truncation_depth(const Profile& profile, double t, double z, double eps)
    {
        require_time(t);
        if (!(eps > 0.0))
            throw DomainError("truncation_depth needs eps > 0");
        const double s = t / profile.dim();
        const rw::WalkKernel ker(s);
        const Growth g = G_growth(profile);
        const std::int64_t base = static_cast<std::int64_t>(std::floor(z)) + 1;

        // Chernoff remainder for all j >= next.
        auto remainder = [&](std::int64_t next) {
            const double site = static_cast<double>(base + next);
            if (s == 0.0)
                return site > 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
            if (site <= 0.0)
                return std::numeric_limits<double>::infinity();
            const double jj = std::max(static_cast<double>(next), 1.0);
            const double first = g.C * (1.0 + std::pow(jj, g.p)) * std::exp(-rw::chernoff_exponent(s, site));
            const double ratio = std::pow((jj + 1.0) / jj, std::max(1.0, g.p)) * std::exp(-std::asinh(site / s));
            return ratio < 1.0 ? first / (1.0 - ratio) : std::numeric_limits<double>::infinity();
        };

        std::vector<double> terms;
        std::int64_t j = 0;
        while (remainder(j) >= 1e-3 * eps)
        {
            if (j >= kDepthCap)
                throw TruncationError("truncation depth exceeds the cap of 1e7 slabs");
            terms.push_back(weight_at(profile, j) * ker.tail_ge(base + j));
            ++j;
        }
        // suffix[L] = sum_{j > L} terms + remainder
        double suffix = remainder(j);
        std::int64_t L = static_cast<std::int64_t>(terms.size());
        for (std::int64_t k = static_cast<std::int64_t>(terms.size()) - 1; k >= 0; --k)
        {
            // suffix currently = sum over j > k
            if (suffix >= eps)
                break;
            L = k;
            suffix += terms[static_cast<std::size_t>(k)];
        }
        return L;
    }

    double duality_occupation(const Profile& profile, double t, std::span<const std::int64_t> x,
                              std::int64_t max_depth)
    {
        require_time(t);
        const int d = profile.dim();
        if (x.size() != static_cast<std::size_t>(d))
            throw DomainError("site dimension does not match the profile");
        const rw::WalkKernel ker(t / d);
        double sum = 0.0;
        for (std::int64_t j = 0; max_depth < 0 || j <= max_depth; ++j)
        {
            const double p1 = ker.pmf(x[0] + j);
            if (p1 > 0.0)
            {
                double prod = p1 * profile.slab_weight(j);
                for (int i = 2; i <= d; ++i)
                {
                    const std::int64_t G = profile.shape(i).floor_at(static_cast<double>(j));
                    const std::int64_t xi = x[static_cast<std::size_t>(i - 1)];
                    prod *= ker.tail_ge(xi - G) - ker.tail_ge(xi + G + 1);
                }
                sum += prod;
            }
            // remaining slabs contribute at most P(zeta >= x_1 + j + 1)
            if (x[0] + j + 1 > 0 && ker.tail_ge(x[0] + j + 1) < 1e-16 * std::max(sum, 1e-300))
                break;
            if (t == 0.0 && x[0] + j + 1 > 0)
                break;
            if (j >= kDepthCap)
                throw TruncationError("duality sum did not converge within 1e7 slabs");
        }
        return sum;
    }

    double independent_gap(const Profile& profile, double t, double z, std::int64_t max_depth)
    {
        require_time(t);
        const rw::WalkKernel ker(t / profile.dim());
        const std::int64_t base = static_cast<std::int64_t>(std::floor(z)) + 1;
        const Growth g = G_growth(profile);
        double sum = 0.0;
        for (std::int64_t j = 0; max_depth < 0 || j <= max_depth; ++j)
        {
            const double p = profile.slab_weight(j) * ker.tail_ge(base + j);
            sum += static_cast<double>(cross_section_count(profile, j)) * p * p;
            const double site = static_cast<double>(base + j + 1);
            if (site > 0.0)
            {
                const double bound = g.C * (1.0 + std::pow(static_cast<double>(j + 1), g.p)) *
                                     std::exp(-rw::chernoff_exponent(t / profile.dim(), site)) *
                                     static_cast<double>(j + 2);
                if (t == 0.0 || bound < 1e-16 * std::max(sum, 1e-300))
                    break;
            }
            if (j >= kDepthCap)
                throw TruncationError("independent gap did not converge within 1e7 slabs");
        }
        return sum;
    }

    TheoryReport make_report(const Profile& profile, double t, double x, double trunc_eps)
    {
        TheoryReport r;
        r.t = t;
        r.x = x;
        const LambdaLimit lim = lambda_limit(profile, x);
        r.beta = lim.beta;
        r.M = lim.M;
        r.lambda_limit = lim.lambda;
        r.scaling = scaling_for(profile.dim(), lim.beta, t, x);
        const double z = r.scaling.z;
        r.mean_exact = mean_N_exact(profile, t, z);
        r.mean_asymptotic = mean_N_asymptotic(profile, t, z);
        r.gamma_d = gamma_d(t, profile.dim());
        r.gamma_d1 = gamma_d(t, profile.dim() + 1);
        r.ss_bound = ss_bound(profile, t, z);
        r.cov_bound = cov_bound(profile, t, z);
        if (profile.dim() <= 3)
            r.cond23 = cond23_point(profile, t, z);
        r.truncation_eps = trunc_eps;
        r.truncation_depth = truncation_depth(profile, t, z, trunc_eps);
        return r;
    }

    nlohmann::json to_json(const Scaling& s)
    {
        return {{"d", s.d}, {"beta", s.beta}, {"x", s.x}, {"t", s.t},
                {"a_t", s.a_t}, {"b_t", s.b_t}, {"z", s.z}, {"w", s.w}};
    }

    nlohmann::json to_json(const TheoryReport& r)
    {
        nlohmann::json j;
        j["t"] = r.t;
        j["x"] = r.x;
        j["scaling"] = to_json(r.scaling);
        j["beta"] = r.beta;
        j["M"] = r.M;
        j["lambda_limit"] = r.lambda_limit;
        j["mean_exact"] = r.mean_exact;
        j["mean_asymptotic"] = {{"value", r.mean_asymptotic.value},
                                {"error_bound", r.mean_asymptotic.error_bound},
                                {"unbounded", r.mean_asymptotic.U},
                                {"bounded", r.mean_asymptotic.B},
                                {"limits", r.mean_asymptotic.L}};
        j["gamma_d"] = r.gamma_d;
        j["gamma_d1"] = r.gamma_d1;
        j["ss_bound"] = r.ss_bound;
        j["cov_bound"] = {{"full", r.cov_bound.full},
                          {"simplified", r.cov_bound.simplified},
                          {"E_G", r.cov_bound.functionals.E_G},
                          {"E_G_prime", r.cov_bound.functionals.E_G_prime},
                          {"E_G_hat", r.cov_bound.functionals.E_G_hat}};
        if (r.cond23)
        {
            j["cond23_value"] = {{"value", r.cond23->value},
                                 {"threshold", r.cond23->threshold},
                                 {"ratio", r.cond23->ratio}};
        }
        else
        {
            j["cond23_value"] = nullptr;
        }
        j["truncation_depth"] = r.truncation_depth;
        j["truncation_eps"] = r.truncation_eps;
        j["constants"] = "uncalibrated (C = 1)";
        return j;
    }
} // namespace ssep::theory
