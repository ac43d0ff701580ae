#include "ssep/profile.hpp"

#include "ssep/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ssep
{
    namespace
    {
        constexpr double kFloorNudge = 1e-12;

        template <class... Ts>
        struct overloaded : Ts...
        {
            using Ts::operator()...;
        };
        template <class... Ts>
        overloaded(Ts...) -> overloaded<Ts...>;

        // Segment index s with grid[s] <= u < grid[s+1], clamped to [0, n-2].
        std::size_t segment_of(const std::vector<double>& grid, double u)
        {
            const auto it = std::upper_bound(grid.begin(), grid.end(), u);
            const auto idx = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, it - grid.begin() - 1));
            return std::min(idx, grid.size() - 2);
        }

        double tabulated_value(const TabulatedShape& s, double u)
        {
            if (s.grid.size() == 1 || u <= s.grid.front())
                return s.values.front();
            const std::size_t i = segment_of(s.grid, u);
            const double slope = (s.values[i + 1] - s.values[i]) / (s.grid[i + 1] - s.grid[i]);
            return s.values[i] + slope * (u - s.grid[i]);
        }

        double tabulated_derivative(const TabulatedShape& s, double u)
        {
            if (s.derivatives.empty())
                throw CapabilityError("tabulated shape has no derivative data");
            if (s.grid.size() == 1)
                return 0.0;
            if (u <= s.grid.front())
                return s.derivatives.front();
            if (u > s.grid.back())
            {
                const std::size_t n = s.grid.size();
                return (s.values[n - 1] - s.values[n - 2]) / (s.grid[n - 1] - s.grid[n - 2]);
            }
            const std::size_t i = segment_of(s.grid, u);
            const double w = (u - s.grid[i]) / (s.grid[i + 1] - s.grid[i]);
            return (1.0 - w) * s.derivatives[i] + w * s.derivatives[i + 1];
        }

        double tail_slope(const TabulatedShape& s)
        {
            const std::size_t n = s.grid.size();
            if (n < 2)
                return 0.0;
            return (s.values[n - 1] - s.values[n - 2]) / (s.grid[n - 1] - s.grid[n - 2]);
        }

        void validate_subset(const Profile& profile, const IndexSet& A)
        {
            std::vector<int> seen;
            for (int i : A)
            {
                if (i < 2 || i > profile.dim())
                    throw DomainError("index " + std::to_string(i) + " outside {2..d}");
                if (std::find(seen.begin(), seen.end(), i) != seen.end())
                    throw DomainError("index " + std::to_string(i) + " repeated in subset");
                seen.push_back(i);
            }
        }

        Monomials multiply(const Monomials& a, const Monomials& b)
        {
            Monomials out;
            for (std::size_t i = 0; i < a.coef.size(); ++i)
            {
                for (std::size_t j = 0; j < b.coef.size(); ++j)
                {
                    const double e = a.exp[i] + b.exp[j];
                    const double c = a.coef[i] * b.coef[j];
                    if (c == 0.0)
                        continue;
                    auto it = std::find_if(out.exp.begin(), out.exp.end(),
                                           [e](double x) { return std::abs(x - e) < 1e-12; });
                    if (it == out.exp.end())
                    {
                        out.exp.push_back(e);
                        out.coef.push_back(c);
                    }
                    else
                    {
                        out.coef[static_cast<std::size_t>(it - out.exp.begin())] += c;
                    }
                }
            }
            return out;
        }

        Monomials one()
        {
            return Monomials{{1.0}, {0.0}};
        }

        Monomials factor_of(const ShapeFunction& g)
        {
            const PolynomialShape p = g.as_polynomial();
            if (p.alpha == 0.0)
                return Monomials{{2.0 * (p.c + p.r) + 1.0}, {0.0}};
            return Monomials{{2.0 * p.c, 2.0 * p.r + 1.0}, {p.alpha, 0.0}};
        }

        // Breakpoints of the piecewise-linear tabulated shapes inside (0, u).
        std::vector<double> breakpoints(const Profile& profile, const IndexSet& A, double u)
        {
            std::vector<double> pts{0.0, u};
            for (int i : A)
            {
                if (const auto* tab = std::get_if<TabulatedShape>(&profile.shape(i).kind()))
                {
                    for (double g : tab->grid)
                    {
                        if (g > 0.0 && g < u)
                            pts.push_back(g);
                    }
                }
            }
            std::sort(pts.begin(), pts.end());
            pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
            return pts;
        }

        double hat_integrand(const Profile& profile, const IndexSet& A, double v)
        {
            double s = 0.0;
            for (int i : A)
            {
                double prod = 1.0;
                for (int l : A)
                {
                    if (l != i)
                        prod *= 2.0 * profile.shape(l).value(v) + 1.0;
                }
                s += prod;
            }
            return s;
        }
    } // namespace

    ShapeFunction::ShapeFunction(Kind kind) : kind_(std::move(kind))
    {
        std::visit(overloaded{
                       [](const PolynomialShape& p) {
                           if (!(p.c > 0.0) || !(p.alpha >= 0.0) || !(p.r >= 0.0))
                               throw DomainError("polynomial shape needs c > 0, alpha >= 0, r >= 0");
                       },
                       [](const ConstantShape& c) {
                           if (!(c.value >= 0.0))
                               throw DomainError("constant shape must be nonnegative");
                       },
                       [](const TabulatedShape& t) {
                           if (t.grid.empty() || t.grid.size() != t.values.size())
                               throw DomainError("tabulated shape needs matching, nonempty grid and values");
                           if (!t.derivatives.empty() && t.derivatives.size() != t.grid.size())
                               throw DomainError("tabulated derivative data must match the grid");
                           for (std::size_t i = 0; i < t.grid.size(); ++i)
                           {
                               if (t.values[i] < 0.0)
                                   throw DomainError("tabulated shape values must be nonnegative");
                               if (i > 0 && !(t.grid[i] > t.grid[i - 1]))
                                   throw DomainError("tabulated grid must be strictly increasing");
                           }
                       },
                   },
                   kind_);
    }

    ShapeFunction ShapeFunction::polynomial(double c, double alpha, double r)
    {
        return ShapeFunction(PolynomialShape{c, alpha, r});
    }

    ShapeFunction ShapeFunction::constant(double value)
    {
        return ShapeFunction(ConstantShape{value});
    }

    ShapeFunction ShapeFunction::tabulated(std::vector<double> grid, std::vector<double> values,
                                           std::vector<double> derivatives)
    {
        return ShapeFunction(TabulatedShape{std::move(grid), std::move(values), std::move(derivatives)});
    }

    double ShapeFunction::value(double u) const
    {
        return std::visit(overloaded{
                              [u](const PolynomialShape& p) {
                                  if (p.alpha == 0.0)
                                      return p.c + p.r;
                                  return p.c * std::pow(std::max(u, 0.0), p.alpha) + p.r;
                              },
                              [](const ConstantShape& c) { return c.value; },
                              [u](const TabulatedShape& t) { return tabulated_value(t, u); },
                          },
                          kind_);
    }

    double ShapeFunction::derivative(double u) const
    {
        return std::visit(overloaded{
                              [u](const PolynomialShape& p) {
                                  if (p.alpha == 0.0)
                                      return 0.0;
                                  if (u <= 0.0)
                                      return p.alpha < 1.0 ? std::numeric_limits<double>::infinity()
                                                           : (p.alpha == 1.0 ? p.c : 0.0);
                                  return p.c * p.alpha * std::pow(u, p.alpha - 1.0);
                              },
                              [](const ConstantShape&) { return 0.0; },
                              [u](const TabulatedShape& t) { return tabulated_derivative(t, u); },
                          },
                          kind_);
    }

    bool ShapeFunction::has_derivative() const noexcept
    {
        if (const auto* t = std::get_if<TabulatedShape>(&kind_))
            return !t->derivatives.empty();
        return true;
    }

    std::int64_t ShapeFunction::floor_at(double u) const
    {
        return static_cast<std::int64_t>(std::floor(value(u) + kFloorNudge));
    }

    PolynomialShape ShapeFunction::as_polynomial() const
    {
        if (const auto* p = std::get_if<PolynomialShape>(&kind_))
            return *p;
        if (const auto* c = std::get_if<ConstantShape>(&kind_))
            return PolynomialShape{c->value, 0.0, 0.0};
        throw CapabilityError("tabulated shape has no closed form");
    }

    double ShapeFunction::growth_degree() const noexcept
    {
        if (const auto* p = std::get_if<PolynomialShape>(&kind_))
            return p->alpha;
        if (const auto* t = std::get_if<TabulatedShape>(&kind_))
            return tail_slope(*t) > 0.0 ? 1.0 : 0.0;
        return 0.0;
    }

    bool ShapeFunction::bounded() const noexcept
    {
        return growth_degree() == 0.0;
    }

    double PeriodicDensity::at_depth(std::int64_t depth) const
    {
        const auto m = static_cast<std::int64_t>(rho.size());
        return rho[static_cast<std::size_t>(((depth % m) + m) % m)];
    }

    double PeriodicDensity::mean() const
    {
        double s = 0.0;
        for (double r : rho)
            s += r;
        return s / static_cast<double>(rho.size());
    }

    Profile::Profile(int d, std::vector<ShapeFunction> shapes, std::optional<PeriodicDensity> density)
        : d_(d), shapes_(std::move(shapes)), density_(std::move(density))
    {
        if (d < 2)
            throw DomainError("profiles live in d >= 2, got d = " + std::to_string(d));
        if (shapes_.size() != static_cast<std::size_t>(d - 1))
            throw DomainError("a d = " + std::to_string(d) + " profile needs " + std::to_string(d - 1) + " shapes");
        if (density_)
        {
            if (density_->rho.empty())
                throw DomainError("periodic density needs at least one value");
            bool positive = false;
            for (double r : density_->rho)
            {
                if (!(r >= 0.0 && r <= 1.0))
                    throw DomainError("periodic densities must lie in [0, 1]");
                positive = positive || r > 0.0;
            }
            if (!positive)
                throw DomainError("periodic density needs at least one positive value");
        }
    }

    Profile Profile::linear(int d, double c, double r)
    {
        return Profile(d, std::vector<ShapeFunction>(static_cast<std::size_t>(std::max(d - 1, 0)),
                                                     ShapeFunction::polynomial(c, 1.0, r)));
    }

    bool Profile::contains(std::span<const std::int64_t> x) const
    {
        if (x.size() != static_cast<std::size_t>(d_))
            throw DomainError("site dimension does not match the profile");
        if (x[0] > 0)
            return false;
        const double depth = static_cast<double>(-x[0]);
        for (int i = 2; i <= d_; ++i)
        {
            const std::int64_t xi = x[static_cast<std::size_t>(i - 1)];
            if ((xi < 0 ? -xi : xi) > shape(i).floor_at(depth))
                return false;
        }
        return true;
    }

    double Profile::slab_weight(std::int64_t depth) const
    {
        return density_ ? density_->at_depth(depth) : 1.0;
    }

    bool Profile::all_closed_form() const noexcept
    {
        return std::all_of(shapes_.begin(), shapes_.end(), [](const ShapeFunction& g) { return g.is_closed_form(); });
    }

    double Profile::beta() const
    {
        double b = 1.0;
        for (const auto& g : shapes_)
            b += g.as_polynomial().alpha;
        return b;
    }

    std::int64_t cross_section_count(const Profile& profile, std::int64_t j)
    {
        if (j < 0)
            throw DomainError("slab depth must be nonnegative");
        std::int64_t count = 1;
        for (const auto& g : profile.shapes())
        {
            const std::int64_t width = 2 * g.floor_at(static_cast<double>(j)) + 1;
            if (__builtin_mul_overflow(count, width, &count))
                throw DomainError("cross-section count overflows 64 bits at depth " + std::to_string(j));
        }
        return count;
    }

    IndexSet all_indices(const Profile& profile)
    {
        IndexSet A;
        for (int i = 2; i <= profile.dim(); ++i)
            A.push_back(i);
        return A;
    }

    double Monomials::operator()(double u) const
    {
        double s = 0.0;
        for (std::size_t i = 0; i < coef.size(); ++i)
            s += coef[i] * (exp[i] == 0.0 ? 1.0 : std::pow(std::max(u, 0.0), exp[i]));
        return s;
    }

    Monomials Monomials::integral() const
    {
        Monomials out;
        for (std::size_t i = 0; i < coef.size(); ++i)
        {
            out.coef.push_back(coef[i] / (exp[i] + 1.0));
            out.exp.push_back(exp[i] + 1.0);
        }
        return out;
    }

    double Monomials::max_exponent() const
    {
        double m = 0.0;
        for (double e : exp)
            m = std::max(m, e);
        return m;
    }

    double Monomials::coefficient_sum() const
    {
        double s = 0.0;
        for (double c : coef)
            s += c;
        return s;
    }

    Monomials expand_G(const Profile& profile, const IndexSet& A)
    {
        validate_subset(profile, A);
        Monomials out = one();
        for (int i : A)
            out = multiply(out, factor_of(profile.shape(i)));
        return out;
    }

    DerivedShape eval_G(const Profile& profile, const IndexSet& A, double u)
    {
        validate_subset(profile, A);
        if (!(u >= 0.0))
            throw DomainError("eval_G needs u >= 0");

        DerivedShape out;
        for (int i : A)
        {
            out.G *= 2.0 * profile.shape(i).value(u) + 1.0;
            if (!profile.shape(i).has_derivative())
                throw CapabilityError("shape g_" + std::to_string(i) + " is tabulated without derivative data");
        }
        for (int i : A)
        {
            double prod = 1.0;
            for (int l : A)
            {
                if (l != i)
                    prod *= 2.0 * profile.shape(l).value(u) + 1.0;
            }
            out.G_prime += 2.0 * profile.shape(i).derivative(u) * prod;
            out.G_hat_prime += prod;
        }
        if (A.empty())
            return out;

        const bool closed = std::all_of(A.begin(), A.end(), [&](int i) { return profile.shape(i).is_closed_form(); });
        if (closed)
        {
            Monomials integrand;
            for (int i : A)
            {
                Monomials term = one();
                for (int l : A)
                {
                    if (l != i)
                        term = multiply(term, factor_of(profile.shape(l)));
                }
                for (std::size_t k = 0; k < term.coef.size(); ++k)
                {
                    integrand.coef.push_back(term.coef[k]);
                    integrand.exp.push_back(term.exp[k]);
                }
            }
            out.G_hat = integrand.integral()(u);
        }
        else
        {
            // Piecewise-polynomial integrand: Gauss-Kronrod is exact on each linear segment product.
            const auto pts = breakpoints(profile, A, u);
            auto f = [&](double v) { return hat_integrand(profile, A, v); };
            for (std::size_t k = 0; k + 1 < pts.size(); ++k)
                out.G_hat += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, pts[k], pts[k + 1], 8, 1e-13);
        }
        return out;
    }

    bool ConditionReport::all_pass() const
    {
        return std::all_of(shapes.begin(), shapes.end(),
                           [](const ShapeConditions& s) { return s.monotone && s.b_pass && s.c_pass; });
    }

    ConditionReport check_conditions(const Profile& profile, std::int64_t horizon)
    {
        if (horizon < 10)
            throw DomainError("condition checks need horizon >= 10");
        ConditionReport report;
        report.horizon = horizon;
        const double half = static_cast<double>(horizon) / 2.0;
        const double full = static_cast<double>(horizon);

        for (int i = 2; i <= profile.dim(); ++i)
        {
            const ShapeFunction& g = profile.shape(i);
            if (!g.has_derivative())
                throw CapabilityError("conditions (B) and (C) need derivative data for g_" + std::to_string(i));
            ShapeConditions sc;
            sc.index = i;
            sc.certified = g.is_closed_form();

            sc.monotone = true;
            for (std::int64_t m = 1; m <= horizon; ++m)
            {
                const double prev = g.value(static_cast<double>(m - 1));
                const double cur = g.value(static_cast<double>(m));
                if (cur < prev)
                    sc.monotone = false;
                if (cur != prev)
                {
                    const double slope = g.derivative(static_cast<double>(m));
                    if (slope == 0.0)
                        sc.b_violations.push_back(m);
                    else
                        sc.b_sup_ratio = std::max(sc.b_sup_ratio, std::abs(cur - prev) / slope);
                }
            }
            sc.b_pass = sc.b_violations.empty() && std::isfinite(sc.b_sup_ratio);

            auto ratio = [&](double u) {
                const double v = g.value(u);
                const double dv = g.derivative(u);
                if (v == 0.0)
                    return dv == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
                return dv / v;
            };
            sc.c_ratio_half = ratio(half);
            sc.c_ratio_full = ratio(full);
            sc.c_decreasing = sc.c_ratio_full < sc.c_ratio_half;

            if (sc.certified)
            {
                // g = c u^alpha + r: nondecreasing; (g(m) - g(m-1)) / g'(m) <= max(1/alpha, 2^(1-alpha));
                // g'/g -> 0.
                sc.monotone = true;
                sc.b_pass = true;
                sc.c_pass = true;
            }
            else
            {
                sc.c_pass = sc.c_decreasing || (sc.c_ratio_full == 0.0 && sc.c_ratio_half == 0.0);
            }
            report.shapes.push_back(std::move(sc));
        }
        return report;
    }

    std::string describe(const ShapeFunction& shape)
    {
        std::ostringstream os;
        std::visit(overloaded{
                       [&](const PolynomialShape& p) { os << p.c << "*u^" << p.alpha << "+" << p.r; },
                       [&](const ConstantShape& c) { os << "const " << c.value; },
                       [&](const TabulatedShape& t) { os << "tabulated(" << t.grid.size() << " nodes)"; },
                   },
                   shape.kind());
        return os.str();
    }
} // namespace ssep
