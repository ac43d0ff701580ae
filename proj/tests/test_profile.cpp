#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ssep/errors.hpp"
#include "ssep/profile.hpp"

#include <array>
#include <functional>
#include <cmath>
#include <vector>

using namespace ssep;

namespace
{
    // Count slab sites by enumerating the box and testing membership.
    std::int64_t enumerate_slab(const Profile& p, std::int64_t j, std::int64_t box)
    {
        std::int64_t n = 0;
        std::vector<std::int64_t> x(static_cast<std::size_t>(p.dim()), 0);
        x[0] = -j;
        const int free = p.dim() - 1;
        std::int64_t total = 1;
        for (int i = 0; i < free; ++i)
            total *= 2 * box + 1;
        for (std::int64_t code = 0; code < total; ++code)
        {
            std::int64_t c = code;
            for (int i = 0; i < free; ++i)
            {
                x[static_cast<std::size_t>(i + 1)] = c % (2 * box + 1) - box;
                c /= 2 * box + 1;
            }
            n += p.contains(x) ? 1 : 0;
        }
        return n;
    }

    double simpson(const std::function<double(double)>& f, double a, double b, int n = 2000)
    {
        const double h = (b - a) / n;
        double s = f(a) + f(b);
        for (int i = 1; i < n; ++i)
            s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
        return s * h / 3.0;
    }
} // namespace

TEST_CASE("cross-section counts")
{
    const Profile line(2, {ShapeFunction::constant(0.0)});
    for (std::int64_t j = 0; j < 20; ++j)
        CHECK(cross_section_count(line, j) == 1);

    CHECK(cross_section_count(Profile::linear(2), 3) == 7);

    const Profile p(3, {ShapeFunction::polynomial(2.0, 1.0, 1.0), ShapeFunction::polynomial(1.0, 2.0)});
    CHECK(cross_section_count(p, 2) == 99);
    for (std::int64_t j = 0; j <= 4; ++j)
        CHECK(cross_section_count(p, j) == enumerate_slab(p, j, 20));

    // 1/3 * 3 must floor to 1, not 0
    const Profile third(2, {ShapeFunction::polynomial(1.0 / 3.0, 1.0)});
    CHECK(cross_section_count(third, 3) == 3);
    CHECK_THROWS_AS(cross_section_count(line, -1), DomainError);
}

TEST_CASE("profile validation")
{
    CHECK_THROWS_AS(Profile(1, {}), DomainError);
    CHECK_THROWS_AS(Profile(3, {ShapeFunction::constant(1.0)}), DomainError);
    CHECK_THROWS_AS(ShapeFunction::polynomial(0.0, 1.0), DomainError);
    CHECK_THROWS_AS(ShapeFunction::constant(-1.0), DomainError);
    CHECK_THROWS_AS(Profile(2, {ShapeFunction::constant(1.0)}, PeriodicDensity{{0.0, 0.0}}), DomainError);
    CHECK_THROWS_AS(Profile(2, {ShapeFunction::constant(1.0)}, PeriodicDensity{{1.5}}), DomainError);

    const Profile dens(2, {ShapeFunction::constant(1.0)}, PeriodicDensity{{1.0, 0.5, 0.0}});
    CHECK(dens.density()->mean() == doctest::Approx(0.5));
    CHECK(dens.slab_weight(0) == 1.0);
    CHECK(dens.slab_weight(4) == 0.5);
    CHECK(dens.slab_weight(5) == 0.0);
}

TEST_CASE("membership and monotone regions")
{
    const Profile small = Profile::linear(2, 1.0);
    const Profile large = Profile::linear(2, 2.0, 1.0);
    for (std::int64_t x1 = -6; x1 <= 2; ++x1)
    {
        for (std::int64_t x2 = -15; x2 <= 15; ++x2)
        {
            const std::array<std::int64_t, 2> x{x1, x2};
            CHECK(small.contains(x) == (x1 <= 0 && std::llabs(x2) <= -x1));
            if (small.contains(x))
                CHECK(large.contains(x));
        }
    }
}

TEST_CASE("G and hat G")
{
    const Profile p3 = Profile::linear(3);
    const auto empty = eval_G(p3, {}, 1.7);
    CHECK(empty.G == 1.0);
    CHECK(empty.G_prime == 0.0);
    CHECK(empty.G_hat == 0.0);
    CHECK(empty.G_hat_prime == 0.0);

    const Profile q(3, {ShapeFunction::polynomial(0.7, 1.5, 0.2), ShapeFunction::constant(2.0)});
    CHECK(eval_G(q, {2}, 3.3).G_hat == doctest::Approx(3.3));
    CHECK(eval_G(q, {3}, 3.3).G_hat == doctest::Approx(3.3));

    const auto d = eval_G(p3, {2, 3}, 2.0);
    CHECK(d.G == doctest::Approx(25.0));
    CHECK(d.G_prime == doctest::Approx(2.0 * 2.0 * 5.0));
    CHECK(d.G_hat == doctest::Approx(12.0));
    CHECK(d.G_hat == doctest::Approx(simpson([](double v) { return 2.0 * (2.0 * v + 1.0); }, 0.0, 2.0)).epsilon(1e-10));
    CHECK(d.G_hat_prime == doctest::Approx(10.0));

    // tabulated copy of the same shapes goes through quadrature
    std::vector<double> grid, vals, ders;
    for (int i = 0; i <= 10; ++i)
    {
        grid.push_back(i * 0.5);
        vals.push_back(i * 0.5);
        ders.push_back(1.0);
    }
    const Profile tab(3, {ShapeFunction::tabulated(grid, vals, ders), ShapeFunction::tabulated(grid, vals, ders)});
    const auto dt = eval_G(tab, {2, 3}, 2.0);
    CHECK(dt.G == doctest::Approx(25.0));
    CHECK(dt.G_hat == doctest::Approx(12.0).epsilon(1e-12));
    CHECK(eval_G(tab, {2, 3}, 7.0).G_hat == doctest::Approx(eval_G(p3, {2, 3}, 7.0).G_hat));

    const Profile noder(2, {ShapeFunction::tabulated(grid, vals)});
    CHECK_THROWS_AS(eval_G(noder, {2}, 1.0), CapabilityError);
    CHECK_THROWS_AS(eval_G(p3, {2, 2}, 1.0), DomainError);
    CHECK_THROWS_AS(eval_G(p3, {4}, 1.0), DomainError);

    // hat G' <= (d - 1) G
    const Profile p4(4, {ShapeFunction::polynomial(1.0, 0.5), ShapeFunction::polynomial(2.0, 2.0, 1.0),
                         ShapeFunction::constant(3.0)});
    for (double u = 0.0; u < 50.0; u += 0.37)
    {
        const auto e = eval_G(p4, all_indices(p4), u);
        CHECK(e.G_hat_prime <= 3.0 * e.G + 1e-9);
        if (u > 0.0)
            CHECK(e.G_hat == doctest::Approx(simpson([&](double v) { return eval_G(p4, all_indices(p4), v).G_hat_prime; },
                                                     0.0, u, 4000))
                                 .epsilon(1e-6));
    }
}

TEST_CASE("shape properties")
{
    const Profile p(4, {ShapeFunction::polynomial(1.0, 0.5), ShapeFunction::polynomial(2.0, 2.0, 1.0),
                        ShapeFunction::constant(3.0)});
    CHECK(p.beta() == doctest::Approx(3.5));
    // beta is the degree of int_0^u G
    const Monomials ig = expand_G(p, all_indices(p)).integral();
    CHECK(ig.max_exponent() == doctest::Approx(p.beta()));
    CHECK(ig(5.0) == doctest::Approx(simpson([&](double v) { return eval_G(p, all_indices(p), v).G; }, 0.0, 5.0, 20000))
                         .epsilon(1e-6));

    for (std::int64_t j = 0; j <= 200; ++j)
    {
        const double G = eval_G(p, all_indices(p), static_cast<double>(j)).G;
        const auto c = static_cast<double>(cross_section_count(p, j));
        CHECK(c <= G);
        CHECK(G <= 27.0 * c);
        if (j > 0)
            CHECK(eval_G(p, all_indices(p), j + 1.0).G / G <= 10.0);
    }
}

TEST_CASE("conditions A, B, C")
{
    const Profile cst(2, {ShapeFunction::constant(2.0)});
    const auto rc = check_conditions(cst, 100);
    CHECK(rc.all_pass());
    CHECK(rc.shapes[0].b_violations.empty());
    CHECK(rc.shapes[0].certified);

    std::vector<double> grid, vals, ders;
    for (int i = 0; i <= 120; ++i)
    {
        grid.push_back(i);
        vals.push_back(std::exp(0.1 * i));
        ders.push_back(0.1 * std::exp(0.1 * i));
    }
    const Profile ex(2, {ShapeFunction::tabulated(grid, vals, ders)});
    const auto re = check_conditions(ex, 100);
    CHECK_FALSE(re.shapes[0].certified);
    CHECK(re.shapes[0].monotone);
    CHECK_FALSE(re.shapes[0].c_pass);
    CHECK(re.shapes[0].c_ratio_full == doctest::Approx(0.1).epsilon(1e-9));
    CHECK_FALSE(re.all_pass());

    const Profile quad(2, {ShapeFunction::polynomial(1.0, 2.0, 1.0)});
    const auto rq = check_conditions(quad, 200);
    CHECK(rq.shapes[0].certified);
    CHECK(rq.shapes[0].b_pass);
    CHECK(rq.shapes[0].b_sup_ratio < 1.0);
    CHECK(rq.shapes[0].c_decreasing);

    // a staircase: jumps where g' = 0 violate (B)
    std::vector<double> sg{0, 1, 1.0001, 2, 2.0001, 30}, sv{0, 0, 1, 1, 2, 2}, sd{0, 0, 0, 0, 0, 0};
    const Profile stair(2, {ShapeFunction::tabulated(sg, sv, sd)});
    CHECK_FALSE(check_conditions(stair, 20).shapes[0].b_pass);

    CHECK_THROWS_AS(check_conditions(quad, 5), DomainError);
}
