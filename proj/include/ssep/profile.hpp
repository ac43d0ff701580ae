#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace ssep
{
    /// g(u) = c u^alpha + r.
    struct PolynomialShape
    {
        double c = 1.0;
        double alpha = 1.0;
        double r = 0.0;
    };

    struct ConstantShape
    {
        double value = 0.0;
    };

    /// Piecewise-linear interpolation of sampled values; linear extension past the last node.
    struct TabulatedShape
    {
        std::vector<double> grid;
        std::vector<double> values;
        std::vector<double> derivatives; // optional, same length as grid
    };

    /// A nonnegative, nondecreasing shape function g_i bounding |x_i| <= g_i(-x_1).
    class ShapeFunction
    {
    public:
        using Kind = std::variant<PolynomialShape, ConstantShape, TabulatedShape>;

        ShapeFunction(Kind kind);

        static ShapeFunction polynomial(double c, double alpha, double r = 0.0);
        static ShapeFunction constant(double value);
        static ShapeFunction tabulated(std::vector<double> grid, std::vector<double> values,
                                       std::vector<double> derivatives = {});

        double value(double u) const;
        /// Throws CapabilityError for tabulated shapes without derivative data.
        double derivative(double u) const;
        bool has_derivative() const noexcept;

        /// floor(g(j)) with a 1e-12 upward nudge so exact integers are not lost to rounding.
        std::int64_t floor_at(double u) const;

        bool is_polynomial() const noexcept { return std::holds_alternative<PolynomialShape>(kind_); }
        bool is_constant() const noexcept { return std::holds_alternative<ConstantShape>(kind_); }
        bool is_tabulated() const noexcept { return std::holds_alternative<TabulatedShape>(kind_); }
        /// Polynomial or constant shapes expose g as c u^alpha + r.
        bool is_closed_form() const noexcept { return !is_tabulated(); }
        /// (c, alpha, r) for closed-form kinds; constant shapes map to (value, 0, 0).
        PolynomialShape as_polynomial() const;
        /// Degree of polynomial growth at infinity (1 for the tabulated linear extension).
        double growth_degree() const noexcept;
        /// sup_u g(u) is finite.
        bool bounded() const noexcept;

        const Kind& kind() const noexcept { return kind_; }

    private:
        Kind kind_;
    };

    /// Periodic Bernoulli occupation densities rho_0, rho_{-1}, ..., rho_{-m+1}.
    struct PeriodicDensity
    {
        std::vector<double> rho;

        double at_depth(std::int64_t depth) const;
        double mean() const;
    };

    /// Initial region R = { x : x_1 <= 0, |x_i| <= g_i(-x_1) } in Z^d.
    class Profile
    {
    public:
        Profile(int d, std::vector<ShapeFunction> shapes, std::optional<PeriodicDensity> density = std::nullopt);

        /// d = dim, every g_i(u) = c u + r.
        static Profile linear(int d, double c = 1.0, double r = 0.0);

        int dim() const noexcept { return d_; }
        const std::vector<ShapeFunction>& shapes() const noexcept { return shapes_; }
        /// Shape of coordinate i in 2..d.
        const ShapeFunction& shape(int i) const { return shapes_.at(static_cast<std::size_t>(i - 2)); }
        const std::optional<PeriodicDensity>& density() const noexcept { return density_; }

        bool contains(std::span<const std::int64_t> x) const;
        /// Occupation weight of slab x_1 = -depth (rho for periodic densities, 1 otherwise).
        double slab_weight(std::int64_t depth) const;
        bool all_closed_form() const noexcept;

        /// beta = 1 + sum_i alpha_i for closed-form profiles.
        double beta() const;

    private:
        int d_;
        std::vector<ShapeFunction> shapes_;
        std::optional<PeriodicDensity> density_;
    };

    /// prod_{i=2}^d (2 floor(g_i(j)) + 1): number of sites in the slab x_1 = -j.
    std::int64_t cross_section_count(const Profile& profile, std::int64_t j);

    /// Index subset A of {2, ..., d}.
    using IndexSet = std::vector<int>;

    struct DerivedShape
    {
        double G = 1.0;
        double G_prime = 0.0;
        double G_hat = 0.0;
        double G_hat_prime = 0.0;
    };

    /// G_A, G_A', hat G_A, hat G_A' at u.
    DerivedShape eval_G(const Profile& profile, const IndexSet& A, double u);
    /// The full index set {2, ..., d}.
    IndexSet all_indices(const Profile& profile);

    /// Real-exponent polynomial sum_k coef_k u^exp_k with nonnegative terms.
    struct Monomials
    {
        std::vector<double> coef;
        std::vector<double> exp;

        double operator()(double u) const;
        /// Antiderivative vanishing at 0.
        Monomials integral() const;
        double max_exponent() const;
        double coefficient_sum() const;
    };

    /// prod_{i in A} (2 g_i(u) + 1) expanded; requires closed-form shapes.
    Monomials expand_G(const Profile& profile, const IndexSet& A);

    struct ShapeConditions
    {
        int index = 0; // coordinate i in 2..d
        bool certified = false; // analytic rather than sampled verdicts
        bool monotone = false;  // (A)
        bool b_pass = false;    // (B)
        double b_sup_ratio = 0.0;
        std::vector<std::int64_t> b_violations; // m with g'(m) = 0 but g(m) != g(m-1)
        bool c_pass = false; // (C)
        double c_ratio_half = 0.0; // g'/g at horizon/2
        double c_ratio_full = 0.0; // g'/g at horizon
        bool c_decreasing = false;
    };

    struct ConditionReport
    {
        std::int64_t horizon = 0;
        std::vector<ShapeConditions> shapes;

        bool all_pass() const;
    };

    /// Conditions (A) monotone, (B) bounded unit-step growth, (C) subexponential growth.
    ConditionReport check_conditions(const Profile& profile, std::int64_t horizon);

    std::string describe(const ShapeFunction& shape);
} // namespace ssep
