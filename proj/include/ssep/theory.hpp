#pragma once

#include "ssep/profile.hpp"
#include "ssep/rw_core.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ssep::theory
{
    /// Level scaling z = b_t (x + a_t) for the Gumbel limit of a polynomial profile.
    struct Scaling
    {
        int d = 2;
        double beta = 1.0;
        double x = 0.0;
        double t = 0.0;
        double a_t = 0.0;
        double b_t = 0.0;
        double z = 0.0;
        double w = 0.0; // z / sqrt(t / d)
    };

    /// Throws DomainError for t <= e.
    Scaling scaling_for(int d, double beta, double t, double x);

    /// E[N_t] = sum_j count(j) rho_j P_0(zeta_{t/d} > z + j).
    double mean_N_exact(const Profile& profile, double t, double z);

    struct AsymptoticMean
    {
        double value = 0.0;
        double error_bound = 0.0; // uncalibrated constant 1
        IndexSet U;               // unbounded shapes
        IndexSet B;               // bounded shapes
        std::vector<double> L;    // limits 2 floor(g_i) + 1 for i in B
    };

    /// prod_B L_i * E_0[ int_0^{(zeta - z)_+} G_U ].
    AsymptoticMean mean_N_asymptotic(const Profile& profile, double t, double z, std::int64_t horizon = 1000);

    struct LambdaLimit
    {
        double M = 0.0;
        double beta = 0.0;
        double lambda = 0.0;
    };

    /// M, beta and lambda(x) = rho_bar M e^{-beta x}; closed-form shapes only.
    LambdaLimit lambda_limit(const Profile& profile, double x);

    /// P(Poisson(M e^{-beta x}) <= m).
    double gumbel_cdf(int m, double x, double M, double beta);

    /// sqrt(t), log t, 1 for d = 2, 3, >= 4.
    double gamma_d(double t, int d);

    /// Tail functionals E_0[F(zeta_{t/d} - z) 1(zeta_{t/d} > z)] for F = G, G', hat G over all indices.
    struct ShapeFunctionals
    {
        double E_G = 0.0;
        double E_G_prime = 0.0;
        double E_G_hat = 0.0;
    };
    ShapeFunctionals shape_functionals(const Profile& profile, double t, double z);

    /// E[N_t] * E_0[G(zeta - z) 1(zeta > z)].
    double ss_bound(const Profile& profile, double t, double z);

    struct CovBound
    {
        double full = 0.0;       // gamma_d (E_G + E_G')^2 + gamma_{d+1} E_G E_hatG
        double simplified = 0.0; // gamma_d E_G^2 + gamma_{d+1} E_G
        ShapeFunctionals functionals;
    };
    CovBound cov_bound(const Profile& profile, double t, double z);

    struct Cond23Point
    {
        double t = 0.0;
        double z = 0.0;
        double value = 0.0;     // E_0[G(zeta - z) 1(zeta > z)]
        double threshold = 0.0; // t^{-1/4} (d = 2) or (log t)^{-1/2} (d = 3)
        double ratio = 0.0;
    };
    struct Cond23
    {
        std::vector<Cond23Point> points;
        bool pass = false; // ratio strictly decreasing along the schedule
    };
    Cond23Point cond23_point(const Profile& profile, double t, double z);
    /// Schedule of (t, z) pairs; d in {2, 3}.
    Cond23 cond23_value(const Profile& profile, std::span<const std::pair<double, double>> schedule);

    /// Smallest L with sum_{j > L} count(j) rho_j P_0(zeta_{t/d} > z + j) < eps.
    std::int64_t truncation_depth(const Profile& profile, double t, double z, double eps);

    /// E[eta_t(x)] = sum_{y in R} rho(y) prod_i P_0(zeta_{t/d} = x_i - y_i); depth limited when max_depth >= 0.
    double duality_occupation(const Profile& profile, double t, std::span<const std::int64_t> x,
                              std::int64_t max_depth = -1);

    /// E[N] - Var(N) for independent particles: sum over particles of P(first coordinate > z)^2.
    double independent_gap(const Profile& profile, double t, double z, std::int64_t max_depth = -1);

    struct TheoryReport
    {
        double t = 0.0;
        double x = 0.0;
        Scaling scaling;
        double beta = 0.0;
        double M = 0.0;
        double lambda_limit = 0.0;
        double mean_exact = 0.0;
        AsymptoticMean mean_asymptotic;
        double gamma_d = 0.0;
        double gamma_d1 = 0.0;
        double ss_bound = 0.0;
        CovBound cov_bound;
        std::optional<Cond23Point> cond23; // d in {2, 3}
        std::int64_t truncation_depth = 0;
        double truncation_eps = 0.0;
    };

    /// Every closed-form quantity at (t, x) under the lambda scaling.
    TheoryReport make_report(const Profile& profile, double t, double x, double trunc_eps = 1e-4);

    nlohmann::json to_json(const Scaling& s);
    nlohmann::json to_json(const TheoryReport& r);
} // namespace ssep::theory
