#include <doctest.h>

#include <cmath>

#include "treedtn/dtn_maps.hpp"
#include "treedtn/errors.hpp"

using namespace treedtn;

namespace {

Vertex V(int m, std::vector<Digit> d) { return Vertex(TreeConfig(m), std::move(d)); }

Rational square_average(const Vertex& x) {
    const Rational a = x.psi(), b = a + Rational(1) / Rational(ipow(x.m(), x.level()));
    return (b * b * b - a * a * a) / (3 * (b - a));
}

}  // namespace

TEST_CASE("gradient") {
    ExactSolution u(BoundaryDatum::linear(), BetaParam(Rational(1, 3)), TreeConfig(2));
    const auto g = gradient(u, V(2, {1}));
    CHECK(g[0] == 0);
    CHECK(g[1] == Rational(1, 8));
    ExactSolution k(BoundaryDatum::constant(4), BetaParam(Rational(1, 3)), TreeConfig(3));
    for (const auto& d : gradient(k, V(3, {2, 0}))) CHECK(d == 0);
    // at beta = 0 the gradient sums to zero
    ExactSolution z(BoundaryDatum::square(), BetaParam(Rational(0)), TreeConfig(3));
    for (const auto& x : vertices_to_depth(TreeConfig(3), 3)) {
        Rational s = 0;
        for (const auto& d : gradient(z, x)) s += d;
        CHECK(s == 0);
    }
}

TEST_CASE("omega and varpi") {
    CHECK(omega(2) == std::vector<Rational>{Rational(-1, 4), Rational(1, 4)});
    CHECK(omega(3) == std::vector<Rational>{Rational(-1, 3), Rational(0), Rational(1, 3)});
    CHECK(varpi(3) == std::vector<Rational>{Rational(0), Rational(1), Rational(2)});
}

TEST_CASE("normal vectors") {
    const NormalVector a = NormalVector::parse("(-1, 1/2, 1/2)");
    CHECK(a.m() == 3);
    CHECK(a.zero_sum());
    CHECK(NormalVector::parse("0.25,-0.25").components()[0] == Rational(1, 4));
    CHECK_FALSE(NormalVector::basis(3, 1).zero_sum());
    CHECK_THROWS_AS(NormalVector::parse("1"), PreconditionError);
}

TEST_CASE("closed forms") {
    const NormalVector eta = NormalVector::parse("-1,1");
    const BoundaryDatum t = BoundaryDatum::linear();
    CHECK(*lambda_closed_form(t, BetaParam(Rational(0)), eta, Rational(1, 3)).exact == Rational(1, 2));
    CHECK(*lambda_closed_form(t, BetaParam(Rational(1, 4)), eta, Rational(1, 3)).exact == Rational(1, 3));
    CHECK_THROWS_AS(lambda_closed_form(t, BetaParam(Rational(1, 4)), NormalVector::basis(2, 0), Rational(1, 3)),
                    HypothesisViolationError);
    CHECK_THROWS_AS(lambda_closed_form(t, BetaParam(Rational(1, 2)), eta, Rational(1, 3)), NoBoundedSolutionError);
}

TEST_CASE("the two closed forms meet at beta zero") {
    // Theorem 1.5's constant at beta = 0 is 1/m, and m <eta, omega> = <eta, varpi> for zero-sum eta
    for (int m = 2; m <= 6; ++m) {
        std::vector<Rational> e(static_cast<std::size_t>(m));
        Rational s = 0;
        for (int i = 0; i + 1 < m; ++i) {
            e[static_cast<std::size_t>(i)] = Rational(3 * i - 2, i + 2);
            e[static_cast<std::size_t>(i)].canonicalize();
            s += e[static_cast<std::size_t>(i)];
        }
        e.back() = -s;
        CHECK(m * dot(e, omega(m)) == dot(e, varpi(m)));
    }
}

TEST_CASE("first DtN map estimates") {
    const TreeConfig c(2);
    const Branch pi = branch_of_point(Rational(1, 3), c);
    const NormalVector eta = NormalVector::parse("-1,1");
    for (std::size_t k : {1, 4, 9}) {
        CHECK(*lambda_estimate(BoundaryDatum::constant(3), BetaParam(Rational(1, 4)), eta, pi, k).exact == 0);
        CHECK(*lambda_estimate(BoundaryDatum::linear(), BetaParam(Rational(0)), eta, pi, k).exact == Rational(1, 2));
        CHECK(*lambda_estimate(BoundaryDatum::square(), BetaParam(Rational(0)), NormalVector::parse("1,1"), pi, k)
                   .exact == 0);
    }
    // beta = 0, g = t^2: m^k <grad u, eta> from child averages directly
    const Branch p3 = branch_of_point(Rational(2, 7), TreeConfig(3));
    const NormalVector e3 = NormalVector::basis(3, 2);
    for (std::size_t k : {2, 5}) {
        const Vertex x = p3.prefix(k);
        const Rational oracle = Rational(ipow(3, k)) * (square_average(x.child(2)) - square_average(x));
        CHECK(*lambda_estimate(BoundaryDatum::square(), BetaParam(Rational(0)), e3, p3, k).exact == oracle);
    }
}

TEST_CASE("first DtN sweep converges at rate 1/m") {
    const TreeConfig c(3);
    const Branch pi = branch_of_point(Rational(2, 7), c);
    std::vector<std::size_t> ks;
    for (std::size_t k = 2; k <= 12; ++k) ks.push_back(k);
    const DtnSweep s = lambda_sweep(BoundaryDatum::square(), BetaParam(Rational(0)), NormalVector::basis(3, 0), pi, ks);
    CHECK(*s.rows.back().gap < 1e-5);
    REQUIRE(s.slope);
    CHECK(std::abs(*s.slope + std::log(3.0)) < 0.1 * std::log(3.0));
    const DtnSweep z = lambda_sweep(BoundaryDatum::square(), BetaParam(Rational(1, 4)), NormalVector::parse("-1,0,1"),
                                    pi, {4, 8, 12});
    CHECK(*z.rows.back().gap < 1e-4);
}

TEST_CASE("fit_log_slope recovers an exponential rate") {
    std::vector<double> x, y;
    for (int k = 0; k < 8; ++k) {
        x.push_back(k);
        y.push_back(5 * std::pow(0.4, k));
    }
    CHECK(std::abs(*fit_log_slope(x, y) - std::log(0.4)) < 1e-12);
    CHECK_FALSE(fit_log_slope({1.0}, {1.0}));
}

TEST_CASE("kernel forms agree") {
    for (int m : {2, 3}) {
        const TreeConfig c(m);
        const BetaParam beta(Rational(2, 5));
        const long n = static_cast<long>(ipow(m, 4).get_si());
        for (const auto& x : vertices_to_depth(c, 3)) {
            if (x.is_root()) continue;
            for (Digit j = 0; j < static_cast<Digit>(m); ++j)
                for (long i = 0; i <= n; ++i) {
                    Rational t(i, n);
                    t.canonicalize();
                    CHECK(kernel_Kj(x, j, t, beta) == kernel_Kj_cases(x, j, t, beta));
                }
        }
    }
}

TEST_CASE("kernel off the first-level interval") {
    const BetaParam beta(Rational(1, 3));
    const Vertex x = V(3, {0, 2, 1});
    const Rational p = beta.p();
    CHECK(kernel_Kj(x, 1, Rational(1, 2), beta) == rpow(p, 3));
    CHECK(kernel_Kj(x, 1, Rational(1), beta) == rpow(p, 3));
}

TEST_CASE("kernel mass and the difference identity") {
    for (int m : {2, 3}) {
        const TreeConfig c(m);
        for (const Rational& b : {Rational(1, 3), Rational(2, 5)}) {
            const BetaParam beta(b);
            const BoundaryDatum g(Polynomial({Rational(1, 2), Rational(-1), Rational(0), Rational(2)}));
            ExactSolution u(g, beta, c);
            for (const auto& x : vertices_to_depth(c, 4)) {
                if (x.is_root()) continue;
                for (Digit j = 0; j < static_cast<Digit>(m); ++j) {
                    CHECK(kernel_integral(x, j, beta, BoundaryDatum::constant(1)) == 0);
                    CHECK(u.value(x.child(j)) - u.value(x) == -(1 - beta.p()) * kernel_integral(x, j, beta, g));
                }
            }
        }
    }
}

TEST_CASE("limit kernel values") {
    const TreeConfig c(2);
    const BetaParam beta(Rational(2, 5));  // p = 2/3
    const Branch pi = branch_of_point(Rational(0), c);
    CHECK(kernel_limit(pi, Rational(3, 4), beta) == 1);
    CHECK(kernel_limit(pi, Rational(3, 10), beta) == 2);
    CHECK_THROWS_AS(kernel_limit(pi, Rational(0), beta), SingularPointError);
    CHECK_THROWS_AS(kernel_limit(pi, Rational(1, 4), BetaParam(Rational(1, 3))), KernelFormInvalidError);
    const auto prof = kernel_profile(pi, beta, {Rational(0), Rational(1, 8), Rational(1)});
    REQUIRE(prof.size() == 2);
    CHECK(*prof[0].N == 3);
    CHECK_FALSE(prof[1].N);
}

TEST_CASE("limit kernel singularity order") {
    // with s = -log_m p, K(t) |t - psi|^{1+s} stays bounded and bounded away from 0
    const TreeConfig c(2);
    const BetaParam beta(Rational(2, 5));
    const Branch pi = branch_of_point(Rational(0), c);
    const double s = -std::log(beta.p().get_d()) / std::log(2.0);
    std::vector<double> scaled;
    for (unsigned n = 2; n <= 30; n += 4) {
        const Rational t = Rational(3, 4) / Rational(ipow(2, n));
        scaled.push_back(kernel_limit(pi, t, beta).get_d() * std::pow(t.get_d(), 1 + s));
    }
    for (double v : scaled) {
        CHECK(v > 0.1);
        CHECK(v < 10);
    }
    CHECK(std::abs(scaled.back() / scaled[scaled.size() - 2] - 1) < 1e-3);
}

TEST_CASE("second DtN map decomposes exactly") {
    const TreeConfig c(3);
    const BetaParam beta(Rational(3, 10));
    const Branch pi = branch_of_point(Rational(1, 4), c);
    for (std::size_t k : {1, 3, 7}) {
        const DtnEstimate e = gamma_estimate(BoundaryDatum::square(), beta, pi, k);
        CHECK(*e.exact == (1 - beta.p()) * (*e.bulk_exact + *e.j1_exact + *e.j2_exact));
        ExactSolution u(BoundaryDatum::square(), beta, c);
        CHECK(*e.exact == rpow(1 / beta.p(), k) * (u.value(pi.prefix(k + 1)) - u.value(pi.prefix(k))));
    }
    const DtnEstimate flat = gamma_estimate(BoundaryDatum::constant(2), beta, pi, 4);
    CHECK(*flat.exact == 0);
}

TEST_CASE("second DtN map against the kernel quadrature") {
    const TreeConfig c(2);
    const BetaParam beta(Rational(2, 5));
    const Branch pi = branch_of_point(Rational(0), c);
    const DtnEstimate e = gamma_estimate(BoundaryDatum::linear(), beta, pi, 20);
    REQUIRE(e.gap);
    CHECK(*e.gap < 1e-3 + *e.tail);
    const KernelQuadrature q = gamma_kernel_quadrature(BoundaryDatum::constant(1), beta, pi, 10);
    CHECK(q.value == 0);
    CHECK(q.tail_bound == 0);
}

TEST_CASE("second DtN map flags pm below one") {
    const DtnEstimate e =
        gamma_estimate(BoundaryDatum::linear(), BetaParam(Rational(3, 10)), branch_of_point(Rational(0), TreeConfig(2)), 6);
    CHECK_FALSE(e.converges);
    CHECK_FALSE(e.target);
}

TEST_CASE("reflection flips the second DtN map for g = t") {
    const TreeConfig c(2);
    const BetaParam beta(Rational(2, 5));
    const Branch pi = branch_of_point(Rational(1, 2), c);
    const Branch rho = pi.reflected();
    for (std::size_t k : {2, 6, 10}) {
        CHECK(*gamma_estimate(BoundaryDatum::linear(), beta, rho, k).exact ==
              -*gamma_estimate(BoundaryDatum::linear(), beta, pi, k).exact);
    }
    CHECK(*gamma_kernel_quadrature(BoundaryDatum::linear(), beta, rho, 12).exact ==
          -*gamma_kernel_quadrature(BoundaryDatum::linear(), beta, pi, 12).exact);
}

TEST_CASE("callable data use the float path") {
    const TreeConfig c(2);
    const BoundaryDatum g = parse_datum("exp", c);
    const BetaParam beta(Rational(2, 5));
    const Branch pi = branch_of_point(Rational(1, 3), c);
    const DtnEstimate e = gamma_estimate(g, beta, pi, 8, {}, 16);
    CHECK_FALSE(e.exact);
    REQUIRE(e.gap);
    CHECK(*e.gap < 0.1);
    const DtnEstimate l = lambda_estimate(g, BetaParam(Rational(0)), NormalVector::parse("-1,1"), pi, 12);
    CHECK(std::abs(l.value - std::exp(1.0 / 3) / 2) < 1e-3);
}
