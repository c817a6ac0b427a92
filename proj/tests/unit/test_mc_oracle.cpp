#include <doctest.h>

#include <cmath>

#include <json.hpp>

#include "treedtn/errors.hpp"
#include "treedtn/mc_oracle.hpp"

using namespace treedtn;

TEST_CASE("beta zero walks straight down") {
    const TreeConfig c(3);
    WalkRng rng(11);
    Vertex x(c);
    for (std::size_t k = 1; k <= 50; ++k) {
        x = walk_step(x, 0.0, rng);
        CHECK(x.level() == k);
    }
}

TEST_CASE("the root only moves down") {
    WalkRng rng(5);
    const Vertex root(TreeConfig(2));
    for (int i = 0; i < 2000; ++i) CHECK(walk_step(root, 0.45, rng).level() == 1);
}

TEST_CASE("transition frequencies") {
    const int m = 3;
    const double beta = 0.3;
    const int n = 100000;
    const Vertex x(TreeConfig(m), {1, 2});
    WalkRng rng(2024);
    std::vector<int> counts(m + 1, 0);  // last slot: parent
    for (int i = 0; i < n; ++i) {
        const Vertex y = walk_step(x, beta, rng);
        if (y.level() == 1) {
            ++counts[m];
        } else {
            ++counts[y.digits().back()];
        }
    }
    auto within = [n](int count, double prob) {
        const double se = std::sqrt(prob * (1 - prob) / n);
        return std::abs(count / static_cast<double>(n) - prob) <= 4 * se;
    };
    CHECK(within(counts[m], beta));
    for (int i = 0; i < m; ++i) CHECK(within(counts[i], (1 - beta) / m));
}

TEST_CASE("one-step martingale identity") {
    const TreeConfig c(2);
    const BetaParam beta(Rational(1, 3));
    ExactSolution u(BoundaryDatum::square(), beta, c);
    const Vertex x(c, {1, 0});
    WalkRng rng(99);
    const int n = 100000;
    double sum = 0, sq = 0;
    for (int i = 0; i < n; ++i) {
        const double v = u.value(walk_step(x, beta.value(), rng)).get_d();
        sum += v;
        sq += v * v;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sq / n - mean * mean) / n);
    CHECK(std::abs(mean - u.value(x).get_d()) <= 4 * se);
}

TEST_CASE("depth drift") {
    const double beta = 0.25;
    const int n = 100000;
    WalkRng rng(3);
    const Vertex x(TreeConfig(3), {0, 1, 2});
    double sum = 0;
    for (int i = 0; i < n; ++i) sum += static_cast<double>(walk_step(x, beta, rng).level()) - 3.0;
    const double mean = sum / n;
    const double se = std::sqrt((1 - mean * mean) / n);  // steps are +-1
    CHECK(std::abs(mean - (1 - 2 * beta)) <= 4 * se);
}

TEST_CASE("estimator examples") {
    const TreeConfig c(2);
    const WalkEstimate k = estimate_u(BoundaryDatum::constant(3), WalkConfig{BetaParam(Rational(1, 3)), c, 12, 2000, 1},
                                      Vertex(c));
    CHECK(k.mean == 3.0);
    CHECK(k.stderr_ == 0.0);

    const WalkEstimate a =
        estimate_u(BoundaryDatum::linear(), WalkConfig{BetaParam(Rational(0)), c, 30, 100000, 17}, Vertex(c));
    CHECK(std::abs(a.mean - 0.5) <= 3 * a.stderr_ + a.bias_bound);

    const WalkEstimate b =
        estimate_u(BoundaryDatum::linear(), WalkConfig{BetaParam(Rational(1, 3)), c, 30, 100000, 17}, Vertex(c, {1}));
    CHECK(std::abs(b.mean - 0.625) <= 3 * b.stderr_ + b.bias_bound);
}

TEST_CASE("estimates are reproducible") {
    const TreeConfig c(3);
    const WalkConfig cfg{BetaParam(Rational(1, 10)), c, 12, 10000, 123};
    const WalkEstimate a = estimate_u(BoundaryDatum::square(), cfg, Vertex(c, {2}));
    const WalkEstimate b = estimate_u(BoundaryDatum::square(), cfg, Vertex(c, {2}));
    CHECK(a.to_json() == b.to_json());
    const auto j = nlohmann::json::parse(a.to_json());
    for (const char* key : {"mean", "stderr", "bias_bound", "N", "D", "seed"}) CHECK(j.contains(key));
    CHECK(j["N"] == 10000);
}

TEST_CASE("bias bound") {
    const TreeConfig c(2);
    // beta = 0: only the last interval counts, |g'| m^{-D}
    CHECK(truncation_bias_bound(BoundaryDatum::linear(), BetaParam(Rational(0)), c, 10) ==
          doctest::Approx(std::pow(2.0, -10)));
    // indicator data fall back to the oscillation
    CHECK(truncation_bias_bound(BoundaryDatum::characteristic(c, 1, 0), BetaParam(Rational(1, 3)), c, 10) == 1.0);
}

TEST_CASE("walk preconditions") {
    const TreeConfig c(2);
    CHECK_THROWS_AS(estimate_u(BoundaryDatum::linear(), WalkConfig{BetaParam(Rational(1, 2)), c, 10, 10, 1}, Vertex(c)),
                    PreconditionError);
    CHECK_THROWS_AS(estimate_u(BoundaryDatum::linear(), WalkConfig{BetaParam(Rational(1, 4)), c, 2, 10, 1},
                               Vertex(c, {0, 1})),
                    PreconditionError);
    CHECK_THROWS_AS(estimate_u(BoundaryDatum::linear(), WalkConfig{BetaParam(Rational(1, 4)), c, 5, 0, 1}, Vertex(c)),
                    PreconditionError);
}
