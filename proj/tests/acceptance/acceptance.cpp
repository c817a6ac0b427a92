// One line per acceptance criterion; exit status is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "treedtn/boundary_data.hpp"
#include "treedtn/dirichlet_solver.hpp"
#include "treedtn/dtn_maps.hpp"
#include "treedtn/level_sweep.hpp"
#include "treedtn/mc_oracle.hpp"
#include "treedtn/tree_core.hpp"

using namespace treedtn;

namespace {

constexpr double kHarmonicSeconds = 10.0;
constexpr double kTraceGap = 1e-4;
constexpr std::size_t kTraceDepth = 20;
constexpr std::size_t kTraceMonotoneFrom = 3;
constexpr double kLambdaGap = 1e-3;
constexpr std::size_t kLambdaDepth = 14;
constexpr double kSlopeRelTol = 0.10;
constexpr std::size_t kKernelDepth = 6;
constexpr double kGammaGap = 1e-3;
constexpr std::size_t kGammaDepth = 16;
constexpr double kJ2Ratio = 1.2;
constexpr std::size_t kJ2From = 6;
constexpr std::size_t kSweepDepth = 8;
constexpr int kRandomEta = 100;
constexpr int kRandomPairs = 50;
constexpr std::size_t kWalkSamples = 100000;
constexpr std::size_t kWalkDepth = 30;
constexpr double kWalkSigmas = 3.0;
constexpr double kWalkSeconds = 60.0;

int failures = 0;

void report(int id, bool ok, const std::string& name, const std::string& detail) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << id << " " << name << ": " << detail << "\n";
    if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

Rational frac(long a, long b) {
    Rational r(a, b);
    r.canonicalize();
    return r;
}

const std::vector<int> kMs = {2, 3, 5};
const std::vector<Rational> kBetas = {Rational(0), Rational(1, 10), Rational(1, 3), Rational(9, 20)};

std::vector<Rational> trace_points(int m) { return {Rational(0), Rational(1, m), Rational(1), Rational(2, 7), Rational(5, 11)}; }
const std::vector<Rational> kBranchPoints = {Rational(0), Rational(2, 7), Rational(5, 11)};

// ---------------------------------------------------------------------------

void harmonicity() {
    const auto t0 = std::chrono::steady_clock::now();
    int cases = 0, good = 0;
    std::string first_bad;
    for (int m : kMs) {
        const TreeConfig c(m);
        const std::vector<std::pair<const char*, BoundaryDatum>> data = {
            {"1", BoundaryDatum::constant(1)},
            {"t", BoundaryDatum::linear()},
            {"t^2", BoundaryDatum::square()},
            {"chi[0,1/m]", BoundaryDatum::characteristic(c, 1, 0)}};
        for (const auto& b : kBetas)
            for (const auto& [name, g] : data) {
                ++cases;
                const HarmonicSweepReport r = exact_harmonic_sweep(g, BetaParam(b), c, kSweepDepth);
                if (r.ok()) {
                    ++good;
                } else if (first_bad.empty()) {
                    first_bad = " first failure m=" + std::to_string(m) + " beta=" + fraction_string(b) + " g=" + name;
                }
            }
    }
    const double secs = seconds_since(t0);
    report(1, good == cases && secs < kHarmonicSeconds, "harmonicity",
           std::to_string(good) + "/" + std::to_string(cases) + " cases with every residual exactly 0 to depth " +
               std::to_string(kSweepDepth) + ", " + num(secs) + " s (limit " + num(kHarmonicSeconds) + " s)" +
               first_bad);
}

void boundary_trace_rates() {
    int cases = 0, monotone = 0, small = 0;
    std::ostringstream bad;
    std::vector<std::size_t> ks;
    for (std::size_t k = kTraceMonotoneFrom; k <= kTraceDepth; ++k) ks.push_back(k);
    for (int m : kMs)
        for (const auto& b : kBetas)
            for (const auto& t : trace_points(m)) {
                ++cases;
                const auto rows = boundary_trace(BoundaryDatum::linear(), BetaParam(b), branch_of_point(t, TreeConfig(m)), ks);
                bool mono = true;
                for (std::size_t i = 1; i < rows.size(); ++i)
                    if (*rows[i].gap_exact > *rows[i - 1].gap_exact) mono = false;
                const bool close = rows.back().gap < kTraceGap;
                monotone += mono;
                small += close;
                if (!mono || !close)
                    bad << " [m=" << m << " beta=" << fraction_string(b) << " psi=" << fraction_string(t)
                        << (mono ? "" : " non-monotone") << (close ? "" : " gap(20)=" + num(rows.back().gap)) << "]";
            }
    report(2, monotone == cases && small == cases, "boundary trace",
           std::to_string(monotone) + "/" + std::to_string(cases) + " non-increasing for k >= 3, " +
               std::to_string(small) + "/" + std::to_string(cases) + " with gap(20) < " + num(kTraceGap) + bad.str());
}

void lambda_beta_zero() {
    int cases = 0, close = 0, slopes = 0, slope_ok = 0;
    double worst = 0, worst_slope = 0;
    std::vector<std::size_t> ks;
    for (std::size_t k = 2; k <= kLambdaDepth; ++k) ks.push_back(k);
    for (int m : {2, 3}) {
        const TreeConfig c(m);
        for (int i = 0; i < m; ++i)
            for (const auto& [name, g] : {std::pair{"t", BoundaryDatum::linear()}, std::pair{"t^2", BoundaryDatum::square()}})
                for (const auto& t : kBranchPoints) {
                    ++cases;
                    const DtnSweep s = lambda_sweep(g, BetaParam(Rational(0)), NormalVector::basis(m, i),
                                                    branch_of_point(t, c), ks);
                    const double gap = *s.rows.back().gap;
                    worst = std::max(worst, gap);
                    close += gap < kLambdaGap;
                    if (!s.slope) continue;  // zero gap at every k: nothing to fit
                    ++slopes;
                    const double ref = -std::log(static_cast<double>(m));
                    const double rel = std::abs(*s.slope - ref) / std::abs(ref);
                    worst_slope = std::max(worst_slope, rel);
                    slope_ok += rel <= kSlopeRelTol;
                }
    }
    report(3, close == cases && slope_ok == slopes && slopes > 0, "first DtN map at beta = 0",
           std::to_string(close) + "/" + std::to_string(cases) + " within " + num(kLambdaGap) + " at k = 14 (worst " +
               num(worst) + "); slope within " + num(100 * kSlopeRelTol) + "% of -log m in " +
               std::to_string(slope_ok) + "/" + std::to_string(slopes) + " fits (worst " + num(100 * worst_slope) +
               "%); g = t rows are exact, so no slope is fitted for them");
}

void lambda_positive_beta() {
    int cases = 0, close = 0;
    double worst = 0;
    std::string worst_case;
    for (const Rational& b : {Rational(1, 10), Rational(1, 4), Rational(2, 5)})
        for (int m : {2, 3}) {
            const TreeConfig c(m);
            const std::vector<std::string> etas =
                m == 2 ? std::vector<std::string>{"-1,1", "1/2,-1/2"} : std::vector<std::string>{"-1,0,1", "1,-2,1", "0,-1,1"};
            for (const auto& e : etas)
                for (const auto& [name, g] :
                     {std::pair{"t", BoundaryDatum::linear()}, std::pair{"t^2", BoundaryDatum::square()}})
                    for (const auto& t : kBranchPoints) {
                        ++cases;
                        const DtnEstimate r = lambda_estimate(g, BetaParam(b), NormalVector::parse(e),
                                                              branch_of_point(t, c), kLambdaDepth);
                        close += *r.gap < kLambdaGap;
                        if (*r.gap > worst) {
                            worst = *r.gap;
                            worst_case = "m=" + std::to_string(m) + " beta=" + fraction_string(b) + " eta=(" + e +
                                         ") g=" + name + " psi=" + fraction_string(t);
                        }
                    }
        }
    report(4, close == cases, "first DtN map for 0 < beta < 1/2",
           std::to_string(close) + "/" + std::to_string(cases) + " within " + num(kLambdaGap) +
               " of the closed form at k = 14 (worst " + num(worst) + " at " + worst_case + ")");
}

void remark_identity() {
    std::mt19937_64 rng(20240601);
    std::uniform_int_distribution<long> num_d(-9, 9), den_d(1, 9);
    int literal = 0, scaled = 0, total = 0;
    for (int m = 2; m <= 6; ++m)
        for (int trial = 0; trial < kRandomEta; ++trial) {
            std::vector<Rational> eta(static_cast<std::size_t>(m));
            Rational s = 0;
            for (int i = 0; i + 1 < m; ++i) {
                eta[static_cast<std::size_t>(i)] = frac(num_d(rng), den_d(rng));
                s += eta[static_cast<std::size_t>(i)];
            }
            eta.back() = -s;
            ++total;
            const Rational w = dot(eta, omega(m)), v = dot(eta, varpi(m));
            literal += w == v;
            scaled += m * w == v;
        }
    report(5, literal == total, "<eta,omega_m> = <eta,varpi_m> for zero-sum eta",
           std::to_string(literal) + "/" + std::to_string(total) + " exact equalities; m<eta,omega_m> = <eta,varpi_m> holds in " +
               std::to_string(scaled) + "/" + std::to_string(total));
}

void kernel_mass() {
    int checked = 0, zero = 0;
    for (int m : {2, 3})
        for (const Rational& b : {Rational(1, 3), Rational(2, 5)}) {
            const BetaParam beta(b);
            for (const auto& x : vertices_to_depth(TreeConfig(m), kKernelDepth)) {
                if (x.is_root()) continue;
                for (Digit j = 0; j < static_cast<Digit>(m); ++j) {
                    ++checked;
                    zero += kernel_integral(x, j, beta, BoundaryDatum::constant(1)) == 0;
                }
            }
        }
    report(6, zero == checked, "kernel mass",
           std::to_string(zero) + "/" + std::to_string(checked) + " integrals of K_m^j exactly 0 (levels 1..6)");
}

void kernel_difference() {
    int checked = 0, equal = 0;
    const std::vector<BoundaryDatum> data = {
        BoundaryDatum::square(), BoundaryDatum(Polynomial({frac(1, 2), Rational(-1), Rational(0), Rational(2)}))};
    for (int m : {2, 3})
        for (const Rational& b : {Rational(1, 3), Rational(2, 5)}) {
            const BetaParam beta(b);
            for (const auto& g : data) {
                ExactSolution u(g, beta, TreeConfig(m));
                for (const auto& x : vertices_to_depth(TreeConfig(m), kKernelDepth)) {
                    if (x.is_root()) continue;
                    for (Digit j = 0; j < static_cast<Digit>(m); ++j) {
                        ++checked;
                        equal += Rational(u.value(x.child(j)) - u.value(x)) == Rational(-(1 - beta.p()) * kernel_integral(x, j, beta, g));
                    }
                }
            }
        }
    report(7, equal == checked, "successor differences through K_m^j",
           std::to_string(equal) + "/" + std::to_string(checked) + " exact identities for t^2 and 1/2 - t + 2t^3");
}

void gamma_two_paths() {
    int cases = 0, agree = 0, ratio_cases = 0, ratio_ok = 0;
    std::ostringstream bad;
    for (const Rational& b : {Rational(7, 20), Rational(2, 5), Rational(9, 20)}) {
        const BetaParam beta(b);
        for (const auto& [name, g] : {std::pair{"t", BoundaryDatum::linear()}, std::pair{"t^2", BoundaryDatum::square()}})
            for (const auto& t : kBranchPoints) {
                const Branch pi = branch_of_point(t, TreeConfig(2));
                ++cases;
                const DtnEstimate e = gamma_estimate(g, beta, pi, kGammaDepth);
                const bool ok = e.gap && *e.gap < kGammaGap + *e.tail;
                agree += ok;
                if (!ok) bad << " [two-path beta=" << fraction_string(b) << " g=" << name << " psi=" << fraction_string(t) << "]";
                double min_ratio = 1e300;
                std::optional<double> prev;
                for (std::size_t k = kJ2From; k <= kGammaDepth; ++k) {
                    const double j2 = std::abs(*gamma_estimate(g, beta, pi, k).j2);
                    if (prev) min_ratio = std::min(min_ratio, *prev / j2);
                    prev = j2;
                }
                ++ratio_cases;
                if (min_ratio >= kJ2Ratio) {
                    ++ratio_ok;
                } else {
                    bad << " [J2 beta=" << fraction_string(b) << " g=" << name << " psi=" << fraction_string(t)
                        << " min ratio " << num(min_ratio) << ", pm = " << fraction_string(beta.p() * 2) << "]";
                }
            }
    }
    report(8, agree == cases && ratio_ok == ratio_cases, "second DtN map, two paths",
           std::to_string(agree) + "/" + std::to_string(cases) + " within " + num(kGammaGap) + " + tail at k = K = 16; " +
               std::to_string(ratio_ok) + "/" + std::to_string(ratio_cases) + " with |J2(k)|/|J2(k+1)| >= " +
               num(kJ2Ratio) + " for k >= 6" + bad.str());
}

void growth() {
    bool ok = true;
    std::ostringstream detail;
    for (const Rational& b : {Rational(1, 2), Rational(3, 5)}) {
        const BetaParam beta(b);
        const Rational p = beta.p();
        const GrowthWitness w = growth_witness(beta, Rational(1), 60);
        bool eq = true;
        for (std::size_t n = 1; n < 60; ++n)
            eq = eq && Rational(w.a[n + 1] - w.a[n]) == Rational(rpow(p, n - 1) * (w.a[2] - w.a[1]));
        for (std::size_t n = 0; n < 60; ++n) eq = eq && w.residual(n) == 0;
        const GrowthRun run = growth_until(beta, Rational(1), Rational(1000000), 10'000'000);
        ok = ok && eq && run.first_exceeding && run.increments_exact;
        detail << " beta=" << fraction_string(b) << ": increments exact " << (eq && run.increments_exact ? "yes" : "no")
               << ", first n above 1e6 = " << (run.first_exceeding ? std::to_string(*run.first_exceeding) : "none")
               << ";";
    }
    report(9, ok, "growth witness", detail.str());
}

void counterexample() {
    const CounterexampleResult r = counterexample_beta0();
    report(10, r.u_first == 0 && r.u_last == 1, "strong comparison fails at beta = 0",
           "u(0) = " + fraction_string(r.u_first) + ", u(2) = " + fraction_string(r.u_last) + ", u(root) = " +
               fraction_string(r.u_root));
}

void characteristic() {
    const TreeConfig c(2);
    const BetaParam beta(Rational(1, 3));
    const RecursionTrace tr = solve_characteristic(c, 1, Integer(0), beta, kSweepDepth);
    const auto& b = tr.sequence();
    const bool values = b.size() >= 2 && b[0] == frac(3, 2) && b[1] == frac(7, 4) && tr.limit() == 2;
    ExactSolution u(BoundaryDatum::characteristic(c, 1, 0), beta, c);
    int checked = 0, equal = 0;
    for (const auto& x : vertices_to_depth(c, kSweepDepth)) {
        ++checked;
        equal += tr.u(x) == u.value(x);
    }
    report(11, values && equal == checked, "characteristic recursion",
           "b_1 = " + fraction_string(b.at(0)) + ", b_2 = " + fraction_string(b.at(1)) + ", b = " +
               fraction_string(tr.limit()) + "; normalized u_1 equals the solver at " + std::to_string(equal) + "/" +
               std::to_string(checked) + " vertices");
}

void comparison() {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<long> num_d(-4, 4), den_d(1, 4), deg_d(0, 3), nonneg(0, 3);
    int runs = 0, empty = 0;
    for (int i = 0; i < kRandomPairs; ++i) {
        std::vector<Rational> f(static_cast<std::size_t>(deg_d(rng)) + 1);
        for (auto& v : f) v = frac(num_d(rng), den_d(rng));
        const Rational a = frac(num_d(rng), den_d(rng)), b = frac(num_d(rng), den_d(rng));
        const Rational gap = frac(nonneg(rng), den_d(rng));
        std::vector<Rational> g = f;
        g.resize(std::max<std::size_t>(g.size(), 3), Rational(0));
        g[0] += a * a + gap;  // g - f = (a + b t)^2 + gap >= 0
        g[1] += 2 * a * b;
        g[2] += b * b;
        const BoundaryDatum F{Polynomial(f)}, G{Polynomial(g)};
        for (int m : kMs)
            for (const auto& beta : kBetas) {
                ++runs;
                const ComparisonReport r = comparison_check(F, G, BetaParam(beta), TreeConfig(m), kSweepDepth);
                empty += r.empty() && r.datum_violations.empty();
            }
    }
    report(12, empty == runs, "comparison principle",
           std::to_string(empty) + "/" + std::to_string(runs) + " empty reports (" + std::to_string(kRandomPairs) +
               " pairs x 12 (m, beta), depth 8)");
}

void monte_carlo() {
    struct Case {
        int m;
        Rational beta;
        std::vector<Digit> x;
        BoundaryDatum g;
    };
    const std::vector<Case> cases = {
        {2, Rational(0), {}, BoundaryDatum::linear()},
        {2, Rational(1, 3), {1}, BoundaryDatum::linear()},
        {3, Rational(1, 10), {2}, BoundaryDatum::square()},
        {3, Rational(1, 4), {0, 1}, BoundaryDatum::linear()},
        {5, Rational(2, 5), {4}, BoundaryDatum::square()},
        {2, Rational(9, 20), {1, 0}, BoundaryDatum::square()},
    };
    const auto t0 = std::chrono::steady_clock::now();
    int good = 0;
    double worst = 0;
    std::uint64_t seed = 1;
    for (const auto& c : cases) {
        const TreeConfig config(c.m);
        const Vertex x(config, c.x);
        const WalkEstimate e =
            estimate_u(c.g, WalkConfig{BetaParam(c.beta), config, kWalkDepth, kWalkSamples, seed}, x);
        seed += kWalkSamples;  // disjoint sample streams
        const double exact = solve_exact(c.g, BetaParam(c.beta), x).get_d();
        const double allowed = kWalkSigmas * e.stderr_ + e.bias_bound;
        const double gap = std::abs(e.mean - exact);
        worst = std::max(worst, gap / allowed);
        good += gap <= allowed;
    }
    const double secs = seconds_since(t0);
    report(13, good == static_cast<int>(cases.size()) && secs < kWalkSeconds, "Monte Carlo oracle",
           std::to_string(good) + "/" + std::to_string(cases.size()) + " within 3 stderr + bias (worst " +
               num(worst) + " of the allowance), " + num(secs) + " s (limit " + num(kWalkSeconds) + " s)");
}

}  // namespace

int main() {
    const std::vector<std::function<void()>> criteria = {
        harmonicity, boundary_trace_rates, lambda_beta_zero, lambda_positive_beta, remark_identity,
        kernel_mass, kernel_difference,    gamma_two_paths,  growth,               counterexample,
        characteristic, comparison,        monte_carlo};
    for (const auto& c : criteria) {
        try {
            c();
        } catch (const std::exception& e) {
            std::cout << "[FAIL] criterion raised: " << e.what() << "\n";
            ++failures;
        }
        std::cout.flush();
    }
    std::cout << failures << " of " << criteria.size() << " criteria failed\n";
    return failures == 0 ? 0 : 1;
}
