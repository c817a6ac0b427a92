#pragma once

#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "treedtn/boundary_data.hpp"
#include "treedtn/rational.hpp"
#include "treedtn/tree_core.hpp"

namespace treedtn {

/// The weight beta in [0,1] of the ancestor in the averaging identity.
class BetaParam {
public:
    explicit BetaParam(Rational beta);
    /// Accepts "a/b", integers and decimals; decimals are read exactly.
    static BetaParam parse(std::string_view text, bool* was_decimal = nullptr);

    const Rational& beta() const noexcept { return beta_; }
    double value() const { return beta_.get_d(); }
    /// p = beta/(1-beta). Undefined at beta = 1.
    Rational p() const;
    bool below_half() const { return beta_ < Rational(1, 2); }
    std::string to_string() const { return fraction_string(beta_); }

private:
    Rational beta_;
};

template <class T>
T from_rational(const Rational& r);
template <>
inline Rational from_rational<Rational>(const Rational& r) { return r; }
template <>
inline double from_rational<double>(const Rational& r) { return r.get_d(); }

/// u_g, the bounded beta-harmonic function with boundary values g.
///
/// T = Rational needs exact data; T = double accepts any datum and tracks the
/// worst quadrature error of the averages it used. Values are memoized per
/// vertex; the cache is safe for concurrent readers and writers.
template <class T>
class Solution {
public:
    Solution(BoundaryDatum g, BetaParam beta, TreeConfig config, QuadratureOptions options = {});

    const BoundaryDatum& datum() const noexcept { return state_->datum; }
    const BetaParam& beta() const noexcept { return state_->beta; }
    TreeConfig config() const noexcept { return state_->config; }
    /// Set when the solution is the constant one for beta >= 1/2.
    const std::optional<std::string>& note() const noexcept { return state_->note; }

    /// u(x) = p u(x-hat) + (1-p) avg_{I_x} g, root first, memoized.
    T value(const Vertex& x) const;
    T operator()(const Vertex& x) const { return value(x); }
    /// p^{|x|} avg g + sum_j p^j (1-p) avg_{I_{x^{-j}}} g, summed from the leaf up. Not cached.
    T direct(const Vertex& x) const;
    /// avg over I_x.
    T average(const Vertex& x) const;

    double max_quadrature_error() const;
    std::size_t cache_size() const;

private:
    struct State {
        State(BoundaryDatum d, BetaParam b, TreeConfig c, QuadratureOptions o)
            : datum(std::move(d)), beta(std::move(b)), config(c), options(o) {}
        BoundaryDatum datum;
        BetaParam beta;
        TreeConfig config;
        QuadratureOptions options;
        std::optional<T> constant;
        std::optional<std::string> note;
        T p{};
        mutable std::shared_mutex mutex;
        mutable std::unordered_map<Vertex, T, VertexHash> cache;
        mutable double max_error = 0.0;
    };
    std::shared_ptr<State> state_;
};

extern template class Solution<Rational>;
extern template class Solution<double>;

using ExactSolution = Solution<Rational>;
using FloatSolution = Solution<double>;

Rational solve_exact(const BoundaryDatum& g, const BetaParam& beta, const Vertex& x);
double solve(const BoundaryDatum& g, const BetaParam& beta, const Vertex& x,
             const QuadratureOptions& options = {});

/// u(x) - (1/m) sum u(j) at the root, u(x) - beta u(x-hat) - (1-beta)/m sum u(x,i)
/// elsewhere, for any assignment u.
template <class T, class ValueFn>
T harmonic_residual_of(ValueFn&& u, const Rational& beta, const Vertex& x) {
    T sum = T(0);
    for (const auto& y : x.successors()) sum += u(y);
    const T m = T(x.m());
    if (x.is_root()) return T(u(x)) - sum / m;
    const T b = from_rational<T>(beta);
    return T(u(x)) - b * T(u(x.parent())) - (T(1) - b) / m * sum;
}

template <class T>
T harmonic_residual(const Solution<T>& s, const Vertex& x) {
    return harmonic_residual_of<T>([&s](const Vertex& y) { return s.value(y); }, s.beta().beta(), x);
}

// ---------------------------------------------------------------------------
// Characteristic data: the staged construction w_1, ..., w_n.

struct RecursionStage {
    std::size_t n = 0;            // stage index; the target vertex z has level n
    Vertex z{TreeConfig(2)};      // I_z = I_{n,j_n}
    Rational w_zhat;              // w_{n-1}(z-hat)
    std::optional<Rational> w_z2; // w_{n-1}(z^{-2}), from stage 2 on
    std::vector<Rational> b;      // b_{n,1}, b_{n,2}, ... by the two-term recursion
    Rational limit;               // b_{n,1} + (b_{n,2} - b_{n,1})/(1-p)
};

class RecursionTrace {
public:
    RecursionTrace(TreeConfig config, BetaParam beta, std::size_t n, Integer j, std::size_t depth,
                   std::vector<RecursionStage> stages);

    TreeConfig config() const noexcept { return config_; }
    const BetaParam& beta() const noexcept { return beta_; }
    std::size_t n() const noexcept { return n_; }
    const Integer& j() const noexcept { return j_; }
    std::size_t depth() const noexcept { return depth_; }
    const std::vector<RecursionStage>& stages() const noexcept { return stages_; }
    /// b_{n,i} of the last stage (empty for n = 0).
    const std::vector<Rational>& sequence() const;
    /// Normalizing constant b (1 for n = 0).
    Rational limit() const;

    /// w_n(x), for |x| <= depth.
    Rational w(const Vertex& x) const;
    /// u_n(x) = w_n(x)/b.
    Rational u(const Vertex& x) const { return w(x) / limit(); }

private:
    Rational w_stage(std::size_t s, const Vertex& x) const;

    TreeConfig config_;
    BetaParam beta_;
    std::size_t n_;
    Integer j_;
    std::size_t depth_;
    std::vector<RecursionStage> stages_;
    Rational p_;
};

/// Builds the characteristic-datum solution for chi_{I_{n,j}}, 0 < beta < 1/2.
RecursionTrace solve_characteristic(TreeConfig config, std::size_t n, const Integer& j,
                                    const BetaParam& beta, std::size_t depth);

// ---------------------------------------------------------------------------
// Comparison checks.

struct ComparisonReport {
    std::size_t vertices_checked = 0;
    /// Vertices with u_f > u_g + tol (truncated to the first 64).
    std::vector<Vertex> violations;
    std::size_t violation_count = 0;
    /// Grid points t with f(t) > g(t); the caller's ordering claim failed there.
    std::vector<double> datum_violations;
    bool exact = false;
    bool identical = true;  // u_f == u_g at every checked vertex
    bool empty() const { return violation_count == 0; }
};

ComparisonReport comparison_check(const BoundaryDatum& f, const BoundaryDatum& g, const BetaParam& beta,
                                  TreeConfig config, std::size_t depth, double tol = 1e-12);

struct StrongComparisonReport {
    std::size_t vertices_checked = 0;
    /// Vertices with u_f(x) = u_g(x) (truncated to the first 64).
    std::vector<Vertex> touching;
    std::size_t touching_count = 0;
    /// Touching vertices with a non-touching parent or successor (truncated).
    std::vector<Vertex> propagation_failures;
    std::size_t propagation_failure_count = 0;
    bool identical = true;
    bool exact = false;
    /// The propagation is a theorem only for 0 < beta < 1/2.
    bool theorem_applies = false;
    bool consistent() const { return !theorem_applies || propagation_failure_count == 0; }
};

StrongComparisonReport strong_comparison_check(const BoundaryDatum& f, const BoundaryDatum& g,
                                               const BetaParam& beta, TreeConfig config,
                                               std::size_t depth, double tol = 1e-12);

struct CounterexampleResult {
    TreeConfig config{3};
    BoundaryDatum datum{BoundaryDatum::constant(0)};
    Rational u_root;
    Rational u_first;   // u(0)
    Rational u_last;    // u(2)
    /// Strong comparison of the zero datum against the built-in datum, beta = 0.
    StrongComparisonReport report;
};

/// m = 3, beta = 0, datum chi_{[2/3,1]}.
CounterexampleResult counterexample_beta0(std::size_t depth = 4);

// ---------------------------------------------------------------------------
// Growth for beta >= 1/2.

struct GrowthWitness {
    BetaParam beta{Rational(1, 2)};
    TreeConfig config{2};
    /// a_0 = 0, a_1, ..., a_steps.
    std::vector<Rational> a;
    /// Value of the m-1 root successors off the path.
    Rational sibling_value;
    /// u on the path: x_n = (0, ..., 0) has value 1 + a_n and all successors of
    /// x_n take the value 1 + a_{n+1}.
    Rational value(std::size_t n) const { return 1 + a.at(n); }
    Vertex path(std::size_t n) const { return Vertex(config, std::vector<Digit>(n, 0)); }
    /// Residual of the averaging identity at x_n (0 <= n < steps).
    Rational residual(std::size_t n) const;
};

GrowthWitness growth_witness(const BetaParam& beta, const Rational& a1, std::size_t steps,
                             TreeConfig config = TreeConfig(2));

/// First n with 1 + a_n > threshold, without storing the path; also checks
/// a_{n+1} - a_n = p^{n-1}(a_2 - a_1) at every step. nullopt if not reached.
struct GrowthRun {
    std::optional<std::size_t> first_exceeding;
    std::size_t steps = 0;
    bool increments_exact = true;
    Rational last_value;
};
GrowthRun growth_until(const BetaParam& beta, const Rational& a1, const Rational& threshold,
                       std::size_t max_steps);

// ---------------------------------------------------------------------------
// Boundary behaviour along a branch.

struct TraceRow {
    std::size_t k = 0;
    double u = 0.0;
    double target = 0.0;
    double gap = 0.0;
    std::optional<Rational> u_exact;
    std::optional<Rational> gap_exact;
};

std::vector<TraceRow> boundary_trace(const BoundaryDatum& g, const BetaParam& beta, const Branch& pi,
                                     const std::vector<std::size_t>& depths,
                                     const QuadratureOptions& options = {});

}  // namespace treedtn
