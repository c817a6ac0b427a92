#include "treedtn/dirichlet_solver.hpp"

#include <algorithm>
#include <cmath>

#include "treedtn/errors.hpp"
#include "treedtn/level_sweep.hpp"

namespace treedtn {

// ---------------------------------------------------------------------------
// BetaParam

BetaParam::BetaParam(Rational beta) : beta_(std::move(beta)) {
    beta_.canonicalize();
    if (beta_ < 0 || beta_ > 1) throw PreconditionError("beta must lie in [0,1], got " + fraction_string(beta_));
}

BetaParam BetaParam::parse(std::string_view text, bool* was_decimal) {
    return BetaParam(parse_rational(text, was_decimal));
}

Rational BetaParam::p() const {
    if (beta_ == 1) throw PreconditionError("p = beta/(1-beta) is undefined at beta = 1");
    Rational p = beta_ / (1 - beta_);
    p.canonicalize();
    return p;
}

// ---------------------------------------------------------------------------
// Solution

template <class T>
Solution<T>::Solution(BoundaryDatum g, BetaParam beta, TreeConfig config, QuadratureOptions options)
    : state_(std::make_shared<State>(std::move(g), std::move(beta), config, options)) {
    State& s = *state_;
    if constexpr (std::is_same_v<T, Rational>) {
        if (!s.datum.is_exact())
            throw PreconditionError("the rational backend needs polynomial, piecewise or indicator data");
    }
    if (!s.beta.below_half()) {
        auto c = s.datum.is_exact() ? s.datum.constant_value() : std::nullopt;
        if (!c)
            throw NoBoundedSolutionError("beta = " + s.beta.to_string() +
                                         " >= 1/2: every bounded beta-harmonic function is constant, "
                                         "and the datum " + s.datum.describe() + " is not");
        s.constant = from_rational<T>(*c);
        s.note = "beta >= 1/2: the constant solution u = " + fraction_string(*c);
        return;
    }
    s.p = from_rational<T>(s.beta.p());
}

template <class T>
T Solution<T>::average(const Vertex& x) const {
    const State& s = *state_;
    if constexpr (std::is_same_v<T, Rational>) {
        return s.datum.average_exact(x.interval());
    } else {
        AverageResult r = s.datum.average(x.interval(), s.options);
        if (r.error > 0) {
            std::unique_lock lock(s.mutex);
            s.max_error = std::max(s.max_error, r.error);
        }
        return r.value;
    }
}

template <class T>
T Solution<T>::value(const Vertex& x) const {
    const State& s = *state_;
    if (s.constant) return *s.constant;
    std::vector<Vertex> chain;
    T v{};
    {
        std::shared_lock lock(s.mutex);
        Vertex cur = x;
        while (true) {
            auto it = s.cache.find(cur);
            if (it != s.cache.end()) {
                v = it->second;
                break;
            }
            const bool root = cur.is_root();
            chain.push_back(cur);
            if (root) break;
            cur = cur.parent();
        }
    }
    if (chain.empty()) return v;
    std::vector<T> computed;
    computed.reserve(chain.size());
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
        if (it->is_root()) {
            v = average(*it);
        } else {
            v = s.p * v + (T(1) - s.p) * average(*it);
        }
        computed.push_back(v);
    }
    std::unique_lock lock(s.mutex);
    for (std::size_t i = 0; i < chain.size(); ++i) s.cache.emplace(chain[chain.size() - 1 - i], computed[i]);
    return v;
}

template <class T>
T Solution<T>::direct(const Vertex& x) const {
    const State& s = *state_;
    if (s.constant) return *s.constant;
    T acc = T(0);
    T pj = T(1);
    for (std::size_t j = 0; j < x.level(); ++j) {
        acc += pj * (T(1) - s.p) * average(x.ancestor(j));
        pj *= s.p;
    }
    acc += pj * average(Vertex(x.config()));
    return acc;
}

template <class T>
double Solution<T>::max_quadrature_error() const {
    std::shared_lock lock(state_->mutex);
    return state_->max_error;
}

template <class T>
std::size_t Solution<T>::cache_size() const {
    std::shared_lock lock(state_->mutex);
    return state_->cache.size();
}

template class Solution<Rational>;
template class Solution<double>;

Rational solve_exact(const BoundaryDatum& g, const BetaParam& beta, const Vertex& x) {
    return ExactSolution(g, beta, x.config()).direct(x);
}

double solve(const BoundaryDatum& g, const BetaParam& beta, const Vertex& x, const QuadratureOptions& options) {
    if (g.is_exact()) return solve_exact(g, beta, x).get_d();
    return FloatSolution(g, beta, x.config(), options).direct(x);
}

// ---------------------------------------------------------------------------
// Characteristic data

namespace {

Rational w_eval(const std::vector<RecursionStage>& stages, std::size_t s, const Vertex& x, const Rational& p) {
    if (s == 0) return 1;
    const RecursionStage& st = stages[s - 1];
    auto b_at = [&](std::size_t i) -> const Rational& {
        if (i == 0 || i > st.b.size())
            throw PreconditionError("vertex " + x.to_string() + " lies below the recorded trace depth");
        return st.b[i - 1];
    };
    if (s == 1) {
        if (x.is_root()) return 1;
        if (x.digits()[0] == st.z.digits()[0]) return b_at(x.level());
        return rpow(p, x.level());
    }
    const Vertex zhat = st.z.parent();
    if (x.level() < s || !x.has_prefix(zhat)) return w_eval(stages, s - 1, x, p);
    if (!x.has_prefix(st.z)) return st.w_zhat * rpow(p, x.level() - s + 1);
    return b_at(x.level() - s + 1);
}

}  // namespace

RecursionTrace::RecursionTrace(TreeConfig config, BetaParam beta, std::size_t n, Integer j, std::size_t depth,
                               std::vector<RecursionStage> stages)
    : config_(config),
      beta_(std::move(beta)),
      n_(n),
      j_(std::move(j)),
      depth_(depth),
      stages_(std::move(stages)),
      p_(beta_.p()) {}

const std::vector<Rational>& RecursionTrace::sequence() const {
    static const std::vector<Rational> empty;
    return stages_.empty() ? empty : stages_.back().b;
}

Rational RecursionTrace::limit() const { return stages_.empty() ? Rational(1) : stages_.back().limit; }

Rational RecursionTrace::w(const Vertex& x) const {
    if (x.level() > depth_) throw PreconditionError("vertex below the trace depth");
    return w_eval(stages_, n_, x, p_);
}

Rational RecursionTrace::w_stage(std::size_t s, const Vertex& x) const { return w_eval(stages_, s, x, p_); }

RecursionTrace solve_characteristic(TreeConfig config, std::size_t n, const Integer& j, const BetaParam& beta,
                                    std::size_t depth) {
    if (!(beta.beta() > 0 && beta.below_half()))
        throw PreconditionError("characteristic construction needs 0 < beta < 1/2");
    const Integer count = ipow(config.m(), n);
    if (j < 0 || j >= count) throw PreconditionError("interval index j out of range [0, m^n)");
    const Rational& b = beta.beta();
    const Rational p = beta.p();
    const int m = config.m();
    const Vertex target = Vertex::from_index(config, n, j);

    std::vector<RecursionStage> stages;
    for (std::size_t s = 1; s <= n; ++s) {
        RecursionStage st;
        st.n = s;
        st.z = target.prefix(s);
        Rational b1;
        if (s == 1) {
            st.w_zhat = 1;
            b1 = m - (m - 1) * p;
        } else {
            st.w_zhat = w_eval(stages, s - 1, st.z.parent(), p);
            st.w_z2 = w_eval(stages, s - 1, st.z.ancestor(2), p);
            b1 = st.w_zhat * (m - (m - 1) * b) / (1 - b) - m * p * *st.w_z2;
        }
        const Rational b2 = (b1 - b * st.w_zhat) / (1 - b);
        const std::size_t len = std::max<std::size_t>(2, depth >= s ? depth - s + 1 : 0);
        st.b = {b1, b2};
        while (st.b.size() < len) {
            const Rational& bi = st.b[st.b.size() - 1];
            const Rational& bprev = st.b[st.b.size() - 2];
            st.b.push_back(bi + p * (bi - bprev));
        }
        st.limit = b1 + (b2 - b1) / (1 - p);
        stages.push_back(std::move(st));
    }
    return RecursionTrace(config, beta, n, j, depth, std::move(stages));
}

// ---------------------------------------------------------------------------
// Comparison

namespace {

constexpr std::size_t kKeep = 64;

std::vector<double> datum_order_violations(const BoundaryDatum& f, const BoundaryDatum& g, double tol) {
    constexpr int kGrid = 1024;
    std::vector<double> out;
    for (int i = 0; i <= kGrid; ++i) {
        const double t = static_cast<double>(i) / kGrid;
        if (f.eval(t) > g.eval(t) + tol && out.size() < kKeep) out.push_back(t);
    }
    return out;
}

// Float fallback: values level by level through memoized solutions.
struct FloatLevels {
    FloatSolution f, g;
    TreeConfig config;
    std::vector<double> level(const FloatSolution& s, std::size_t l) const {
        const std::size_t n = ipow(config.m(), l).get_ui();
        std::vector<double> out(n);
        for (std::size_t j = 0; j < n; ++j) out[j] = s.value(Vertex::from_index(config, l, Integer(j)));
        return out;
    }
};

bool use_exact(const BoundaryDatum& f, const BoundaryDatum& g, const BetaParam& beta, TreeConfig config) {
    return beta.below_half() && level_sweep_supported(f, config) && level_sweep_supported(g, config);
}

}  // namespace

ComparisonReport comparison_check(const BoundaryDatum& f, const BoundaryDatum& g, const BetaParam& beta,
                                  TreeConfig config, std::size_t depth, double tol) {
    ComparisonReport report;
    report.datum_violations = datum_order_violations(f, g, tol);
    if (use_exact(f, g, beta, config)) {
        OrderSweepReport r = exact_order_sweep(f, g, beta, config, depth);
        report.exact = true;
        report.vertices_checked = r.vertices;
        report.violation_count = r.violation_count;
        report.violations = std::move(r.violations);
        report.identical = r.touching_count == r.vertices;
        return report;
    }
    FloatLevels lv{FloatSolution(f, beta, config), FloatSolution(g, beta, config), config};
    for (std::size_t l = 0; l <= depth; ++l) {
        const auto uf = lv.level(lv.f, l);
        const auto ug = lv.level(lv.g, l);
        for (std::size_t j = 0; j < uf.size(); ++j) {
            ++report.vertices_checked;
            if (uf[j] > ug[j] + tol && report.violation_count++ < kKeep)
                report.violations.push_back(Vertex::from_index(config, l, Integer(j)));
            if (std::abs(uf[j] - ug[j]) > tol) report.identical = false;
        }
    }
    return report;
}

StrongComparisonReport strong_comparison_check(const BoundaryDatum& f, const BoundaryDatum& g,
                                               const BetaParam& beta, TreeConfig config, std::size_t depth,
                                               double tol) {
    StrongComparisonReport report;
    report.theorem_applies = beta.beta() > 0 && beta.below_half();
    if (use_exact(f, g, beta, config)) {
        OrderSweepReport r = exact_order_sweep(f, g, beta, config, depth);
        report.exact = true;
        report.vertices_checked = r.vertices;
        report.touching_count = r.touching_count;
        report.touching = std::move(r.touching);
        report.propagation_failure_count = r.propagation_failure_count;
        report.propagation_failures = std::move(r.propagation_failures);
        report.identical = r.touching_count == r.vertices;
        return report;
    }
    FloatLevels lv{FloatSolution(f, beta, config), FloatSolution(g, beta, config), config};
    const auto mu = static_cast<std::size_t>(config.m());
    std::vector<char> grand, mid, cur;
    for (std::size_t l = 0; l <= depth; ++l) {
        const auto uf = lv.level(lv.f, l);
        const auto ug = lv.level(lv.g, l);
        grand = std::move(mid);
        mid = std::move(cur);
        cur.assign(uf.size(), 0);
        for (std::size_t j = 0; j < uf.size(); ++j) {
            ++report.vertices_checked;
            if (std::abs(uf[j] - ug[j]) <= tol) {
                cur[j] = 1;
                if (report.touching_count++ < kKeep) report.touching.push_back(Vertex::from_index(config, l, Integer(j)));
            } else {
                report.identical = false;
            }
        }
        if (l == 0) continue;
        for (std::size_t j = 0; j < mid.size(); ++j) {
            if (!mid[j]) continue;
            bool ok = l < 2 || grand[j / mu];
            for (std::size_t i = 0; i < mu && ok; ++i) ok = cur[j * mu + i];
            if (!ok && report.propagation_failure_count++ < kKeep)
                report.propagation_failures.push_back(Vertex::from_index(config, l - 1, Integer(j)));
        }
    }
    return report;
}

CounterexampleResult counterexample_beta0(std::size_t depth) {
    const TreeConfig config(3);
    const BetaParam beta(0);
    CounterexampleResult out;
    out.config = config;
    out.datum = BoundaryDatum(Indicator{Rational(2, 3), Rational(1)});
    ExactSolution u(out.datum, beta, config);
    out.u_root = u.value(Vertex(config));
    out.u_first = u.value(Vertex(config, {0}));
    out.u_last = u.value(Vertex(config, {2}));
    out.report = strong_comparison_check(BoundaryDatum::constant(0), out.datum, beta, config, depth);
    return out;
}

// ---------------------------------------------------------------------------
// Growth witness

Rational GrowthWitness::residual(std::size_t n) const {
    if (n + 1 >= a.size()) throw PreconditionError("residual needs the successor values of x_n");
    const Rational successors = value(n + 1);  // all m successors share this value
    if (n == 0) {
        const Rational mean = (value(1) + (config.m() - 1) * sibling_value) / config.m();
        return value(0) - mean;
    }
    const Rational& b = beta.beta();
    return value(n) - b * value(n - 1) - (1 - b) * successors;
}

namespace {

void check_growth_args(const BetaParam& beta, const Rational& a1) {
    if (beta.below_half() || beta.beta() == 1)
        throw PreconditionError("growth witness needs 1/2 <= beta < 1");
    if (a1 <= 0) throw PreconditionError("growth witness needs a_1 > 0");
}

}  // namespace

GrowthWitness growth_witness(const BetaParam& beta, const Rational& a1, std::size_t steps, TreeConfig config) {
    check_growth_args(beta, a1);
    if (steps < 1) throw PreconditionError("growth witness needs at least one step");
    GrowthWitness w;
    w.beta = beta;
    w.config = config;
    const Rational p = beta.p();
    w.a = {Rational(0), a1};
    while (w.a.size() <= steps) {
        const Rational& an = w.a[w.a.size() - 1];
        const Rational& aprev = w.a[w.a.size() - 2];
        w.a.push_back(an + p * (an - aprev));
    }
    // root: (1 + a_1 + (m-1) s)/m = 1
    w.sibling_value = 1 - a1 / (config.m() - 1);
    return w;
}

GrowthRun growth_until(const BetaParam& beta, const Rational& a1, const Rational& threshold,
                       std::size_t max_steps) {
    check_growth_args(beta, a1);
    const Rational p = beta.p();
    GrowthRun run;
    Rational aprev = 0, an = a1;
    const Rational d1 = a1;  // a_1 - a_0; a_2 - a_1 = p d1
    Rational pk = 1;         // p^{n-1} relative to (a_2 - a_1), i.e. increment_n = p^n d1
    std::size_t n = 1;
    if (1 + an > threshold) run.first_exceeding = 1;
    while (!run.first_exceeding && n < max_steps) {
        Rational next = an + p * (an - aprev);
        pk *= p;
        if (next - an != pk * d1) run.increments_exact = false;
        aprev = an;
        an = next;
        ++n;
        if (1 + an > threshold) run.first_exceeding = n;
    }
    run.steps = n;
    run.last_value = 1 + an;
    return run;
}

// ---------------------------------------------------------------------------
// Boundary trace

std::vector<TraceRow> boundary_trace(const BoundaryDatum& g, const BetaParam& beta, const Branch& pi,
                                     const std::vector<std::size_t>& depths, const QuadratureOptions& options) {
    if (!beta.below_half()) throw NoBoundedSolutionError("boundary trace needs beta < 1/2");
    std::vector<TraceRow> rows;
    if (g.is_exact()) {
        ExactSolution u(g, beta, pi.config());
        const Rational target = g.eval(pi.psi());
        for (std::size_t k : depths) {
            TraceRow r;
            r.k = k;
            r.u_exact = u.value(pi.prefix(k));
            r.gap_exact = abs(*r.u_exact - target);
            r.u = r.u_exact->get_d();
            r.target = target.get_d();
            r.gap = r.gap_exact->get_d();
            rows.push_back(std::move(r));
        }
        return rows;
    }
    FloatSolution u(g, beta, pi.config(), options);
    const double target = g.eval(pi.psi().get_d());
    for (std::size_t k : depths) {
        TraceRow r;
        r.k = k;
        r.u = u.value(pi.prefix(k));
        r.target = target;
        r.gap = std::abs(r.u - target);
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace treedtn
