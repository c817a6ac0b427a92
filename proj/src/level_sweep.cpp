#include "treedtn/level_sweep.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>

#include "treedtn/errors.hpp"

namespace treedtn {

namespace {

// 128-bit integer that throws OverflowError instead of wrapping.
class Checked {
public:
    Checked() = default;
    Checked(Int128 v) : v_(v) {}  // NOLINT(google-explicit-constructor)
    Int128 raw() const { return v_; }

    friend Checked operator+(Checked a, Checked b) {
        Int128 r;
        if (__builtin_add_overflow(a.v_, b.v_, &r)) overflow();
        return r;
    }
    friend Checked operator-(Checked a, Checked b) {
        Int128 r;
        if (__builtin_sub_overflow(a.v_, b.v_, &r)) overflow();
        return r;
    }
    friend Checked operator*(Checked a, Checked b) {
        Int128 r;
        if (__builtin_mul_overflow(a.v_, b.v_, &r)) overflow();
        return r;
    }
    Checked& operator+=(Checked b) { return *this = *this + b; }
    friend bool operator==(Checked a, Checked b) { return a.v_ == b.v_; }
    friend bool operator<(Checked a, Checked b) { return a.v_ < b.v_; }

private:
    [[noreturn]] static void overflow() { throw OverflowError("level sweep left the 128-bit range"); }
    Int128 v_ = 0;
};

template <class Num>
Num make(const Integer& z);
template <>
Checked make<Checked>(const Integer& z) { return Checked(to_int128(z)); }
template <>
Integer make<Integer>(const Integer& z) { return z; }

template <class Num>
Num make_small(std::uint64_t v);
template <>
Checked make_small<Checked>(std::uint64_t v) { return Checked(static_cast<Int128>(v)); }
template <>
Integer make_small<Integer>(std::uint64_t v) { return Integer(static_cast<unsigned long>(v)); }

Integer as_integer(Checked v) { return to_integer(v.raw()); }
const Integer& as_integer(const Integer& v) { return v; }

// k with den = m^k, or nullopt.
std::optional<std::size_t> madic_level(const Rational& b, int m) {
    Integer d = b.get_den();
    std::size_t k = 0;
    while (d > 1) {
        if (!mpz_divisible_ui_p(d.get_mpz_t(), static_cast<unsigned long>(m))) return std::nullopt;
        d /= m;
        ++k;
    }
    return k;
}

Vertex vertex_at(TreeConfig config, std::size_t level, std::uint64_t j) {
    std::vector<Digit> digits(level);
    const auto m = static_cast<std::uint64_t>(config.m());
    for (std::size_t i = level; i-- > 0;) {
        digits[i] = static_cast<Digit>(j % m);
        j /= m;
    }
    return Vertex(config, std::move(digits));
}

struct DatumPlan {
    PiecewisePolynomial pw;
    std::vector<std::vector<Integer>> weights;  // per piece: r_k Q / (s_k (k+1))
};

// Shared integer scaling for one or more data. Level l values are N / D_l with
// D_l = c^{l+1} Q m^e; interval averages at level l are P / E_l with
// E_l = Q m^{ex_l}. Then N_x = a N_parent + (c - a) c^l m^{e - ex_l} P.
struct Plan {
    TreeConfig config{2};
    const BoundaryDatum* data[2] = {nullptr, nullptr};
    std::size_t count = 0;
    std::vector<DatumPlan> plans;
    Integer a, c;  // p = a/c in lowest terms
    std::size_t top = 0;
    std::size_t L = 0;
    std::size_t delta = 0;
    Integer Q = 1;
    unsigned long e = 0;

    unsigned long ex(std::size_t l) const {
        return static_cast<unsigned long>((delta + 1) * std::max(l, L) - l);
    }
    Integer E(std::size_t l) const { return Q * ipow(Integer(config.m()), ex(l)); }
    Integer D(std::size_t l) const { return ipow(c, l + 1) * Q * ipow(Integer(config.m()), e); }
    // multiplier of P in the level-l update
    Integer G(std::size_t l) const {
        const Integer scale = ipow(Integer(config.m()), e - ex(l));
        if (l == 0) return c * scale;
        return (c - a) * ipow(c, l) * scale;
    }
};

Plan make_plan(std::initializer_list<const BoundaryDatum*> data, const BetaParam& beta, TreeConfig config,
               std::size_t top) {
    Plan plan;
    plan.config = config;
    plan.top = top;
    for (const auto* d : data) {
        if (!level_sweep_supported(*d, config))
            throw PreconditionError("level sweep needs exact data with m-adic breakpoints");
        DatumPlan dp;
        dp.pw = d->piecewise_view();
        for (const auto& b : dp.pw.breakpoints) plan.L = std::max(plan.L, *madic_level(b, config.m()));
        for (const auto& piece : dp.pw.pieces) {
            plan.delta = std::max<std::size_t>(plan.delta, std::max(piece.degree(), 0));
            const auto& cs = piece.coefficients();
            for (std::size_t k = 0; k < cs.size(); ++k) {
                if (cs[k] == 0) continue;
                Integer s = cs[k].get_den() * static_cast<unsigned long>(k + 1);
                mpz_lcm(plan.Q.get_mpz_t(), plan.Q.get_mpz_t(), s.get_mpz_t());
            }
        }
        plan.plans.push_back(std::move(dp));
        plan.data[plan.count++] = d;
    }
    for (auto& dp : plan.plans) {
        for (const auto& piece : dp.pw.pieces) {
            std::vector<Integer> w;
            const auto& cs = piece.coefficients();
            for (std::size_t k = 0; k < cs.size(); ++k) {
                const Integer s = cs[k].get_den() * static_cast<unsigned long>(k + 1);
                w.push_back(cs[k].get_num() * (plan.Q / s));
            }
            dp.weights.push_back(std::move(w));
        }
    }
    const Rational p = beta.p();
    plan.a = p.get_num();
    plan.c = p.get_den();
    plan.e = static_cast<unsigned long>(std::max((plan.delta + 1) * plan.L, plan.delta * top));
    return plan;
}

std::size_t piece_of(const PiecewisePolynomial& pw, const Rational& t) {
    auto it = std::upper_bound(pw.breakpoints.begin() + 1, pw.breakpoints.end() - 1, t);
    return static_cast<std::size_t>(it - (pw.breakpoints.begin() + 1));
}

// Produces the numerators of one datum, level by level.
template <class Num>
class LevelRunner {
public:
    LevelRunner(const Plan& plan, std::size_t index) : plan_(plan), dp_(plan.plans[index]), datum_(*plan.data[index]) {
        for (const auto& w : dp_.weights) {
            std::vector<Num> nw;
            for (const auto& x : w) nw.push_back(make<Num>(x));
            weights_.push_back(std::move(nw));
        }
        a_ = make<Num>(plan.a);
    }

    std::size_t level() const { return level_; }
    const std::vector<Num>& current() const { return cur_; }

    // Advances from level l-1 to l (l = 0 on the first call).
    void advance() {
        const std::size_t l = started_ ? level_ + 1 : 0;
        const int m = plan_.config.m();
        const std::uint64_t count = ipow(Integer(m), l).get_ui();
        const Num G = make<Num>(plan_.G(l));
        std::vector<Num> next(count);
        std::vector<std::uint32_t> next_piece;
        const bool by_piece = l >= plan_.L;
        if (by_piece) next_piece.resize(count);
        std::vector<Num> mpow;
        if (by_piece)
            for (std::size_t k = 0; k <= plan_.delta; ++k)
                mpow.push_back(make<Num>(ipow(Integer(m), static_cast<unsigned long>(l * (plan_.delta - k)))));
        const Integer El = plan_.E(l);

        for (std::uint64_t j = 0; j < count; ++j) {
            Num P;
            if (!by_piece) {
                const Rational scaled = datum_.average_exact(MadicInterval(plan_.config, Integer(j), l)) * El;
                if (scaled.get_den() != 1) throw Error(ErrorKind::Precondition, "level sweep: average scale");
                P = make<Num>(scaled.get_num());
            } else {
                std::uint32_t piece;
                if (l == plan_.L) {
                    piece = static_cast<std::uint32_t>(
                        piece_of(dp_.pw, MadicInterval(plan_.config, Integer(j), l).midpoint()));
                } else {
                    piece = piece_[j / static_cast<std::uint64_t>(m)];
                }
                next_piece[j] = piece;
                const auto& w = weights_[piece];
                const Num jn = make_small<Num>(j);
                const Num j1 = jn + Num(1);
                Num pj = jn, pq = j1;
                P = Num(0);
                for (std::size_t k = 0; k < w.size(); ++k) {
                    P += w[k] * (pq - pj) * mpow[k];
                    pj = pj * jn;
                    pq = pq * j1;
                }
            }
            if (l == 0) {
                next[j] = G * P;
            } else {
                next[j] = a_ * cur_[j / static_cast<std::uint64_t>(m)] + G * P;
            }
        }
        prev_ = std::move(cur_);
        cur_ = std::move(next);
        piece_ = std::move(next_piece);
        level_ = l;
        started_ = true;
    }

    const std::vector<Num>& previous() const { return prev_; }

private:
    const Plan& plan_;
    const DatumPlan& dp_;
    const BoundaryDatum& datum_;
    std::vector<std::vector<Num>> weights_;
    Num a_;
    std::vector<Num> prev_, cur_;
    std::vector<std::uint32_t> piece_;
    std::size_t level_ = 0;
    bool started_ = false;
};

template <class Num>
HarmonicSweepReport harmonic_sweep(const Plan& plan, const BetaParam& beta, std::size_t depth) {
    HarmonicSweepReport report;
    const int m = plan.config.m();
    const auto mu = static_cast<std::uint64_t>(m);
    LevelRunner<Num> run(plan, 0);
    // residual times D_{l+1}/c: (a+c) m N_x - a m c N_parent - sum N_children,
    // and m c N_root - sum N_children at the root
    const Num A = make<Num>((plan.a + plan.c) * m);
    const Num B = make<Num>(plan.a * m * plan.c);
    const Num M = make<Num>(plan.c * m);
    std::vector<Num> grand;  // level l-2 while checking level l-1

    struct Sample {
        std::size_t level;
        std::uint64_t j;
        Integer numerator;
    };
    std::vector<Sample> samples;

    for (std::size_t l = 0; l <= depth + 1; ++l) {
        if (l >= 2) grand = run.previous();
        run.advance();
        const auto& cur = run.current();
        const std::uint64_t n = cur.size();
        for (std::uint64_t j : {std::uint64_t{0}, n / 3, n - 1})
            samples.push_back({l, j, as_integer(cur[j])});
        if (l == 0) continue;
        const auto& mid = run.previous();  // level l-1, residuals checked here
        for (std::uint64_t j = 0; j < mid.size(); ++j) {
            Num sum = Num(0);
            for (std::uint64_t i = 0; i < mu; ++i) sum += cur[j * mu + i];
            Num r;
            if (l == 1) {
                r = M * mid[j] - sum;
            } else {
                r = A * mid[j] - B * grand[j / mu] - sum;
            }
            ++report.vertices;
            if (!(r == Num(0))) {
                if (report.nonzero++ == 0) report.first_failure = vertex_at(plan.config, l - 1, j);
            }
        }
    }

    ExactSolution sol(*plan.data[0], beta, plan.config);
    for (const auto& s : samples) {
        ++report.cross_checked;
        Rational v(s.numerator, plan.D(s.level));
        v.canonicalize();
        if (v != sol.value(vertex_at(plan.config, s.level, s.j)))
            ++report.cross_mismatches;
    }
    return report;
}

template <class Num>
OrderSweepReport order_sweep(const Plan& plan, std::size_t depth) {
    constexpr std::size_t kKeep = 64;
    OrderSweepReport report;
    const auto mu = static_cast<std::uint64_t>(plan.config.m());
    LevelRunner<Num> rf(plan, 0), rg(plan, 1);
    std::vector<char> grand, mid, cur;
    for (std::size_t l = 0; l <= depth; ++l) {
        rf.advance();
        rg.advance();
        const auto& f = rf.current();
        const auto& g = rg.current();
        grand = std::move(mid);
        mid = std::move(cur);
        cur.assign(f.size(), 0);
        for (std::uint64_t j = 0; j < f.size(); ++j) {
            ++report.vertices;
            if (g[j] < f[j]) {
                if (report.violation_count++ < kKeep) report.violations.push_back(vertex_at(plan.config, l, j));
            } else if (f[j] == g[j]) {
                cur[j] = 1;
                if (report.touching_count++ < kKeep) report.touching.push_back(vertex_at(plan.config, l, j));
            }
        }
        if (l == 0) continue;
        // propagation at level l-1: parent (l-2) and successors (l)
        for (std::uint64_t j = 0; j < mid.size(); ++j) {
            if (!mid[j]) continue;
            bool ok = l < 2 || grand[j / mu];
            for (std::uint64_t i = 0; i < mu && ok; ++i) ok = cur[j * mu + i];
            if (!ok && report.propagation_failure_count++ < kKeep)
                report.propagation_failures.push_back(vertex_at(plan.config, l - 1, j));
        }
    }
    return report;
}

}  // namespace

bool level_sweep_supported(const BoundaryDatum& g, TreeConfig config) {
    if (!g.is_exact()) return false;
    for (const auto& b : g.piecewise_view().breakpoints)
        if (!madic_level(b, config.m())) return false;
    return true;
}

HarmonicSweepReport exact_harmonic_sweep(const BoundaryDatum& g, const BetaParam& beta, TreeConfig config,
                                         std::size_t depth) {
    if (!beta.below_half()) throw NoBoundedSolutionError("level sweep needs beta < 1/2");
    const Plan plan = make_plan({&g}, beta, config, depth + 1);
    try {
        return harmonic_sweep<Checked>(plan, beta, depth);
    } catch (const OverflowError&) {
        HarmonicSweepReport r = harmonic_sweep<Integer>(plan, beta, depth);
        r.wide_arithmetic = true;
        return r;
    }
}

OrderSweepReport exact_order_sweep(const BoundaryDatum& f, const BoundaryDatum& g, const BetaParam& beta,
                                   TreeConfig config, std::size_t depth) {
    if (!beta.below_half()) throw NoBoundedSolutionError("level sweep needs beta < 1/2");
    const Plan plan = make_plan({&f, &g}, beta, config, depth);
    try {
        return order_sweep<Checked>(plan, depth);
    } catch (const OverflowError&) {
        OrderSweepReport r = order_sweep<Integer>(plan, depth);
        r.wide_arithmetic = true;
        return r;
    }
}

}  // namespace treedtn
