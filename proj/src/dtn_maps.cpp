#include "treedtn/dtn_maps.hpp"

#include <algorithm>
#include <cmath>

#include "treedtn/errors.hpp"

namespace treedtn {

std::vector<Rational> omega(int m) {
    if (m < 2) throw PreconditionError("omega needs m >= 2");
    std::vector<Rational> w;
    for (int i = 0; i < m; ++i) {
        Rational r(2 * i + 1 - m, 2 * m);
        r.canonicalize();
        w.push_back(r);
    }
    return w;
}

std::vector<Rational> varpi(int m) {
    if (m < 2) throw PreconditionError("varpi needs m >= 2");
    std::vector<Rational> w;
    for (int i = 0; i < m; ++i) w.emplace_back(i);
    return w;
}

Rational dot(const std::vector<Rational>& a, const std::vector<Rational>& b) {
    if (a.size() != b.size()) throw PreconditionError("dot product of vectors of different length");
    Rational s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

NormalVector::NormalVector(std::vector<Rational> eta) : eta_(std::move(eta)) {
    if (eta_.size() < 2) throw PreconditionError("normal vector needs at least two components");
    Rational s = 0;
    for (auto& e : eta_) {
        e.canonicalize();
        s += e;
    }
    zero_sum_ = s == 0;
}

NormalVector NormalVector::parse(std::string_view text) {
    std::string s;
    for (char c : text)
        if (c != '(' && c != ')' && c != '[' && c != ']' && !std::isspace(static_cast<unsigned char>(c))) s += c;
    std::vector<Rational> eta;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const std::size_t next = std::min(s.find(',', pos), s.size());
        eta.push_back(parse_rational(std::string_view(s).substr(pos, next - pos)));
        pos = next + 1;
    }
    return NormalVector(std::move(eta));
}

NormalVector NormalVector::basis(int m, int i) {
    if (i < 0 || i >= m) throw PreconditionError("basis index out of range");
    std::vector<Rational> e(static_cast<std::size_t>(m), Rational(0));
    e[static_cast<std::size_t>(i)] = 1;
    return NormalVector(std::move(e));
}

std::string NormalVector::to_string() const {
    std::string s = "(";
    for (std::size_t i = 0; i < eta_.size(); ++i) {
        if (i) s += ",";
        s += eta_[i].get_str();
    }
    return s + ")";
}

ClosedForm lambda_closed_form(const BoundaryDatum& g, const BetaParam& beta, const NormalVector& eta,
                              const Rational& t) {
    if (!beta.below_half()) throw NoBoundedSolutionError("the first DtN map needs beta < 1/2");
    Rational factor;
    if (beta.beta() == 0) {
        factor = dot(eta.components(), omega(eta.m()));
    } else {
        if (!eta.zero_sum())
            throw HypothesisViolationError("for 0 < beta < 1/2 the closed form needs sum(eta) = 0, got eta = " +
                                           eta.to_string());
        const Rational& b = beta.beta();
        factor = (1 - 2 * b) / (eta.m() * (1 - b)) * dot(eta.components(), varpi(eta.m()));
    }
    DerivativeResult d = g.derivative(t);
    ClosedForm out;
    if (d.exact) {
        out.exact = factor * *d.exact;
        out.value = out.exact->get_d();
    } else {
        out.value = factor.get_d() * d.value;
        out.error = std::abs(factor.get_d()) * d.error;
    }
    return out;
}

namespace {

template <class T>
DtnEstimate lambda_from(const Solution<T>& u, const NormalVector& eta, const Branch& pi, std::size_t k) {
    if (eta.m() != pi.m()) throw PreconditionError("normal vector length must equal m");
    const Vertex x = pi.prefix(k);
    const auto grad = gradient(u, x);
    T s = T(0);
    for (std::size_t i = 0; i < grad.size(); ++i) s += from_rational<T>(eta.components()[i]) * grad[i];
    const T scale = from_rational<T>(Rational(ipow(pi.m(), k)));
    DtnEstimate e;
    e.k = k;
    const T v = scale * s;
    if constexpr (std::is_same_v<T, Rational>) {
        e.exact = v;
        e.value = v.get_d();
    } else {
        e.value = v;
    }
    try {
        ClosedForm cf = lambda_closed_form(u.datum(), u.beta(), eta, pi.psi());
        e.target = cf.value;
        e.target_exact = cf.exact;
        if (e.exact && cf.exact) {
            e.gap = Rational(abs(*e.exact - *cf.exact)).get_d();
        } else {
            e.gap = std::abs(e.value - cf.value);
        }
    } catch (const HypothesisViolationError& err) {
        e.status = err.what();
    } catch (const UnsupportedOperationError& err) {
        e.status = err.what();
    }
    return e;
}

void fill_ratios(std::vector<DtnEstimate>& rows) {
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].gap && rows[i - 1].gap && *rows[i].gap > 0) rows[i].ratio = *rows[i - 1].gap / *rows[i].gap;
}

}  // namespace

DtnEstimate lambda_estimate(const BoundaryDatum& g, const BetaParam& beta, const NormalVector& eta,
                            const Branch& pi, std::size_t k, const QuadratureOptions& options) {
    if (!beta.below_half()) throw NoBoundedSolutionError("the first DtN map needs beta < 1/2");
    if (g.is_exact()) return lambda_from(ExactSolution(g, beta, pi.config()), eta, pi, k);
    return lambda_from(FloatSolution(g, beta, pi.config(), options), eta, pi, k);
}

DtnSweep lambda_sweep(const BoundaryDatum& g, const BetaParam& beta, const NormalVector& eta, const Branch& pi,
                      const std::vector<std::size_t>& depths, const QuadratureOptions& options) {
    if (!beta.below_half()) throw NoBoundedSolutionError("the first DtN map needs beta < 1/2");
    DtnSweep sweep;
    if (g.is_exact()) {
        ExactSolution u(g, beta, pi.config());
        for (std::size_t k : depths) sweep.rows.push_back(lambda_from(u, eta, pi, k));
    } else {
        FloatSolution u(g, beta, pi.config(), options);
        for (std::size_t k : depths) sweep.rows.push_back(lambda_from(u, eta, pi, k));
    }
    fill_ratios(sweep.rows);
    std::vector<double> ks, gaps;
    for (const auto& r : sweep.rows) {
        if (!r.gap) continue;
        ks.push_back(static_cast<double>(r.k));
        gaps.push_back(*r.gap);
    }
    sweep.slope = fit_log_slope(ks, gaps);
    return sweep;
}

std::optional<double> fit_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
        if (y[i] > 0 && std::isfinite(y[i])) {
            xs.push_back(x[i]);
            ys.push_back(std::log(y[i]));
        }
    }
    if (xs.size() < 2) return std::nullopt;
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx == 0) return std::nullopt;
    return sxy / sxx;
}

// ---------------------------------------------------------------------------
// Kernels

Rational kernel_constant(int m, const Rational& p) {
    Rational c = m * (1 - p) / (m - p);
    c.canonicalize();
    return c;
}

namespace {

void check_kernel_beta(const BetaParam& beta) {
    if (!(beta.beta() > 0 && beta.below_half()))
        throw PreconditionError("the kernels K_m^j need 0 < beta < 1/2");
}

void check_kernel_vertex(const Vertex& x, Digit j) {
    if (x.level() < 1) throw PreconditionError("the kernels K_m^j need |x| >= 1");
    if (j >= static_cast<Digit>(x.m())) throw PreconditionError("successor digit out of range");
}

}  // namespace

Rational kernel_Kj(const Vertex& x, Digit j, const Rational& t, const BetaParam& beta) {
    check_kernel_beta(beta);
    check_kernel_vertex(x, j);
    if (t < 0 || t > 1) throw PreconditionError("kernel evaluated outside [0,1]");
    const Rational p = beta.p();
    const int m = x.m();
    const Rational q = p / m;
    const std::size_t L = x.level();
    Rational s = rpow(q, L);
    for (std::size_t i = 0; i < L; ++i)
        if (x.ancestor(i).interval().contains(t)) s += (1 - p) * rpow(q, i);
    if (x.child(j).interval().contains(t)) s -= m;
    return s * Rational(ipow(m, L));
}

Rational kernel_Kj_cases(const Vertex& x, Digit j, const Rational& t, const BetaParam& beta) {
    check_kernel_beta(beta);
    check_kernel_vertex(x, j);
    const Rational p = beta.p();
    const int m = x.m();
    const Rational q = p / m;
    const std::size_t L = x.level();
    const Rational c = kernel_constant(m, p);
    const Rational scale(ipow(m, L));
    if (!x.prefix(1).interval().contains(t)) return scale * rpow(q, L);
    const std::size_t n = n_of(x, t);
    Rational v = rpow(q, L) - c * (rpow(q, L) - rpow(q, L - n));
    if (x.child(j).interval().contains(t)) v -= m;
    return scale * v;
}

std::vector<KernelPiece> kernel_pieces(const Vertex& x, Digit j, const BetaParam& beta) {
    check_kernel_beta(beta);
    check_kernel_vertex(x, j);
    const Rational p = beta.p();
    const int m = x.m();
    const Rational q = p / m;
    const std::size_t L = x.level();
    const Rational c = kernel_constant(m, p);
    const Rational scale(ipow(m, L));
    std::vector<KernelPiece> pieces;
    pieces.push_back({Vertex(x.config()), x.prefix(1), scale * rpow(q, L)});
    for (std::size_t n = 1; n <= L; ++n) {
        const Vertex inner = n < L ? x.prefix(n + 1) : x.child(j);
        pieces.push_back({x.prefix(n), inner, scale * (rpow(q, L) - c * (rpow(q, L) - rpow(q, L - n)))});
    }
    pieces.push_back({x.child(j), std::nullopt, scale * (rpow(q, L) - c * (rpow(q, L) - 1) - m)});
    return pieces;
}

Rational kernel_integral(const Vertex& x, Digit j, const BetaParam& beta, const BoundaryDatum& g) {
    auto integral = [&g](const Vertex& v) {
        const MadicInterval I = v.interval();
        return g.integral_exact(I.lower(), I.upper());
    };
    Rational total = 0;
    for (const auto& piece : kernel_pieces(x, j, beta)) {
        Rational part = integral(piece.outer);
        if (piece.inner) part -= integral(*piece.inner);
        total += piece.value * part;
    }
    return total;
}

namespace {

void check_limit_beta(const BetaParam& beta, int m) {
    if (!(beta.beta() > Rational(1, m + 1) && beta.below_half()))
        throw KernelFormInvalidError("the limit kernel needs 1/(m+1) < beta < 1/2, got beta = " + beta.to_string());
}

}  // namespace

Rational kernel_limit(const Branch& pi, const Rational& t, const BetaParam& beta) {
    check_limit_beta(beta, pi.m());
    if (t < 0 || t > 1) throw PreconditionError("kernel evaluated outside [0,1]");
    if (t == pi.psi()) throw SingularPointError("the limit kernel is singular at t = psi(pi)");
    if (!pi.interval(1).contains(t)) return 1;
    const Rational p = beta.p();
    const int m = pi.m();
    const std::size_t N = big_n(pi, t);
    return 1 + kernel_constant(m, p) * (rpow(Rational(m) / p, N) - 1);
}

std::vector<KernelProfileRow> kernel_profile(const Branch& pi, const BetaParam& beta,
                                             const std::vector<Rational>& grid) {
    check_limit_beta(beta, pi.m());
    std::vector<KernelProfileRow> rows;
    const Rational psi = pi.psi();
    for (const auto& t : grid) {
        if (t == psi) continue;
        KernelProfileRow r{t, std::nullopt, kernel_limit(pi, t, beta)};
        if (pi.interval(1).contains(t)) r.N = big_n(pi, t);
        rows.push_back(std::move(r));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Gamma

namespace {

// h(I) = int_I (g(psi) - g(t)) dt in the exact or the floating backend.
template <class T>
struct Defect {
    const BoundaryDatum& g;
    T g_psi;
    QuadratureOptions options;
    mutable double error = 0.0;

    T operator()(const MadicInterval& I) const {
        if constexpr (std::is_same_v<T, Rational>) {
            return g_psi * I.length() - g.integral_exact(I.lower(), I.upper());
        } else {
            QuadratureResult q = g.integral(I.lower().get_d(), I.upper().get_d(), options);
            error += q.error;
            return g_psi * I.length().get_d() - q.value;
        }
    }
};

template <class T>
T datum_at(const BoundaryDatum& g, const Rational& t) {
    if constexpr (std::is_same_v<T, Rational>) {
        return g.eval(t);
    } else {
        return g.eval(t.get_d());
    }
}

template <class T>
void assign(std::optional<double>& d, std::optional<Rational>& r, const T& v) {
    if constexpr (std::is_same_v<T, Rational>) {
        r = v;
        d = v.get_d();
    } else {
        d = v;
    }
}

template <class T>
KernelQuadrature kernel_quadrature_impl(const BoundaryDatum& g, const BetaParam& beta, const Branch& pi,
                                        std::size_t K, const QuadratureOptions& options) {
    const Rational p = beta.p();
    const int m = pi.m();
    const Rational c = kernel_constant(m, p);
    const Rational ratio = Rational(m) / p;
    Defect<T> h{g, datum_at<T>(g, pi.psi()), options};
    const T one_minus_c = from_rational<T>(1 - c);
    const T cc = from_rational<T>(c);
    T total = h(Vertex(pi.config()).interval()) - h(pi.interval(1));
    T outer = h(pi.interval(1));
    Rational power = 1;
    for (std::size_t n = 1; n <= K; ++n) {
        power *= ratio;
        const T inner = h(pi.interval(n + 1));
        total += (one_minus_c + cc * from_rational<T>(power)) * (outer - inner);
        outer = inner;
    }
    total *= from_rational<T>(1 - p);

    KernelQuadrature q;
    q.truncation = K;
    if constexpr (std::is_same_v<T, Rational>) {
        q.exact = total;
        q.value = total.get_d();
    } else {
        q.value = total;
        q.quadrature_error = h.error * std::abs(Rational(1 - p).get_d()) * (1 + c.get_d() * std::pow(ratio.get_d(), K));
    }
    const std::optional<double> lip = g.lipschitz_bound();
    if (!lip) throw PreconditionError("kernel quadrature needs a Lipschitz datum for its tail bound");
    const double pd = p.get_d(), md = m, cd = c.get_d();
    const double pm = pd * md;
    const double kk = static_cast<double>(K + 1);
    q.tail_bound = (1 - pd) * (1 - 1 / md) * *lip *
                   ((1 - cd) * std::pow(md, -2 * kk) / (1 - 1 / (md * md)) +
                    cd * std::pow(pm, -kk) / (1 - 1 / pm));
    q.nominal_tail = cd * (1 + 1 / md) * std::pow(pm, -static_cast<double>(K)) * *lip;
    return q;
}

template <class T>
DtnEstimate gamma_from(const Solution<T>& u, const Branch& pi, std::size_t k, const QuadratureOptions& options) {
    const BoundaryDatum& g = u.datum();
    const Rational p = u.beta().p();
    const int m = pi.m();
    const Rational c = kernel_constant(m, p);
    const Rational ratio = Rational(m) / p;
    Defect<T> h{g, datum_at<T>(g, pi.psi()), options};

    DtnEstimate e;
    e.k = k;
    const Vertex xk = pi.prefix(k);
    const Vertex xk1 = pi.prefix(k + 1);
    const T raw = from_rational<T>(rpow(1 / p, k)) * (u.value(xk1) - u.value(xk));
    if constexpr (std::is_same_v<T, Rational>) {
        e.exact = raw;
        e.value = raw.get_d();
    } else {
        e.value = raw;
    }

    const T h1 = h(pi.interval(1));
    const T bulk = h(Vertex(pi.config()).interval()) - from_rational<T>(c) * h1;
    T j1 = T(0);
    T outer = h1;
    Rational power = 1;
    for (std::size_t n = 1; n <= k; ++n) {
        power *= ratio;
        const T inner = h(pi.interval(n + 1));
        j1 += from_rational<T>(power) * (outer - inner);
        outer = inner;
    }
    j1 *= from_rational<T>(c);
    const Rational j2coef = -Rational(m * (m - 1)) / (m - p) * power;
    const T j2 = from_rational<T>(j2coef) * outer;
    assign(e.bulk, e.bulk_exact, bulk);
    assign(e.j1, e.j1_exact, j1);
    assign(e.j2, e.j2_exact, j2);
    return e;
}

void check_gamma_beta(const BetaParam& beta) {
    if (!(beta.beta() > 0 && beta.below_half()))
        throw PreconditionError("the second DtN map needs 0 < beta < 1/2");
}

void attach_target(DtnEstimate& e, const BoundaryDatum& g, const BetaParam& beta, const Branch& pi,
                   std::size_t truncation, const QuadratureOptions& options) {
    const Rational pm = beta.p() * pi.m();
    if (pm <= 1) {
        e.converges = false;
        e.status = "non-convergent: pm = " + fraction_string(pm) + " <= 1, J2 need not vanish";
        return;
    }
    KernelQuadrature q = gamma_kernel_quadrature(g, beta, pi, truncation, options);
    e.target = q.value;
    e.target_exact = q.exact;
    e.tail = q.error();
    if (e.exact && q.exact) {
        e.gap = Rational(abs(*e.exact - *q.exact)).get_d();
    } else {
        e.gap = std::abs(e.value - q.value);
    }
}

}  // namespace

KernelQuadrature gamma_kernel_quadrature(const BoundaryDatum& g, const BetaParam& beta, const Branch& pi,
                                         std::size_t truncation, const QuadratureOptions& options) {
    check_limit_beta(beta, pi.m());
    if (g.is_exact()) return kernel_quadrature_impl<Rational>(g, beta, pi, truncation, options);
    return kernel_quadrature_impl<double>(g, beta, pi, truncation, options);
}

DtnEstimate gamma_estimate(const BoundaryDatum& g, const BetaParam& beta, const Branch& pi, std::size_t k,
                           const QuadratureOptions& options, std::optional<std::size_t> truncation) {
    check_gamma_beta(beta);
    if (k < 1) throw PreconditionError("the second DtN map needs k >= 1");
    DtnEstimate e = g.is_exact() ? gamma_from(ExactSolution(g, beta, pi.config()), pi, k, options)
                                 : gamma_from(FloatSolution(g, beta, pi.config(), options), pi, k, options);
    attach_target(e, g, beta, pi, truncation.value_or(k), options);
    return e;
}

DtnSweep gamma_sweep(const BoundaryDatum& g, const BetaParam& beta, const Branch& pi,
                     const std::vector<std::size_t>& depths, const QuadratureOptions& options) {
    check_gamma_beta(beta);
    DtnSweep sweep;
    if (depths.empty()) return sweep;
    const std::size_t K = *std::max_element(depths.begin(), depths.end());
    std::optional<KernelQuadrature> q;
    if (beta.p() * pi.m() > 1) q = gamma_kernel_quadrature(g, beta, pi, K, options);
    std::optional<ExactSolution> ue;
    std::optional<FloatSolution> uf;
    if (g.is_exact()) {
        ue.emplace(g, beta, pi.config());
    } else {
        uf.emplace(g, beta, pi.config(), options);
    }
    for (std::size_t k : depths) {
        if (k < 1) throw PreconditionError("the second DtN map needs k >= 1");
        DtnEstimate e = ue ? gamma_from(*ue, pi, k, options) : gamma_from(*uf, pi, k, options);
        if (!q) {
            e.converges = false;
            e.status = "non-convergent: pm = " + fraction_string(beta.p() * pi.m()) + " <= 1, J2 need not vanish";
        } else {
            e.target = q->value;
            e.target_exact = q->exact;
            e.tail = q->error();
            e.gap = (e.exact && q->exact) ? Rational(abs(*e.exact - *q->exact)).get_d() : std::abs(e.value - q->value);
        }
        sweep.rows.push_back(std::move(e));
    }
    fill_ratios(sweep.rows);
    std::vector<double> ks, gaps;
    for (const auto& r : sweep.rows)
        if (r.gap) {
            ks.push_back(static_cast<double>(r.k));
            gaps.push_back(*r.gap);
        }
    sweep.slope = fit_log_slope(ks, gaps);
    return sweep;
}

}  // namespace treedtn
