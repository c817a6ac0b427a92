#include "treedtn/boundary_data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "treedtn/errors.hpp"

namespace treedtn {

// ---------------------------------------------------------------------------
// Polynomial

Polynomial::Polynomial(std::vector<Rational> coefficients) : coeffs_(std::move(coefficients)) {
    for (auto& c : coeffs_) c.canonicalize();
    trim();
}

Polynomial Polynomial::monomial(unsigned degree, const Rational& c) {
    std::vector<Rational> coeffs(degree + 1, Rational(0));
    coeffs[degree] = c;
    return Polynomial(std::move(coeffs));
}

void Polynomial::trim() {
    while (!coeffs_.empty() && coeffs_.back() == 0) coeffs_.pop_back();
}

Rational Polynomial::operator()(const Rational& t) const {
    Rational acc = 0;
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * t + *it;
    return acc;
}

double Polynomial::operator()(double t) const {
    double acc = 0.0;
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * t + it->get_d();
    return acc;
}

Polynomial Polynomial::derivative() const {
    if (coeffs_.size() <= 1) return Polynomial();
    std::vector<Rational> d(coeffs_.size() - 1);
    for (std::size_t k = 1; k < coeffs_.size(); ++k) d[k - 1] = coeffs_[k] * static_cast<long>(k);
    return Polynomial(std::move(d));
}

Rational Polynomial::integral(const Rational& a, const Rational& b) const {
    // Horner on the antiderivative sum c_k t^{k+1}/(k+1)
    auto antiderivative = [this](const Rational& t) -> Rational {
        Rational acc = 0;
        for (std::size_t k = coeffs_.size(); k-- > 0;)
            acc = acc * t + coeffs_[k] / Rational(static_cast<long>(k + 1));
        return acc * t;
    };
    return antiderivative(b) - antiderivative(a);
}

Rational Polynomial::derivative_bound() const {
    Rational s = 0;
    for (std::size_t k = 1; k < coeffs_.size(); ++k) s += abs(coeffs_[k]) * static_cast<long>(k);
    return s;
}

Rational Polynomial::second_derivative_bound() const { return derivative().derivative_bound(); }

std::pair<Rational, Rational> Polynomial::range(const Rational& lo, const Rational& hi) const {
    const Rational a = (*this)(lo);
    const Rational b = (*this)(hi);
    std::pair<Rational, Rational> r{std::min(a, b), std::max(a, b)};
    if (degree() <= 1) return r;
    if (degree() == 2) {
        const Rational vertex = -coeffs_[1] / (2 * coeffs_[2]);
        if (lo < vertex && vertex < hi) {
            const Rational v = (*this)(vertex);
            r.first = std::min(r.first, v);
            r.second = std::max(r.second, v);
        }
        return r;
    }
    // Bernstein enclosure on [lo, hi]: shift to s in [0,1], then
    // b_i = sum_{k<=i} C(i,k)/C(n,k) a_k.
    const std::size_t n = coeffs_.size() - 1;
    const Rational width = hi - lo;
    std::vector<Rational> shifted(n + 1, Rational(0));
    // Taylor shift p(lo + width s)
    std::vector<Rational> work = coeffs_;
    for (std::size_t k = 0; k <= n; ++k) {
        Rational val = 0;
        for (std::size_t i = work.size(); i-- > 0;) val = val * lo + work[i];
        shifted[k] = val * rpow(width, k);
        // divide out (t - lo): synthetic division gives next derivative/k! coefficients
        std::vector<Rational> q(work.size() > 0 ? work.size() - 1 : 0);
        Rational carry = 0;
        for (std::size_t i = work.size(); i-- > 1;) {
            carry = carry * lo + work[i];
            q[i - 1] = carry;
        }
        work = std::move(q);
        if (work.empty()) break;
    }
    auto binom = [](std::size_t nn, std::size_t kk) {
        Integer r;
        mpz_bin_uiui(r.get_mpz_t(), nn, kk);
        return r;
    };
    for (std::size_t i = 0; i <= n; ++i) {
        Rational bi = 0;
        for (std::size_t k = 0; k <= i; ++k) bi += shifted[k] * Rational(binom(i, k), binom(n, k));
        r.first = std::min(r.first, bi);
        r.second = std::max(r.second, bi);
    }
    return r;
}

Polynomial operator+(const Polynomial& a, const Polynomial& b) {
    std::vector<Rational> c(std::max(a.coeffs_.size(), b.coeffs_.size()), Rational(0));
    for (std::size_t i = 0; i < a.coeffs_.size(); ++i) c[i] += a.coeffs_[i];
    for (std::size_t i = 0; i < b.coeffs_.size(); ++i) c[i] += b.coeffs_[i];
    return Polynomial(std::move(c));
}

Polynomial operator*(const Rational& s, const Polynomial& p) {
    std::vector<Rational> c = p.coeffs_;
    for (auto& x : c) x *= s;
    return Polynomial(std::move(c));
}

// ---------------------------------------------------------------------------
// BoundaryDatum

namespace {

void validate(const PiecewisePolynomial& pw) {
    const auto& b = pw.breakpoints;
    if (b.size() < 2 || b.front() != 0 || b.back() != 1)
        throw PreconditionError("piecewise datum: breakpoints must start at 0 and end at 1");
    for (std::size_t i = 1; i < b.size(); ++i)
        if (!(b[i - 1] < b[i])) throw PreconditionError("piecewise datum: breakpoints must increase");
    if (pw.pieces.size() + 1 != b.size())
        throw PreconditionError("piecewise datum: need one polynomial per piece");
}

std::size_t piece_index(const PiecewisePolynomial& pw, const Rational& t) {
    // b_i <= t < b_{i+1}; t = 1 falls in the last piece
    auto it = std::upper_bound(pw.breakpoints.begin() + 1, pw.breakpoints.end() - 1, t);
    return static_cast<std::size_t>(it - (pw.breakpoints.begin() + 1));
}

void check_unit(const Rational& t) {
    if (t < 0 || t > 1) throw PreconditionError("datum evaluated outside [0,1] at t=" + fraction_string(t));
}

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

BoundaryDatum::BoundaryDatum(Polynomial p) : repr_(std::move(p)) {}

BoundaryDatum::BoundaryDatum(PiecewisePolynomial p) : repr_(std::move(p)) {
    validate(std::get<PiecewisePolynomial>(repr_));
}

BoundaryDatum::BoundaryDatum(Indicator chi) : repr_(std::move(chi)) {
    const auto& c = std::get<Indicator>(repr_);
    if (c.lower < 0 || c.upper > 1 || c.lower > c.upper)
        throw PreconditionError("indicator interval must satisfy 0 <= lower <= upper <= 1");
}

BoundaryDatum::BoundaryDatum(CallableDatum f) : repr_(std::move(f)) {
    if (!std::get<CallableDatum>(repr_).f) throw PreconditionError("callable datum needs an evaluator");
}

BoundaryDatum BoundaryDatum::constant(const Rational& c) { return BoundaryDatum(Polynomial::constant(c)); }
BoundaryDatum BoundaryDatum::linear() { return BoundaryDatum(Polynomial::monomial(1)); }
BoundaryDatum BoundaryDatum::square() { return BoundaryDatum(Polynomial::monomial(2)); }

BoundaryDatum BoundaryDatum::characteristic(TreeConfig config, std::size_t n, const Integer& j) {
    MadicInterval I(config, j, n);
    return BoundaryDatum(Indicator{I.lower(), I.upper()});
}

std::optional<Rational> BoundaryDatum::constant_value() const {
    return std::visit(
        overloaded{
            [](const Polynomial& p) -> std::optional<Rational> {
                if (p.degree() <= 0) return p.degree() < 0 ? Rational(0) : p.coefficients()[0];
                return std::nullopt;
            },
            [](const PiecewisePolynomial& pw) -> std::optional<Rational> {
                const Polynomial& first = pw.pieces.front();
                if (!first.is_constant()) return std::nullopt;
                for (const auto& piece : pw.pieces)
                    if (!(piece == first)) return std::nullopt;
                return first(Rational(0));
            },
            [](const Indicator& c) -> std::optional<Rational> {
                if (c.lower == 0 && c.upper == 1) return Rational(1);
                if (c.lower == c.upper) return Rational(0);
                return std::nullopt;
            },
            [](const CallableDatum&) -> std::optional<Rational> { return std::nullopt; },
        },
        repr_);
}

Smoothness BoundaryDatum::smoothness() const {
    if (constant_value()) return Smoothness::C2;
    return std::visit(
        overloaded{
            [](const Polynomial&) { return Smoothness::C2; },
            [](const PiecewisePolynomial& pw) {
                Smoothness s = Smoothness::C2;
                for (std::size_t i = 1; i + 1 < pw.breakpoints.size(); ++i) {
                    const Rational& b = pw.breakpoints[i];
                    const Polynomial &l = pw.pieces[i - 1], &r = pw.pieces[i];
                    if (l(b) != r(b)) return Smoothness::BoundedIntegrable;
                    if (l.derivative()(b) != r.derivative()(b)) {
                        s = Smoothness::C0;
                    } else if (s == Smoothness::C2 &&
                               l.derivative().derivative()(b) != r.derivative().derivative()(b)) {
                        s = Smoothness::C1;
                    }
                }
                return s;
            },
            [](const Indicator&) { return Smoothness::BoundedIntegrable; },
            [](const CallableDatum& c) { return c.smoothness; },
        },
        repr_);
}

std::string BoundaryDatum::describe() const {
    auto poly_str = [](const Polynomial& p) {
        std::string s = "poly(";
        const auto& c = p.coefficients();
        if (c.empty()) s += "0";
        for (std::size_t i = 0; i < c.size(); ++i) {
            if (i) s += ",";
            s += c[i].get_str();
        }
        return s + ")";
    };
    return std::visit(overloaded{
                          [&](const Polynomial& p) { return poly_str(p); },
                          [&](const PiecewisePolynomial& pw) {
                              std::string s = "piecewise(";
                              for (std::size_t i = 1; i + 1 < pw.breakpoints.size(); ++i) {
                                  if (i > 1) s += ",";
                                  s += pw.breakpoints[i].get_str();
                              }
                              s += ";";
                              for (std::size_t i = 0; i < pw.pieces.size(); ++i) {
                                  if (i) s += "|";
                                  std::string ps = poly_str(pw.pieces[i]);
                                  s += ps.substr(5, ps.size() - 6);
                              }
                              return s + ")";
                          },
                          [](const Indicator& c) {
                              return "chi[" + c.lower.get_str() + "," + c.upper.get_str() + "]";
                          },
                          [](const CallableDatum& c) { return c.name; },
                      },
                      repr_);
}

Rational BoundaryDatum::eval(const Rational& t) const {
    check_unit(t);
    return std::visit(
        overloaded{
            [&](const Polynomial& p) { return p(t); },
            [&](const PiecewisePolynomial& pw) { return pw.pieces[piece_index(pw, t)](t); },
            [&](const Indicator& c) { return Rational(c.lower <= t && t <= c.upper ? 1 : 0); },
            [&](const CallableDatum&) -> Rational {
                throw UnsupportedOperationError("exact evaluation of a callable datum");
            },
        },
        repr_);
}

double BoundaryDatum::eval(double t) const {
    if (!(t >= 0.0 && t <= 1.0)) throw PreconditionError("datum evaluated outside [0,1]");
    if (const auto* c = std::get_if<CallableDatum>(&repr_)) return c->f(t);
    if (const auto* p = std::get_if<Polynomial>(&repr_)) return (*p)(t);
    return eval(Rational(t)).get_d();
}

Rational BoundaryDatum::integral_exact(const Rational& a, const Rational& b) const {
    if (a < 0 || b > 1 || a > b) throw PreconditionError("integration interval must lie in [0,1]");
    return std::visit(
        overloaded{
            [&](const Polynomial& p) { return p.integral(a, b); },
            [&](const PiecewisePolynomial& pw) {
                Rational total = 0;
                for (std::size_t i = 0; i < pw.pieces.size(); ++i) {
                    const Rational lo = std::max(a, pw.breakpoints[i]);
                    const Rational hi = std::min(b, pw.breakpoints[i + 1]);
                    if (lo < hi) total += pw.pieces[i].integral(lo, hi);
                }
                return total;
            },
            [&](const Indicator& c) {
                const Rational lo = std::max(a, c.lower);
                const Rational hi = std::min(b, c.upper);
                return lo < hi ? Rational(hi - lo) : Rational(0);
            },
            [&](const CallableDatum&) -> Rational {
                throw UnsupportedOperationError("exact integral of a callable datum");
            },
        },
        repr_);
}

QuadratureResult BoundaryDatum::integral(double a, double b, const QuadratureOptions& options) const {
    if (const auto* c = std::get_if<CallableDatum>(&repr_)) return adaptive_simpson(c->f, a, b, options);
    return {integral_exact(Rational(a), Rational(b)).get_d(), 0.0, 0};
}

Rational BoundaryDatum::average_exact(const MadicInterval& I) const {
    return integral_exact(I.lower(), I.upper()) / I.length();
}

AverageResult BoundaryDatum::average(const MadicInterval& I, const QuadratureOptions& options) const {
    if (is_exact()) {
        Rational a = average_exact(I);
        return {a.get_d(), 0.0, a};
    }
    const double lo = I.lower().get_d();
    const double hi = I.upper().get_d();
    const double len = hi - lo;
    QuadratureOptions scaled = options;
    scaled.abs_tol = options.abs_tol * len;
    try {
        QuadratureResult q = adaptive_simpson(std::get<CallableDatum>(repr_).f, lo, hi, scaled);
        return {q.value / len, q.error / len, std::nullopt};
    } catch (const ToleranceNotMetError& e) {
        throw ToleranceNotMetError("interval average did not reach tolerance on [" + I.to_string() + "]",
                                   e.best_estimate / len, e.best_error / len);
    }
}

DerivativeResult BoundaryDatum::derivative(const Rational& t) const {
    check_unit(t);
    return std::visit(
        overloaded{
            [&](const Polynomial& p) {
                Rational d = p.derivative()(t);
                return DerivativeResult{d.get_d(), 0.0, d};
            },
            [&](const PiecewisePolynomial& pw) {
                const std::size_t i = piece_index(pw, t);
                Rational d = pw.pieces[i].derivative()(t);
                const bool at_break = i > 0 && t == pw.breakpoints[i];
                if (at_break) {
                    const Polynomial& left = pw.pieces[i - 1];
                    if (left(t) != pw.pieces[i](t) || left.derivative()(t) != d)
                        throw UnsupportedOperationError("piecewise datum is not differentiable at t=" +
                                                        fraction_string(t));
                }
                return DerivativeResult{d.get_d(), 0.0, d};
            },
            [&](const Indicator&) -> DerivativeResult {
                if (constant_value()) return DerivativeResult{0.0, 0.0, Rational(0)};
                throw UnsupportedOperationError("derivative of a characteristic datum");
            },
            [&](const CallableDatum&) { return derivative(t.get_d()); },
        },
        repr_);
}

DerivativeResult BoundaryDatum::derivative(double t) const {
    if (!(t >= 0.0 && t <= 1.0)) throw PreconditionError("derivative requested outside [0,1]");
    const auto* c = std::get_if<CallableDatum>(&repr_);
    if (!c) return derivative(Rational(t));
    if (c->smoothness == Smoothness::C0 || c->smoothness == Smoothness::BoundedIntegrable)
        throw UnsupportedOperationError("derivative of a datum declared non-differentiable (" + c->name + ")");
    if (c->derivative) return {c->derivative(t), 0.0, std::nullopt};
    DerivativeEstimate d = richardson_derivative(c->f, t);
    return {d.value, d.error, std::nullopt};
}

std::optional<Rational> BoundaryDatum::lipschitz_bound_exact() const {
    if (constant_value()) return Rational(0);
    return std::visit(overloaded{
                          [](const Polynomial& p) -> std::optional<Rational> { return p.derivative_bound(); },
                          [this](const PiecewisePolynomial& pw) -> std::optional<Rational> {
                              if (smoothness() == Smoothness::BoundedIntegrable) return std::nullopt;
                              Rational best = 0;
                              for (const auto& piece : pw.pieces) best = std::max(best, piece.derivative_bound());
                              return best;
                          },
                          [](const Indicator&) -> std::optional<Rational> { return std::nullopt; },
                          [](const CallableDatum&) -> std::optional<Rational> { return std::nullopt; },
                      },
                      repr_);
}

std::optional<double> BoundaryDatum::lipschitz_bound() const {
    if (const auto* c = std::get_if<CallableDatum>(&repr_)) return c->lipschitz;
    if (auto r = lipschitz_bound_exact()) return r->get_d();
    return std::nullopt;
}

std::pair<Rational, Rational> BoundaryDatum::range_exact() const {
    return std::visit(
        overloaded{
            [](const Polynomial& p) { return p.range(0, 1); },
            [](const PiecewisePolynomial& pw) {
                auto r = pw.pieces[0].range(pw.breakpoints[0], pw.breakpoints[1]);
                for (std::size_t i = 1; i < pw.pieces.size(); ++i) {
                    auto ri = pw.pieces[i].range(pw.breakpoints[i], pw.breakpoints[i + 1]);
                    r.first = std::min(r.first, ri.first);
                    r.second = std::max(r.second, ri.second);
                }
                return r;
            },
            [](const Indicator& c) {
                if (c.lower == 0 && c.upper == 1) return std::pair<Rational, Rational>{1, 1};
                return std::pair<Rational, Rational>{0, 1};
            },
            [](const CallableDatum&) -> std::pair<Rational, Rational> {
                throw UnsupportedOperationError("exact range of a callable datum");
            },
        },
        repr_);
}

std::pair<double, double> BoundaryDatum::range() const {
    if (const auto* c = std::get_if<CallableDatum>(&repr_)) {
        // Sampled extremes, widened by the Lipschitz slack when one is declared.
        constexpr int kSamples = 2048;
        double lo = c->f(0.0), hi = lo;
        for (int i = 1; i <= kSamples; ++i) {
            const double v = c->f(static_cast<double>(i) / kSamples);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        const double slack = c->lipschitz ? *c->lipschitz / (2.0 * kSamples) : 0.0;
        return {lo - slack, hi + slack};
    }
    auto r = range_exact();
    return {r.first.get_d(), r.second.get_d()};
}

PiecewisePolynomial BoundaryDatum::piecewise_view() const {
    return std::visit(
        overloaded{
            [](const Polynomial& p) { return PiecewisePolynomial{{0, 1}, {p}}; },
            [](const PiecewisePolynomial& pw) { return pw; },
            [](const Indicator& c) {
                PiecewisePolynomial pw;
                pw.breakpoints.push_back(0);
                if (c.lower > 0) {
                    pw.pieces.push_back(Polynomial());
                    pw.breakpoints.push_back(c.lower);
                }
                if (c.lower < c.upper) {
                    pw.pieces.push_back(Polynomial::constant(1));
                    if (c.upper < 1) pw.breakpoints.push_back(c.upper);
                }
                if (c.upper < 1) pw.pieces.push_back(Polynomial());
                if (pw.breakpoints.back() != 1) pw.breakpoints.push_back(1);
                if (c.lower == c.upper) {  // measure-zero support
                    pw = PiecewisePolynomial{{0, 1}, {Polynomial()}};
                }
                return pw;
            },
            [](const CallableDatum& c) -> PiecewisePolynomial {
                throw UnsupportedOperationError("piecewise view of callable datum " + c.name);
            },
        },
        repr_);
}

BoundaryDatum combine(const Rational& a, const BoundaryDatum& f, const Rational& b, const BoundaryDatum& g) {
    const PiecewisePolynomial pf = f.piecewise_view();
    const PiecewisePolynomial pg = g.piecewise_view();
    std::vector<Rational> breaks = pf.breakpoints;
    breaks.insert(breaks.end(), pg.breakpoints.begin(), pg.breakpoints.end());
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    PiecewisePolynomial out;
    out.breakpoints = breaks;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        const Rational mid = (breaks[i] + breaks[i + 1]) / 2;
        out.pieces.push_back(a * pf.pieces[piece_index(pf, mid)] + b * pg.pieces[piece_index(pg, mid)]);
    }
    if (out.pieces.size() == 1) return BoundaryDatum(out.pieces.front());
    return BoundaryDatum(std::move(out));
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        std::size_t next = s.find(sep, pos);
        out.emplace_back(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    return out;
}

Polynomial parse_coefficients(std::string_view text) {
    std::vector<Rational> coeffs;
    for (const auto& tok : split(text, ',')) coeffs.push_back(parse_rational(tok));
    return Polynomial(std::move(coeffs));
}

std::string_view call_args(std::string_view spec, std::string_view name) {
    if (spec.size() < name.size() + 2 || spec.substr(0, name.size()) != name || spec[name.size()] != '(' ||
        spec.back() != ')')
        return {};
    return spec.substr(name.size() + 1, spec.size() - name.size() - 2);
}

CallableDatum exp_datum() {
    const double e = std::numbers::e;
    return CallableDatum{"exp", [](double t) { return std::exp(t); }, Smoothness::C2, e, e, e,
                         [](double t) { return std::exp(t); }};
}

CallableDatum sin_datum() {
    const double pi = std::numbers::pi;
    return CallableDatum{"sin",
                         [pi](double t) { return std::sin(pi * t); },
                         Smoothness::C2,
                         pi,
                         pi * pi,
                         1.0,
                         [pi](double t) { return pi * std::cos(pi * t); }};
}

}  // namespace

BoundaryDatum parse_datum(std::string_view spec, TreeConfig config) {
    std::string s;
    for (char c : spec)
        if (!std::isspace(static_cast<unsigned char>(c))) s += c;
    std::string_view v = s;

    if (v == "linear" || v == "t") return BoundaryDatum::linear();
    if (v == "square" || v == "t^2") return BoundaryDatum::square();
    if (v == "one") return BoundaryDatum::constant(1);
    if (v == "zero") return BoundaryDatum::constant(0);
    if (v == "exp") return BoundaryDatum(exp_datum());
    if (v == "sin") return BoundaryDatum(sin_datum());
    if (auto a = call_args(v, "const"); !a.empty()) return BoundaryDatum::constant(parse_rational(a));
    if (auto a = call_args(v, "poly"); !a.empty()) return BoundaryDatum(parse_coefficients(a));
    if (auto a = call_args(v, "chi"); !a.empty()) {
        auto parts = split(a, ',');
        if (parts.size() != 2) throw PreconditionError("chi(n,j) expects two integers");
        const Rational n = parse_rational(parts[0]);
        const Rational j = parse_rational(parts[1]);
        if (n.get_den() != 1 || j.get_den() != 1 || n < 0 || j < 0)
            throw PreconditionError("chi(n,j) expects non-negative integers");
        return BoundaryDatum::characteristic(config, n.get_num().get_ui(), j.get_num());
    }
    if (auto a = call_args(v, "piecewise"); !a.empty()) {
        auto halves = split(a, ';');
        if (halves.size() != 2) throw PreconditionError("piecewise(breaks;pieces) expects one ';'");
        PiecewisePolynomial pw;
        pw.breakpoints.push_back(0);
        if (!halves[0].empty())
            for (const auto& tok : split(halves[0], ',')) pw.breakpoints.push_back(parse_rational(tok));
        pw.breakpoints.push_back(1);
        for (const auto& piece : split(halves[1], '|')) pw.pieces.push_back(parse_coefficients(piece));
        return BoundaryDatum(std::move(pw));
    }
    throw PreconditionError("unknown datum '" + std::string(spec) + "'");
}

}  // namespace treedtn
