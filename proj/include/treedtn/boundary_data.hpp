#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "treedtn/quadrature.hpp"
#include "treedtn/rational.hpp"
#include "treedtn/tree_core.hpp"

namespace treedtn {

/// Polynomial with exact rational coefficients, c[0] + c[1] t + ...
class Polynomial {
public:
    Polynomial() = default;
    explicit Polynomial(std::vector<Rational> coefficients);

    static Polynomial constant(const Rational& c) { return Polynomial({c}); }
    static Polynomial monomial(unsigned degree, const Rational& c = 1);

    const std::vector<Rational>& coefficients() const noexcept { return coeffs_; }
    /// -1 for the zero polynomial.
    int degree() const noexcept { return static_cast<int>(coeffs_.size()) - 1; }
    bool is_constant() const noexcept { return coeffs_.size() <= 1; }

    Rational operator()(const Rational& t) const;
    double operator()(double t) const;

    Polynomial derivative() const;
    /// Exact integral over [a, b].
    Rational integral(const Rational& a, const Rational& b) const;

    /// Rigorous upper bound of |p'| on [0,1]: sum k |c_k|.
    Rational derivative_bound() const;
    Rational second_derivative_bound() const;
    /// Exact [min, max] over [lo, hi] for degree <= 2; for higher degree a
    /// rigorous enclosure from Bernstein coefficients.
    std::pair<Rational, Rational> range(const Rational& lo, const Rational& hi) const;

    friend Polynomial operator+(const Polynomial& a, const Polynomial& b);
    friend Polynomial operator*(const Rational& s, const Polynomial& p);
    friend bool operator==(const Polynomial& a, const Polynomial& b) { return a.coeffs_ == b.coeffs_; }

private:
    void trim();
    std::vector<Rational> coeffs_;
};

/// Declared regularity of a black-box datum.
enum class Smoothness { C2, C1, C0, BoundedIntegrable };

struct CallableDatum {
    std::string name;
    std::function<double(double)> f;
    Smoothness smoothness = Smoothness::C2;
    std::optional<double> lipschitz;        // bound on |g'|
    std::optional<double> second_bound;     // bound on |g''|
    std::optional<double> sup_bound;        // bound on |g|
    std::function<double(double)> derivative;  // optional exact derivative
};

/// Polynomial pieces on [b_0, b_1), [b_1, b_2), ..., [b_{n-1}, b_n] with
/// 0 = b_0 < ... < b_n = 1.
struct PiecewisePolynomial {
    std::vector<Rational> breakpoints;
    std::vector<Polynomial> pieces;
};

/// Closed-interval indicator chi_[lower, upper].
struct Indicator {
    Rational lower;
    Rational upper;
};

struct AverageResult {
    double value = 0.0;
    double error = 0.0;                // 0 for exact averages
    std::optional<Rational> exact;
};

struct DerivativeResult {
    double value = 0.0;
    double error = 0.0;
    std::optional<Rational> exact;
};

/// Boundary datum g on [0,1].
class BoundaryDatum {
public:
    using Repr = std::variant<Polynomial, PiecewisePolynomial, Indicator, CallableDatum>;

    explicit BoundaryDatum(Polynomial p);
    explicit BoundaryDatum(PiecewisePolynomial p);
    explicit BoundaryDatum(Indicator chi);
    explicit BoundaryDatum(CallableDatum f);

    static BoundaryDatum constant(const Rational& c);
    static BoundaryDatum linear();  // t
    static BoundaryDatum square();  // t^2
    /// chi of I_{n,j} = [j/m^n, (j+1)/m^n].
    static BoundaryDatum characteristic(TreeConfig config, std::size_t n, const Integer& j);

    const Repr& repr() const noexcept { return repr_; }
    /// Polynomial, piecewise polynomial and indicator data; averages are exact rationals.
    bool is_exact() const noexcept { return !std::holds_alternative<CallableDatum>(repr_); }
    /// Exactly constant on [0,1] (up to measure-zero endpoint values for indicators).
    std::optional<Rational> constant_value() const;
    Smoothness smoothness() const;
    std::string describe() const;

    Rational eval(const Rational& t) const;  // exact data only
    double eval(double t) const;

    /// Exact integral over [a, b] subset of [0,1].
    Rational integral_exact(const Rational& a, const Rational& b) const;
    /// Quadrature (callables) or exact integral converted to double.
    QuadratureResult integral(double a, double b, const QuadratureOptions& options = {}) const;

    Rational average_exact(const MadicInterval& I) const;
    /// Exact for exact data; adaptive Simpson with |average error| <= abs_tol
    /// for callables.
    AverageResult average(const MadicInterval& I, const QuadratureOptions& options = {}) const;

    DerivativeResult derivative(const Rational& t) const;
    DerivativeResult derivative(double t) const;

    /// Bound on |g'| over [0,1]; nullopt when g is not Lipschitz.
    std::optional<double> lipschitz_bound() const;
    std::optional<Rational> lipschitz_bound_exact() const;
    /// Enclosure of the range of g on [0,1] (exact for pieces of degree <= 2).
    std::pair<Rational, Rational> range_exact() const;
    std::pair<double, double> range() const;

    /// Piecewise-polynomial view of exact data: breakpoints 0 = b_0 < ... < b_n = 1
    /// and one polynomial per piece. Indicator endpoints become breakpoints.
    PiecewisePolynomial piecewise_view() const;

private:
    Repr repr_;
};

/// Linear combination a f + b g of exact data (as a piecewise polynomial).
BoundaryDatum combine(const Rational& a, const BoundaryDatum& f, const Rational& b,
                      const BoundaryDatum& g);

/// Parses a datum: "linear", "square", "const(c)", "one", "zero",
/// "chi(n,j)", "poly(c0,c1,...)", "exp", "sin", or
/// "piecewise(b1,...;c0,c1|c0,...)" with interior breakpoints then pieces.
BoundaryDatum parse_datum(std::string_view spec, TreeConfig config);

}  // namespace treedtn
