#include "treedtn/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "treedtn/errors.hpp"

namespace treedtn {

namespace {

struct SimpsonState {
    const std::function<double(double)>& f;
    const QuadratureOptions& options;
    std::size_t evaluations = 0;
    bool exhausted = false;

    double eval(double x) {
        ++evaluations;
        return f(x);
    }
};

struct Panel {
    double value;
    double error;
};

Panel simpson_recurse(SimpsonState& st, double a, double fa, double b, double fb, double m,
                      double fm, double whole, double tol, int depth) {
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = st.eval(lm);
    const double frm = st.eval(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    const double err = std::abs(delta) / 15.0;

    if (err <= tol) return {left + right + delta / 15.0, err};
    if (depth >= st.options.max_depth || st.evaluations >= st.options.max_evaluations ||
        m - a <= std::numeric_limits<double>::epsilon() * std::abs(a)) {
        st.exhausted = true;
        return {left + right + delta / 15.0, err};
    }
    Panel l = simpson_recurse(st, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth + 1);
    Panel r = simpson_recurse(st, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth + 1);
    return {l.value + r.value, l.error + r.error};
}

}  // namespace

QuadratureResult adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                                  const QuadratureOptions& options) {
    if (!(a <= b)) throw PreconditionError("adaptive_simpson: require a <= b");
    if (a == b) return {};
    SimpsonState st{f, options};
    const double fa = st.eval(a);
    const double fb = st.eval(b);
    const double m = 0.5 * (a + b);
    const double fm = st.eval(m);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    Panel p = simpson_recurse(st, a, fa, b, fb, m, fm, whole, options.abs_tol, 0);
    if (st.exhausted && p.error > options.abs_tol)
        throw ToleranceNotMetError("adaptive Simpson did not reach the requested tolerance", p.value,
                                   p.error);
    return {p.value, p.error, st.evaluations};
}

DerivativeEstimate richardson_derivative(const std::function<double(double)>& f, double t, double h) {
    constexpr int kLevels = 8;
    const bool central = t - h >= 0.0 && t + h <= 1.0;
    const double direction = (t + h <= 1.0) ? 1.0 : -1.0;
    std::array<std::array<double, kLevels>, kLevels> table{};
    DerivativeEstimate best{0.0, std::numeric_limits<double>::infinity()};
    double step = h;
    for (int i = 0; i < kLevels; ++i, step *= 0.5) {
        if (central) {
            table[i][0] = (f(t + step) - f(t - step)) / (2.0 * step);
        } else {
            const double s = direction * step;
            // second-order one-sided difference
            table[i][0] = (-3.0 * f(t) + 4.0 * f(t + s) - f(t + 2.0 * s)) / (2.0 * s);
        }
        // error terms: h^2, h^4, ... (central); h^2, h^3, ... (one-sided)
        double factor = 4.0;
        for (int j = 1; j <= i; ++j) {
            table[i][j] = table[i][j - 1] + (table[i][j - 1] - table[i - 1][j - 1]) / (factor - 1.0);
            factor *= central ? 4.0 : 2.0;
            const double err = std::max(std::abs(table[i][j] - table[i][j - 1]),
                                        std::abs(table[i][j] - table[i - 1][j - 1]));
            if (err < best.error) best = {table[i][j], err};
        }
        if (i > 0 && std::abs(table[i][i] - table[i - 1][i - 1]) > 2.0 * best.error) break;
    }
    if (!std::isfinite(best.error)) best = {table[0][0], std::abs(table[0][0])};
    return best;
}

}  // namespace treedtn
