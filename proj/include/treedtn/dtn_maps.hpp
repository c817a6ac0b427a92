#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "treedtn/boundary_data.hpp"
#include "treedtn/dirichlet_solver.hpp"
#include "treedtn/tree_core.hpp"

namespace treedtn {

/// grad u(x) = (u(x,0) - u(x), ..., u(x,m-1) - u(x)).
template <class T>
std::vector<T> gradient(const Solution<T>& u, const Vertex& x) {
    const T ux = u.value(x);
    std::vector<T> out;
    out.reserve(static_cast<std::size_t>(x.m()));
    for (const auto& y : x.successors()) out.push_back(u.value(y) - ux);
    return out;
}

/// ((1-m)/2m, (3-m)/2m, ..., (m-1)/2m).
std::vector<Rational> omega(int m);
/// (0, 1, ..., m-1).
std::vector<Rational> varpi(int m);

Rational dot(const std::vector<Rational>& a, const std::vector<Rational>& b);

class NormalVector {
public:
    explicit NormalVector(std::vector<Rational> eta);
    /// "-1,1" or "(-1,1)"; components may be fractions or decimals.
    static NormalVector parse(std::string_view text);
    /// The i-th standard basis vector of R^m.
    static NormalVector basis(int m, int i);

    const std::vector<Rational>& components() const noexcept { return eta_; }
    int m() const noexcept { return static_cast<int>(eta_.size()); }
    bool zero_sum() const noexcept { return zero_sum_; }
    std::string to_string() const;

private:
    std::vector<Rational> eta_;
    bool zero_sum_;
};

struct ClosedForm {
    double value = 0.0;
    double error = 0.0;
    std::optional<Rational> exact;
};

/// g'(t) <eta, omega_m> at beta = 0; (1-2 beta)/(m(1-beta)) g'(t) <eta, varpi_m>
/// for 0 < beta < 1/2 and sum eta = 0. Other cases raise HypothesisViolationError.
ClosedForm lambda_closed_form(const BoundaryDatum& g, const BetaParam& beta, const NormalVector& eta,
                              const Rational& t);

struct DtnEstimate {
    std::size_t k = 0;
    double value = 0.0;
    std::optional<Rational> exact;
    std::optional<double> target;
    std::optional<Rational> target_exact;
    std::optional<double> gap;
    std::optional<double> ratio;  // previous gap / this gap, filled by sweeps
    // Gamma only: prelimit = (1-p)(bulk + J1 + J2)
    std::optional<double> bulk, j1, j2;
    std::optional<Rational> bulk_exact, j1_exact, j2_exact;
    std::optional<double> tail;  // error bound of the kernel-quadrature target
    bool converges = true;
    std::string status = "ok";
};

/// m^{|x_k|} <grad u_g(x_k), eta>, with the closed form at psi(pi) as target
/// when one applies.
DtnEstimate lambda_estimate(const BoundaryDatum& g, const BetaParam& beta, const NormalVector& eta,
                            const Branch& pi, std::size_t k, const QuadratureOptions& options = {});

struct DtnSweep {
    std::vector<DtnEstimate> rows;
    /// Least-squares slope of ln(gap) against k over rows with gap > 0.
    std::optional<double> slope;
};

DtnSweep lambda_sweep(const BoundaryDatum& g, const BetaParam& beta, const NormalVector& eta, const Branch& pi,
                      const std::vector<std::size_t>& depths, const QuadratureOptions& options = {});

/// Least-squares slope of ln(y) against x, using points with y > 0. nullopt
/// with fewer than two such points.
std::optional<double> fit_log_slope(const std::vector<double>& x, const std::vector<double>& y);

// ---------------------------------------------------------------------------
// The nonlocal map and its kernels.

/// c = m(1-p)/(m-p), the kernel jump constant.
Rational kernel_constant(int m, const Rational& p);

/// K_m^j(x,t) from m^{-|x|}K = (p/m)^{|x|} + (1-p) sum_{i<|x|} (p/m)^i chi_{I_{x^{-i}}}(t) - m chi_{I_{(x,j)}}(t).
Rational kernel_Kj(const Vertex& x, Digit j, const Rational& t, const BetaParam& beta);
/// The same kernel from its case form in n(x,t).
Rational kernel_Kj_cases(const Vertex& x, Digit j, const Rational& t, const BetaParam& beta);

/// A region I_outer minus I_inner on which K_m^j(x, .) is constant.
struct KernelPiece {
    Vertex outer;
    std::optional<Vertex> inner;
    Rational value;
};

std::vector<KernelPiece> kernel_pieces(const Vertex& x, Digit j, const BetaParam& beta);
/// Exact integral of K_m^j(x,t) g(t) over [0,1].
Rational kernel_integral(const Vertex& x, Digit j, const BetaParam& beta, const BoundaryDatum& g);

/// K(pi,t) = 1 + c((m/p)^{N(psi(pi),t)} - 1) chi_{I_{pi,1}}(t), for 1/(m+1) < beta < 1/2.
Rational kernel_limit(const Branch& pi, const Rational& t, const BetaParam& beta);

struct KernelProfileRow {
    Rational t;
    std::optional<std::size_t> N;  // nullopt outside I_{pi,1}
    Rational value;
};
/// Kernel values on a grid; the singular point psi(pi) is skipped.
std::vector<KernelProfileRow> kernel_profile(const Branch& pi, const BetaParam& beta,
                                             const std::vector<Rational>& grid);

struct KernelQuadrature {
    double value = 0.0;
    std::optional<Rational> exact;  // annuli 1..K, exact data only
    double tail_bound = 0.0;        // rigorous bound on the annuli beyond K
    double nominal_tail = 0.0;      // C (pm)^{-K} ||g'|| with C = m(1-p)/(m-p)(1 + 1/m)
    double quadrature_error = 0.0;
    double error() const { return tail_bound + quadrature_error; }
    std::size_t truncation = 0;
};

/// (1-p) int K(pi,t)(g(psi pi) - g(t)) dt over [0,1] minus I_{pi,1} and the annuli
/// I_{pi,n} minus I_{pi,n+1}, n = 1..K, plus a tail bound.
KernelQuadrature gamma_kernel_quadrature(const BoundaryDatum& g, const BetaParam& beta, const Branch& pi,
                                         std::size_t truncation, const QuadratureOptions& options = {});

/// p^{-k}(u(x_{k+1}) - u(x_k)) for k >= 1 with the bulk, J1 and J2 terms. When
/// pm > 1 the target is the kernel quadrature truncated at `truncation`
/// (default k); otherwise the estimate is flagged as non-convergent.
DtnEstimate gamma_estimate(const BoundaryDatum& g, const BetaParam& beta, const Branch& pi, std::size_t k,
                           const QuadratureOptions& options = {},
                           std::optional<std::size_t> truncation = std::nullopt);

/// Targets use the deepest requested k as truncation.
DtnSweep gamma_sweep(const BoundaryDatum& g, const BetaParam& beta, const Branch& pi,
                     const std::vector<std::size_t>& depths, const QuadratureOptions& options = {});

}  // namespace treedtn
