#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "treedtn/boundary_data.hpp"
#include "treedtn/dirichlet_solver.hpp"
#include "treedtn/tree_core.hpp"

namespace treedtn {

// Whole-level exact evaluation of u_g. Every value on levels 0..L is written
// as N_x / D with one integer denominator D, so the averaging identity becomes
// an integer identity. Arithmetic runs in overflow-checked 128-bit integers and
// restarts in GMP integers if any operation overflows.

/// Exact data whose breakpoints are all m-adic rationals.
bool level_sweep_supported(const BoundaryDatum& g, TreeConfig config);

struct HarmonicSweepReport {
    std::size_t vertices = 0;       // residuals evaluated (levels 0..depth)
    std::size_t nonzero = 0;        // residuals different from 0
    std::optional<Vertex> first_failure;
    std::size_t cross_checked = 0;  // vertices compared against ExactSolution
    std::size_t cross_mismatches = 0;
    bool wide_arithmetic = false;   // fell back to GMP integers
    bool ok() const { return nonzero == 0 && cross_mismatches == 0; }
};

/// Harmonic residual of u_g at every vertex of levels 0..depth, exactly.
HarmonicSweepReport exact_harmonic_sweep(const BoundaryDatum& g, const BetaParam& beta, TreeConfig config,
                                         std::size_t depth);

struct OrderSweepReport {
    std::size_t vertices = 0;
    std::size_t violation_count = 0;  // u_f > u_g
    std::vector<Vertex> violations;
    std::size_t touching_count = 0;   // u_f == u_g
    std::vector<Vertex> touching;
    std::size_t propagation_failure_count = 0;
    std::vector<Vertex> propagation_failures;
    bool wide_arithmetic = false;
};

/// Compares u_f and u_g at every vertex of levels 0..depth, exactly. A touching
/// vertex above the last level is a propagation failure when its parent or one
/// of its successors is not touching.
OrderSweepReport exact_order_sweep(const BoundaryDatum& f, const BoundaryDatum& g, const BetaParam& beta,
                                   TreeConfig config, std::size_t depth);

}  // namespace treedtn
