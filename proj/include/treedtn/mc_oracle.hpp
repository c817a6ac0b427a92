#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>

#include "treedtn/boundary_data.hpp"
#include "treedtn/dirichlet_solver.hpp"
#include "treedtn/tree_core.hpp"

namespace treedtn {

/// Biased walk on T_m: from the root to a uniform successor, elsewhere to the
/// parent with probability beta and to each successor with probability (1-beta)/m.
struct WalkConfig {
    BetaParam beta{Rational(0)};
    TreeConfig config{2};
    std::size_t max_depth = 30;  // walks stop on reaching this level
    std::size_t samples = 100000;
    std::uint64_t seed = 1;

    /// Throws PreconditionError unless 0 <= beta < 1/2, D >= 1 and N >= 1.
    void validate() const;
};

using WalkRng = std::mt19937_64;

Vertex walk_step(const Vertex& current, double beta, WalkRng& rng);

struct WalkEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    /// Bound on |E g(psi(X_tau)) - u(x)| from stopping at level D.
    double bias_bound = 0.0;
    std::size_t samples = 0;
    std::size_t depth = 0;
    std::uint64_t seed = 0;
    double mean_steps = 0.0;

    /// {"mean", "stderr", "bias_bound", "N", "D", "seed"}
    std::string to_json() const;
};

/// Sample i uses its own generator seeded with seed + i; the reduction order is
/// fixed, so the result does not depend on the thread count.
WalkEstimate estimate_u(const BoundaryDatum& g, const WalkConfig& cfg, const Vertex& x);

/// L (p^D + (1-p) m^{-D} sum_{j<D} (pm)^j) for Lipschitz g, the oscillation of g otherwise.
double truncation_bias_bound(const BoundaryDatum& g, const BetaParam& beta, TreeConfig config,
                             std::size_t depth);

}  // namespace treedtn
