#pragma once

#include "ftarga/chains.hpp"
#include "ftarga/rng.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace ftarga {

inline constexpr std::uint64_t kDefaultStepCap = 10'000'000;

struct OracleEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t replications = 0;
};

/// Monte Carlo estimate of E_x T_A, T_A = inf{n >= 0 : X_n in A}.
///
/// Replication i uses rng.split(i), so the result does not depend on
/// `threads` except through floating-point reduction, which is done in
/// replication order. Throws NonReturnError if a replication does not hit A
/// within `step_cap` steps.
[[nodiscard]] OracleEstimate mc_hitting_time(const ChainModel& chain, std::span<const double> x,
                                             const Region& target, std::size_t n, const Rng& rng,
                                             std::uint64_t step_cap = kDefaultStepCap,
                                             unsigned threads = 1);

enum class PoissonReward { linear, quadratic };

/// Closed-form Poisson solutions for the Bernoulli convolution (up to an
/// additive constant): 2x for r(x) = x, (4/3)x^2 + (2/3)x for r(x) = x^2.
[[nodiscard]] double poisson_exact_bernoulli(PoissonReward kind, double x);
[[nodiscard]] double poisson_reward(PoissonReward kind, double x);

/// Normalized target of the Gibbs sampler (Lebesgue reference):
/// (9/200)(2 - x1^2)(2 - x2^2)(2 + x1 x2).
[[nodiscard]] double gibbs_exact_density(std::span<const double> x);

/// Regular lattice lo + i * spacing, i = 0..round((hi - lo) / spacing).
struct GridSpec {
    std::vector<double> lo;
    std::vector<double> hi;
    std::vector<double> spacing;

    /// Throws InvalidInput on non-positive spacing, hi < lo or mismatched sizes.
    void validate() const;
    [[nodiscard]] std::vector<State> points() const;
};

struct GridRow {
    State x;
    double value = 0.0;
    std::optional<double> std_error;
};

/// Row per lattice point passing `filter` (all points if the filter is
/// empty), in lexicographic order with the last coordinate varying fastest.
/// Throws InvalidInput if no point survives.
[[nodiscard]] std::vector<GridRow> grid_eval(const ScalarField& f, const GridSpec& grid,
                                             const StatePredicate& filter = {});

/// Lattice points passing `filter`, same order as grid_eval.
[[nodiscard]] std::vector<State> grid_points(const GridSpec& grid, const StatePredicate& filter = {});

/// Header `x1[,x2...],value[,stderr]`, numbers as %.10g. The stderr column
/// is written when the first row carries one.
void write_grid_csv(std::ostream& out, std::span<const GridRow> rows);

}  // namespace ftarga
