#pragma once

#include "ftarga/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ftarga {

using State = std::vector<double>;
using StatePredicate = std::function<bool(std::span<const double>)>;
using ScalarField = std::function<double(std::span<const double>)>;

/// Axis-aligned box [lo, hi].
struct Box {
    State lo;
    State hi;

    [[nodiscard]] std::size_t dim() const noexcept { return lo.size(); }
    [[nodiscard]] bool contains(std::span<const double> x) const;
    [[nodiscard]] State sample(Rng& rng) const;
};

/// A set given by a deterministic membership predicate. `bounds`, when
/// present, encloses the set and makes it samplable by rejection.
struct Region {
    StatePredicate contains;
    std::optional<Box> bounds;

    /// Uniform draw from the region: uniform in `bounds`, rejected until
    /// `contains` holds. Throws SamplerError after `max_attempts` rejections
    /// and InvalidInput if the region has no bounds.
    [[nodiscard]] State sample(Rng& rng, std::uint64_t max_attempts = 1'000'000) const;
};

[[nodiscard]] Region box_region(Box box);
/// Points of `outer` that are not in `hole`.
[[nodiscard]] Region box_minus(Box outer, Box hole);

/// Sets that define a first-transition problem.
///
///   target     A, where the chain stops (u = r there)
///   continuation C, normally the complement of A in the state space
///   window     K inside C, used by the non-compact algorithm
///   sampling   nu, the distribution of anchor states
struct RegionSpec {
    Region target;
    Region continuation;
    std::optional<Region> window;
    Region sampling;
};

/// Time-homogeneous Markov chain on a subset of R^d plus the reward r and
/// discount beta of the functional being solved for. The transition density
/// and reference sampler are only set for chains with a known kernel
/// density p(x, y) with respect to a probability measure eta.
struct ChainModel {
    std::string name;
    std::size_t dim = 0;
    std::function<State(std::span<const double>, Rng&)> step;
    StatePredicate in_state_space;
    ScalarField reward;
    ScalarField discount;
    std::function<double(std::span<const double> from, std::span<const double> to)> density;
    std::function<State(Rng&)> sample_reference;

    [[nodiscard]] bool has_density() const noexcept {
        return static_cast<bool>(density) && static_cast<bool>(sample_reference);
    }
};

/// One draw from P(x, .).
[[nodiscard]] State sample_first_transition(const ChainModel& chain, std::span<const double> x,
                                            Rng& rng);

/// Return-time path summary used by the non-compact algorithm.
///
/// tau is the first n >= 1 with X_n in K or A. With D_n the discount product
/// exp(-sum_{j<n} beta(X_j)):
///   reward = sum_{k<tau} D_k r(X_k)  (+ D_tau r(X_tau) if X_tau is in A)
///   weight = D_tau if X_tau is in K, else 0.
struct PathSegment {
    double reward = 0.0;
    double weight = 0.0;
    std::uint64_t steps = 0;
    State terminal;
    bool ended_in_target = false;
};

/// Simulates from x until the first return to the window or entry into the
/// target. Throws NonReturnError if neither happens within `step_cap` steps,
/// InvalidInput if the spec has no window.
[[nodiscard]] PathSegment simulate_segment(const ChainModel& chain, std::span<const double> x,
                                           const RegionSpec& regions, Rng& rng,
                                           std::uint64_t step_cap);

// ---------------------------------------------------------------------------
// Two-station stochastic fluid network with finite buffers.
// ---------------------------------------------------------------------------

struct FluidNetworkParams {
    double capacity = 5.0;
    double service_rate1 = 1.0;
    double service_rate2 = 1.0;
    double routing12 = 0.4;
    double interarrival_max = 2.0;
    double arrival1_max = 1.0;
    double arrival2_max = 1.2;
};

/// Workload after one interarrival period of length `interarrival` followed
/// by arrivals (z1, z2).
///
/// Station 1 drains at service_rate1 for b = min(x1 / service_rate1, T).
/// While station 1 is busy station 2 gains routing12 * service_rate1 and
/// loses service_rate2; afterwards it only drains. Workloads are floored at
/// 0, and each buffer is capped after the arrivals are added (overflow
/// leaves the system).
[[nodiscard]] State fluid_apply(std::span<const double> x, double interarrival, double z1,
                                double z2, const FluidNetworkParams& p = {});

/// Mean-drift stability check for the uncapped network.
[[nodiscard]] bool fluid_is_stable(const FluidNetworkParams& p = {});

/// Draw order per step: interarrival, arrival 1, arrival 2 (all uniform).
[[nodiscard]] ChainModel fluid_network_chain(const FluidNetworkParams& p = {});

// ---------------------------------------------------------------------------
// G/G/2 queue via the Kiefer-Wolfowitz workload vector (w_min, w_max).
// ---------------------------------------------------------------------------

struct KieferWolfowitzParams {
    double interarrival_max = 2.0 / 0.6;
    double service_max = 2.0 / 0.5;
};

[[nodiscard]] State kw_apply(std::span<const double> w, double interarrival, double service);

/// Draw order per step: interarrival, then service time.
[[nodiscard]] ChainModel kiefer_wolfowitz_chain(const KieferWolfowitzParams& p = {});

// ---------------------------------------------------------------------------
// Bernoulli convolution X' = (X + Z) / 2, Z ~ Bernoulli(1/2).
// ---------------------------------------------------------------------------

[[nodiscard]] double bernoulli_step(double x, int z);
[[nodiscard]] ChainModel bernoulli_convolution_chain();

// ---------------------------------------------------------------------------
// Fixed-scan Gibbs sampler for pi(x) ~ (2 - x1^2)(2 - x2^2)(2 + x1 x2) on
// [-1, 1]^2.
// ---------------------------------------------------------------------------

/// pi(y | other) = (3/20)(2 - y^2)(2 + y * other), a density on [-1, 1].
[[nodiscard]] double gibbs_conditional_density(double y, double other);

/// Rejection sampler for gibbs_conditional_density; throws SamplerError
/// after `max_attempts` rejections.
[[nodiscard]] double sample_gibbs_conditional(double other, Rng& rng,
                                              std::uint64_t max_attempts = 1'000'000);

[[nodiscard]] State gibbs_step(std::span<const double> x, Rng& rng);

/// p(x, y) = pi(y1 | x2) pi(y2 | y1) with respect to Lebesgue measure.
[[nodiscard]] double gibbs_transition_density(std::span<const double> x,
                                              std::span<const double> y);

/// The same kernel density with respect to eta = Uniform([-1, 1]^2).
[[nodiscard]] double gibbs_transition_density_eta(std::span<const double> x,
                                                  std::span<const double> y);

/// Exact draw from the target: x1 from its marginal (inverse CDF by
/// bisection), then x2 from pi(. | x1).
[[nodiscard]] State sample_gibbs_stationary(Rng& rng);

/// Chain with density and eta-sampler set.
[[nodiscard]] ChainModel gibbs_chain();

// ---------------------------------------------------------------------------
// Problem set-ups.
// ---------------------------------------------------------------------------

/// Sets r = 1 off the target and 0 on it, beta = 0: the solution of the
/// first-transition equation is then E_x T_A.
[[nodiscard]] ChainModel with_hitting_time_reward(ChainModel chain, const Region& target);

/// Fluid network: A = [0,1]^2, C = [0,5]^2 \ A, nu uniform on C.
[[nodiscard]] RegionSpec fluid_hitting_regions(const FluidNetworkParams& p = {});

/// G/G/2: A = {0 <= x1 <= x2 <= 3}, C = state space \ A,
/// K = {3 <= x1 <= x2 <= 9}, nu uniform on K.
[[nodiscard]] RegionSpec kw_hitting_regions();

}  // namespace ftarga
