#include "ftarga/chains.hpp"

#include "ftarga/error.hpp"

#include <algorithm>
#include <cmath>

namespace ftarga {

namespace {

constexpr double kGibbsDensityBound = 0.9;  // (3/20) * 2 * 3

void check_dim(std::span<const double> x, std::size_t dim, const char* what) {
    if (x.size() != dim) {
        throw InvalidInput(std::string(what) + ": expected a state of dimension " +
                           std::to_string(dim) + ", got " + std::to_string(x.size()));
    }
}

double positive_part(double v) { return v > 0.0 ? v : 0.0; }

}  // namespace

bool Box::contains(std::span<const double> x) const {
    if (x.size() != lo.size()) {
        return false;
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] < lo[i] || x[i] > hi[i]) {
            return false;
        }
    }
    return true;
}

State Box::sample(Rng& rng) const {
    State x(lo.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = rng.uniform(lo[i], hi[i]);
    }
    return x;
}

State Region::sample(Rng& rng, std::uint64_t max_attempts) const {
    if (!bounds) {
        throw InvalidInput("cannot sample from an unbounded region");
    }
    for (std::uint64_t attempt = 0; attempt < max_attempts; ++attempt) {
        State x = bounds->sample(rng);
        if (contains(x)) {
            return x;
        }
    }
    throw SamplerError("region rejection sampler exceeded " + std::to_string(max_attempts) +
                       " attempts");
}

Region box_region(Box box) {
    Region r;
    r.contains = [box](std::span<const double> x) { return box.contains(x); };
    r.bounds = std::move(box);
    return r;
}

Region box_minus(Box outer, Box hole) {
    Region r;
    r.contains = [outer, hole](std::span<const double> x) {
        return outer.contains(x) && !hole.contains(x);
    };
    r.bounds = std::move(outer);
    return r;
}

State sample_first_transition(const ChainModel& chain, std::span<const double> x, Rng& rng) {
    return chain.step(x, rng);
}

PathSegment simulate_segment(const ChainModel& chain, std::span<const double> x,
                             const RegionSpec& regions, Rng& rng, std::uint64_t step_cap) {
    if (!regions.window) {
        throw InvalidInput("simulate_segment requires a training window");
    }
    const Region& window = *regions.window;

    PathSegment seg;
    State current(x.begin(), x.end());
    double discount = 1.0;
    for (std::uint64_t n = 1; n <= step_cap; ++n) {
        seg.reward += discount * chain.reward(current);
        discount *= std::exp(-chain.discount(current));
        State next = chain.step(current, rng);
        if (regions.target.contains(next)) {
            seg.reward += discount * chain.reward(next);
            seg.weight = 0.0;
            seg.steps = n;
            seg.terminal = std::move(next);
            seg.ended_in_target = true;
            return seg;
        }
        if (window.contains(next)) {
            seg.weight = discount;
            seg.steps = n;
            seg.terminal = std::move(next);
            return seg;
        }
        current = std::move(next);
    }
    throw NonReturnError(step_cap, "path segment did not return to the window or reach the target");
}

// --- fluid network ----------------------------------------------------------

State fluid_apply(std::span<const double> x, double interarrival, double z1, double z2,
                  const FluidNetworkParams& p) {
    check_dim(x, 2, "fluid_apply");
    if (interarrival < 0.0 || z1 < 0.0 || z2 < 0.0) {
        throw InvalidInput("fluid_apply: interarrival time and arrivals must be non-negative");
    }
    const double busy = std::min(x[0] / p.service_rate1, interarrival);
    const double net_rate2 = p.routing12 * p.service_rate1 - p.service_rate2;
    double w2 = positive_part(x[1] + net_rate2 * busy);
    w2 = positive_part(w2 - p.service_rate2 * (interarrival - busy));
    const double w1 = positive_part(x[0] - p.service_rate1 * interarrival);
    return {std::min(w1 + z1, p.capacity), std::min(w2 + z2, p.capacity)};
}

bool fluid_is_stable(const FluidNetworkParams& p) {
    const double mean_t = p.interarrival_max / 2.0;
    const double mean_z1 = p.arrival1_max / 2.0;
    const double mean_z2 = p.arrival2_max / 2.0;
    return mean_z1 < p.service_rate1 * mean_t &&
           p.routing12 * mean_z1 + mean_z2 < p.service_rate2 * mean_t;
}

ChainModel fluid_network_chain(const FluidNetworkParams& p) {
    ChainModel c;
    c.name = "fluid-network";
    c.dim = 2;
    c.step = [p](std::span<const double> x, Rng& rng) {
        const double t = rng.uniform(0.0, p.interarrival_max);
        const double z1 = rng.uniform(0.0, p.arrival1_max);
        const double z2 = rng.uniform(0.0, p.arrival2_max);
        return fluid_apply(x, t, z1, z2, p);
    };
    const Box space{{0.0, 0.0}, {p.capacity, p.capacity}};
    c.in_state_space = [space](std::span<const double> x) { return space.contains(x); };
    c.reward = [](std::span<const double>) { return 0.0; };
    c.discount = [](std::span<const double>) { return 0.0; };
    return c;
}

// --- Kiefer-Wolfowitz ------------------------------------------------------

State kw_apply(std::span<const double> w, double interarrival, double service) {
    check_dim(w, 2, "kw_apply");
    if (w[0] < 0.0 || w[0] > w[1]) {
        throw InvalidInput("kw_apply: workload must satisfy 0 <= w_min <= w_max");
    }
    if (interarrival < 0.0 || service < 0.0) {
        throw InvalidInput("kw_apply: interarrival and service times must be non-negative");
    }
    const double first = positive_part(w[0] - interarrival) + service;
    const double second = positive_part(w[1] - interarrival);
    return {std::min(first, second), std::max(first, second)};
}

ChainModel kiefer_wolfowitz_chain(const KieferWolfowitzParams& p) {
    ChainModel c;
    c.name = "kiefer-wolfowitz";
    c.dim = 2;
    c.step = [p](std::span<const double> w, Rng& rng) {
        const double a = rng.uniform(0.0, p.interarrival_max);
        const double s = rng.uniform(0.0, p.service_max);
        return kw_apply(w, a, s);
    };
    c.in_state_space = [](std::span<const double> x) {
        return x.size() == 2 && x[0] >= 0.0 && x[0] <= x[1];
    };
    c.reward = [](std::span<const double>) { return 0.0; };
    c.discount = [](std::span<const double>) { return 0.0; };
    return c;
}

// --- Bernoulli convolution ---------------------------------------------------

double bernoulli_step(double x, int z) {
    if (!(x >= 0.0 && x <= 1.0) || (z != 0 && z != 1)) {
        throw InvalidInput("bernoulli_step: need x in [0,1] and z in {0,1}");
    }
    return (x + z) / 2.0;
}

ChainModel bernoulli_convolution_chain() {
    ChainModel c;
    c.name = "bernoulli-convolution";
    c.dim = 1;
    c.step = [](std::span<const double> x, Rng& rng) {
        check_dim(x, 1, "bernoulli chain");
        return State{bernoulli_step(x[0], rng.bit())};
    };
    c.in_state_space = [](std::span<const double> x) {
        return x.size() == 1 && x[0] >= 0.0 && x[0] <= 1.0;
    };
    c.reward = [](std::span<const double>) { return 0.0; };
    c.discount = [](std::span<const double>) { return 0.0; };
    return c;
}

// --- Gibbs sampler ---------------------------------------------------------

double gibbs_conditional_density(double y, double other) {
    if (y < -1.0 || y > 1.0) {
        return 0.0;
    }
    return 0.15 * (2.0 - y * y) * (2.0 + y * other);
}

double sample_gibbs_conditional(double other, Rng& rng, std::uint64_t max_attempts) {
    for (std::uint64_t attempt = 0; attempt < max_attempts; ++attempt) {
        const double y = rng.uniform(-1.0, 1.0);
        const double u = rng.uniform();
        if (u * kGibbsDensityBound <= gibbs_conditional_density(y, other)) {
            return y;
        }
    }
    throw SamplerError("Gibbs conditional sampler exceeded " + std::to_string(max_attempts) +
                       " attempts");
}

State gibbs_step(std::span<const double> x, Rng& rng) {
    check_dim(x, 2, "gibbs_step");
    const double y1 = sample_gibbs_conditional(x[1], rng);
    const double y2 = sample_gibbs_conditional(y1, rng);
    return {y1, y2};
}

double gibbs_transition_density(std::span<const double> x, std::span<const double> y) {
    check_dim(x, 2, "gibbs_transition_density");
    check_dim(y, 2, "gibbs_transition_density");
    return gibbs_conditional_density(y[0], x[1]) * gibbs_conditional_density(y[1], y[0]);
}

double gibbs_transition_density_eta(std::span<const double> x, std::span<const double> y) {
    return 4.0 * gibbs_transition_density(x, y);
}

State sample_gibbs_stationary(Rng& rng) {
    // Marginal of x1 is 0.3 (2 - t^2) on [-1, 1] (the odd cross term integrates out).
    const double target = rng.uniform();
    auto cdf = [](double t) { return 0.3 * (2.0 * (t + 1.0) - (t * t * t + 1.0) / 3.0); };
    double lo = -1.0;
    double hi = 1.0;
    for (int i = 0; i < 64; ++i) {
        const double mid = 0.5 * (lo + hi);
        (cdf(mid) < target ? lo : hi) = mid;
    }
    const double x1 = 0.5 * (lo + hi);
    return {x1, sample_gibbs_conditional(x1, rng)};
}

ChainModel gibbs_chain() {
    ChainModel c;
    c.name = "gibbs-sampler";
    c.dim = 2;
    c.step = [](std::span<const double> x, Rng& rng) { return gibbs_step(x, rng); };
    const Box square{{-1.0, -1.0}, {1.0, 1.0}};
    c.in_state_space = [square](std::span<const double> x) { return square.contains(x); };
    c.reward = [](std::span<const double>) { return 0.0; };
    c.discount = [](std::span<const double>) { return 0.0; };
    c.density = [](std::span<const double> from, std::span<const double> to) {
        return gibbs_transition_density_eta(from, to);
    };
    c.sample_reference = [square](Rng& rng) { return square.sample(rng); };
    return c;
}

// --- problem set-ups ---------------------------------------------------------

ChainModel with_hitting_time_reward(ChainModel chain, const Region& target) {
    chain.reward = [contains = target.contains](std::span<const double> x) {
        return contains(x) ? 0.0 : 1.0;
    };
    chain.discount = [](std::span<const double>) { return 0.0; };
    return chain;
}

RegionSpec fluid_hitting_regions(const FluidNetworkParams& p) {
    const Box space{{0.0, 0.0}, {p.capacity, p.capacity}};
    const Box target{{0.0, 0.0}, {1.0, 1.0}};
    RegionSpec spec;
    spec.target = box_region(target);
    spec.continuation = box_minus(space, target);
    spec.sampling = spec.continuation;
    return spec;
}

RegionSpec kw_hitting_regions() {
    RegionSpec spec;
    spec.target.contains = [](std::span<const double> x) {
        return x[0] >= 0.0 && x[0] <= x[1] && x[1] <= 3.0;
    };
    spec.target.bounds = Box{{0.0, 0.0}, {3.0, 3.0}};
    spec.continuation.contains = [](std::span<const double> x) {
        return x[0] >= 0.0 && x[0] <= x[1] && x[1] > 3.0;
    };
    Region window;
    window.contains = [](std::span<const double> x) {
        return x[0] >= 3.0 && x[0] <= x[1] && x[1] <= 9.0;
    };
    window.bounds = Box{{3.0, 3.0}, {9.0, 9.0}};
    spec.window = window;
    spec.sampling = window;
    return spec;
}

}  // namespace ftarga
