#include "ftarga/oracles.hpp"

#include "ftarga/csv.hpp"
#include "ftarga/error.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <ostream>
#include <thread>

namespace ftarga {

namespace {

std::uint64_t hitting_time(const ChainModel& chain, std::span<const double> x, const Region& target,
                           Rng rng, std::uint64_t step_cap) {
    if (target.contains(x)) {
        return 0;
    }
    State current(x.begin(), x.end());
    for (std::uint64_t n = 1; n <= step_cap; ++n) {
        current = chain.step(current, rng);
        if (target.contains(current)) {
            return n;
        }
    }
    throw NonReturnError(step_cap, "chain " + chain.name + " did not hit the target set");
}

}  // namespace

OracleEstimate mc_hitting_time(const ChainModel& chain, std::span<const double> x,
                               const Region& target, std::size_t n, const Rng& rng,
                               std::uint64_t step_cap, unsigned threads) {
    if (n == 0) {
        throw InvalidInput("mc_hitting_time needs at least one replication");
    }
    if (target.contains(x)) {
        return {0.0, 0.0, n};
    }
    std::vector<double> times(n);
    auto run_range = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            times[i] = static_cast<double>(hitting_time(chain, x, target, rng.split(i), step_cap));
        }
    };

    threads = std::max(1u, threads);
    if (threads == 1 || n < 2 * threads) {
        run_range(0, n);
    } else {
        std::vector<std::exception_ptr> errors(threads);
        std::vector<std::jthread> workers;
        const std::size_t chunk = (n + threads - 1) / threads;
        for (unsigned w = 0; w < threads; ++w) {
            const std::size_t begin = std::min(n, w * chunk);
            const std::size_t end = std::min(n, begin + chunk);
            workers.emplace_back([&, w, begin, end] {
                try {
                    run_range(begin, end);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        workers.clear();
        for (const auto& e : errors) {
            if (e) {
                std::rethrow_exception(e);
            }
        }
    }

    double sum = 0.0;
    for (double t : times) {
        sum += t;
    }
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (double t : times) {
        ss += (t - mean) * (t - mean);
    }
    const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    return {mean, sd / std::sqrt(static_cast<double>(n)), n};
}

double poisson_exact_bernoulli(PoissonReward kind, double x) {
    if (kind == PoissonReward::linear) {
        return 2.0 * x;
    }
    return (4.0 / 3.0) * x * x + (2.0 / 3.0) * x;
}

double poisson_reward(PoissonReward kind, double x) {
    return kind == PoissonReward::linear ? x : x * x;
}

double gibbs_exact_density(std::span<const double> x) {
    if (x.size() != 2) {
        throw InvalidInput("gibbs_exact_density expects a 2-dimensional point");
    }
    return 0.045 * (2.0 - x[0] * x[0]) * (2.0 - x[1] * x[1]) * (2.0 + x[0] * x[1]);
}

void GridSpec::validate() const {
    if (lo.empty() || lo.size() != hi.size() || lo.size() != spacing.size()) {
        throw InvalidInput("grid bounds and spacing must have the same positive dimension");
    }
    for (std::size_t i = 0; i < lo.size(); ++i) {
        if (!(spacing[i] > 0.0) || !std::isfinite(spacing[i])) {
            throw InvalidInput("grid spacing must be positive");
        }
        if (!(hi[i] >= lo[i]) || !std::isfinite(lo[i]) || !std::isfinite(hi[i])) {
            throw InvalidInput("grid extent must be finite with hi >= lo");
        }
    }
}

std::vector<State> GridSpec::points() const {
    validate();
    const std::size_t d = lo.size();
    std::vector<std::size_t> counts(d);
    for (std::size_t i = 0; i < d; ++i) {
        counts[i] = static_cast<std::size_t>(std::llround((hi[i] - lo[i]) / spacing[i])) + 1;
    }
    std::vector<State> out;
    std::vector<std::size_t> idx(d, 0);
    while (true) {
        State x(d);
        for (std::size_t i = 0; i < d; ++i) {
            x[i] = lo[i] + static_cast<double>(idx[i]) * spacing[i];
        }
        out.push_back(std::move(x));
        std::size_t k = d;
        while (k > 0) {
            --k;
            if (++idx[k] < counts[k]) {
                break;
            }
            idx[k] = 0;
            if (k == 0) {
                return out;
            }
        }
    }
}

std::vector<State> grid_points(const GridSpec& grid, const StatePredicate& filter) {
    std::vector<State> pts = grid.points();
    if (filter) {
        std::erase_if(pts, [&](const State& x) { return !filter(x); });
    }
    if (pts.empty()) {
        throw InvalidInput("grid has no points inside the region");
    }
    return pts;
}

std::vector<GridRow> grid_eval(const ScalarField& f, const GridSpec& grid,
                               const StatePredicate& filter) {
    std::vector<GridRow> rows;
    for (State& x : grid_points(grid, filter)) {
        const double v = f(x);
        rows.push_back({std::move(x), v, std::nullopt});
    }
    return rows;
}

void write_grid_csv(std::ostream& out, std::span<const GridRow> rows) {
    if (rows.empty()) {
        throw InvalidInput("refusing to write an empty grid");
    }
    const std::size_t d = rows.front().x.size();
    const bool with_error = rows.front().std_error.has_value();
    for (std::size_t i = 0; i < d; ++i) {
        out << 'x' << (i + 1) << ',';
    }
    out << "value" << (with_error ? ",stderr" : "") << '\n';
    for (const auto& row : rows) {
        for (double c : row.x) {
            out << format_number(c) << ',';
        }
        out << format_number(row.value);
        if (with_error) {
            out << ',' << format_number(row.std_error.value_or(0.0));
        }
        out << '\n';
    }
}

}  // namespace ftarga
