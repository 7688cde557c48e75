#include "ftarga/error.hpp"
#include "ftarga/oracles.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <sstream>

using namespace ftarga;
using Catch::Matchers::WithinAbs;

namespace {

using Gauss = boost::math::quadrature::gauss<double, 20>;

Region interval(double lo, double hi) { return box_region(Box{{lo}, {hi}}); }

// E T_A for the Bernoulli chain by walking the binary tree of coin flips to
// `depth`; the returned pair is (contribution of resolved branches,
// probability of unresolved ones).
std::pair<double, double> enumerate_hitting(double x, double a_hi, int depth, int steps, double prob) {
    if (x <= a_hi) {
        return {prob * steps, 0.0};
    }
    if (steps == depth) {
        return {0.0, prob};
    }
    auto [e0, r0] = enumerate_hitting(x / 2.0, a_hi, depth, steps + 1, prob / 2.0);
    auto [e1, r1] = enumerate_hitting((x + 1.0) / 2.0, a_hi, depth, steps + 1, prob / 2.0);
    return {e0 + e1, r0 + r1};
}

}  // namespace

TEST_CASE("starting in the target gives exactly zero") {
    const ChainModel chain = bernoulli_convolution_chain();
    const OracleEstimate e = mc_hitting_time(chain, std::vector<double>{0.2}, interval(0.0, 0.5), 50, Rng(1));
    CHECK(e.mean == 0.0);
    CHECK(e.std_error == 0.0);
    CHECK(e.replications == 50);
}

TEST_CASE("fluid network next to the target needs at least one step") {
    const RegionSpec regions = fluid_hitting_regions();
    const ChainModel chain = fluid_network_chain();
    const OracleEstimate e = mc_hitting_time(chain, std::vector<double>{1.05, 1.05}, regions.target, 1000, Rng(3));
    CHECK(e.mean >= 1.0);
    CHECK(e.mean < 5.0);
}

TEST_CASE("bernoulli hitting time matches tree enumeration") {
    const auto [resolved, unresolved] = enumerate_hitting(0.75, 0.5, 12, 0, 1.0);
    // Every unresolved branch sits above 1/2 again, where the remaining time
    // is geometric with mean 2.
    const ChainModel chain = bernoulli_convolution_chain();
    const OracleEstimate e = mc_hitting_time(chain, std::vector<double>{0.75}, interval(0.0, 0.5), 100000, Rng(17));
    const double tail = unresolved * (12.0 + 2.0);
    CHECK(std::abs(e.mean - (resolved + tail)) <= 3.0 * e.std_error + tail);
    CHECK_THAT(resolved + tail, WithinAbs(2.0, 1e-3));
}

TEST_CASE("hitting-time stderr shrinks like one over root n") {
    const RegionSpec regions = fluid_hitting_regions();
    const ChainModel chain = fluid_network_chain();
    const std::vector<double> x{3.0, 2.0};
    const std::size_t ns[] = {1000, 4000, 16000};
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t n : ns) {
        const double lx = std::log(static_cast<double>(n));
        const double ly = std::log(mc_hitting_time(chain, x, regions.target, n, Rng(n)).std_error);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double slope = (3.0 * sxy - sx * sy) / (3.0 * sxx - sx * sx);
    CHECK(std::abs(slope + 0.5) <= 0.1);
}

TEST_CASE("threaded hitting-time estimate equals the sequential one") {
    const RegionSpec regions = fluid_hitting_regions();
    const ChainModel chain = fluid_network_chain();
    const std::vector<double> x{4.0, 4.5};
    const OracleEstimate one = mc_hitting_time(chain, x, regions.target, 3000, Rng(8), kDefaultStepCap, 1);
    const OracleEstimate three = mc_hitting_time(chain, x, regions.target, 3000, Rng(8), kDefaultStepCap, 3);
    CHECK(one.mean == three.mean);
    CHECK(one.std_error == three.std_error);
}

TEST_CASE("unreachable target raises a non-return error") {
    const ChainModel chain = bernoulli_convolution_chain();
    CHECK_THROWS_AS(mc_hitting_time(chain, std::vector<double>{0.5}, interval(2.0, 3.0), 10, Rng(1), 1000),
                    NonReturnError);
}

TEST_CASE("poisson closed forms") {
    CHECK(poisson_exact_bernoulli(PoissonReward::linear, 0.5) == 1.0);
    CHECK_THAT(poisson_exact_bernoulli(PoissonReward::quadratic, 1.0), WithinAbs(2.0, 1e-15));
    CHECK(poisson_exact_bernoulli(PoissonReward::quadratic, 0.0) == 0.0);
}

TEST_CASE("exact poisson solutions solve the two-step equation on every branch average") {
    for (PoissonReward kind : {PoissonReward::linear, PoissonReward::quadratic}) {
        const auto u = [kind](double x) { return poisson_exact_bernoulli(kind, x); };
        const auto r = [kind](double x) { return poisson_reward(kind, x); };
        double worst = 0.0;
        for (int i = 0; i <= 100; ++i) {
            const double x0 = i / 100.0;
            double mean = 0.0;
            for (int z1 = 0; z1 < 2; ++z1) {
                for (int z2 = 0; z2 < 2; ++z2) {
                    const double x1 = (x0 + z1) / 2.0;
                    const double x2 = (x1 + z2) / 2.0;
                    mean += 0.25 * (u(x0) - 2.0 * u(x1) + u(x2) - r(x0) + r(x1));
                }
            }
            worst = std::max(worst, std::abs(mean));
        }
        CHECK(worst <= 1e-14);
    }
}

TEST_CASE("gibbs target density is normalized and positive") {
    const auto f = [](double a, double b) { return gibbs_exact_density(std::vector<double>{a, b}); };
    const double mass = Gauss::integrate(
        [&](double a) { return Gauss::integrate([&](double b) { return f(a, b); }, -1.0, 1.0); }, -1.0, 1.0);
    CHECK_THAT(mass, WithinAbs(1.0, 1e-8));
    // Unnormalized mass 2 (10/3)^2 = 200/9.
    CHECK_THAT(mass * 200.0 / 9.0, WithinAbs(2.0 * (10.0 / 3.0) * (10.0 / 3.0), 1e-8));
    // (9/200) * 2 * 2 * 2 and (1 * 1 * 3) / 8.
    CHECK_THAT(f(0.0, 0.0), WithinAbs(0.36, 1e-15));
    CHECK_THAT(f(1.0, 1.0) / f(0.0, 0.0), WithinAbs(0.375, 1e-15));
    for (int i = 0; i <= 20; ++i) {
        for (int j = 0; j <= 20; ++j) {
            CHECK(f(-1.0 + 0.1 * i, -1.0 + 0.1 * j) > 0.0);
        }
    }
}

TEST_CASE("grid counts and ordering") {
    GridSpec fluid;
    fluid.lo = {0.0, 0.0};
    fluid.hi = {5.0, 5.0};
    fluid.spacing = {0.1, 0.1};
    const Region ac = fluid_hitting_regions().continuation;
    const auto rows = grid_eval([](std::span<const double>) { return 7.0; }, fluid, ac.contains);
    CHECK(rows.size() == 2480);
    for (const auto& row : rows) {
        CHECK(row.value == 7.0);
        CHECK_FALSE((row.x[0] <= 1.0 && row.x[1] <= 1.0));
    }
    CHECK(rows[0].x[0] == 0.0);
    CHECK_THAT(rows[0].x[1], WithinAbs(1.1, 1e-12));
    CHECK(rows[1].x[0] == 0.0);
    CHECK(rows[1].x[1] > rows[0].x[1]);

    GridSpec kw;
    kw.lo = {3.0, 3.0};
    kw.hi = {9.0, 9.0};
    kw.spacing = {0.2, 0.2};
    const auto pts = grid_points(kw, kw_hitting_regions().window->contains);
    CHECK(pts.size() == 31 * 32 / 2);
    for (const auto& p : pts) CHECK(p[0] <= p[1]);
}

TEST_CASE("grid rejects bad specifications") {
    GridSpec g;
    g.lo = {0.0};
    g.hi = {1.0};
    g.spacing = {0.0};
    CHECK_THROWS_AS(g.validate(), InvalidInput);
    g.spacing = {0.5};
    CHECK_THROWS_AS(grid_eval([](std::span<const double>) { return 0.0; }, g,
                              [](std::span<const double>) { return false; }),
                    InvalidInput);
    g.hi = {-1.0};
    CHECK_THROWS_AS(g.validate(), InvalidInput);
}

TEST_CASE("grid csv schema") {
    std::vector<GridRow> rows{{{0.5, 1.0}, 2.25, 0.125}, {{1.0, 1.5}, 1.0 / 3.0, 0.0}};
    std::ostringstream out;
    write_grid_csv(out, rows);
    CHECK(out.str() == "x1,x2,value,stderr\n0.5,1,2.25,0.125\n1,1.5,0.3333333333,0\n");

    std::vector<GridRow> plain{{{0.25}, -1.5, std::nullopt}};
    std::ostringstream out1;
    write_grid_csv(out1, plain);
    CHECK(out1.str() == "x1,value\n0.25,-1.5\n");
}
