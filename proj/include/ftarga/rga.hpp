#pragma once

#include "ftarga/chains.hpp"
#include "ftarga/neural.hpp"
#include "ftarga/rng.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

namespace ftarga {

enum class OptimizerKind { sgd, adam };
enum class GradientVariant {
    /// 2 * R_forward * grad R_mirror.
    one_sided,
    /// R_forward * grad R_mirror + R_mirror * grad R_forward.
    symmetric,
};

struct TrainConfig {
    std::uint64_t iterations = 200'000;
    double step_size = 1e-3;
    std::size_t batch_size = 1;
    std::uint64_t seed = 0;
    /// A loss estimate is logged every `log_period` iterations and at the end.
    std::uint64_t log_period = 10'000;
    std::size_t loss_samples = 2'000;
    OptimizerKind optimizer = OptimizerKind::adam;
    /// beta1, beta2, epsilon; the step size is taken from `step_size`.
    AdamHyper adam{};
    GradientVariant variant = GradientVariant::one_sided;
    /// Per-segment cap for the non-compact algorithm.
    std::uint64_t step_cap = 10'000'000;

    void validate() const;
};

/// One term c * f(point) of a residual.
struct ResidualTerm {
    State point;
    double coefficient = 0.0;
};

/// residual = f(anchor) + sum_i c_i f(point_i) - offset
struct ResidualBranch {
    std::vector<ResidualTerm> terms;
    double offset = 0.0;
};

/// An anchor state with two conditionally independent residual branches.
/// The forward and mirror draws come from disjoint rng streams.
struct ResidualSample {
    State anchor;
    ResidualBranch forward;
    ResidualBranch mirror;
};

/// A fixed-point equation whose squared residual, integrated against nu,
/// is minimized. Implementations only describe how to draw samples.
class ResidualProblem {
public:
    virtual ~ResidualProblem() = default;

    [[nodiscard]] virtual std::string_view name() const = 0;
    [[nodiscard]] virtual std::size_t input_dim() const = 0;
    [[nodiscard]] virtual ResidualSample draw(Rng& anchor, Rng& forward, Rng& mirror) const = 0;
    /// True if the trained function is x -> u(x) - u(0) + 1 rather than u.
    [[nodiscard]] virtual bool pinned() const { return false; }
};

/// u = g + Hu on C, with X0 ~ nu and two independent first transitions.
///   residual = u(X0) - Gamma(X0, X1) - exp(-beta(X0)) u(X1) 1{X1 in C}
class FtaProblem final : public ResidualProblem {
public:
    FtaProblem(ChainModel chain, RegionSpec regions);
    std::string_view name() const override { return "fta"; }
    std::size_t input_dim() const override { return chain_.dim; }
    ResidualSample draw(Rng& anchor, Rng& forward, Rng& mirror) const override;

private:
    ResidualBranch branch(const State& x0, Rng& rng) const;
    ChainModel chain_;
    RegionSpec regions_;
};

/// u - 2Pu + P^2 u = r - Pr, with two independent two-step paths.
///   residual = u(X0) - 2u(X1) + u(X2) - r(X0) + r(X1)
class PoissonProblem final : public ResidualProblem {
public:
    PoissonProblem(ChainModel chain, Region sampling, ScalarField reward);
    std::string_view name() const override { return "poisson"; }
    std::size_t input_dim() const override { return chain_.dim; }
    ResidualSample draw(Rng& anchor, Rng& forward, Rng& mirror) const override;

private:
    ResidualBranch branch(const State& x0, Rng& rng) const;
    ChainModel chain_;
    Region sampling_;
    ScalarField reward_;
};

/// Global balance pi(y) = int pi(z) p(z, y) eta(dz) for the pinned density,
/// with Y0 ~ nu and Z1, Z-1 iid ~ eta.
///   residual = pi(Y0) - pi(Z1) p(Z1, Y0)
class DensityProblem final : public ResidualProblem {
public:
    DensityProblem(ChainModel chain, Region sampling);
    std::string_view name() const override { return "density"; }
    std::size_t input_dim() const override { return chain_.dim; }
    ResidualSample draw(Rng& anchor, Rng& forward, Rng& mirror) const override;
    bool pinned() const override { return true; }

private:
    ResidualBranch branch(const State& y0, Rng& rng) const;
    ChainModel chain_;
    Region sampling_;
};

/// Return-time form of the first-transition equation on the window K,
/// with X0 ~ nu on K and two independent path segments.
///   residual = u(X0) - V - W u(X_tau)
class NoncompactProblem final : public ResidualProblem {
public:
    NoncompactProblem(ChainModel chain, RegionSpec regions, std::uint64_t step_cap);
    std::string_view name() const override { return "noncompact-fta"; }
    std::size_t input_dim() const override { return chain_.dim; }
    ResidualSample draw(Rng& anchor, Rng& forward, Rng& mirror) const override;

private:
    ResidualBranch branch(const State& x0, Rng& rng) const;
    ChainModel chain_;
    RegionSpec regions_;
    std::uint64_t step_cap_;
};

/// Sample `index` of the stream family rooted at `base`: the anchor,
/// forward and mirror draws use streams 3*index, 3*index+1, 3*index+2.
[[nodiscard]] ResidualSample draw_sample(const ResidualProblem& problem, const Rng& base,
                                         std::uint64_t index);

[[nodiscard]] double branch_residual(const ScalarField& u, const State& anchor,
                                     const ResidualBranch& branch);

/// The function being trained: the network itself, or its pinned version.
[[nodiscard]] ScalarField trained_function(const ResidualProblem& problem, const MlpParams& params);

/// Adds the single-sample gradient estimator to `grad` (scaled by `scale`)
/// and returns the forward residual.
double accumulate_sample_gradient(const ResidualProblem& problem, const MlpParams& params,
                                  const ResidualSample& sample, GradientVariant variant,
                                  double scale, std::span<double> grad);

/// Mean of the gradient estimator over samples 0..n-1 of `base`.
[[nodiscard]] std::vector<double> mean_gradient_estimate(const ResidualProblem& problem,
                                                         const MlpParams& params, std::size_t n,
                                                         const Rng& base,
                                                         GradientVariant variant =
                                                             GradientVariant::one_sided);

struct LossEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t samples = 0;
};

/// Unbiased estimate of the integrated squared residual: the sample mean of
/// R_forward * R_mirror over n samples (n >= 2), with its standard error.
[[nodiscard]] LossEstimate residual_loss_estimate(const ResidualProblem& problem,
                                                  const ScalarField& u, std::size_t n,
                                                  const Rng& base);
[[nodiscard]] LossEstimate residual_loss_estimate(const ResidualProblem& problem,
                                                  const MlpParams& params, std::size_t n,
                                                  const Rng& base);

struct LossRecord {
    std::uint64_t iteration = 0;
    double mean = 0.0;
    double std_error = 0.0;

    friend bool operator==(const LossRecord&, const LossRecord&) = default;
};

struct TrainResult {
    MlpParams params;
    std::vector<LossRecord> loss_log;
};

/// Runs config.iterations residual-gradient steps from `init`.
///
/// Training samples come from Rng(seed).split(1) and loss estimates from
/// Rng(seed).split(2); every logged estimate reuses the same samples.
/// Throws DivergenceError on a non-finite gradient or loss.
[[nodiscard]] TrainResult train_residual(const ResidualProblem& problem, MlpParams init,
                                         const TrainConfig& config);

[[nodiscard]] TrainResult fta_rga(const ChainModel& chain, const RegionSpec& regions,
                                  MlpParams init, const TrainConfig& config);
[[nodiscard]] TrainResult poisson_rga(const ChainModel& chain, const Region& sampling,
                                      ScalarField reward, MlpParams init,
                                      const TrainConfig& config);
/// The returned parameters define the density through pinned_forward().
[[nodiscard]] TrainResult density_rga(const ChainModel& chain, const Region& sampling,
                                      MlpParams init, const TrainConfig& config);
[[nodiscard]] TrainResult noncompact_fta_rga(const ChainModel& chain, const RegionSpec& regions,
                                             MlpParams init, const TrainConfig& config);

/// `iteration,loss_mean,loss_stderr` CSV.
void write_loss_csv(std::ostream& out, std::span<const LossRecord> log);

}  // namespace ftarga
