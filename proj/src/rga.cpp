#include "ftarga/rga.hpp"

#include "ftarga/csv.hpp"
#include "ftarga/error.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace ftarga {

namespace {

constexpr std::uint64_t kTrainStream = 1;
constexpr std::uint64_t kLossStream = 2;

// Evaluates the trained function (network or pinned network) and its
// parameter gradient. Not thread-safe: owns a scratch buffer.
class Evaluator {
public:
    Evaluator(const MlpParams& params, bool pinned)
        : params_(params), pinned_(pinned), scratch_(params.size()) {
        if (pinned_) {
            origin_grad_.resize(params.size());
            const std::vector<double> origin(params.shape().input_dim, 0.0);
            origin_value_ = value_and_gradient(params, origin, origin_grad_);
        }
    }

    double value(std::span<const double> x) const {
        const double f = forward(params_, x);
        return pinned_ ? f - origin_value_ + 1.0 : f;
    }

    // grad += scale * gradient at x; returns the value at x.
    double add_gradient(std::span<const double> x, double scale, std::span<double> grad) {
        const double f = value_and_gradient(params_, x, scratch_);
        for (std::size_t i = 0; i < grad.size(); ++i) {
            grad[i] += scale * scratch_[i];
        }
        if (!pinned_) {
            return f;
        }
        for (std::size_t i = 0; i < grad.size(); ++i) {
            grad[i] -= scale * origin_grad_[i];
        }
        return f - origin_value_ + 1.0;
    }

private:
    const MlpParams& params_;
    bool pinned_;
    double origin_value_ = 0.0;
    std::vector<double> origin_grad_;
    std::vector<double> scratch_;
};

double branch_value(const Evaluator& ev, double anchor_value, const ResidualBranch& branch) {
    double r = anchor_value;
    for (const auto& term : branch.terms) {
        if (term.coefficient != 0.0) {
            r += term.coefficient * ev.value(term.point);
        }
    }
    return r - branch.offset;
}

// direction = gradient of the branch residual; returns the residual itself
// and stores the function value at the anchor.
double branch_gradient(Evaluator& ev, const State& anchor, const ResidualBranch& branch,
                       std::span<double> direction, double& anchor_value) {
    std::fill(direction.begin(), direction.end(), 0.0);
    anchor_value = ev.add_gradient(anchor, 1.0, direction);
    double r = anchor_value;
    for (const auto& term : branch.terms) {
        if (term.coefficient != 0.0) {
            r += term.coefficient * ev.add_gradient(term.point, term.coefficient, direction);
        }
    }
    return r - branch.offset;
}

double accumulate(Evaluator& ev, const ResidualSample& sample, GradientVariant variant,
                  double scale, std::span<double> grad, std::vector<double>& dir_mirror,
                  std::vector<double>& dir_forward) {
    double anchor_value = 0.0;
    const double r_mirror =
        branch_gradient(ev, sample.anchor, sample.mirror, dir_mirror, anchor_value);
    if (variant == GradientVariant::one_sided) {
        const double r_forward = branch_value(ev, anchor_value, sample.forward);
        const double c = 2.0 * r_forward * scale;
        for (std::size_t i = 0; i < grad.size(); ++i) {
            grad[i] += c * dir_mirror[i];
        }
        return r_forward;
    }
    const double r_forward =
        branch_gradient(ev, sample.anchor, sample.forward, dir_forward, anchor_value);
    for (std::size_t i = 0; i < grad.size(); ++i) {
        grad[i] += scale * (r_forward * dir_mirror[i] + r_mirror * dir_forward[i]);
    }
    return r_forward;
}

}  // namespace

void TrainConfig::validate() const {
    if (!(std::isfinite(step_size) && step_size > 0.0)) {
        throw InvalidInput("step size must be positive");
    }
    if (batch_size == 0) {
        throw InvalidInput("batch size must be positive");
    }
    if (log_period == 0) {
        throw InvalidInput("loss logging period must be positive");
    }
    if (loss_samples < 2) {
        throw InvalidInput("loss estimate needs at least 2 samples");
    }
    if (step_cap == 0) {
        throw InvalidInput("step cap must be positive");
    }
}

// --- problems --------------------------------------------------------------

FtaProblem::FtaProblem(ChainModel chain, RegionSpec regions)
    : chain_(std::move(chain)), regions_(std::move(regions)) {}

ResidualBranch FtaProblem::branch(const State& x0, Rng& rng) const {
    State x1 = chain_.step(x0, rng);
    ResidualBranch b;
    // Same operation order as simulate_segment, so a one-step segment
    // reproduces this branch bit for bit.
    b.offset += 1.0 * chain_.reward(x0);
    const double discount = 1.0 * std::exp(-chain_.discount(x0));
    double weight = 0.0;
    if (regions_.continuation.contains(x1)) {
        weight = discount;
    } else {
        b.offset += discount * chain_.reward(x1);
    }
    b.terms.push_back({std::move(x1), -weight});
    return b;
}

ResidualSample FtaProblem::draw(Rng& anchor, Rng& forward, Rng& mirror) const {
    ResidualSample s;
    s.anchor = regions_.sampling.sample(anchor);
    s.forward = branch(s.anchor, forward);
    s.mirror = branch(s.anchor, mirror);
    return s;
}

PoissonProblem::PoissonProblem(ChainModel chain, Region sampling, ScalarField reward)
    : chain_(std::move(chain)), sampling_(std::move(sampling)), reward_(std::move(reward)) {}

ResidualBranch PoissonProblem::branch(const State& x0, Rng& rng) const {
    State x1 = chain_.step(x0, rng);
    State x2 = chain_.step(x1, rng);
    ResidualBranch b;
    b.offset = reward_(x0) - reward_(x1);
    b.terms.push_back({std::move(x1), -2.0});
    b.terms.push_back({std::move(x2), 1.0});
    return b;
}

ResidualSample PoissonProblem::draw(Rng& anchor, Rng& forward, Rng& mirror) const {
    ResidualSample s;
    s.anchor = sampling_.sample(anchor);
    s.forward = branch(s.anchor, forward);
    s.mirror = branch(s.anchor, mirror);
    return s;
}

DensityProblem::DensityProblem(ChainModel chain, Region sampling)
    : chain_(std::move(chain)), sampling_(std::move(sampling)) {
    if (!chain_.has_density()) {
        throw InvalidInput("density learning needs a chain with a transition density");
    }
}

ResidualBranch DensityProblem::branch(const State& y0, Rng& rng) const {
    State z = chain_.sample_reference(rng);
    const double p = chain_.density(z, y0);
    ResidualBranch b;
    b.terms.push_back({std::move(z), -p});
    return b;
}

ResidualSample DensityProblem::draw(Rng& anchor, Rng& forward, Rng& mirror) const {
    ResidualSample s;
    s.anchor = sampling_.sample(anchor);
    s.forward = branch(s.anchor, forward);
    s.mirror = branch(s.anchor, mirror);
    return s;
}

NoncompactProblem::NoncompactProblem(ChainModel chain, RegionSpec regions, std::uint64_t step_cap)
    : chain_(std::move(chain)), regions_(std::move(regions)), step_cap_(step_cap) {
    if (!regions_.window) {
        throw InvalidInput("the non-compact algorithm needs a training window");
    }
}

ResidualBranch NoncompactProblem::branch(const State& x0, Rng& rng) const {
    PathSegment seg = simulate_segment(chain_, x0, regions_, rng, step_cap_);
    ResidualBranch b;
    b.offset = seg.reward;
    b.terms.push_back({std::move(seg.terminal), -seg.weight});
    return b;
}

ResidualSample NoncompactProblem::draw(Rng& anchor, Rng& forward, Rng& mirror) const {
    ResidualSample s;
    s.anchor = regions_.sampling.sample(anchor);
    s.forward = branch(s.anchor, forward);
    s.mirror = branch(s.anchor, mirror);
    return s;
}

// --- estimators --------------------------------------------------------------

ResidualSample draw_sample(const ResidualProblem& problem, const Rng& base, std::uint64_t index) {
    Rng anchor = base.split(3 * index);
    Rng forward = base.split(3 * index + 1);
    Rng mirror = base.split(3 * index + 2);
    return problem.draw(anchor, forward, mirror);
}

double branch_residual(const ScalarField& u, const State& anchor, const ResidualBranch& branch) {
    double r = u(anchor);
    for (const auto& term : branch.terms) {
        if (term.coefficient != 0.0) {
            r += term.coefficient * u(term.point);
        }
    }
    return r - branch.offset;
}

ScalarField trained_function(const ResidualProblem& problem, const MlpParams& params) {
    if (!problem.pinned()) {
        return [&params](std::span<const double> x) { return forward(params, x); };
    }
    const std::vector<double> origin(params.shape().input_dim, 0.0);
    const double origin_value = forward(params, origin);
    return [&params, origin_value](std::span<const double> x) {
        return forward(params, x) - origin_value + 1.0;
    };
}

double accumulate_sample_gradient(const ResidualProblem& problem, const MlpParams& params,
                                  const ResidualSample& sample, GradientVariant variant,
                                  double scale, std::span<double> grad) {
    Evaluator ev(params, problem.pinned());
    std::vector<double> dir_mirror(params.size());
    std::vector<double> dir_forward(variant == GradientVariant::symmetric ? params.size() : 0);
    return accumulate(ev, sample, variant, scale, grad, dir_mirror, dir_forward);
}

std::vector<double> mean_gradient_estimate(const ResidualProblem& problem, const MlpParams& params,
                                           std::size_t n, const Rng& base,
                                           GradientVariant variant) {
    if (n == 0) {
        throw InvalidInput("gradient estimate needs at least one sample");
    }
    Evaluator ev(params, problem.pinned());
    std::vector<double> grad(params.size(), 0.0);
    std::vector<double> dir_mirror(params.size());
    std::vector<double> dir_forward(params.size());
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const ResidualSample sample = draw_sample(problem, base, i);
        accumulate(ev, sample, variant, scale, grad, dir_mirror, dir_forward);
    }
    return grad;
}

LossEstimate residual_loss_estimate(const ResidualProblem& problem, const ScalarField& u,
                                    std::size_t n, const Rng& base) {
    if (n < 2) {
        throw InvalidInput("loss estimate needs at least 2 samples");
    }
    std::vector<double> products(n);
    for (std::size_t i = 0; i < n; ++i) {
        const ResidualSample s = draw_sample(problem, base, i);
        products[i] = branch_residual(u, s.anchor, s.forward) * branch_residual(u, s.anchor, s.mirror);
    }
    double sum = 0.0;
    for (double p : products) {
        sum += p;
    }
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (double p : products) {
        ss += (p - mean) * (p - mean);
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    return {mean, sd / std::sqrt(static_cast<double>(n)), n};
}

LossEstimate residual_loss_estimate(const ResidualProblem& problem, const MlpParams& params,
                                    std::size_t n, const Rng& base) {
    return residual_loss_estimate(problem, trained_function(problem, params), n, base);
}

// --- training --------------------------------------------------------------

TrainResult train_residual(const ResidualProblem& problem, MlpParams init,
                           const TrainConfig& config) {
    config.validate();
    if (init.shape().input_dim != problem.input_dim()) {
        throw InvalidInput("network input dimension does not match the chain");
    }
    const Rng root(config.seed);
    const Rng train_rng = root.split(kTrainStream);
    const Rng loss_rng = root.split(kLossStream);

    TrainResult result;
    result.params = std::move(init);
    MlpParams& params = result.params;

    AdamHyper hyper = config.adam;
    hyper.step_size = config.step_size;
    AdamState adam(params.size(), hyper);

    auto log_loss = [&](std::uint64_t t) {
        const LossEstimate est = residual_loss_estimate(problem, params, config.loss_samples, loss_rng);
        if (!std::isfinite(est.mean)) {
            throw DivergenceError(t, "non-finite loss estimate");
        }
        result.loss_log.push_back({t, est.mean, est.std_error});
    };

    std::vector<double> grad(params.size());
    std::vector<double> dir_mirror(params.size());
    std::vector<double> dir_forward(params.size());
    const double scale = 1.0 / static_cast<double>(config.batch_size);
    for (std::uint64_t t = 0; t < config.iterations; ++t) {
        if (t % config.log_period == 0) {
            log_loss(t);
        }
        std::fill(grad.begin(), grad.end(), 0.0);
        Evaluator ev(params, problem.pinned());
        for (std::size_t b = 0; b < config.batch_size; ++b) {
            const ResidualSample sample = draw_sample(problem, train_rng, t * config.batch_size + b);
            accumulate(ev, sample, config.variant, scale, grad, dir_mirror, dir_forward);
        }
        if (config.optimizer == OptimizerKind::adam) {
            adam_step(adam, params, grad);
        } else {
            sgd_step(params, grad, config.step_size, t);
        }
    }
    if (!params.all_finite()) {
        throw DivergenceError(config.iterations, "non-finite parameters");
    }
    log_loss(config.iterations);
    return result;
}

TrainResult fta_rga(const ChainModel& chain, const RegionSpec& regions, MlpParams init,
                    const TrainConfig& config) {
    return train_residual(FtaProblem(chain, regions), std::move(init), config);
}

TrainResult poisson_rga(const ChainModel& chain, const Region& sampling, ScalarField reward,
                        MlpParams init, const TrainConfig& config) {
    return train_residual(PoissonProblem(chain, sampling, std::move(reward)), std::move(init), config);
}

TrainResult density_rga(const ChainModel& chain, const Region& sampling, MlpParams init,
                        const TrainConfig& config) {
    return train_residual(DensityProblem(chain, sampling), std::move(init), config);
}

TrainResult noncompact_fta_rga(const ChainModel& chain, const RegionSpec& regions, MlpParams init,
                               const TrainConfig& config) {
    return train_residual(NoncompactProblem(chain, regions, config.step_cap), std::move(init),
                          config);
}

void write_loss_csv(std::ostream& out, std::span<const LossRecord> log) {
    out << "iteration,loss_mean,loss_stderr\n";
    for (const auto& rec : log) {
        out << rec.iteration << ',' << format_number(rec.mean) << ','
            << format_number(rec.std_error) << '\n';
    }
}

}  // namespace ftarga
