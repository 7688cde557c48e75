#pragma once

#include "ftarga/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ftarga {

enum class Activation { sigmoid, relu };

[[nodiscard]] std::string_view to_string(Activation a) noexcept;
[[nodiscard]] Activation activation_from_string(std::string_view name);

/// Architecture of a fully connected scalar-output network
///
///     u(x) = sum_j a_j * h_j(x),   h = sigma(W_L ... sigma(W_1 x + b_1) ... + b_L)
///
/// with `hidden.size()` hidden layers (1 to 3). The output may be clipped
/// to [-B, B].
struct MlpShape {
    std::size_t input_dim = 1;
    std::vector<std::size_t> hidden{1};
    Activation activation = Activation::sigmoid;
    std::optional<double> output_clip;

    [[nodiscard]] std::size_t width() const { return hidden.back(); }
    [[nodiscard]] std::size_t depth() const { return hidden.size(); }
    [[nodiscard]] std::size_t parameter_count() const;
    /// Throws InvalidInput if any dimension is zero, depth is outside 1..3,
    /// or the clip is not a positive finite number.
    void validate() const;

    friend bool operator==(const MlpShape&, const MlpShape&) = default;
};

/// Network parameters stored as one flat vector.
///
/// Layout: output weights a (width of last hidden layer), then for each
/// hidden layer in input-to-output order its weight matrix (row-major,
/// one row per unit) followed by its biases. For a single hidden layer this
/// is (a, w row-major, b).
class MlpParams {
public:
    MlpParams() = default;
    explicit MlpParams(MlpShape shape);
    MlpParams(MlpShape shape, std::vector<double> theta);

    [[nodiscard]] const MlpShape& shape() const noexcept { return shape_; }
    [[nodiscard]] std::size_t size() const noexcept { return theta_.size(); }
    [[nodiscard]] std::span<double> theta() noexcept { return theta_; }
    [[nodiscard]] std::span<const double> theta() const noexcept { return theta_; }

    [[nodiscard]] std::span<double> output_weights();
    [[nodiscard]] std::span<const double> output_weights() const;
    /// Row-major weight matrix of hidden layer `layer`.
    [[nodiscard]] std::span<double> weights(std::size_t layer = 0);
    [[nodiscard]] std::span<const double> weights(std::size_t layer = 0) const;
    [[nodiscard]] std::span<double> biases(std::size_t layer = 0);
    [[nodiscard]] std::span<const double> biases(std::size_t layer = 0) const;

    /// Offset of hidden layer `layer`'s weight block in the flat vector.
    [[nodiscard]] std::size_t layer_offset(std::size_t layer) const;

    [[nodiscard]] bool all_finite() const;

    friend bool operator==(const MlpParams&, const MlpParams&) = default;

private:
    MlpShape shape_;
    std::vector<double> theta_;
};

/// Network output at x. Throws InvalidInput on a dimension mismatch.
[[nodiscard]] double forward(const MlpParams& params, std::span<const double> x);

/// Output at x and its exact gradient with respect to theta (flat layout).
/// `grad` must have params.size() entries; it is overwritten.
///
/// ReLU uses sigma'(0) = 0. When the clip is active (|raw output| > B) the
/// gradient is zero.
double value_and_gradient(const MlpParams& params, std::span<const double> x,
                          std::span<double> grad);

[[nodiscard]] std::vector<double> grad_params(const MlpParams& params, std::span<const double> x);

/// x -> u(x) - u(0) + 1; equals exactly 1 at the origin.
[[nodiscard]] double pinned_forward(const MlpParams& params, std::span<const double> x);

enum class InitScale {
    /// Hidden weights and biases U(-1/sqrt(fan_in), 1/sqrt(fan_in)); output
    /// weights U(-1/sqrt(width), 1/sqrt(width)).
    fan_in_uniform,
    /// Every entry U(-1, 1).
    unit_uniform,
};

/// Deterministic in (seed, shape, rule).
[[nodiscard]] MlpParams init_params(std::uint64_t seed, const MlpShape& shape,
                                    InitScale rule = InitScale::fan_in_uniform);

struct AdamHyper {
    double step_size = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::uint64_t t = 0;
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    AdamHyper hyper;

    AdamState() = default;
    AdamState(std::size_t n, AdamHyper h)
        : first_moment(n, 0.0), second_moment(n, 0.0), hyper(h) {}
};

/// Bias-corrected Adam update, applied in place. Throws DivergenceError
/// (carrying the 0-based index of the attempted step, i.e. the number of
/// completed steps) if `grad` has a non-finite
/// entry; neither state nor params are modified in that case.
void adam_step(AdamState& state, MlpParams& params, std::span<const double> grad);

/// Plain SGD update theta <- theta - step_size * grad, same error contract
/// as adam_step with `iteration` reported on failure.
void sgd_step(MlpParams& params, std::span<const double> grad, double step_size,
              std::uint64_t iteration);

}  // namespace ftarga
