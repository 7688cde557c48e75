#include "ftarga/neural.hpp"

#include "ftarga/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ftarga {

namespace {

double activate(Activation a, double z) {
    if (a == Activation::sigmoid) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    return z > 0.0 ? z : 0.0;
}

// Derivative expressed through the pre-activation z and the output h.
double activation_slope(Activation a, double z, double h) {
    if (a == Activation::sigmoid) {
        return h * (1.0 - h);
    }
    return z > 0.0 ? 1.0 : 0.0;
}

void check_input(const MlpShape& shape, std::span<const double> x) {
    if (x.size() != shape.input_dim) {
        throw InvalidInput("network input has dimension " + std::to_string(x.size()) +
                           ", expected " + std::to_string(shape.input_dim));
    }
}

std::size_t fan_in(const MlpShape& shape, std::size_t layer) {
    return layer == 0 ? shape.input_dim : shape.hidden[layer - 1];
}

double apply_clip(const MlpShape& shape, double raw) {
    if (shape.output_clip) {
        const double b = *shape.output_clip;
        return std::clamp(raw, -b, b);
    }
    return raw;
}

}  // namespace

std::string_view to_string(Activation a) noexcept {
    return a == Activation::sigmoid ? "sigmoid" : "relu";
}

Activation activation_from_string(std::string_view name) {
    if (name == "sigmoid") {
        return Activation::sigmoid;
    }
    if (name == "relu") {
        return Activation::relu;
    }
    throw InvalidInput("unknown activation '" + std::string(name) + "'");
}

std::size_t MlpShape::parameter_count() const {
    std::size_t n = width();
    for (std::size_t l = 0; l < hidden.size(); ++l) {
        n += hidden[l] * (fan_in(*this, l) + 1);
    }
    return n;
}

void MlpShape::validate() const {
    if (input_dim == 0) {
        throw InvalidInput("input dimension must be positive");
    }
    if (hidden.empty() || hidden.size() > 3) {
        throw InvalidInput("network depth must be between 1 and 3");
    }
    if (std::any_of(hidden.begin(), hidden.end(), [](std::size_t w) { return w == 0; })) {
        throw InvalidInput("hidden widths must be positive");
    }
    if (output_clip && !(std::isfinite(*output_clip) && *output_clip > 0.0)) {
        throw InvalidInput("output clip must be a positive finite number");
    }
}

MlpParams::MlpParams(MlpShape shape) : shape_(std::move(shape)) {
    shape_.validate();
    theta_.assign(shape_.parameter_count(), 0.0);
}

MlpParams::MlpParams(MlpShape shape, std::vector<double> theta)
    : shape_(std::move(shape)), theta_(std::move(theta)) {
    shape_.validate();
    if (theta_.size() != shape_.parameter_count()) {
        throw InvalidInput("parameter vector has " + std::to_string(theta_.size()) +
                           " entries, shape requires " +
                           std::to_string(shape_.parameter_count()));
    }
}

std::size_t MlpParams::layer_offset(std::size_t layer) const {
    std::size_t off = shape_.width();
    for (std::size_t l = 0; l < layer; ++l) {
        off += shape_.hidden[l] * (fan_in(shape_, l) + 1);
    }
    return off;
}

std::span<double> MlpParams::output_weights() {
    return std::span<double>(theta_).first(shape_.width());
}

std::span<const double> MlpParams::output_weights() const {
    return std::span<const double>(theta_).first(shape_.width());
}

std::span<double> MlpParams::weights(std::size_t layer) {
    return std::span<double>(theta_).subspan(layer_offset(layer),
                                             shape_.hidden[layer] * fan_in(shape_, layer));
}

std::span<const double> MlpParams::weights(std::size_t layer) const {
    return std::span<const double>(theta_).subspan(layer_offset(layer),
                                                   shape_.hidden[layer] * fan_in(shape_, layer));
}

std::span<double> MlpParams::biases(std::size_t layer) {
    return std::span<double>(theta_).subspan(
        layer_offset(layer) + shape_.hidden[layer] * fan_in(shape_, layer), shape_.hidden[layer]);
}

std::span<const double> MlpParams::biases(std::size_t layer) const {
    return std::span<const double>(theta_).subspan(
        layer_offset(layer) + shape_.hidden[layer] * fan_in(shape_, layer), shape_.hidden[layer]);
}

bool MlpParams::all_finite() const {
    return std::all_of(theta_.begin(), theta_.end(), [](double v) { return std::isfinite(v); });
}

double forward(const MlpParams& params, std::span<const double> x) {
    const MlpShape& shape = params.shape();
    check_input(shape, x);

    std::vector<double> current(x.begin(), x.end());
    std::vector<double> next;
    for (std::size_t l = 0; l < shape.depth(); ++l) {
        const auto w = params.weights(l);
        const auto b = params.biases(l);
        const std::size_t n_in = current.size();
        next.resize(shape.hidden[l]);
        for (std::size_t j = 0; j < next.size(); ++j) {
            const double* row = w.data() + j * n_in;
            const double z = std::inner_product(current.begin(), current.end(), row, b[j]);
            next[j] = activate(shape.activation, z);
        }
        current.swap(next);
    }
    const auto a = params.output_weights();
    const double raw = std::inner_product(current.begin(), current.end(), a.begin(), 0.0);
    return apply_clip(shape, raw);
}

double value_and_gradient(const MlpParams& params, std::span<const double> x,
                          std::span<double> grad) {
    const MlpShape& shape = params.shape();
    check_input(shape, x);
    if (grad.size() != params.size()) {
        throw InvalidInput("gradient buffer has wrong size");
    }

    const std::size_t depth = shape.depth();
    // outputs[l] and slopes[l] hold sigma(z) and sigma'(z) of hidden layer l.
    std::vector<std::vector<double>> outputs(depth);
    std::vector<std::vector<double>> slopes(depth);
    for (std::size_t l = 0; l < depth; ++l) {
        const std::span<const double> in = l == 0 ? x : std::span<const double>(outputs[l - 1]);
        const auto w = params.weights(l);
        const auto b = params.biases(l);
        outputs[l].resize(shape.hidden[l]);
        slopes[l].resize(shape.hidden[l]);
        for (std::size_t j = 0; j < shape.hidden[l]; ++j) {
            const double* row = w.data() + j * in.size();
            const double z = std::inner_product(in.begin(), in.end(), row, b[j]);
            const double h = activate(shape.activation, z);
            outputs[l][j] = h;
            slopes[l][j] = activation_slope(shape.activation, z, h);
        }
    }

    const auto a = params.output_weights();
    const auto& last = outputs.back();
    const double raw = std::inner_product(last.begin(), last.end(), a.begin(), 0.0);
    if (shape.output_clip && std::abs(raw) > *shape.output_clip) {
        std::fill(grad.begin(), grad.end(), 0.0);
        return apply_clip(shape, raw);
    }

    std::copy(last.begin(), last.end(), grad.begin());

    std::vector<double> delta(last.size());
    for (std::size_t j = 0; j < delta.size(); ++j) {
        delta[j] = a[j] * slopes.back()[j];
    }
    std::vector<double> delta_below;
    for (std::size_t l = depth; l-- > 0;) {
        const std::span<const double> in = l == 0 ? x : std::span<const double>(outputs[l - 1]);
        const std::size_t n_in = in.size();
        const std::size_t off = params.layer_offset(l);
        double* gw = grad.data() + off;
        double* gb = gw + shape.hidden[l] * n_in;
        for (std::size_t j = 0; j < shape.hidden[l]; ++j) {
            for (std::size_t k = 0; k < n_in; ++k) {
                gw[j * n_in + k] = delta[j] * in[k];
            }
            gb[j] = delta[j];
        }
        if (l > 0) {
            const auto w = params.weights(l);
            delta_below.assign(n_in, 0.0);
            for (std::size_t j = 0; j < shape.hidden[l]; ++j) {
                for (std::size_t k = 0; k < n_in; ++k) {
                    delta_below[k] += w[j * n_in + k] * delta[j];
                }
            }
            for (std::size_t k = 0; k < n_in; ++k) {
                delta_below[k] *= slopes[l - 1][k];
            }
            delta.swap(delta_below);
        }
    }
    return raw;
}

std::vector<double> grad_params(const MlpParams& params, std::span<const double> x) {
    std::vector<double> g(params.size());
    value_and_gradient(params, x, g);
    return g;
}

double pinned_forward(const MlpParams& params, std::span<const double> x) {
    const std::vector<double> origin(params.shape().input_dim, 0.0);
    return forward(params, x) - forward(params, origin) + 1.0;
}

MlpParams init_params(std::uint64_t seed, const MlpShape& shape, InitScale rule) {
    MlpParams params(shape);
    Rng rng(seed);
    auto fill = [&](std::span<double> block, double half_width) {
        for (double& v : block) {
            v = rng.uniform(-half_width, half_width);
        }
    };
    const bool unit = rule == InitScale::unit_uniform;
    fill(params.output_weights(), unit ? 1.0 : 1.0 / std::sqrt(static_cast<double>(shape.width())));
    for (std::size_t l = 0; l < shape.depth(); ++l) {
        const double bound = unit ? 1.0 : 1.0 / std::sqrt(static_cast<double>(fan_in(shape, l)));
        fill(params.weights(l), bound);
        fill(params.biases(l), bound);
    }
    return params;
}

namespace {

void require_finite_gradient(std::span<const double> grad, std::size_t expected,
                             std::uint64_t iteration) {
    if (grad.size() != expected) {
        throw InvalidInput("gradient has " + std::to_string(grad.size()) + " entries, expected " +
                           std::to_string(expected));
    }
    for (std::size_t i = 0; i < grad.size(); ++i) {
        if (!std::isfinite(grad[i])) {
            throw DivergenceError(iteration, "non-finite gradient entry " + std::to_string(i));
        }
    }
}

}  // namespace

void adam_step(AdamState& state, MlpParams& params, std::span<const double> grad) {
    if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
        throw InvalidInput("Adam state does not match parameter count");
    }
    require_finite_gradient(grad, params.size(), state.t);

    const AdamHyper& h = state.hyper;
    state.t += 1;
    const double t = static_cast<double>(state.t);
    const double correction1 = 1.0 - std::pow(h.beta1, t);
    const double correction2 = 1.0 - std::pow(h.beta2, t);
    auto theta = params.theta();
    for (std::size_t i = 0; i < theta.size(); ++i) {
        double& m = state.first_moment[i];
        double& v = state.second_moment[i];
        m = h.beta1 * m + (1.0 - h.beta1) * grad[i];
        v = h.beta2 * v + (1.0 - h.beta2) * grad[i] * grad[i];
        const double m_hat = m / correction1;
        const double v_hat = v / correction2;
        theta[i] -= h.step_size * m_hat / (std::sqrt(v_hat) + h.epsilon);
    }
}

void sgd_step(MlpParams& params, std::span<const double> grad, double step_size,
              std::uint64_t iteration) {
    require_finite_gradient(grad, params.size(), iteration);
    auto theta = params.theta();
    for (std::size_t i = 0; i < theta.size(); ++i) {
        theta[i] -= step_size * grad[i];
    }
}

}  // namespace ftarga
