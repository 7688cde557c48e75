#pragma once

#include "ftarga/neural.hpp"
#include "ftarga/oracles.hpp"
#include "ftarga/rga.hpp"

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ftarga {

enum class ExperimentId {
    fluid_hitting,
    kw_hitting,
    bernoulli_poisson_linear,
    bernoulli_poisson_quadratic,
    gibbs_density,
};

[[nodiscard]] std::string_view to_string(ExperimentId id) noexcept;
[[nodiscard]] ExperimentId experiment_from_string(std::string_view name);
[[nodiscard]] const std::vector<ExperimentId>& all_experiments();

struct NetworkSpec {
    std::size_t width = 1000;
    std::size_t depth = 1;
    Activation activation = Activation::sigmoid;
    std::optional<double> clip;
};

/// Where and how densely the reference solution is evaluated.
struct OracleSpec {
    double spacing = 0.5;
    std::size_t replications = 1000;
    std::uint64_t step_cap = kDefaultStepCap;
    unsigned threads = 1;
};

struct ExperimentConfig {
    ExperimentId experiment = ExperimentId::fluid_hitting;
    std::uint64_t seed = 0;
    TrainConfig train;
    NetworkSpec network;
    /// Spacing of the lattice written to grid_learned.csv.
    double grid_spacing = 0.1;
    OracleSpec oracle;
    /// Absolute slack in the "within 3 stderr + tolerance" summary fraction.
    double validation_tolerance = 0.05;
    std::filesystem::path output_dir = "out";

    [[nodiscard]] MlpShape network_shape() const;
};

/// Desk-scale defaults, or the 10^6-iteration settings with `paper_scale`.
[[nodiscard]] ExperimentConfig default_config(ExperimentId id, bool paper_scale = false);

/// Applies the fields present in `overrides` on top of `base`. Accepts
/// either a config object or a run manifest (whose "config" member is used).
/// Unknown keys are rejected.
void apply_config_json(ExperimentConfig& base, const nlohmann::json& overrides);

/// Builds a config from JSON text: defaults for its "experiment" (and
/// "paper_scale") first, then every field present.
[[nodiscard]] ExperimentConfig parse_config(const nlohmann::json& doc, bool paper_scale = false);
[[nodiscard]] nlohmann::json config_to_json(const ExperimentConfig& config);

/// The residual problem trained by an experiment.
[[nodiscard]] std::unique_ptr<ResidualProblem> make_problem(const ExperimentConfig& config);

/// Initial parameters: init_params seeded from the config seed.
[[nodiscard]] MlpParams initial_params(const ExperimentConfig& config);

struct TrainArtifacts {
    TrainResult result;
    std::filesystem::path checkpoint;
    std::filesystem::path loss_csv;
    std::filesystem::path manifest;
};

/// Trains and writes `checkpoint`, `loss.csv` and `manifest.json` into the
/// output directory (created if missing).
TrainArtifacts run_train(const ExperimentConfig& config);

/// Pass/fail criterion evaluated on the comparison grid.
struct Gate {
    std::string metric;
    double value = 0.0;
    double threshold = 0.0;
    bool higher_is_better = false;
    bool passed = false;
};

struct ValidationSummary {
    std::size_t points = 0;
    double rmse = 0.0;
    double max_abs_error = 0.0;
    double mean_abs_error = 0.0;
    double fraction_within_tolerance = 0.0;
    Gate gate;
};

/// Evaluates the learned function on the experiment's grids against the
/// reference solution and writes grid_learned.csv, grid_oracle.csv,
/// comparison.csv and summary.json.
///
/// `learned` is the trained function itself (the pinned network for the
/// density experiment). Poisson solutions are compared after subtracting
/// each function's value at x = 0.5; the density is compared on the scale
/// learned(x) * pi(0, 0).
ValidationSummary run_validate(const ExperimentConfig& config, const ScalarField& learned);
ValidationSummary run_validate(const ExperimentConfig& config, const MlpParams& params);

/// Reference values on the comparison grid: Monte Carlo for hitting times
/// (with stderr), closed forms otherwise (stderr 0). Written to
/// grid_oracle.csv by run_validate.
[[nodiscard]] std::vector<GridRow> oracle_grid(const ExperimentConfig& config);

/// The visualization lattice of the experiment (grid_learned.csv).
[[nodiscard]] std::vector<GridRow> learned_grid(const ExperimentConfig& config,
                                                const ScalarField& learned);

struct RunAllOptions {
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "out";
    bool paper_scale = false;
    unsigned threads = 1;
    /// Applied on top of every experiment's defaults (never "experiment").
    nlohmann::json overrides = nlohmann::json::object();
};

struct ExperimentOutcome {
    ExperimentId id;
    bool completed = false;
    std::string error;
    ValidationSummary summary;
    /// Wall-clock time for train plus validate.
    double seconds = 0.0;
};

/// Trains and validates every experiment in sequence, each into
/// <output_dir>/<experiment id>. A failing experiment does not stop the
/// others.
[[nodiscard]] std::vector<ExperimentOutcome> run_all(const RunAllOptions& options);

[[nodiscard]] std::string_view code_version() noexcept;

}  // namespace ftarga
