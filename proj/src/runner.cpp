#include "ftarga/runner.hpp"

#include "ftarga/checkpoint.hpp"
#include "ftarga/csv.hpp"
#include "ftarga/error.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#ifndef FTARGA_VERSION
#define FTARGA_VERSION "unknown"
#endif

namespace ftarga {

using nlohmann::json;

namespace {

constexpr std::uint64_t kInitStream = 3;
constexpr std::uint64_t kOracleStream = 4;
constexpr double kPoissonAnchor = 0.5;

struct ExperimentName {
    ExperimentId id;
    std::string_view name;
};

constexpr std::array<ExperimentName, 5> kExperimentNames{{
    {ExperimentId::fluid_hitting, "fluid-hitting"},
    {ExperimentId::kw_hitting, "kw-hitting"},
    {ExperimentId::bernoulli_poisson_linear, "bernoulli-poisson-linear"},
    {ExperimentId::bernoulli_poisson_quadratic, "bernoulli-poisson-quadratic"},
    {ExperimentId::gibbs_density, "gibbs-density"},
}};

bool is_poisson(ExperimentId id) {
    return id == ExperimentId::bernoulli_poisson_linear ||
           id == ExperimentId::bernoulli_poisson_quadratic;
}

bool is_hitting(ExperimentId id) {
    return id == ExperimentId::fluid_hitting || id == ExperimentId::kw_hitting;
}

PoissonReward reward_kind(ExperimentId id) {
    return id == ExperimentId::bernoulli_poisson_linear ? PoissonReward::linear
                                                        : PoissonReward::quadratic;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InvalidInput("cannot write " + path.string());
    }
    out << text;
}

std::string_view optimizer_name(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd"; }

OptimizerKind optimizer_from(const std::string& s) {
    if (s == "adam") return OptimizerKind::adam;
    if (s == "sgd") return OptimizerKind::sgd;
    throw InvalidInput("unknown optimizer '" + s + "'");
}

std::string_view variant_name(GradientVariant v) {
    return v == GradientVariant::one_sided ? "one-sided" : "symmetric";
}

GradientVariant variant_from(const std::string& s) {
    if (s == "one-sided") return GradientVariant::one_sided;
    if (s == "symmetric") return GradientVariant::symmetric;
    throw InvalidInput("unknown gradient variant '" + s + "'");
}

// Calls handler(key, value) for each member, rejecting keys not in `allowed`.
template <typename Handler>
void for_each_member(const json& obj, std::initializer_list<std::string_view> allowed,
                     const std::string& where, Handler&& handler) {
    if (!obj.is_object()) {
        throw InvalidInput(where + " must be a JSON object");
    }
    for (const auto& [key, value] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw InvalidInput("unknown config key '" + where + "." + key + "'");
        }
        handler(key, value);
    }
}

// --- per-experiment geometry -------------------------------------------------

struct ExperimentGeometry {
    Box box;
    StatePredicate filter;
};

ExperimentGeometry geometry(ExperimentId id) {
    switch (id) {
        case ExperimentId::fluid_hitting: {
            const Region region = fluid_hitting_regions().continuation;
            return {Box{{0.0, 0.0}, {5.0, 5.0}}, region.contains};
        }
        case ExperimentId::kw_hitting: {
            const Region window = *kw_hitting_regions().window;
            return {Box{{3.0, 3.0}, {9.0, 9.0}}, window.contains};
        }
        case ExperimentId::bernoulli_poisson_linear:
        case ExperimentId::bernoulli_poisson_quadratic:
            return {Box{{0.0}, {1.0}}, {}};
        case ExperimentId::gibbs_density:
            return {Box{{-1.0, -1.0}, {1.0, 1.0}}, {}};
    }
    throw InvalidInput("unknown experiment");
}

GridSpec lattice(const Box& box, double spacing) {
    GridSpec g;
    g.lo = box.lo;
    g.hi = box.hi;
    g.spacing.assign(box.dim(), spacing);
    return g;
}

ChainModel hitting_chain(ExperimentId id) {
    if (id == ExperimentId::fluid_hitting) {
        return with_hitting_time_reward(fluid_network_chain(), fluid_hitting_regions().target);
    }
    return with_hitting_time_reward(kiefer_wolfowitz_chain(), kw_hitting_regions().target);
}

// Maps the trained function to the scale on which it is compared.
ScalarField comparable(ExperimentId id, const ScalarField& learned) {
    if (is_poisson(id)) {
        const double anchor = learned(std::vector<double>{kPoissonAnchor});
        return [learned, anchor](std::span<const double> x) { return learned(x) - anchor; };
    }
    if (id == ExperimentId::gibbs_density) {
        const double pi0 = gibbs_exact_density(std::vector<double>{0.0, 0.0});
        return [learned, pi0](std::span<const double> x) { return learned(x) * pi0; };
    }
    return learned;
}

ScalarField exact_solution(ExperimentId id) {
    if (is_poisson(id)) {
        const PoissonReward kind = reward_kind(id);
        const double anchor = poisson_exact_bernoulli(kind, kPoissonAnchor);
        return [kind, anchor](std::span<const double> x) {
            return poisson_exact_bernoulli(kind, x[0]) - anchor;
        };
    }
    return [](std::span<const double> x) { return gibbs_exact_density(x); };
}

Gate make_gate(ExperimentId id, std::span<const GridRow> learned, std::span<const GridRow> oracle,
               const ValidationSummary& s) {
    Gate g;
    if (id == ExperimentId::fluid_hitting || id == ExperimentId::kw_hitting) {
        std::size_t hits = 0;
        for (std::size_t i = 0; i < oracle.size(); ++i) {
            const double err = std::abs(learned[i].value - oracle[i].value);
            const double se = oracle[i].std_error.value_or(0.0);
            const bool ok = id == ExperimentId::fluid_hitting
                                ? err <= std::max(3.0 * se, 0.1 * oracle[i].value)
                                : err <= 0.15 * oracle[i].value;
            hits += ok ? 1 : 0;
        }
        g.metric = id == ExperimentId::fluid_hitting ? "fraction_within_3se_or_10pct"
                                                     : "fraction_within_15pct";
        g.value = static_cast<double>(hits) / static_cast<double>(oracle.size());
        g.threshold = id == ExperimentId::fluid_hitting ? 0.90 : 0.85;
        g.higher_is_better = true;
    } else if (is_poisson(id)) {
        g.metric = "rmse";
        g.value = s.rmse;
        g.threshold = 0.05;
    } else {
        g.metric = "mean_abs_error";
        g.value = s.mean_abs_error;
        g.threshold = 0.02;
    }
    g.passed = g.higher_is_better ? g.value >= g.threshold : g.value <= g.threshold;
    return g;
}

json summary_to_json(const ExperimentConfig& config, const ValidationSummary& s) {
    json j;
    j["experiment"] = std::string(to_string(config.experiment));
    j["points"] = s.points;
    j["rmse"] = s.rmse;
    j["max_abs_error"] = s.max_abs_error;
    j["mean_abs_error"] = s.mean_abs_error;
    j["fraction_within_tolerance"] = s.fraction_within_tolerance;
    j["validation_tolerance"] = config.validation_tolerance;
    j["gate"] = {{"metric", s.gate.metric},
                 {"value", s.gate.value},
                 {"threshold", s.gate.threshold},
                 {"higher_is_better", s.gate.higher_is_better},
                 {"passed", s.gate.passed}};
    return j;
}

}  // namespace

std::string_view to_string(ExperimentId id) noexcept {
    for (const auto& e : kExperimentNames) {
        if (e.id == id) {
            return e.name;
        }
    }
    return "unknown";
}

ExperimentId experiment_from_string(std::string_view name) {
    for (const auto& e : kExperimentNames) {
        if (e.name == name) {
            return e.id;
        }
    }
    throw InvalidInput("unknown experiment '" + std::string(name) + "'");
}

const std::vector<ExperimentId>& all_experiments() {
    static const std::vector<ExperimentId> ids = [] {
        std::vector<ExperimentId> v;
        for (const auto& e : kExperimentNames) {
            v.push_back(e.id);
        }
        return v;
    }();
    return ids;
}

std::string_view code_version() noexcept { return FTARGA_VERSION; }

MlpShape ExperimentConfig::network_shape() const {
    MlpShape shape;
    shape.input_dim = geometry(experiment).box.dim();
    shape.hidden.assign(network.depth, network.width);
    shape.activation = network.activation;
    shape.output_clip = network.clip;
    return shape;
}

ExperimentConfig default_config(ExperimentId id, bool paper_scale) {
    ExperimentConfig c;
    c.experiment = id;
    c.train.iterations = paper_scale ? 1'000'000 : 200'000;
    c.train.log_period = c.train.iterations / 20;
    c.train.loss_samples = 2'000;
    c.output_dir = std::filesystem::path("out") / std::string(to_string(id));
    switch (id) {
        case ExperimentId::fluid_hitting:
            c.network.width = 1000;
            c.train.optimizer = OptimizerKind::adam;
            c.train.step_size = paper_scale ? 1e-3 : 3e-3;
            c.train.batch_size = paper_scale ? 1 : 16;
            c.grid_spacing = 0.1;
            c.oracle.spacing = paper_scale ? 0.1 : 0.5;
            c.oracle.replications = 1000;
            break;
        case ExperimentId::kw_hitting:
            c.network.width = 1000;
            c.train.optimizer = OptimizerKind::adam;
            c.train.step_size = paper_scale ? 1e-3 : 3e-3;
            c.train.batch_size = paper_scale ? 1 : 16;
            c.grid_spacing = 0.2;
            c.oracle.spacing = paper_scale ? 0.2 : 0.5;
            c.oracle.replications = paper_scale ? 10'000 : 2'000;
            break;
        case ExperimentId::bernoulli_poisson_linear:
        case ExperimentId::bernoulli_poisson_quadratic:
            c.network.width = 200;
            c.train.optimizer = paper_scale ? OptimizerKind::sgd : OptimizerKind::adam;
            c.train.step_size = 1e-2;
            c.train.batch_size = paper_scale ? 1 : 32;
            c.grid_spacing = 0.01;
            c.oracle.spacing = 0.01;
            c.oracle.replications = 1;
            break;
        case ExperimentId::gibbs_density:
            c.network.width = 200;
            c.train.optimizer = OptimizerKind::adam;
            c.train.step_size = 1e-3;
            c.grid_spacing = 0.1;
            c.oracle.spacing = 0.1;
            c.oracle.replications = 1;
            break;
    }
    return c;
}

void apply_config_json(ExperimentConfig& c, const json& doc) {
    const json& cfg = doc.contains("config") && doc.contains("tool") ? doc.at("config") : doc;
    try {
        for_each_member(
            cfg,
            {"experiment", "paper_scale", "seed", "train", "network", "grid_spacing", "oracle",
             "validation_tolerance", "output_dir"},
            "config", [&](const std::string& key, const json& v) {
                if (key == "experiment") {
                    c.experiment = experiment_from_string(v.get<std::string>());
                } else if (key == "seed") {
                    c.seed = v.get<std::uint64_t>();
                } else if (key == "grid_spacing") {
                    c.grid_spacing = v.get<double>();
                } else if (key == "validation_tolerance") {
                    c.validation_tolerance = v.get<double>();
                } else if (key == "output_dir") {
                    c.output_dir = v.get<std::string>();
                } else if (key == "train") {
                    for_each_member(v,
                                    {"iterations", "step_size", "batch_size", "log_period",
                                     "loss_samples", "optimizer", "beta1", "beta2", "epsilon",
                                     "variant", "step_cap"},
                                    "train", [&](const std::string& k, const json& t) {
                                        auto& tr = c.train;
                                        if (k == "iterations") tr.iterations = t.get<std::uint64_t>();
                                        else if (k == "step_size") tr.step_size = t.get<double>();
                                        else if (k == "batch_size") tr.batch_size = t.get<std::size_t>();
                                        else if (k == "log_period") tr.log_period = t.get<std::uint64_t>();
                                        else if (k == "loss_samples") tr.loss_samples = t.get<std::size_t>();
                                        else if (k == "optimizer") tr.optimizer = optimizer_from(t.get<std::string>());
                                        else if (k == "beta1") tr.adam.beta1 = t.get<double>();
                                        else if (k == "beta2") tr.adam.beta2 = t.get<double>();
                                        else if (k == "epsilon") tr.adam.epsilon = t.get<double>();
                                        else if (k == "variant") tr.variant = variant_from(t.get<std::string>());
                                        else if (k == "step_cap") tr.step_cap = t.get<std::uint64_t>();
                                    });
                } else if (key == "network") {
                    for_each_member(v, {"width", "depth", "activation", "clip"}, "network",
                                    [&](const std::string& k, const json& n) {
                                        if (k == "width") c.network.width = n.get<std::size_t>();
                                        else if (k == "depth") c.network.depth = n.get<std::size_t>();
                                        else if (k == "activation")
                                            c.network.activation = activation_from_string(n.get<std::string>());
                                        else if (k == "clip")
                                            c.network.clip = n.is_null() ? std::nullopt
                                                                         : std::optional<double>(n.get<double>());
                                    });
                } else if (key == "oracle") {
                    for_each_member(v, {"spacing", "replications", "step_cap", "threads"}, "oracle",
                                    [&](const std::string& k, const json& o) {
                                        if (k == "spacing") c.oracle.spacing = o.get<double>();
                                        else if (k == "replications") c.oracle.replications = o.get<std::size_t>();
                                        else if (k == "step_cap") c.oracle.step_cap = o.get<std::uint64_t>();
                                        else if (k == "threads") c.oracle.threads = o.get<unsigned>();
                                    });
                }
            });
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("bad config value: ") + e.what());
    }
}

ExperimentConfig parse_config(const json& doc, bool paper_scale) {
    const json& cfg = doc.contains("config") && doc.contains("tool") ? doc.at("config") : doc;
    if (!cfg.is_object() || !cfg.contains("experiment")) {
        throw InvalidInput("config must name an \"experiment\"");
    }
    if (cfg.contains("paper_scale")) {
        paper_scale = paper_scale || cfg.at("paper_scale").get<bool>();
    }
    ExperimentConfig c =
        default_config(experiment_from_string(cfg.at("experiment").get<std::string>()), paper_scale);
    apply_config_json(c, cfg);
    return c;
}

json config_to_json(const ExperimentConfig& c) {
    json j;
    j["experiment"] = std::string(to_string(c.experiment));
    j["seed"] = c.seed;
    j["train"] = {{"iterations", c.train.iterations},
                  {"step_size", c.train.step_size},
                  {"batch_size", c.train.batch_size},
                  {"log_period", c.train.log_period},
                  {"loss_samples", c.train.loss_samples},
                  {"optimizer", std::string(optimizer_name(c.train.optimizer))},
                  {"beta1", c.train.adam.beta1},
                  {"beta2", c.train.adam.beta2},
                  {"epsilon", c.train.adam.epsilon},
                  {"variant", std::string(variant_name(c.train.variant))},
                  {"step_cap", c.train.step_cap}};
    j["network"] = {{"width", c.network.width},
                    {"depth", c.network.depth},
                    {"activation", std::string(to_string(c.network.activation))},
                    {"clip", c.network.clip ? json(*c.network.clip) : json(nullptr)}};
    j["grid_spacing"] = c.grid_spacing;
    j["oracle"] = {{"spacing", c.oracle.spacing},
                   {"replications", c.oracle.replications},
                   {"step_cap", c.oracle.step_cap},
                   {"threads", c.oracle.threads}};
    j["validation_tolerance"] = c.validation_tolerance;
    j["output_dir"] = c.output_dir.string();
    return j;
}

std::unique_ptr<ResidualProblem> make_problem(const ExperimentConfig& config) {
    switch (config.experiment) {
        case ExperimentId::fluid_hitting:
            return std::make_unique<FtaProblem>(hitting_chain(config.experiment),
                                                fluid_hitting_regions());
        case ExperimentId::kw_hitting:
            return std::make_unique<NoncompactProblem>(hitting_chain(config.experiment),
                                                       kw_hitting_regions(), config.train.step_cap);
        case ExperimentId::bernoulli_poisson_linear:
        case ExperimentId::bernoulli_poisson_quadratic: {
            const PoissonReward kind = reward_kind(config.experiment);
            return std::make_unique<PoissonProblem>(
                bernoulli_convolution_chain(), box_region(Box{{0.0}, {1.0}}),
                [kind](std::span<const double> x) { return poisson_reward(kind, x[0]); });
        }
        case ExperimentId::gibbs_density:
            return std::make_unique<DensityProblem>(gibbs_chain(),
                                                    box_region(Box{{-1.0, -1.0}, {1.0, 1.0}}));
    }
    throw InvalidInput("unknown experiment");
}

MlpParams initial_params(const ExperimentConfig& config) {
    return init_params(Rng(config.seed).split(kInitStream).next(), config.network_shape());
}

TrainArtifacts run_train(const ExperimentConfig& config) {
    std::filesystem::create_directories(config.output_dir);
    TrainConfig train = config.train;
    train.seed = config.seed;

    const auto problem = make_problem(config);
    TrainArtifacts art;
    art.result = train_residual(*problem, initial_params(config), train);

    art.checkpoint = config.output_dir / "checkpoint";
    art.loss_csv = config.output_dir / "loss.csv";
    art.manifest = config.output_dir / "manifest.json";
    save_checkpoint(art.checkpoint, art.result.params);

    std::ostringstream loss;
    write_loss_csv(loss, art.result.loss_log);
    write_text(art.loss_csv, loss.str());

    json manifest;
    manifest["tool"] = "ftarga";
    manifest["version"] = std::string(code_version());
    manifest["experiment"] = std::string(to_string(config.experiment));
    manifest["seed"] = config.seed;
    manifest["config"] = config_to_json(config);
    write_text(art.manifest, manifest.dump(2) + "\n");
    return art;
}

std::vector<GridRow> oracle_grid(const ExperimentConfig& config) {
    const ExperimentGeometry geo = geometry(config.experiment);
    StatePredicate filter = geo.filter;
    if (config.experiment == ExperimentId::kw_hitting) {
        // K and A share the corner (3,3), where the hitting time is 0.
        filter = [window = geo.filter, target = kw_hitting_regions().target.contains](std::span<const double> x) {
            return window(x) && !target(x);
        };
    }
    const std::vector<State> pts = grid_points(lattice(geo.box, config.oracle.spacing), filter);
    std::vector<GridRow> rows;
    rows.reserve(pts.size());
    if (is_hitting(config.experiment)) {
        const ChainModel chain = hitting_chain(config.experiment);
        const Region target = config.experiment == ExperimentId::fluid_hitting
                                  ? fluid_hitting_regions().target
                                  : kw_hitting_regions().target;
        const Rng base = Rng(config.seed).split(kOracleStream);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const OracleEstimate est =
                mc_hitting_time(chain, pts[i], target, config.oracle.replications, base.split(i),
                                config.oracle.step_cap, config.oracle.threads);
            rows.push_back({pts[i], est.mean, est.std_error});
        }
        return rows;
    }
    const ScalarField exact = exact_solution(config.experiment);
    for (const State& x : pts) {
        rows.push_back({x, exact(x), 0.0});
    }
    return rows;
}

std::vector<GridRow> learned_grid(const ExperimentConfig& config, const ScalarField& learned) {
    const ExperimentGeometry geo = geometry(config.experiment);
    return grid_eval(comparable(config.experiment, learned), lattice(geo.box, config.grid_spacing),
                     geo.filter);
}

ValidationSummary run_validate(const ExperimentConfig& config, const ScalarField& learned) {
    std::filesystem::create_directories(config.output_dir);
    const ScalarField scaled = comparable(config.experiment, learned);

    const std::vector<GridRow> oracle = oracle_grid(config);
    std::vector<GridRow> at_oracle;
    at_oracle.reserve(oracle.size());
    for (const auto& row : oracle) {
        at_oracle.push_back({row.x, scaled(row.x), std::nullopt});
    }

    ValidationSummary s;
    s.points = oracle.size();
    double sq = 0.0;
    double abs_sum = 0.0;
    std::size_t within = 0;
    for (std::size_t i = 0; i < oracle.size(); ++i) {
        const double err = std::abs(at_oracle[i].value - oracle[i].value);
        sq += err * err;
        abs_sum += err;
        s.max_abs_error = std::max(s.max_abs_error, err);
        if (err <= 3.0 * oracle[i].std_error.value_or(0.0) + config.validation_tolerance) {
            ++within;
        }
    }
    const double n = static_cast<double>(s.points);
    s.rmse = std::sqrt(sq / n);
    s.mean_abs_error = abs_sum / n;
    s.fraction_within_tolerance = static_cast<double>(within) / n;
    s.gate = make_gate(config.experiment, at_oracle, oracle, s);

    std::ostringstream learned_csv;
    const std::vector<GridRow> view = learned_grid(config, learned);
    write_grid_csv(learned_csv, view);
    write_text(config.output_dir / "grid_learned.csv", learned_csv.str());

    std::ostringstream oracle_csv;
    write_grid_csv(oracle_csv, oracle);
    write_text(config.output_dir / "grid_oracle.csv", oracle_csv.str());

    std::ostringstream cmp;
    const std::size_t d = oracle.front().x.size();
    for (std::size_t k = 0; k < d; ++k) {
        cmp << 'x' << (k + 1) << ',';
    }
    cmp << "learned,oracle,stderr\n";
    for (std::size_t i = 0; i < oracle.size(); ++i) {
        for (double c : oracle[i].x) {
            cmp << format_number(c) << ',';
        }
        cmp << format_number(at_oracle[i].value) << ',' << format_number(oracle[i].value) << ','
            << format_number(oracle[i].std_error.value_or(0.0)) << '\n';
    }
    write_text(config.output_dir / "comparison.csv", cmp.str());

    write_text(config.output_dir / "summary.json", summary_to_json(config, s).dump(2) + "\n");
    return s;
}

ValidationSummary run_validate(const ExperimentConfig& config, const MlpParams& params) {
    if (params.shape().input_dim != geometry(config.experiment).box.dim()) {
        throw InvalidInput("checkpoint input dimension does not match experiment " +
                           std::string(to_string(config.experiment)));
    }
    const auto problem = make_problem(config);
    return run_validate(config, trained_function(*problem, params));
}

std::vector<ExperimentOutcome> run_all(const RunAllOptions& options) {
    if (options.overrides.contains("experiment")) {
        throw InvalidInput("run-all overrides must not select an experiment");
    }
    std::filesystem::create_directories(options.output_dir);
    std::vector<ExperimentOutcome> outcomes;
    json report = json::array();
    for (ExperimentId id : all_experiments()) {
        ExperimentOutcome outcome{id, false, {}, {}};
        const auto start = std::chrono::steady_clock::now();
        try {
            ExperimentConfig config = default_config(id, options.paper_scale);
            apply_config_json(config, options.overrides);
            config.seed = options.seed;
            config.oracle.threads = options.threads;
            config.output_dir = options.output_dir / std::string(to_string(id));
            const TrainArtifacts art = run_train(config);
            outcome.summary = run_validate(config, art.result.params);
            outcome.completed = true;
        } catch (const std::exception& e) {
            outcome.error = e.what();
        }
        outcome.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        report.push_back({{"experiment", std::string(to_string(id))},
                          {"completed", outcome.completed},
                          {"error", outcome.error},
                          {"gate_passed", outcome.completed && outcome.summary.gate.passed},
                          {"seconds", outcome.seconds}});
        outcomes.push_back(std::move(outcome));
    }
    write_text(options.output_dir / "run_all.json", report.dump(2) + "\n");
    return outcomes;
}

}  // namespace ftarga
