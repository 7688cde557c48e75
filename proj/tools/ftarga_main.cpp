// Command-line front end: train, validate, oracle, grid, run-all, loss-probe.

#include "ftarga/checkpoint.hpp"
#include "ftarga/csv.hpp"
#include "ftarga/error.hpp"
#include "ftarga/runner.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using ftarga::ExperimentConfig;
using nlohmann::json;

struct CommonOptions {
    std::string config_path;
    std::string experiment;
    std::optional<std::uint64_t> seed;
    bool paper_scale = false;
    std::string out;
    unsigned threads = 1;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    auto* cfg = cmd->add_option("--config", o.config_path, "Config JSON or run manifest")
                    ->check(CLI::ExistingFile);
    auto* exp = cmd->add_option("--experiment", o.experiment, "Experiment id");
    cfg->excludes(exp);
    cmd->add_option("--seed", o.seed, "Seed (overrides config and FTARGA_SEED)");
    cmd->add_flag("--paper-scale", o.paper_scale, "Use 10^6 iterations, finer oracle grids and batch-1 optimizer settings");
    cmd->add_option("--out", o.out, "Output directory");
    cmd->add_option("--threads", o.threads, "Worker threads for Monte Carlo oracles")
        ->check(CLI::PositiveNumber);
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ftarga::InvalidInput("cannot read " + path);
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ftarga::InvalidInput(path + ": " + e.what());
    }
}

std::optional<std::uint64_t> env_seed() {
    const char* raw = std::getenv("FTARGA_SEED");
    if (raw == nullptr || *raw == '\0') {
        return std::nullopt;
    }
    try {
        std::size_t used = 0;
        const auto v = std::stoull(raw, &used);
        if (used == std::string(raw).size()) {
            return v;
        }
    } catch (const std::exception&) {
    }
    throw ftarga::InvalidInput(std::string("FTARGA_SEED is not an integer: ") + raw);
}

bool has_seed(const json& doc) {
    const json& cfg = doc.contains("config") && doc.contains("tool") ? doc.at("config") : doc;
    return cfg.contains("seed");
}

ExperimentConfig resolve_config(const CommonOptions& o) {
    ExperimentConfig c;
    bool seed_from_file = false;
    if (!o.config_path.empty()) {
        const json doc = read_json(o.config_path);
        c = ftarga::parse_config(doc, o.paper_scale);
        seed_from_file = has_seed(doc);
    } else if (!o.experiment.empty()) {
        c = ftarga::default_config(ftarga::experiment_from_string(o.experiment), o.paper_scale);
    } else {
        throw ftarga::InvalidInput("either --config or --experiment is required");
    }
    if (o.seed) {
        c.seed = *o.seed;
    } else if (!seed_from_file) {
        if (const auto s = env_seed()) {
            c.seed = *s;
        }
    }
    if (!o.out.empty()) {
        c.output_dir = o.out;
    }
    c.oracle.threads = o.threads;
    return c;
}

ftarga::MlpParams load_params(const ExperimentConfig& c, const std::string& checkpoint) {
    return ftarga::load_checkpoint(checkpoint.empty() ? c.output_dir / "checkpoint"
                                                      : std::filesystem::path(checkpoint));
}

void print_summary(const ExperimentConfig& c, const ftarga::ValidationSummary& s) {
    std::cout << ftarga::to_string(c.experiment) << ": points=" << s.points
              << " rmse=" << ftarga::format_number(s.rmse)
              << " mae=" << ftarga::format_number(s.mean_abs_error)
              << " max=" << ftarga::format_number(s.max_abs_error) << " gate " << s.gate.metric
              << '=' << ftarga::format_number(s.gate.value)
              << (s.gate.higher_is_better ? " >= " : " <= ")
              << ftarga::format_number(s.gate.threshold) << (s.gate.passed ? " PASS" : " FAIL")
              << '\n';
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ftarga::InvalidInput("cannot write " + path.string());
    }
    out << text;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Residual-gradient training of neural solutions to Markov chain equations"};
    app.set_version_flag("--version", std::string(ftarga::code_version()));
    app.require_subcommand(1);

    CommonOptions train_o, validate_o, oracle_o, grid_o, probe_o;
    std::optional<std::uint64_t> iterations;
    std::string validate_ckpt, grid_ckpt, probe_ckpt;
    std::size_t probe_samples = 0;

    auto* train = app.add_subcommand("train", "Train a network and write checkpoint, loss.csv, manifest.json");
    add_common(train, train_o);
    train->add_option("--iterations", iterations, "Override the number of iterations");

    auto* validate = app.add_subcommand("validate", "Compare a checkpoint against the reference solution");
    add_common(validate, validate_o);
    validate->add_option("--checkpoint", validate_ckpt, "Checkpoint (default <out>/checkpoint)");

    auto* oracle = app.add_subcommand("oracle", "Write the reference solution grid");
    add_common(oracle, oracle_o);

    auto* grid = app.add_subcommand("grid", "Evaluate a checkpoint on the visualization lattice");
    add_common(grid, grid_o);
    grid->add_option("--checkpoint", grid_ckpt, "Checkpoint (default <out>/checkpoint)");

    auto* probe = app.add_subcommand("loss-probe", "Estimate the residual loss of a checkpoint");
    add_common(probe, probe_o);
    probe->add_option("--checkpoint", probe_ckpt, "Checkpoint (default <out>/checkpoint)");
    probe->add_option("--samples", probe_samples, "Number of samples (default: loss_samples)");

    ftarga::RunAllOptions all;
    std::optional<std::uint64_t> all_seed;
    std::string all_config;
    auto* run_all = app.add_subcommand("run-all", "Train and validate every experiment");
    run_all->add_option("--seed", all_seed, "Seed (overrides FTARGA_SEED)");
    run_all->add_option("--out", all.output_dir, "Output root directory");
    run_all->add_flag("--paper-scale", all.paper_scale, "Use 10^6 iterations, finer oracle grids and batch-1 optimizer settings");
    run_all->add_option("--threads", all.threads, "Worker threads for Monte Carlo oracles")
        ->check(CLI::PositiveNumber);
    run_all->add_option("--config", all_config, "JSON overrides applied to every experiment")
        ->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) {
            ExperimentConfig c = resolve_config(train_o);
            if (iterations) {
                c.train.iterations = *iterations;
                c.train.log_period = std::max<std::uint64_t>(1, *iterations / 20);
            }
            const auto art = ftarga::run_train(c);
            const auto& log = art.result.loss_log;
            std::cout << "trained " << ftarga::to_string(c.experiment) << " for "
                      << c.train.iterations << " iterations; final loss "
                      << (log.empty() ? std::string("n/a") : ftarga::format_number(log.back().mean))
                      << "\nwrote " << art.checkpoint.string() << '\n';
        } else if (*validate) {
            const ExperimentConfig c = resolve_config(validate_o);
            const auto s = ftarga::run_validate(c, load_params(c, validate_ckpt));
            print_summary(c, s);
            return s.gate.passed ? 0 : 3;
        } else if (*oracle) {
            const ExperimentConfig c = resolve_config(oracle_o);
            std::ostringstream csv;
            ftarga::write_grid_csv(csv, ftarga::oracle_grid(c));
            write_file(c.output_dir / "grid_oracle.csv", csv.str());
            std::cout << "wrote " << (c.output_dir / "grid_oracle.csv").string() << '\n';
        } else if (*grid) {
            const ExperimentConfig c = resolve_config(grid_o);
            const auto params = load_params(c, grid_ckpt);
            const auto problem = ftarga::make_problem(c);
            std::ostringstream csv;
            ftarga::write_grid_csv(csv,
                                   ftarga::learned_grid(c, ftarga::trained_function(*problem, params)));
            write_file(c.output_dir / "grid_learned.csv", csv.str());
            std::cout << "wrote " << (c.output_dir / "grid_learned.csv").string() << '\n';
        } else if (*probe) {
            const ExperimentConfig c = resolve_config(probe_o);
            const auto params = load_params(c, probe_ckpt);
            const auto problem = ftarga::make_problem(c);
            const std::size_t n = probe_samples > 0 ? probe_samples : c.train.loss_samples;
            const auto est =
                ftarga::residual_loss_estimate(*problem, params, n, ftarga::Rng(c.seed).split(2));
            std::cout << "loss " << ftarga::format_number(est.mean) << " +/- "
                      << ftarga::format_number(est.std_error) << " (" << est.samples
                      << " samples)\n";
        } else if (*run_all) {
            if (all_seed) {
                all.seed = *all_seed;
            } else if (const auto s = env_seed()) {
                all.seed = *s;
            }
            if (!all_config.empty()) {
                all.overrides = read_json(all_config);
            }
            const auto outcomes = ftarga::run_all(all);
            bool ok = true;
            for (const auto& o : outcomes) {
                if (!o.completed) {
                    std::cout << ftarga::to_string(o.id) << ": ERROR " << o.error << '\n';
                    ok = false;
                    continue;
                }
                ExperimentConfig c;
                c.experiment = o.id;
                print_summary(c, o.summary);
                ok = ok && o.summary.gate.passed;
            }
            return ok ? 0 : 3;
        }
    } catch (const ftarga::InvalidInput& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
