// Command-line harness: oracle solves, distributed runs, and the
// error-vs-agent-count sweep over road network files.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "distvi/grid_city.hpp"
#include "distvi/io.hpp"
#include "distvi/metrics.hpp"
#include "distvi/simulator.hpp"

namespace fs = std::filesystem;
using namespace distvi;

namespace {

constexpr int kExitParseError = 2;
constexpr int kExitValidationError = 3;
constexpr int kExitNotConverged = 4;

struct CommonOptions {
    int agents = 5;
    double alpha = 0.9;
    double threshold = 0.1;
    int window_b = 0;
    std::string schedule = "complete";
    std::uint64_t seed = 0;
    double tolerance = 1e-10;
    int max_iters = 100000;
    std::string out_dir = "out";
    bool history = false;
    int parallel = 1;
};

struct CommonOptionHandles {
    CLI::Option* alpha = nullptr;
    CLI::Option* threshold = nullptr;
    CLI::Option* window_b = nullptr;
    CLI::Option* schedule = nullptr;
    CLI::Option* seed = nullptr;
    CLI::Option* tolerance = nullptr;
    CLI::Option* max_iters = nullptr;
    CLI::Option* history = nullptr;
};

CommonOptionHandles add_common_options(CLI::App* cmd, CommonOptions& opts) {
    CommonOptionHandles handles;
    cmd->add_option("-q,--agents", opts.agents, "number of agents/partitions");
    handles.alpha = cmd->add_option("--alpha", opts.alpha, "discount factor in [0,1)");
    handles.threshold = cmd->add_option("--threshold", opts.threshold, "communication threshold");
    handles.window_b = cmd->add_option("--window-b", opts.window_b, "connectivity window B");
    handles.schedule =
        cmd->add_option("--schedule", opts.schedule, "complete, round-robin, or custom:<file>");
    handles.seed = cmd->add_option("--seed", opts.seed, "seed for speeds and partitioning");
    handles.tolerance = cmd->add_option("--tolerance", opts.tolerance, "termination tolerance");
    handles.max_iters = cmd->add_option("--max-iters", opts.max_iters, "iteration cap");
    cmd->add_option("--out", opts.out_dir, "output directory");
    handles.history = cmd->add_flag("--history", opts.history, "record and write the r history");
    cmd->add_option("--parallel", opts.parallel, "worker threads for agent updates");
    return handles;
}

/// Loads file-borne defaults; explicitly passed flags win.
void apply_config_file(const std::string& path, CommonOptions& opts, const CommonOptionHandles& handles) {
    auto in = std::ifstream(path);
    if (!in)
        throw ParseError(path + ": cannot open configuration file");
    auto cfg = read_experiment_config(in, path);
    if (!handles.alpha->count())
        opts.alpha = cfg.alpha;
    if (!handles.threshold->count())
        opts.threshold = cfg.c_threshold;
    if (!handles.window_b->count())
        opts.window_b = cfg.window_b;
    if (!handles.schedule->count())
        opts.schedule = cfg.schedule;
    if (!handles.seed->count())
        opts.seed = cfg.seed;
    if (!handles.tolerance->count())
        opts.tolerance = cfg.tolerance;
    if (!handles.max_iters->count())
        opts.max_iters = cfg.max_iters;
    if (!handles.history->count())
        opts.history = cfg.record_history;
}

CommSchedule build_schedule(const std::string& spec, int q, int window_b) {
    if (spec == "complete") {
        if (window_b != 0)
            throw ValidationError("the complete schedule has window 0; drop --window-b");
        return make_schedule_complete(q);
    }
    if (spec == "round-robin")
        return make_schedule_round_robin(q, window_b);
    if (spec.rfind("custom:", 0) == 0) {
        const std::string path = spec.substr(7);
        auto in = std::ifstream(path);
        if (!in)
            throw ParseError(path + ": cannot open schedule file");
        return read_custom_schedule(in, q, path);
    }
    throw ValidationError("unknown schedule '" + spec + "'");
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream out(path);
    if (!out)
        throw ParseError(path.string() + ": cannot open for writing");
    body(out);
}

struct DistributedOutcome {
    RunResult result;
    ValueFunction oracle;
    NormalizedErrors errors;
    double spread = 0.0;
};

/// Shared pipeline: network -> speeds -> MDP -> k-means partition ->
/// boundary disaggregation -> distributed run -> oracle comparison.
DistributedOutcome run_distributed_on_network(const RoadNetwork& net, const CommonOptions& opts,
                                              bool quiet = false) {
    auto speeds = sample_speeds(net, opts.seed);
    auto mdp = build_routing_mdp(net, speeds, opts.alpha);
    auto partition = kmeans_partition(net.coordinates(), opts.agents, opts.seed);
    std::vector<int> fallbacks;
    auto disagg = uniform_boundary_disaggregation(mdp, partition, &fallbacks);
    if (!quiet)
        for (int l : fallbacks)
            std::cerr << "warning: partition " << l
                      << " has no boundary states; using uniform disaggregation\n";

    RunConfig config;
    config.c_threshold = opts.threshold;
    config.tolerance = opts.tolerance;
    config.max_iters = opts.max_iters;
    config.schedule = build_schedule(opts.schedule, opts.agents, opts.window_b);
    config.record_history = opts.history;
    config.num_threads = opts.parallel;

    auto result = run_distributed_vi(mdp, partition, disagg, config);
    if (opts.parallel > 1 && mdp.num_states() <= 500) {
        // parallel mode self-check against the sequential reference
        auto reference_config = config;
        reference_config.num_threads = 1;
        auto reference = run_distributed_vi(mdp, partition, disagg, reference_config);
        if (reference.values != result.values || reference.aggregates != result.aggregates ||
            reference.iterations != result.iterations)
            throw ValidationError("parallel rounds diverged from the sequential reference");
    }

    DistributedOutcome outcome;
    outcome.oracle = value_iteration(mdp, 1e-12, opts.max_iters).values;
    outcome.errors = normalized_errors(result, outcome.oracle, partition);
    outcome.spread = intra_partition_spread(outcome.oracle, partition);
    outcome.result = std::move(result);
    return outcome;
}

void write_distributed_outputs(const fs::path& dir, const RoadNetwork& net, const CommonOptions& opts,
                               const DistributedOutcome& outcome) {
    fs::create_directories(dir);
    const auto& result = outcome.result;

    auto speeds = sample_speeds(net, opts.seed);
    auto partition = kmeans_partition(net.coordinates(), opts.agents, opts.seed);
    auto mdp = build_routing_mdp(net, speeds, opts.alpha);
    auto disagg = uniform_boundary_disaggregation(mdp, partition);

    ExperimentConfig echo;
    echo.alpha = opts.alpha;
    echo.c_threshold = opts.threshold;
    echo.tolerance = opts.tolerance;
    echo.max_iters = opts.max_iters;
    echo.schedule = opts.schedule;
    echo.window_b = result.config.schedule.window();
    echo.seed = opts.seed;
    echo.record_history = opts.history;
    write_file(dir / "config.txt", [&](std::ostream& out) { write_experiment_config(out, echo); });
    write_file(dir / "partition.txt", [&](std::ostream& out) { write_partition(out, partition); });
    write_file(dir / "disagg.txt", [&](std::ostream& out) { write_disaggregation(out, disagg, partition); });
    write_file(dir / "speeds.txt", [&](std::ostream& out) { write_speeds(out, net, speeds); });

    for (int l = 0; l < partition.num_partitions(); ++l) {
        write_file(dir / ("agent_" + std::to_string(l) + "_values.txt"), [&](std::ostream& out) {
            write_values(out, partition.members(l), result.values[static_cast<std::size_t>(l)]);
        });
    }
    write_file(dir / "values.txt", [&](std::ostream& out) {
        write_values(out, result.global_values(partition));
    });
    write_file(dir / "jstar.txt", [&](std::ostream& out) { write_values(out, outcome.oracle); });
    write_file(dir / "broadcast_log.txt", [&](std::ostream& out) {
        out << "# k sender receiver value\n";
        for (const auto& event : result.broadcast_log)
            for (int m : event.receivers)
                out << event.iteration << ' ' << event.sender << ' ' << m << ' '
                    << format_double(event.value) << '\n';
    });
    if (result.history)
        write_file(dir / "r_history.txt", [&](std::ostream& out) { write_history(out, result); });

    const double bound = opts.alpha * outcome.spread / (1.0 - opts.alpha);
    write_file(dir / "metrics.txt", [&](std::ostream& out) {
        write_metrics_summary(out, {
                                       {"avg_error", format_double(outcome.errors.avg)},
                                       {"max_error", format_double(outcome.errors.max)},
                                       {"excluded_states", std::to_string(outcome.errors.excluded)},
                                       {"delta", format_double(outcome.spread)},
                                       {"bound", format_double(bound)},
                                       {"iterations", std::to_string(result.iterations)},
                                       {"messages", std::to_string(result.messages_sent)},
                                       {"converged", result.converged ? "1" : "0"},
                                   });
    });
}

/// First meaningful character decides the format: N/E/A lines are network
/// files, anything else is an MDP file.
bool looks_like_network(const std::string& path) {
    auto in = std::ifstream(path);
    if (!in)
        throw ParseError(path + ": cannot open file");
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream fields(line);
        std::string tag;
        if (!(fields >> tag) || tag[0] == '#')
            continue;
        return tag == "N" || tag == "E" || tag == "A";
    }
    throw ParseError(path + ": empty input file");
}

int cmd_gen_city(const std::string& out_file, const GridCityParams& params) {
    auto net = make_grid_city(params);
    write_file(out_file, [&](std::ostream& out) { write_network(out, net); });
    std::cout << "wrote " << net.num_nodes() << " nodes, " << net.edges.size() << " edges to "
              << out_file << "\n";
    return 0;
}

int cmd_solve_oracle(const std::string& input, const std::string& format, const CommonOptions& opts) {
    const fs::path dir(opts.out_dir);
    fs::create_directories(dir);
    std::optional<DiscountedMdp> mdp;
    const bool is_network = format == "net" || (format == "auto" && looks_like_network(input));
    if (is_network) {
        auto loaded = load_network_file(input);
        for (int id : loaded.pruned_nodes)
            std::cerr << "warning: pruned node " << id << " (cannot reach the access node)\n";
        auto speeds = sample_speeds(loaded.network, opts.seed);
        write_file(dir / "speeds.txt",
                   [&](std::ostream& out) { write_speeds(out, loaded.network, speeds); });
        mdp.emplace(build_routing_mdp(loaded.network, speeds, opts.alpha));
    } else {
        mdp.emplace(read_mdp_file(input));
    }
    auto solution = value_iteration(*mdp, opts.tolerance, opts.max_iters);
    write_file(dir / "jstar.txt", [&](std::ostream& out) { write_values(out, solution.values); });
    write_file(dir / "summary.txt", [&](std::ostream& out) {
        write_metrics_summary(out, {
                                       {"states", std::to_string(mdp->num_states())},
                                       {"alpha", format_double(mdp->alpha())},
                                       {"iterations", std::to_string(solution.iterations)},
                                       {"converged", solution.converged ? "1" : "0"},
                                   });
    });
    std::cout << "solved " << mdp->num_states() << " states in " << solution.iterations
              << " iterations\n";
    if (!solution.converged) {
        std::cerr << "error: value iteration did not converge within " << opts.max_iters
                  << " iterations\n";
        return kExitNotConverged;
    }
    return 0;
}

int cmd_solve_distributed(const std::string& input, const CommonOptions& opts) {
    auto loaded = load_network_file(input);
    for (int id : loaded.pruned_nodes)
        std::cerr << "warning: pruned node " << id << " (cannot reach the access node)\n";
    auto outcome = run_distributed_on_network(loaded.network, opts);
    write_distributed_outputs(opts.out_dir, loaded.network, opts, outcome);
    std::cout << "iterations " << outcome.result.iterations << ", messages "
              << outcome.result.messages_sent << ", avg error "
              << format_double(100.0 * outcome.errors.avg) << "%, max error "
              << format_double(100.0 * outcome.errors.max) << "%\n";
    if (!outcome.result.converged) {
        std::cerr << "error: run did not converge within " << opts.max_iters
                  << " iterations; outputs are flagged\n";
        return kExitNotConverged;
    }
    return 0;
}

int cmd_sweep_agents(const std::string& input, const std::vector<int>& q_list,
                     const std::vector<std::uint64_t>& seeds, const CommonOptions& base) {
    auto loaded = load_network_file(input);
    for (int id : loaded.pruned_nodes)
        std::cerr << "warning: pruned node " << id << " (cannot reach the access node)\n";
    const fs::path dir(base.out_dir);
    fs::create_directories(dir);

    struct Row {
        int q = 0;
        double mean = 0.0;
        double stddev = 0.0;
        int failures = 0;
    };
    std::vector<Row> rows;
    for (int q : q_list) {
        std::vector<double> errors;
        Row row;
        row.q = q;
        for (auto seed : seeds) {
            CommonOptions opts = base;
            opts.agents = q;
            opts.seed = seed;
            try {
                auto outcome = run_distributed_on_network(loaded.network, opts, true);
                if (!outcome.result.converged)
                    throw ValidationError("run did not converge");
                errors.push_back(outcome.errors.avg);
            } catch (const std::exception& err) {
                std::cerr << "warning: q=" << q << " seed=" << seed << " failed: " << err.what() << "\n";
                ++row.failures;
            }
        }
        if (!errors.empty()) {
            for (double e : errors)
                row.mean += e;
            row.mean /= static_cast<double>(errors.size());
            if (errors.size() > 1) {
                double ss = 0.0;
                for (double e : errors)
                    ss += (e - row.mean) * (e - row.mean);
                row.stddev = std::sqrt(ss / static_cast<double>(errors.size() - 1));
            }
        }
        rows.push_back(row);
        std::cout << "q=" << q << " mean avg error " << format_double(100.0 * row.mean) << "% ("
                  << row.failures << " failures)\n";
    }
    write_file(dir / "sweep.txt", [&](std::ostream& out) {
        out << "# q mean_avg_error stddev_avg_error failures\n";
        for (const auto& row : rows)
            out << row.q << ' ' << format_double(row.mean) << ' ' << format_double(row.stddev) << ' '
                << row.failures << '\n';
    });
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"distributed value iteration over partitioned road networks"};
    app.require_subcommand(1);

    // gen-city
    GridCityParams city;
    std::string city_out = "grid_city.net";
    auto* gen = app.add_subcommand("gen-city", "generate a synthetic city network file");
    gen->add_option("output", city_out, "output network file");
    gen->add_option("--rows", city.rows, "grid rows");
    gen->add_option("--cols", city.cols, "grid columns");
    gen->add_option("--spacing", city.spacing, "junction spacing in meters");
    gen->add_option("--jitter", city.jitter, "coordinate jitter fraction");
    gen->add_option("--removal-prob", city.removal_prob, "street removal probability");
    gen->add_option("--seed", city.seed, "generator seed");

    // solve-oracle
    CommonOptions oracle_opts;
    oracle_opts.tolerance = 1e-12;
    std::string oracle_input;
    std::string oracle_format = "auto";
    auto* oracle = app.add_subcommand("solve-oracle", "centralized value iteration");
    oracle->add_option("input", oracle_input, "network or MDP file")->required();
    oracle->add_option("--format", oracle_format, "auto, net, or mdp")
        ->check(CLI::IsMember({"auto", "net", "mdp"}));
    oracle->add_option("--alpha", oracle_opts.alpha, "discount for network inputs");
    oracle->add_option("--seed", oracle_opts.seed, "speed sampling seed for network inputs");
    oracle->add_option("--tolerance", oracle_opts.tolerance, "value iteration tolerance");
    oracle->add_option("--max-iters", oracle_opts.max_iters, "iteration cap");
    oracle->add_option("--out", oracle_opts.out_dir, "output directory");

    // solve-distributed
    CommonOptions dist_opts;
    std::string dist_input;
    std::string dist_config_file;
    auto* dist = app.add_subcommand("solve-distributed", "distributed multi-agent run");
    dist->add_option("input", dist_input, "network file")->required();
    auto dist_handles = add_common_options(dist, dist_opts);
    dist->add_option("--config", dist_config_file, "run configuration file with defaults");

    // sweep-agents
    CommonOptions sweep_opts;
    std::string sweep_input;
    std::vector<int> q_list{4, 8, 12, 16};
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    auto* sweep = app.add_subcommand("sweep-agents", "error vs agent count across seeds");
    sweep->add_option("input", sweep_input, "network file")->required();
    sweep->add_option("--q-list", q_list, "agent counts to sweep")->delimiter(',');
    sweep->add_option("--seeds", seeds, "seed list")->delimiter(',');
    add_common_options(sweep, sweep_opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed())
            return cmd_gen_city(city_out, city);
        if (oracle->parsed())
            return cmd_solve_oracle(oracle_input, oracle_format, oracle_opts);
        if (dist->parsed()) {
            if (!dist_config_file.empty())
                apply_config_file(dist_config_file, dist_opts, dist_handles);
            return cmd_solve_distributed(dist_input, dist_opts);
        }
        if (sweep->parsed())
            return cmd_sweep_agents(sweep_input, q_list, seeds, sweep_opts);
    } catch (const ParseError& err) {
        std::cerr << "parse error: " << err.what() << "\n";
        return kExitParseError;
    } catch (const ValidationError& err) {
        std::cerr << "validation error: " << err.what() << "\n";
        return kExitValidationError;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitValidationError;
    }
    return 0;
}
