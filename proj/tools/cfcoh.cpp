// cfcoh: time-domain simulation and complex-frequency coherency studies.
//
//   cfcoh run      scenario.json            -> trajectory.csv, cf.csv
//   cfcoh cluster  scenario.json -k 4       -> distance.csv, partition.csv, dendrogram.csv
//   cfcoh sweep    twomachine.json --grid 21 -> sweep.csv
//   cfcoh cf       trajectory.csv           -> cf.csv
//
// Exit status: 0 success, 1 invalid input, 2 solver failure.

#include "cfcoh/csv.hpp"
#include "cfcoh/scenario_io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace {

using namespace cfcoh;

struct GlobalOptions {
    std::string out = ".";
    std::optional<double> dt;
    std::optional<double> t_end;
    std::vector<double> window;
    bool seedless = false;
};

class UsageError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

Scenario load(const std::string& path, const GlobalOptions& g)
{
    Scenario sc = load_scenario(path);
    if (g.dt) {
        sc.simulation.dt = *g.dt;
    }
    if (g.t_end) {
        sc.simulation.t_end = *g.t_end;
    }
    if (!g.window.empty()) {
        sc.analysis.window = std::pair{g.window[0], g.window[1]};
    }
    validate_scenario(sc);
    return sc;
}

std::string out_path(const GlobalOptions& g, const std::string& file)
{
    std::filesystem::create_directories(g.out);
    return (std::filesystem::path(g.out) / file).string();
}

void print_summary(const Trajectory& tr)
{
    std::cout << "samples " << tr.sample_count() << ", steps " << tr.stats.steps << ", Newton iterations "
              << tr.stats.newton_iterations << ", Jacobian updates " << tr.stats.jacobian_updates
              << ", step halvings " << tr.stats.step_halvings << ", events applied " << tr.stats.events_applied
              << "\n";
}

std::vector<std::size_t> analysed_devices(const Scenario& sc)
{
    std::vector<std::size_t> out;
    if (!sc.analysis.devices.empty()) {
        for (const auto& name : sc.analysis.devices) {
            out.push_back(static_cast<std::size_t>(sc.device_index(name)));
        }
        return out;
    }
    for (std::size_t k = 0; k < sc.devices.size(); ++k) {
        if (is_generation(sc.devices[k].model)) {
            out.push_back(k);
        }
    }
    return out;
}

int cmd_run(const std::string& scenario_path, const GlobalOptions& g)
{
    const Scenario sc = load(scenario_path, g);
    const Trajectory tr = run(sc);
    csv::write_file(out_path(g, "trajectory.csv"), [&](std::ostream& os) { csv::write_trajectory(os, tr); });
    std::vector<CfTrajectory> cfs;
    for (std::size_t d = 0; d < sc.devices.size(); ++d) {
        cfs.push_back(device_cf_trajectory(tr, d));
    }
    csv::write_file(out_path(g, "cf.csv"), [&](std::ostream& os) { csv::write_cf(os, tr.device_names, cfs); });
    print_summary(tr);
    return 0;
}

int cmd_cluster(const std::string& scenario_path, std::optional<int> k, const GlobalOptions& g)
{
    Scenario sc = load(scenario_path, g);
    const int clusters = k.value_or(sc.analysis.k_clusters);
    const auto devices = analysed_devices(sc);
    if (devices.size() < 2) {
        throw UsageError("clustering needs at least two devices");
    }
    if (clusters < 1 || clusters > static_cast<int>(devices.size())) {
        throw UsageError("-k must lie in [1, " + std::to_string(devices.size()) + "]");
    }
    const Trajectory tr = run(sc);
    std::vector<CfTrajectory> cfs;
    std::vector<std::string> labels;
    for (std::size_t d : devices) {
        cfs.push_back(device_cf_trajectory(tr, d));
        labels.push_back(sc.devices[d].name);
    }
    const auto window = analysis_window(tr, sc.analysis.window);
    const auto dist = distance_matrix(cfs, labels, window);
    const ClusterTree tree(dist);
    const auto groups = tree.cut(clusters);

    csv::write_file(out_path(g, "distance.csv"), [&](std::ostream& os) { csv::write_distance(os, dist); });
    csv::write_file(out_path(g, "partition.csv"), [&](std::ostream& os) { csv::write_partition(os, labels, groups); });
    csv::write_file(out_path(g, "dendrogram.csv"), [&](std::ostream& os) { csv::write_dendrogram(os, tree); });
    for (auto [component, file] : {std::pair{DistanceComponent::real, "distance_rho.csv"},
                                   std::pair{DistanceComponent::imag, "distance_omega.csv"}}) {
        const auto part = distance_matrix(cfs, labels, window, component);
        csv::write_file(out_path(g, file), [&](std::ostream& os) { csv::write_distance(os, part); });
    }
    print_summary(tr);
    for (const auto& group : partition_groups(groups, labels)) {
        std::cout << "{";
        for (std::size_t m = 0; m < group.size(); ++m) {
            std::cout << (m ? ", " : "") << group[m];
        }
        std::cout << "}\n";
    }
    return 0;
}

int cmd_sweep(const std::string& scenario_path, int grid, std::vector<double> alphas, std::vector<double> betas,
              unsigned threads, const GlobalOptions& g)
{
    const Scenario sc = load(scenario_path, g);
    auto uniform = [grid] {
        if (grid < 1) {
            throw UsageError("--grid must be >= 1");
        }
        std::vector<double> v(static_cast<std::size_t>(grid));
        for (int k = 0; k < grid; ++k) {
            v[static_cast<std::size_t>(k)] = grid == 1 ? 0.5 : 0.05 + 0.9 * k / (grid - 1);
        }
        return v;
    };
    if (alphas.empty()) {
        alphas = uniform();
    }
    if (betas.empty()) {
        betas = uniform();
    }
    try {
        validate_sweep_grid(alphas, "alpha");
        validate_sweep_grid(betas, "beta");
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const auto res = alpha_beta_sweep(sc, alphas, betas, sc.analysis.window, threads);
    csv::write_file(out_path(g, "sweep.csv"), [&](std::ostream& os) { csv::write_sweep(os, res); });
    std::size_t failed = 0;
    for (std::size_t c = 0; c < res.errors.size(); ++c) {
        if (!res.errors[c].empty()) {
            ++failed;
            std::cerr << "cell (" << res.alpha[c / res.beta.size()] << ", " << res.beta[c % res.beta.size()]
                      << ") failed: " << res.errors[c] << "\n";
        }
    }
    std::cout << "sweep " << alphas.size() << " x " << betas.size() << " cells, " << failed << " failed\n";
    return 0;
}

int cmd_cf(const std::string& csv_path, double f_nominal, bool synchronous_frame, const GlobalOptions& g)
{
    std::ifstream in(csv_path, std::ios::binary);
    if (!in) {
        throw UsageError("cannot open " + csv_path);
    }
    csv::Table table;
    try {
        table = csv::read_table(in);
    } catch (const std::runtime_error& e) {
        throw UsageError(csv_path + ": " + e.what());
    }
    const auto time_col = table.column("time");
    if (time_col < 0 || table.columns[static_cast<std::size_t>(time_col)].size() < 3) {
        throw UsageError(csv_path + ": needs a time column and at least 3 rows");
    }
    const auto& t = table.columns[static_cast<std::size_t>(time_col)];
    const double dt = t[1] - t[0];
    for (std::size_t k = 1; k < t.size(); ++k) {
        if (std::abs(t[k] - t[k - 1] - dt) > 1e-9 * std::max(1.0, std::abs(t[k]))) {
            throw UsageError(csv_path + ": samples must be uniformly spaced");
        }
    }
    auto names = csv::complex_series(table, "i_");
    std::string prefix = "i_";
    if (names.empty()) {
        names = csv::complex_series(table, "");
        prefix.clear();
    }
    if (names.empty()) {
        throw UsageError(csv_path + ": no <name>_re/<name>_im column pairs found");
    }
    const double omega_base = 2.0 * kPi * f_nominal;
    std::vector<CfTrajectory> cfs;
    for (const auto& name : names) {
        const auto& re = table.columns[static_cast<std::size_t>(table.column(prefix + name + "_re"))];
        const auto& im = table.columns[static_cast<std::size_t>(table.column(prefix + name + "_im"))];
        std::vector<Complex> x(re.size());
        for (std::size_t k = 0; k < x.size(); ++k) {
            x[k] = {re[k], im[k]};
        }
        cfs.push_back(numerical_cf(x, dt, omega_base, {t.front(), synchronous_frame ? 1.0 : 0.0, 1}));
    }
    csv::write_file(out_path(g, "cf.csv"), [&](std::ostream& os) { csv::write_cf(os, names, cfs); });
    std::cout << "estimated CF of " << names.size() << " series over " << t.size() << " samples\n";
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Complex-frequency coherency of power system devices"};
    app.require_subcommand(1);
    app.fallthrough();
    GlobalOptions g;
    app.add_option("--out", g.out, "Output directory")->capture_default_str();
    app.add_option("--dt", g.dt, "Integration step (s), overrides the scenario")->check(CLI::PositiveNumber);
    app.add_option("--t-end", g.t_end, "Simulation horizon (s), overrides the scenario")->check(CLI::PositiveNumber);
    app.add_option("--window", g.window, "Distance window start,end (s)")->delimiter(',')->expected(2);
    app.add_flag("--seedless", g.seedless, "Reserved; rejected");

    std::string scenario_path;
    auto* run_cmd = app.add_subcommand("run", "Simulate a scenario and write trajectory.csv and cf.csv");
    run_cmd->add_option("scenario", scenario_path, "Scenario file")->required();

    std::optional<int> k;
    auto* cluster_cmd = app.add_subcommand("cluster", "Simulate and group devices by coherency distance");
    cluster_cmd->add_option("scenario", scenario_path, "Scenario file")->required();
    cluster_cmd->add_option("-k,--clusters", k, "Number of groups (default from scenario)");

    int grid = 21;
    std::vector<double> alphas, betas;
    unsigned threads = 0;
    auto* sweep_cmd = app.add_subcommand("sweep", "Two-machine alpha-beta sweep of the coherency distance");
    sweep_cmd->add_option("scenario", scenario_path, "Two-machine scenario file")->required();
    sweep_cmd->add_option("--grid", grid, "Uniform grid size over [0.05, 0.95]")->capture_default_str();
    sweep_cmd->add_option("--alpha", alphas, "Explicit alpha values")->delimiter(',');
    sweep_cmd->add_option("--beta", betas, "Explicit beta values")->delimiter(',');
    sweep_cmd->add_option("--threads", threads, "Worker threads (0 = hardware)");

    std::string csv_path;
    double f_nominal = 60.0;
    bool synchronous = true;
    auto* cf_cmd = app.add_subcommand("cf", "Numerical CF of the current columns of a trajectory CSV");
    cf_cmd->add_option("trajectory", csv_path, "Trajectory CSV")->required();
    cf_cmd->add_option("--f-nominal", f_nominal, "Frequency base (Hz)")->capture_default_str()->check(CLI::PositiveNumber);
    cf_cmd->add_flag("!--stationary", synchronous, "Phasors are already in the stationary frame");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (g.seedless) {
            throw UsageError("--seedless is reserved and not supported (no randomness is used)");
        }
        if (*run_cmd) {
            return cmd_run(scenario_path, g);
        }
        if (*cluster_cmd) {
            return cmd_cluster(scenario_path, k, g);
        }
        if (*sweep_cmd) {
            return cmd_sweep(scenario_path, grid, alphas, betas, threads, g);
        }
        return cmd_cf(csv_path, f_nominal, synchronous, g);
    } catch (const ScenarioError& e) {
        std::cerr << "error: invalid scenario at " << e.what() << "\n";
        return 1;
    } catch (const InvalidModel& e) {
        std::cerr << "error: invalid model: " << e.what() << "\n";
        return 1;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const SolverError& e) {
        std::cerr << "error: solver failure in " << e.operation() << ": " << e.what() << "\n";
        return 2;
    } catch (const cfcoh::Error& e) {
        std::cerr << "error: analysis failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
