#include "mfl/cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <random>

#include <CLI11.hpp>

#include "mfl/io.hpp"
#include "mfl/meanfield.hpp"
#include "mfl/ocp.hpp"

namespace mfl {

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
}

template <typename T>
T require(const json& j, const std::string& key) {
    if (!j.contains(key)) throw ConfigError("missing config key: " + key);
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("bad type for config key: " + key);
    }
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("bad type for config key: " + key);
    }
}

InteractionModel parse_model(const json& j) {
    auto kind = require<std::string>(j, "kind");
    if (kind == "kernel") kind = require<std::string>(j, "id");  // model-zoo spelling
    if (kind == "zero") return make_zero_model(require<int>(j, "dim"));
    if (kind == "linear_attraction") return make_linear_attraction(require<int>(j, "dim"));
    if (kind == "cucker_smale")
        return make_cucker_smale(require<double>(j, "gamma"), get_or<int>(j, "m", 1));
    if (kind == "friction_alignment") {
        const auto w = get_or<std::string>(j, "W", "quadratic");
        if (w != "quadratic") throw ConfigError("unknown confinement W: " + w);
        return make_friction_alignment(require<double>(j, "alpha"), get_or<int>(j, "m", 1));
    }
    throw ConfigError("unknown model kind: " + kind);
}

Subspace parse_subspace(const json& j, const InteractionModel& model) {
    if (!j.contains("subspace")) return model.control_subspace;
    const auto& s = j.at("subspace");
    if (s.is_string()) {
        const auto name = s.get<std::string>();
        if (name == "full") return Subspace::full(model.dim);
        if (name == "velocity") return Subspace::velocity_half(model.dim / 2);
        throw ConfigError("unknown subspace name: " + name);
    }
    if (s.is_array()) {
        std::vector<std::vector<double>> vecs;
        for (const auto& row : s) vecs.push_back(row.get<std::vector<double>>());
        return Subspace::from_vectors(model.dim, vecs);
    }
    throw ConfigError("bad subspace spec");
}

ModeratedPenalty parse_penalty(const json& j, const InteractionModel& model) {
    const auto kind = require<std::string>(j, "kind");
    const double p = require<double>(j, "p");
    Subspace u = parse_subspace(j, model);
    try {
        if (kind == "power") return make_power_penalty(p, std::move(u));
        if (kind == "hybrid") return make_hybrid_penalty(p, std::move(u));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    throw ConfigError("unknown penalty kind: " + kind);
}

RunningCost parse_running_cost(const json& j) {
    const auto kind = require<std::string>(j, "kind");
    if (kind == "zero") return make_zero_cost();
    if (kind == "variance") return make_variance_cost(InteractionModel::Structure::first_order);
    if (kind == "velocity_variance")
        return make_variance_cost(InteractionModel::Structure::second_order);
    if (kind == "tracking") return make_tracking_cost(require<std::vector<double>>(j, "target"));
    throw ConfigError("unknown running cost kind: " + kind);
}

TimeGrid parse_grid(const json& j) {
    TimeGrid g;
    g.horizon = require<double>(j, "T");
    g.steps = require<int>(j, "M");
    if (g.horizon <= 0.0 || g.steps < 1) throw ConfigError("grid: need T > 0 and M >= 1");
    return g;
}

InitialMeasureSpec parse_measure(const json& j, int dim, std::uint64_t seed) {
    InitialMeasureSpec spec;
    spec.dim = dim;
    spec.seed = seed;
    const auto kind = require<std::string>(j, "kind");
    if (kind == "uniform_box") {
        spec.kind = InitialMeasureSpec::Kind::uniform_box;
        spec.lo = require<std::vector<double>>(j, "lo");
        spec.hi = require<std::vector<double>>(j, "hi");
    } else if (kind == "gaussian_truncated") {
        spec.kind = InitialMeasureSpec::Kind::gaussian_truncated;
        spec.mean = require<std::vector<double>>(j, "mean");
        spec.sigma = require<std::vector<double>>(j, "sigma");
        spec.radius = require<double>(j, "radius");
    } else if (kind == "points") {
        spec.kind = InitialMeasureSpec::Kind::points;
        for (const auto& row : j.at("points"))
            for (const auto& v : row) spec.points.push_back(v.get<double>());
    } else {
        throw ConfigError("unknown initial measure kind: " + kind);
    }
    if (spec.kind != InitialMeasureSpec::Kind::points &&
        (static_cast<int>(get_or<std::vector<double>>(j, "lo", spec.lo).size()) != dim &&
         static_cast<int>(get_or<std::vector<double>>(j, "mean", spec.mean).size()) != dim))
        throw ConfigError("initial measure dimension mismatch");
    return spec;
}

SolverConfig parse_solver(const json& cfg) {
    SolverConfig sc;
    if (!cfg.contains("solver")) return sc;
    const auto& j = cfg.at("solver");
    sc.max_iters = get_or<int>(j, "max_iters", sc.max_iters);
    sc.grad_tol = get_or<double>(j, "grad_tol", sc.grad_tol);
    sc.memory = get_or<int>(j, "memory", sc.memory);
    return sc;
}

struct Context {
    json config;
    std::string hash;
    std::uint64_t seed = 0;
    std::filesystem::path out_dir;
    int jobs = 1;

    std::string stamp() const {
        return "config_hash=" + hash + " seed=" + std::to_string(seed);
    }
};

int cmd_solve(const Context& ctx) {
    const auto& cfg = ctx.config;
    auto model = parse_model(cfg.at("model"));
    auto penalty = parse_penalty(cfg.at("penalty"), model);
    auto running = parse_running_cost(cfg.at("running_cost"));
    auto grid = parse_grid(cfg.at("grid"));
    auto mu0 = parse_measure(cfg.at("initial_measure"), model.dim, ctx.seed);
    const int N = require<int>(require<json>(cfg, "solve"), "N");
    if (N < 1) throw ConfigError("solve.N must be >= 1");

    const auto x0 = quantize(mu0, N);
    OCPSpec spec{model, x0, N, grid, running, penalty};
    const Solution sol = solve(spec, parse_solver(cfg));

    double extent = 1.0;
    for (double s : sol.traj.states) extent = std::max(extent, std::abs(s));
    const double residual = continuity_residual(
        sol.traj, sol.control, model, default_dictionary(model.dim, 1.25 * extent, ctx.seed));
    const auto moment = check_moment_bound(sol.traj, sol.control, model.growth_A, model.growth_B);
    const auto theta =
        check_theta_moment(sol.traj, sol.control, penalty.reference, model.growth_A, model.growth_B);
    const auto nu = build_control_measure(sol.traj, sol.control, model.control_subspace);

    write_trajectory_csv(ctx.out_dir / "trajectory.csv", sol.traj, ctx.stamp());
    write_controls_csv(ctx.out_dir / "controls.csv", sol.control, grid, ctx.stamp());
    write_control_measure_csv(ctx.out_dir / "control_measure.csv", nu, ctx.stamp());
    json summary = {
        {"command", "solve"},
        {"config_hash", ctx.hash},
        {"seed", ctx.seed},
        {"N", N},
        {"value", sol.value},
        {"grad_norm", sol.grad_norm},
        {"iterations", sol.iterations},
        {"converged", sol.converged},
        {"moment_slack_min", sol.moment_slack_min},
        {"moment_bound", {{"sup_norm", moment.sup_norm}, {"bound", moment.bound},
                          {"slack", moment.slack}, {"pass", moment.pass}}},
        {"theta_moment", {{"sup_moment", theta.sup_moment}, {"log_bound", theta.log_bound},
                          {"ratio", theta.ratio}, {"pass", theta.pass}}},
        {"continuity_residual", residual},
        {"cost", {{"running_term", sol.cost.running_term}, {"penalty_term", sol.cost.penalty_term},
                  {"total", sol.cost.total},
                  {"per_agent_penalty_mean", sol.cost.per_agent_penalty_mean},
                  {"measure_penalty", sol.cost.measure_penalty},
                  {"jensen_gap", sol.cost.jensen_gap}}},
        {"control_measure_mass", nu.total_variation()},
        {"warm_start_policy", "zero control"},
    };
    if (!model.growth_warning.empty()) summary["growth_warning"] = model.growth_warning;
    write_json(ctx.out_dir / "summary.json", summary);
    std::cout << "solve: value=" << format_double(sol.value) << " iterations=" << sol.iterations
              << " converged=" << (sol.converged ? "yes" : "no") << "\n";
    if (!sol.converged) std::cerr << "solve: did not reach the gradient tolerance\n";
    if (!moment.pass) std::cerr << "solve: moment bound violated\n";
    return (moment.pass && sol.converged) ? 0 : 1;
}

int cmd_sweep(const Context& ctx) {
    const auto& cfg = ctx.config;
    auto model = parse_model(cfg.at("model"));
    auto penalty = parse_penalty(cfg.at("penalty"), model);
    auto running = parse_running_cost(cfg.at("running_cost"));
    auto grid = parse_grid(cfg.at("grid"));
    auto mu0 = parse_measure(cfg.at("initial_measure"), model.dim, ctx.seed);
    if (!cfg.contains("sweep")) throw ConfigError("missing config key: sweep");
    const auto& sj = cfg.at("sweep");
    const auto schedule = require<std::vector<int>>(sj, "schedule");
    if (schedule.empty()) throw ConfigError("sweep.schedule must be nonempty");

    SweepConfig sc;
    sc.solver = parse_solver(cfg);
    sc.warm_start = get_or<bool>(sj, "warm_start", true);
    sc.ref_points = get_or<int>(sj, "ref_points", 0);
    sc.sample_times = get_or<int>(sj, "sample_times", 5);
    sc.jobs = ctx.jobs;

    SweepProblem problem{model, running, penalty, grid};
    GammaSweepResult result;
    try {
        result = gamma_sweep(problem, mu0, schedule, sc);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }

    write_sweep_csv(ctx.out_dir / "sweep.csv", result, ctx.stamp());
    json entries = json::array();
    for (const auto& e : result.entries) {
        entries.push_back({{"N", e.N},
                           {"value", e.value},
                           {"iterations", e.iterations},
                           {"converged", e.converged},
                           {"w1_init_to_ref", e.w1_init_to_ref},
                           {"sup_w1_prev", e.sup_w1_prev},
                           {"phi_moment_init", e.phi_moment_init},
                           {"max_continuity_residual", e.max_continuity_residual},
                           {"moment_slack_min", e.moment_slack_min},
                           {"wallclock_s", e.wallclock_s},
                           {"failed", e.failed},
                           {"error", e.error}});
    }
    write_json(ctx.out_dir / "sweep.json",
               {{"command", "sweep"},
                {"config_hash", ctx.hash},
                {"seed", ctx.seed},
                {"ref_points", result.ref_points},
                {"warm_start_policy", result.warm_start_policy},
                {"entries", entries}});
    for (const auto& e : result.entries)
        std::cout << "sweep: N=" << e.N << " value=" << format_double(e.value)
                  << (e.failed ? " FAILED: " + e.error : "") << "\n";
    return result.any_failed ? 2 : 0;
}

int cmd_transport(const Context& ctx) {
    const auto& cfg = ctx.config;
    if (!cfg.contains("transport")) throw ConfigError("missing config key: transport");
    const auto& tj = cfg.at("transport");
    const auto mu = read_measure_csv(require<std::string>(tj, "source"));
    const auto nu = read_measure_csv(require<std::string>(tj, "target"));

    double cost = 0.0;
    TransportPlan plan;
    std::string kind = "w1";
    if (tj.contains("psi")) kind = require<std::string>(tj.at("psi"), "kind");
    if (kind == "w1") {
        std::tie(cost, plan) = w1_general(mu, nu);
    } else {
        const double p = require<double>(tj.at("psi"), "p");
        ModeratedPenalty psi = kind == "power" ? make_power_penalty(p, Subspace::full(mu.dim))
                                               : make_hybrid_penalty(p, Subspace::full(mu.dim));
        std::tie(cost, plan) = transport_cost(psi, mu, nu);
    }
    write_plan_csv(ctx.out_dir / "plan.csv", plan, ctx.stamp());
    write_json(ctx.out_dir / "transport.json", {{"command", "transport"},
                                                {"config_hash", ctx.hash},
                                                {"seed", ctx.seed},
                                                {"ground_cost", kind},
                                                {"cost", cost},
                                                {"plan_entries", plan.entries.size()}});
    std::cout << "transport: cost=" << format_double(cost) << "\n";
    return 0;
}

int cmd_penalty_check(const Context& ctx) {
    const auto& cfg = ctx.config;
    InteractionModel scratch = make_zero_model(get_or<int>(cfg, "dim", 1));
    auto penalty = parse_penalty(cfg.at("penalty"), scratch);
    double r_max = 1e3;
    int n_grid = 1024;
    if (cfg.contains("penalty_check")) {
        r_max = get_or<double>(cfg.at("penalty_check"), "r_max", r_max);
        n_grid = get_or<int>(cfg.at("penalty_check"), "n_grid", n_grid);
    }

    const auto report = verify_admissible(penalty.reference, r_max, n_grid);
    const auto doubling = estimate_doubling_constant(penalty.reference.eval, r_max, n_grid);

    // Inf-convolution monotonicity of psi^n at seeded sample points.
    std::mt19937_64 rng(ctx.seed);
    std::uniform_real_distribution<double> unif(-3.0, 3.0);
    const int m = penalty.dim();
    double worst_mono = 0.0;
    for (int s = 0; s < 20; ++s) {
        std::vector<double> x(m);
        for (auto& v : x) v = unif(rng);
        double prev = -1e300;
        for (int n : {1, 2, 4, 8}) {
            const double val = inf_convolution(penalty.eval, penalty.reference.eval, n, x);
            worst_mono = std::max(worst_mono, prev - val);
            prev = val;
        }
        worst_mono = std::max(worst_mono, prev - penalty.eval(x));
    }
    const bool mono_pass = worst_mono <= 1e-7;

    // Young identity through the numerical conjugate.
    double worst_young = 0.0;
    for (int s = 1; s <= 25; ++s) {
        const double r = 4.0 * s / 25.0;
        const double lhs = penalty.reference.eval(r) +
                           fenchel_conjugate(penalty.reference, penalty.reference.deriv(r)) -
                           r * penalty.reference.deriv(r);
        worst_young = std::max(worst_young,
                               std::abs(lhs) / (1.0 + r * penalty.reference.deriv(r)));
    }
    const bool young_pass = worst_young <= 1e-6;

    json checks = json::array();
    for (const auto& c : report.checks)
        checks.push_back({{"name", c.name},
                          {"pass", c.pass},
                          {"worst_violation", c.worst_violation},
                          {"worst_r", c.worst_r}});
    const bool all = report.all_pass() && mono_pass && young_pass;
    write_json(ctx.out_dir / "penalty_check.json",
               {{"command", "penalty-check"},
                {"config_hash", ctx.hash},
                {"seed", ctx.seed},
                {"penalty", penalty.name},
                {"admissibility", checks},
                {"doubling_estimate", doubling.constant},
                {"doubling_unbounded", doubling.unbounded},
                {"inf_convolution_monotone", mono_pass},
                {"inf_convolution_worst_violation", worst_mono},
                {"young_identity_residual", worst_young},
                {"young_identity_pass", young_pass},
                {"pass", all}});
    std::cout << "penalty-check: " << (all ? "pass" : "FAIL")
              << " (doubling estimate " << format_double(doubling.constant) << ")\n";
    return all ? 0 : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"mean-field optimal control laboratory"};
    app.require_subcommand(1);

    std::string config_path, out_override;
    long long seed_override = -1;
    int jobs = 1;
    app.add_option("--config", config_path, "experiment configuration (JSON)")->required();
    app.add_option("--out", out_override, "output directory (overrides config)");
    app.add_option("--seed", seed_override, "seed override");
    app.add_option("--jobs", jobs, "worker cap for sweeps");

    auto* sub_solve = app.add_subcommand("solve", "quantize + solve one N-agent problem");
    auto* sub_sweep = app.add_subcommand("sweep", "convergence sweep over a schedule of N");
    auto* sub_transport = app.add_subcommand("transport", "W1 / psi-cost between measure files");
    auto* sub_penalty = app.add_subcommand("penalty-check", "admissibility and calculus checks");

    try {
        app.parse(argc, const_cast<char**>(argv));
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 3;
    }

    try {
        Context ctx;
        ctx.config = load_config(config_path);
        ctx.hash = config_hash(ctx.config);
        ctx.seed = seed_override >= 0 ? static_cast<std::uint64_t>(seed_override)
                                      : get_or<std::uint64_t>(ctx.config, "seed", 0);
        std::string out_dir = out_override.empty()
                                  ? get_or<std::string>(ctx.config, "output_dir", "out")
                                  : out_override;
        ctx.out_dir = out_dir;
        ctx.jobs = std::max(jobs, 1);
        std::filesystem::create_directories(ctx.out_dir);

        if (sub_solve->parsed()) return cmd_solve(ctx);
        if (sub_sweep->parsed()) return cmd_sweep(ctx);
        if (sub_transport->parsed()) return cmd_transport(ctx);
        if (sub_penalty->parsed()) return cmd_penalty_check(ctx);
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 3;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace mfl
