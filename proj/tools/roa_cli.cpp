#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "roa/dynamics.hpp"
#include "roa/error.hpp"
#include "roa/roa.hpp"
#include "roa/validate.hpp"

namespace fs = std::filesystem;
using namespace roa;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitUsage = 2;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct RunConfig {
    std::string demo = "bicylinder";
    std::string config;
    std::string mode = "sparse";
    unsigned degree = 8;
    std::size_t k = 10;
    std::uint64_t seed = 42;
    std::size_t samples = 2000;
    double tol = 1e-8;
    double step = 0.0;
    std::string out = "out";
    unsigned threads = 1;
    bool verbose = false;
};

/// Bad flags or config contents; maps to exit code 2.
struct UsageError : Error {
    using Error::Error;
};

void add_system_flags(CLI::App* cmd, RunConfig& cfg) {
    cmd->add_option("--demo", cfg.demo, "Built-in system: bicylinder, vdp, static")->capture_default_str();
    cmd->add_option("--config", cfg.config, "System config file (JSON); overrides --demo");
    cmd->add_option("--k", cfg.k, "Van der Pol chain length")->capture_default_str();
    cmd->add_option("--seed", cfg.seed, "Seed for couplings and sampling")->capture_default_str();
}

void add_program_flags(CLI::App* cmd, RunConfig& cfg) {
    cmd->add_option("--mode", cfg.mode, "dense or sparse")->capture_default_str();
    cmd->add_option("--degree", cfg.degree, "Even relaxation degree >= 2")->capture_default_str();
}

void add_out_flag(CLI::App* cmd, RunConfig& cfg) {
    cmd->add_option("--out", cfg.out, "Output directory")->capture_default_str();
}

ChainSystem load_system(const RunConfig& cfg) {
    if (!cfg.config.empty()) return load_system_file(cfg.config);
    if (cfg.demo == "bicylinder") return bicylinder();
    if (cfg.demo == "vdp") return vdp_chain(cfg.k, cfg.seed);
    if (cfg.demo == "static") return static_chain(3);
    throw UsageError("unknown demo '" + cfg.demo + "' (see demo-list)");
}

Mode checked_mode(const RunConfig& cfg) {
    if (cfg.degree < 2 || cfg.degree % 2 != 0) {
        throw UsageError("--degree must be even and at least 2, got " + std::to_string(cfg.degree));
    }
    try {
        return mode_from_string(cfg.mode);
    } catch (const ParseError& e) {
        throw UsageError(e.what());
    }
}

fs::path out_dir(const RunConfig& cfg) {
    fs::path dir(cfg.out);
    fs::create_directories(dir);
    return dir;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << text;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t state_index(const ChainSystem& sys, const std::string& name) {
    const auto& v = sys.state_vars();
    const auto it = std::find(v.begin(), v.end(), name);
    if (it == v.end()) throw UsageError("unknown state variable '" + name + "'");
    return static_cast<std::size_t>(it - v.begin());
}

// ---------------------------------------------------------------- commands

int cmd_solve(const RunConfig& cfg) {
    const Mode mode = checked_mode(cfg);
    const ChainSystem sys = load_system(cfg);
    const auto dir = out_dir(cfg);
    nlohmann::ordered_json timings;

    auto t0 = Clock::now();
    const RoaProgram prog = build(sys, mode, cfg.degree);
    const CompiledProgram compiled = compile_with_layout(prog.program);
    timings["build"] = seconds_since(t0);
    std::printf("%s %s degree %u: %zu rows, %zu PSD blocks (max %zu), %zu free\n", sys.name().c_str(),
                to_string(mode).c_str(), cfg.degree, compiled.problem.rows.size(), compiled.problem.psd_dims.size(),
                max_block_dim(prog.program), compiled.problem.n_free);

    t0 = Clock::now();
    write_text(dir / "problem.json", export_problem(compiled.problem, ExportFormat::native_json));
    write_text(dir / "problem.dat-s", export_problem(compiled.problem, ExportFormat::sdpa_sparse));
    timings["export"] = seconds_since(t0);

    SolverOptions opt;
    opt.feasibility_tol = cfg.tol;
    opt.gap_tol = cfg.tol;
    opt.threads = cfg.threads;
    opt.verbose = cfg.verbose;
    t0 = Clock::now();
    const ConicSolution sol = solve(compiled.problem, opt);
    timings["solve"] = seconds_since(t0);
    write_text(dir / "solution.json", export_solution(sol));
    std::printf("status %s, objective %.9g, residual %.2e, min eigenvalue %.2e, %d iterations, %.2f s\n",
                to_string(sol.status).c_str(), sol.objective, sol.max_residual, sol.min_eigenvalue, sol.iterations,
                sol.seconds);

    int code = kExitOk;
    if (sol.usable()) {
        t0 = Clock::now();
        const RoaCertificate cert = extract(prog, sol);
        save_certificate_file(cert, (dir / "certificate.txt").string());
        timings["extract"] = seconds_since(t0);
        std::printf("certificate written to %s\n", (dir / "certificate.txt").string().c_str());
    } else {
        std::fprintf(stderr, "error: %s\n", sol.diagnostic.c_str());
        code = kExitFailed;
    }
    nlohmann::ordered_json log{{"system", sys.name()},
                               {"mode", to_string(mode)},
                               {"degree", cfg.degree},
                               {"status", to_string(sol.status)},
                               {"objective", sol.objective},
                               {"timings", timings}};
    write_text(dir / "timings.json", log.dump(2) + "\n");
    return code;
}

int cmd_certify(const RunConfig& cfg, const std::string& cert_path) {
    const ChainSystem sys = load_system(cfg);
    const RoaCertificate cert = load_certificate_file(cert_path);
    check_compatible(cert, sys);
    const auto dir = out_dir(cfg);

    ValidationReport rep;
    rep.system = sys.name();
    rep.mode = to_string(cert.mode());
    rep.degree = cert.degree();
    auto t0 = Clock::now();
    rep.soundness = soundness_sweep(cert, sys, cfg.samples, cfg.seed, cfg.step);
    rep.timings.emplace_back("soundness", seconds_since(t0));
    t0 = Clock::now();
    const RoaProgram prog = build(sys, cert.mode(), cert.degree());
    rep.residuals = residual_sweep(cert, prog, cfg.samples, cfg.seed);
    rep.timings.emplace_back("residuals", seconds_since(t0));
    t0 = Clock::now();
    rep.volume = mc_volume(cert, cfg.samples, cfg.seed);
    rep.timings.emplace_back("volume", seconds_since(t0));

    write_text(dir / "report.json", report_json(rep));
    std::cout << report_summary(rep);
    return rep.passed() ? kExitOk : kExitFailed;
}

int cmd_trajectories(const RunConfig& cfg, const std::string& ic_path, std::size_t stride) {
    const ChainSystem sys = load_system(cfg);
    const auto dir = out_dir(cfg);
    std::istringstream in(read_text(ic_path));
    std::ostringstream summary;
    std::string line;
    std::size_t index = 0;
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        ++index;
        std::istringstream ls(line);
        std::vector<double> x0;
        std::string tok;
        bool ok = true;
        while (ls >> tok) {
            try {
                x0.push_back(parse_double(tok));
            } catch (const ParseError&) {
                ok = false;
            }
        }
        summary << index;
        if (!ok || x0.size() != sys.dim()) {
            summary << " error: expected " << sys.dim() << " numbers\n";
            continue;
        }
        if (!sys.state_box().contains(x0)) {
            summary << " error: initial state outside X\n";
            continue;
        }
        const Trajectory traj = integrate(sys, x0, cfg.step, stride);
        const auto name = "trajectory_" + std::to_string(index) + ".txt";
        write_trajectory_file((dir / name).string(), traj, sys.state_vars(), sys.name());
        summary << ' ' << to_string(traj.status) << ' ' << name << '\n';
    }
    write_text(dir / "trajectories.txt", summary.str());
    std::cout << summary.str();
    return kExitOk;
}

int cmd_grid(const RunConfig& cfg, const std::string& cert_path, const std::vector<std::string>& axes,
             std::vector<std::size_t> resolution, const std::vector<std::string>& slice, std::size_t clause,
             const std::string& file) {
    const RoaCertificate cert = load_certificate_file(cert_path);
    // Only the variable names are needed, so the certificate stands in for the system.
    const VarList& vars = cert.state_vars();
    auto index_of = [&](const std::string& name) {
        const auto it = std::find(vars.begin(), vars.end(), name);
        if (it == vars.end()) throw UsageError("unknown state variable '" + name + "'");
        return static_cast<std::size_t>(it - vars.begin());
    };
    GridSpec spec;
    for (const auto& a : axes) spec.axes.push_back(index_of(a));
    if (resolution.size() == 1) resolution.assign(axes.size(), resolution.front());
    spec.resolution = resolution;
    spec.slice.assign(vars.size(), 0.0);
    for (const auto& s : slice) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw UsageError("--slice expects name=value, got '" + s + "'");
        try {
            spec.slice[index_of(s.substr(0, eq))] = parse_double(s.substr(eq + 1));
        } catch (const ParseError& e) {
            throw UsageError(e.what());
        }
    }
    if (clause > 0) spec.clause = clause - 1;
    const auto dir = out_dir(cfg);
    const fs::path path = file.empty() ? dir / "grid.txt" : dir / file;
    try {
        grid_export(cert, spec, path.string());
    } catch (const StructuralError& e) {
        throw UsageError(e.what());
    }
    std::printf("grid written to %s\n", path.string().c_str());
    return kExitOk;
}

int cmd_export(const RunConfig& cfg, const std::string& format) {
    const Mode mode = checked_mode(cfg);
    const ChainSystem sys = load_system(cfg);
    const auto dir = out_dir(cfg);
    const RoaProgram prog = build(sys, mode, cfg.degree);
    const ConicProblem problem = compile(prog.program);
    if (format == "json" || format == "both") write_text(dir / "problem.json", export_problem(problem, ExportFormat::native_json));
    if (format == "sdpa" || format == "both") write_text(dir / "problem.dat-s", export_problem(problem, ExportFormat::sdpa_sparse));
    std::printf("%zu rows, %zu PSD blocks (max %zu), %zu free\n", problem.rows.size(), problem.psd_dims.size(),
                max_block_dim(prog.program), problem.n_free);
    return kExitOk;
}

int cmd_demo_list(const RunConfig& cfg) {
    std::printf("bicylinder  three scalar blocks, X = [-1,1]^3, X^T = [-0.1,0.1]^3, T = 100\n");
    std::printf("vdp         chain of --k Van der Pol oscillators (n = 2k), T = 30, couplings from --seed\n");
    std::printf("static      three scalar blocks with f = 0 and X^T = X\n");
    for (const char* name : {"bicylinder", "vdp"}) {
        RunConfig c = cfg;
        c.demo = name;
        const auto sys = load_system(c);
        for (auto mode : {Mode::dense, Mode::sparse}) {
            const auto size = estimate_size(sys, mode, cfg.degree);
            std::printf("  %-10s %-6s degree %u: max Gram %zu, %zu rows\n", name, to_string(mode).c_str(), cfg.degree,
                        size.max_block_dim, size.total_rows);
        }
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse region-of-attraction outer approximations"};
    app.require_subcommand(1);
    RunConfig cfg;

    auto* solve_cmd = app.add_subcommand("solve", "Build, solve and extract a certificate");
    add_system_flags(solve_cmd, cfg);
    add_program_flags(solve_cmd, cfg);
    add_out_flag(solve_cmd, cfg);
    solve_cmd->add_option("--tol", cfg.tol, "Solver feasibility and gap tolerance")->capture_default_str();
    solve_cmd->add_option("--threads", cfg.threads, "Solver threads (0 = auto)")->capture_default_str();
    solve_cmd->add_flag("--verbose", cfg.verbose, "Print solver iterations");

    std::string cert_path;
    auto* certify_cmd = app.add_subcommand("certify", "Validate a certificate against simulated trajectories");
    certify_cmd->add_option("certificate", cert_path, "Certificate file")->required();
    add_system_flags(certify_cmd, cfg);
    add_out_flag(certify_cmd, cfg);
    certify_cmd->add_option("--samples", cfg.samples, "Samples per sweep")->capture_default_str();
    certify_cmd->add_option("--step", cfg.step, "RK4 step (0 = T/1e4)");

    std::string ic_path;
    std::size_t stride = 1;
    auto* traj_cmd = app.add_subcommand("trajectories", "Integrate listed initial conditions");
    traj_cmd->add_option("initial_conditions", ic_path, "File with one initial state per line")->required();
    add_system_flags(traj_cmd, cfg);
    add_out_flag(traj_cmd, cfg);
    traj_cmd->add_option("--step", cfg.step, "RK4 step (0 = T/1e4)");
    traj_cmd->add_option("--stride", stride, "Keep every n-th sample")->capture_default_str();

    std::vector<std::string> axes, slice;
    std::vector<std::size_t> resolution{101};
    std::size_t clause = 0;
    std::string grid_file;
    auto* grid_cmd = app.add_subcommand("grid", "Sample membership margins on a grid");
    grid_cmd->add_option("certificate", cert_path, "Certificate file")->required();
    grid_cmd->add_option("--axes", axes, "Free state variables (1 to 3)")->required()->delimiter(',');
    grid_cmd->add_option("--resolution", resolution, "Points per axis")->delimiter(',')->capture_default_str();
    grid_cmd->add_option("--slice", slice, "Fixed values name=value for other states")->delimiter(',');
    grid_cmd->add_option("--clause", clause, "Use only this clause (1-based); 0 = all")->capture_default_str();
    grid_cmd->add_option("--file", grid_file, "File name inside --out");
    add_out_flag(grid_cmd, cfg);

    std::string format = "both";
    auto* export_cmd = app.add_subcommand("export-sdp", "Write the conic problem without solving");
    add_system_flags(export_cmd, cfg);
    add_program_flags(export_cmd, cfg);
    add_out_flag(export_cmd, cfg);
    export_cmd->add_option("--format", format, "json, sdpa or both")
        ->check(CLI::IsMember({"json", "sdpa", "both"}))
        ->capture_default_str();

    auto* list_cmd = app.add_subcommand("demo-list", "List built-in systems and their program sizes");
    list_cmd->add_option("--degree", cfg.degree, "Degree for the size table")->capture_default_str();
    list_cmd->add_option("--k", cfg.k, "Van der Pol chain length")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*solve_cmd) return cmd_solve(cfg);
        if (*certify_cmd) return cmd_certify(cfg, cert_path);
        if (*traj_cmd) return cmd_trajectories(cfg, ic_path, stride);
        if (*grid_cmd) return cmd_grid(cfg, cert_path, axes, resolution, slice, clause, grid_file);
        if (*export_cmd) return cmd_export(cfg, format);
        if (*list_cmd) return cmd_demo_list(cfg);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return kExitUsage;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitUsage;
    } catch (const StructuralError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitFailed;
    }
    return kExitUsage;
}
