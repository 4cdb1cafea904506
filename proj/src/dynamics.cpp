#include "roa/dynamics.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "roa/error.hpp"

namespace roa {

namespace {

constexpr std::string_view kTrajectoryHeader = "# roa-trajectory 1";

class Rk4 {
public:
    Rk4(const std::vector<PolyEvaluator>& field, std::size_t n)
        : field_(field), k1_(n), k2_(n), k3_(n), k4_(n), tmp_(n) {}

    void step(std::vector<double>& x, double h) {
        const std::size_t n = x.size();
        eval(x, k1_);
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = x[i] + 0.5 * h * k1_[i];
        eval(tmp_, k2_);
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = x[i] + 0.5 * h * k2_[i];
        eval(tmp_, k3_);
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = x[i] + h * k3_[i];
        eval(tmp_, k4_);
        for (std::size_t i = 0; i < n; ++i) x[i] += h / 6.0 * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
    }

private:
    void eval(const std::vector<double>& x, std::vector<double>& out) const {
        for (std::size_t i = 0; i < field_.size(); ++i) out[i] = field_[i](x);
    }

    const std::vector<PolyEvaluator>& field_;
    std::vector<double> k1_, k2_, k3_, k4_, tmp_;
};

struct Grid {
    std::size_t steps;
    double h;
};

Grid make_grid(double horizon, double h) {
    if (!(h > 0.0)) h = horizon / 1e4;
    const auto steps = static_cast<std::size_t>(std::ceil(horizon / h - 1e-9));
    return {std::max<std::size_t>(steps, 1), horizon / static_cast<double>(std::max<std::size_t>(steps, 1))};
}

bool escaped(const std::vector<double>& x, const AffineMap& to_unit) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double y = to_unit.scale()[i] * x[i] + to_unit.offset()[i];
        if (!std::isfinite(y) || std::abs(y) > kBlowupThreshold) return true;
    }
    return false;
}

// Runs RK4 and reports the status; `visit(k, x)` sees every node.
template <class Visit>
TrajectoryStatus run(const std::vector<PolyEvaluator>& field, const Box& box, const Box& target,
                     const AffineMap& to_unit, std::vector<double> x, Grid grid, Visit&& visit) {
    Rk4 rk(field, x.size());
    visit(std::size_t{0}, x);
    for (std::size_t k = 1; k <= grid.steps; ++k) {
        rk.step(x, grid.h);
        const bool last = k == grid.steps;
        if (escaped(x, to_unit)) {
            visit(k, x);
            return TrajectoryStatus::blowup;
        }
        if (!box.contains(x)) {
            visit(k, x);
            return TrajectoryStatus::left_state_box;
        }
        if (last) {
            visit(k, x);
            return target.contains(x) ? TrajectoryStatus::reached_target
                                      : TrajectoryStatus::horizon_in_X_missed_target;
        }
        visit(k, x);
    }
    return TrajectoryStatus::horizon_in_X_missed_target;
}

AffineMap unit_map(const ChainSystem& sys) { return AffineMap::from_unit_box(sys.state_box()).inverse(); }

void check_dim(const ChainSystem& sys, std::span<const double> x0) {
    if (x0.size() != sys.dim()) {
        throw StructuralError("initial state has " + std::to_string(x0.size()) + " entries, system has " +
                              std::to_string(sys.dim()));
    }
}

} // namespace

std::string to_string(TrajectoryStatus s) {
    switch (s) {
    case TrajectoryStatus::reached_target: return "reached_target";
    case TrajectoryStatus::left_state_box: return "left_state_box";
    case TrajectoryStatus::blowup: return "blowup";
    case TrajectoryStatus::horizon_in_X_missed_target: return "horizon_in_X_missed_target";
    }
    return "unknown";
}

TrajectoryStatus trajectory_status_from_string(std::string_view s) {
    for (auto st : {TrajectoryStatus::reached_target, TrajectoryStatus::left_state_box, TrajectoryStatus::blowup,
                    TrajectoryStatus::horizon_in_X_missed_target}) {
        if (s == to_string(st)) return st;
    }
    throw ParseError("unknown trajectory status '" + std::string(s) + "'");
}

double default_step(const ChainSystem& sys) { return sys.horizon() / 1e4; }

Trajectory integrate(const ChainSystem& sys, std::span<const double> x0, double h, std::size_t record_every) {
    check_dim(sys, x0);
    const auto field = sys.vector_field();
    const Grid grid = make_grid(sys.horizon(), h);
    record_every = std::max<std::size_t>(record_every, 1);
    Trajectory traj;
    traj.step = grid.h;
    std::vector<double> start(x0.begin(), x0.end());
    traj.status = run(field, sys.state_box(), sys.target_box(), unit_map(sys), start, grid,
                      [&](std::size_t k, const std::vector<double>& x) {
                          traj.times.push_back(static_cast<double>(k) * grid.h);
                          traj.states.push_back(x);
                      });
    // Thin after the fact so the terminal sample is always present.
    if (record_every > 1 && traj.times.size() > 2) {
        std::size_t keep = 0;
        const std::size_t last = traj.times.size() - 1;
        for (std::size_t i = 0; i <= last; ++i) {
            if (i % record_every != 0 && i != last) continue;
            if (keep != i) {
                traj.times[keep] = traj.times[i];
                traj.states[keep] = std::move(traj.states[i]);
            }
            ++keep;
        }
        traj.times.resize(keep);
        traj.states.resize(keep);
    }
    return traj;
}

Classifier::Classifier(const ChainSystem& sys)
    : sys_(sys), field_(sys.vector_field()), box_(sys.state_box()), target_(sys.target_box()),
      to_unit_(unit_map(sys)) {}

TrajectoryStatus Classifier::classify(std::span<const double> x0, double h) const {
    check_dim(sys_, x0);
    std::vector<double> start(x0.begin(), x0.end());
    return run(field_, box_, target_, to_unit_, std::move(start), make_grid(sys_.horizon(), h),
               [](std::size_t, const std::vector<double>&) {});
}

bool in_roa(const ChainSystem& sys, std::span<const double> x0, double h) {
    check_dim(sys, x0);
    if (!sys.state_box().contains(x0)) throw DomainError("initial state lies outside the state box X");
    return Classifier(sys).classify(x0, h) == TrajectoryStatus::reached_target;
}

void write_trajectory(std::ostream& out, const Trajectory& traj, const VarList& vars, std::string_view system_name) {
    out << kTrajectoryHeader << '\n';
    out << "# system " << system_name << '\n';
    out << "# step " << format_double(traj.step) << '\n';
    out << 't';
    for (const auto& v : vars) out << ' ' << v;
    out << '\n';
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        out << format_double(traj.times[i]);
        for (double x : traj.states[i]) out << ' ' << format_double(x);
        out << '\n';
    }
    out << "# status " << to_string(traj.status) << '\n';
}

void write_trajectory_file(const std::string& path, const Trajectory& traj, const VarList& vars,
                           std::string_view system_name) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    write_trajectory(out, traj, vars, system_name);
}

Trajectory read_trajectory(std::istream& in) {
    Trajectory traj;
    std::string line;
    if (!std::getline(in, line) || line != kTrajectoryHeader) throw ParseError("not a trajectory file");
    bool columns = false, status = false;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        if (line[0] == '#') {
            std::string hash, key, value;
            ls >> hash >> key >> value;
            if (key == "step") traj.step = parse_double(value);
            if (key == "status") {
                traj.status = trajectory_status_from_string(value);
                status = true;
            }
            continue;
        }
        if (!columns) {
            std::string name;
            while (ls >> name) ++width;
            if (width < 2) throw ParseError("trajectory column line needs t and at least one state");
            columns = true;
            continue;
        }
        std::vector<double> row;
        std::string tok;
        while (ls >> tok) row.push_back(parse_double(tok));
        if (row.size() != width) throw ParseError("trajectory row has " + std::to_string(row.size()) + " columns");
        traj.times.push_back(row[0]);
        traj.states.emplace_back(row.begin() + 1, row.end());
    }
    if (!status) throw ParseError("trajectory file lacks a status footer");
    return traj;
}

} // namespace roa
