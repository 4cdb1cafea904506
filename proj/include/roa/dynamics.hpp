#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "roa/system.hpp"

namespace roa {

enum class TrajectoryStatus { reached_target, left_state_box, blowup, horizon_in_X_missed_target };

std::string to_string(TrajectoryStatus s);
TrajectoryStatus trajectory_status_from_string(std::string_view s);

/// left_state_box or blowup.
[[nodiscard]] inline bool is_unstable(TrajectoryStatus s) {
    return s == TrajectoryStatus::left_state_box || s == TrajectoryStatus::blowup;
}

/// States are in original coordinates. When integration stops early the
/// last row is the first state outside X (possibly non-finite on blowup).
struct Trajectory {
    std::vector<double> times;
    std::vector<std::vector<double>> states;
    TrajectoryStatus status = TrajectoryStatus::horizon_in_X_missed_target;
    double step = 0.0;
};

/// Magnitude above which a normalized state counts as escaped.
inline constexpr double kBlowupThreshold = 1e6;

/// Default RK4 step h = T / 10^4.
[[nodiscard]] double default_step(const ChainSystem& sys);

/// Fixed-step classic RK4 on [0, T]. The step is shrunk to T / ceil(T / h)
/// so the last node lands on T. `record_every` thins the stored samples; the
/// first and last states are always kept. h <= 0 selects default_step.
Trajectory integrate(const ChainSystem& sys, std::span<const double> x0, double h = 0.0,
                     std::size_t record_every = 1);

/// Reusable integrator for classification sweeps; no samples are stored.
class Classifier {
public:
    explicit Classifier(const ChainSystem& sys);

    [[nodiscard]] TrajectoryStatus classify(std::span<const double> x0, double h = 0.0) const;

private:
    ChainSystem sys_;
    std::vector<PolyEvaluator> field_;
    Box box_;
    Box target_;
    AffineMap to_unit_;
};

/// True iff the trajectory reaches X^T at T without leaving X. Throws
/// DomainError when x0 is outside X.
bool in_roa(const ChainSystem& sys, std::span<const double> x0, double h = 0.0);

/// Tabular text: '#' header lines, a column line `t <vars>`, one row per
/// sample and a `# status <name>` footer.
void write_trajectory(std::ostream& out, const Trajectory& traj, const VarList& vars, std::string_view system_name);
void write_trajectory_file(const std::string& path, const Trajectory& traj, const VarList& vars,
                           std::string_view system_name);

/// Reads back the samples and status written by write_trajectory.
Trajectory read_trajectory(std::istream& in);

} // namespace roa
