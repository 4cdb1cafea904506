#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "roa/dynamics.hpp"
#include "roa/roa.hpp"

namespace roa {

/// Margin below which a clause counts as violated (normalized coordinates).
inline constexpr double kMarginTolerance = -1e-6;

struct Witness {
    std::vector<double> x0;  // original coordinates
    double margin = 0.0;
};

struct SoundnessResult {
    std::size_t samples = 0;
    std::size_t confirmed = 0;    // reached X^T at both h and h/2
    std::size_t unconfirmed = 0;  // reached X^T at h only; skipped
    std::size_t violations = 0;
    double worst_margin = 0.0;    // over confirmed points; +inf when there are none
    std::vector<Witness> witnesses;  // first violations, at most max_witnesses
    double seconds = 0.0;

    [[nodiscard]] bool passed() const noexcept { return violations == 0; }
};

struct ConstraintResidual {
    std::string name;
    double minimum = 0.0;
    std::vector<double> argmin;  // program variables
};

struct VolumeEstimate {
    std::size_t samples = 0;
    std::size_t members = 0;
    double estimate = 0.0;
    double std_error = 0.0;
};

/// Throws StructuralError unless the certificate was built for `sys`.
void check_compatible(const RoaCertificate& cert, const ChainSystem& sys);

/// Uniform samples of X; every point whose RK4 trajectory reaches X^T at
/// steps h and h/2 must satisfy member() with margin >= tol.
SoundnessResult soundness_sweep(const RoaCertificate& cert, const ChainSystem& sys, std::size_t n_samples,
                                std::uint64_t seed, double h = 0.0, double tol = kMarginTolerance,
                                std::size_t max_witnesses = 10);

/// Smallest value of every constraint target over uniform samples of its
/// domain, with the decision polynomials taken from `cert`.
std::vector<ConstraintResidual> residual_sweep(const RoaCertificate& cert, const RoaProgram& prog,
                                               std::size_t n_samples, std::uint64_t seed);

/// Fraction of uniform X samples that are members, times vol(X).
VolumeEstimate mc_volume(const RoaCertificate& cert, std::size_t n_samples, std::uint64_t seed);

/// Regular grid over up to three state axes; the remaining coordinates
/// are fixed at `slice` (original coordinates, one entry per state).
struct GridSpec {
    std::vector<std::size_t> axes;
    std::vector<std::size_t> resolution;  // one per axis, each >= 2
    std::vector<double> slice;            // empty means all zeros
    std::optional<std::size_t> clause;    // 0-based clause; default is the minimum over all
};

struct GridData {
    std::vector<std::string> axis_names;
    std::vector<std::size_t> resolution;
    std::vector<double> slice;
    std::vector<std::vector<double>> rows;  // axis coordinates followed by the margin
};

GridData grid_sample(const RoaCertificate& cert, const GridSpec& spec);
void write_grid(std::ostream& out, const RoaCertificate& cert, const GridSpec& spec, const GridData& grid);
void grid_export(const RoaCertificate& cert, const GridSpec& spec, const std::string& path);

struct ValidationReport {
    std::string system;
    std::string mode;
    unsigned degree = 0;
    std::optional<SoundnessResult> soundness;
    std::vector<ConstraintResidual> residuals;
    std::optional<VolumeEstimate> volume;
    std::vector<std::pair<std::string, double>> timings;  // phase, seconds

    [[nodiscard]] bool residuals_ok(double tol = kMarginTolerance) const;
    [[nodiscard]] bool passed(double tol = kMarginTolerance) const;
};

/// Versioned JSON text.
std::string report_json(const ValidationReport& report);
/// Human-readable summary.
std::string report_summary(const ValidationReport& report);

} // namespace roa
