#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace roa {

struct SparseEntry {
    std::uint32_t index = 0;
    double value = 0.0;
    friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

/// Entry (row, col) of a symmetric coefficient matrix in PSD block `block`,
/// row <= col. An off-diagonal entry stands for both (row, col) and (col, row).
struct PsdEntry {
    std::uint32_t block = 0;
    std::uint32_t row = 0;
    std::uint32_t col = 0;
    double value = 0.0;
    friend bool operator==(const PsdEntry&, const PsdEntry&) = default;
};

/// sum_j free_j * y_j + sum_k <A_k, X_k> = rhs
struct EqualityRow {
    std::vector<SparseEntry> free;
    std::vector<PsdEntry> psd;
    double rhs = 0.0;
    friend bool operator==(const EqualityRow&, const EqualityRow&) = default;
};

/// Equality-form semidefinite program
///
///     minimize  c^T y   subject to  B y + A(X) = b,  X_k PSD,  y free.
struct ConicProblem {
    std::size_t n_free = 0;
    std::vector<std::size_t> psd_dims;
    std::vector<SparseEntry> objective;
    std::vector<EqualityRow> rows;

    [[nodiscard]] std::size_t n_rows() const noexcept { return rows.size(); }
    /// Throws StructuralError when an index is out of range or row > col.
    void validate() const;

    friend bool operator==(const ConicProblem&, const ConicProblem&) = default;
};

enum class SolveStatus { optimal, near_optimal, infeasible, unbounded, failed };

std::string to_string(SolveStatus s);
SolveStatus status_from_string(std::string_view s);

/// What the backend hands back before artifact-side verification.
struct RawSolution {
    SolveStatus status = SolveStatus::failed;
    std::vector<double> free_values;
    std::vector<Eigen::MatrixXd> blocks;
    double dual_objective = 0.0;
    int iterations = 0;
    std::string message;
};

struct ConicSolution {
    SolveStatus status = SolveStatus::failed;
    std::vector<double> free_values;
    std::vector<Eigen::MatrixXd> blocks;
    double objective = 0.0;       // c^T y, recomputed
    double dual_objective = 0.0;  // as reported by the backend
    /// max_i |b_i - row_i(y, X)| / max(1, ||row_i||)
    double max_residual = 0.0;
    /// Smallest eigenvalue over all PSD blocks (+inf when there are none).
    double min_eigenvalue = 0.0;
    int iterations = 0;
    double seconds = 0.0;
    std::string diagnostic;

    [[nodiscard]] bool usable() const noexcept {
        return status == SolveStatus::optimal || status == SolveStatus::near_optimal;
    }
};

struct SolverOptions {
    double feasibility_tol = 1e-8;
    double gap_tol = 1e-8;
    int max_iterations = 200;
    /// Independent components are solved on up to this many threads (0 = hardware).
    unsigned threads = 1;
    /// Project Gram blocks back onto the equality constraints after convergence.
    bool polish = true;
    bool verbose = false;
};

/// Residual/eigenvalue thresholds a usable solution must meet after ingestion.
inline constexpr double kMaxEqualityResidual = 1e-6;
inline constexpr double kMinGramEigenvalue = -1e-7;

/// Solve with the built-in primal-dual interior-point backend, then ingest.
ConicSolution solve(const ConicProblem& problem, const SolverOptions& options = {});

/// Recompute objective, residual and eigenvalue diagnostics from raw backend
/// output; downgrades the status to failed when the checks do not hold.
ConicSolution ingest(const ConicProblem& problem, RawSolution raw);

/// Per-row residual b_i - row_i(y, X) for a candidate point.
std::vector<double> equality_residuals(const ConicProblem& problem, const std::vector<double>& free_values,
                                       const std::vector<Eigen::MatrixXd>& blocks);

enum class ExportFormat { native_json, sdpa_sparse };

std::string export_problem(const ConicProblem& problem, ExportFormat format);
ConicProblem import_problem(std::string_view text, ExportFormat format);

/// Versioned JSON dump of a solution (status, diagnostics, values, blocks).
std::string export_solution(const ConicSolution& sol);

namespace detail {
/// Backend entry point: no verification, no ingestion.
RawSolution interior_point(const ConicProblem& problem, const SolverOptions& options);
} // namespace detail

} // namespace roa
