#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "roa/poly.hpp"

namespace roa {

/// One block x_i of a chain system: its variables, state box X_i and target box X^T_i.
struct Block {
    std::string name;
    VarList vars;
    Box box;
    Box target;

    [[nodiscard]] std::size_t dim() const noexcept { return vars.size(); }
    friend bool operator==(const Block&, const Block&) = default;
};

/// Polynomial ODE x_i' = f_i(x_i, x_{i+1}), x_N' = f_N(x_{N-1}, x_N), with
/// state box X, target box X^T and horizon T.
///
/// Dynamics are stored per state coordinate, over the concatenated state
/// variable list. The chain sparsity pattern is checked by validate_chain,
/// not by the constructor.
class ChainSystem {
public:
    ChainSystem() = default;
    ChainSystem(std::string name, std::vector<Block> blocks, std::vector<Polynomial> dynamics,
                double horizon);

    [[nodiscard]] const std::string& name() const noexcept { return name_; }
    [[nodiscard]] const std::vector<Block>& blocks() const noexcept { return blocks_; }
    [[nodiscard]] const Block& block(std::size_t i) const { return blocks_.at(i); }
    [[nodiscard]] std::size_t n_blocks() const noexcept { return blocks_.size(); }
    [[nodiscard]] const VarList& state_vars() const noexcept { return vars_; }
    [[nodiscard]] std::size_t dim() const noexcept { return vars_.size(); }
    [[nodiscard]] const std::vector<Polynomial>& dynamics() const noexcept { return dynamics_; }
    [[nodiscard]] double horizon() const noexcept { return horizon_; }
    /// First state index of block i.
    [[nodiscard]] std::size_t block_offset(std::size_t i) const { return offsets_.at(i); }
    /// Index of the block owning state variable `var`.
    [[nodiscard]] std::size_t block_of(std::size_t var) const;
    [[nodiscard]] Box state_box() const;
    [[nodiscard]] Box target_box() const;
    /// Largest total degree over all dynamics components (0 if f is identically zero).
    [[nodiscard]] unsigned dynamics_degree() const;

    /// Evaluators for f, one per state coordinate.
    [[nodiscard]] std::vector<PolyEvaluator> vector_field() const;

    friend bool operator==(const ChainSystem&, const ChainSystem&) = default;

private:
    std::string name_;
    std::vector<Block> blocks_;
    std::vector<Polynomial> dynamics_;
    double horizon_ = 1.0;
    VarList vars_;
    std::vector<std::size_t> offsets_;
};

/// Pair of consecutive blocks Y_j = X_j x X_{j+1}; j is 1-based.
struct Clique {
    std::size_t index = 0;
    std::size_t first_block = 0;  // 0-based index of X_j
    VarList vars;
    std::vector<std::size_t> var_indices;  // positions in the state list
    Box box;
    Box target;

    [[nodiscard]] std::size_t dim() const noexcept { return vars.size(); }
};

/// Checks the chain sparsity pattern and returns the K = N-1 cliques.
/// Throws StructuralError naming the offending term and block on violation.
std::vector<Clique> validate_chain(const ChainSystem& sys);

/// Three scalar blocks with the bicylinder dynamics, X = [-1,1]^3,
/// X^T = [-0.1,0.1]^3, T = 100.
ChainSystem bicylinder();

/// Chain of K coupled Van der Pol oscillators (n = 2K), X = [-1,1]^n,
/// X^T = [-0.1,0.1]^n, T = 30, couplings drawn from `seed`.
///
/// Variables are x_{2i-1} = y_i, x_{2i} = z_i for i < K, then x_{2K-1} = z_K
/// and x_{2K} = y_K so the last two scalar blocks respect the chain pattern.
ChainSystem vdp_chain(std::size_t k, std::uint64_t seed);

/// The coupling sample eps_1..eps_{K-1} used by vdp_chain.
std::vector<double> vdp_couplings(std::size_t k, std::uint64_t seed);

/// N scalar blocks with f = 0, X = X^T = [-1,1]^N, T = 1. Every point is in the ROA.
ChainSystem static_chain(std::size_t n_blocks = 3);

/// A system rescaled to unit boxes and unit horizon.
struct NormalizedSystem {
    ChainSystem system;            // boxes [-1,1], horizon 1
    std::vector<AffineMap> block_maps;  // normalized -> original, per block
    AffineMap state_map;           // concatenation of block_maps
    double time_scale = 1.0;       // original T

    [[nodiscard]] std::vector<double> to_normalized(std::span<const double> x) const;
    [[nodiscard]] std::vector<double> to_original(std::span<const double> y) const;
};

/// x = scale * y + offset maps [-1,1] onto each X_i coordinate, t = T * tau.
/// Normalized dynamics are T * diag(scale)^-1 f(scale * y + offset).
NormalizedSystem normalize(const ChainSystem& sys);

/// Inverse of normalize: rebuilds the original system.
ChainSystem denormalize(const NormalizedSystem& ns);

/// JSON config text for a system. load(save(s)) reproduces s up to the
/// canonical form of the dynamics strings.
std::string save_system_json(const ChainSystem& sys);
ChainSystem load_system_json(const std::string& text);
ChainSystem load_system_file(const std::string& path);
void save_system_file(const ChainSystem& sys, const std::string& path);

} // namespace roa
