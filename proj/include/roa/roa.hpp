#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "roa/conic.hpp"
#include "roa/sos.hpp"
#include "roa/system.hpp"

namespace roa {

enum class Mode { dense, sparse };

std::string to_string(Mode m);
Mode mode_from_string(std::string_view s);

/// A built ROA program together with the normalization it was built in.
///
/// Program variables are "t" followed by the state variables; time runs
/// over [0,1] and every state box is [-1,1].
struct RoaProgram {
    Mode mode = Mode::dense;
    unsigned degree = 0;
    NormalizedSystem normalized;
    std::vector<Clique> cliques;  // normalized; empty in dense mode
    SosProgram program;
};

/// min int_X w  s.t.  w >= v(0,.) + 1 and w >= 0 on X,
/// -dv/dt - grad v . f >= 0 on [0,1] x X,  v(1,.) >= 0 on X^T.
RoaProgram build_dense(const ChainSystem& sys, unsigned degree);

/// Clique-wise program over Y_j = X_j x X_{j+1}; delegates to build_dense
/// when the chain has two blocks.
RoaProgram build_sparse(const ChainSystem& sys, unsigned degree);

RoaProgram build(const ChainSystem& sys, Mode mode, unsigned degree);

/// Shape of one constraint as the builders would declare it.
struct ConstraintShape {
    std::string name;
    std::size_t n_vars = 0;
    int target_degree = 0;

    [[nodiscard]] unsigned order() const { return target_degree <= 2 ? 1u : static_cast<unsigned>((target_degree + 1) / 2); }
    [[nodiscard]] std::size_t gram_dim() const { return binomial(n_vars + order(), order()); }
    [[nodiscard]] std::size_t n_rows() const { return binomial(n_vars + 2 * order(), n_vars); }
};

struct ProgramSize {
    std::vector<ConstraintShape> constraints;
    std::size_t max_block_dim = 0;
    std::size_t total_rows = 0;
};

/// Closed-form size of the program build() would produce, without building it.
ProgramSize estimate_size(const ChainSystem& sys, Mode mode, unsigned degree);

/// Result of a membership query.
struct Membership {
    bool in_domain = false;  // x0 in X; when false, `member` is false and `margin` is -inf
    bool member = false;
    double margin = 0.0;     // smallest clause value, normalized coordinates
};

/// Feasible polynomials of a solved ROA program, stored in normalized
/// coordinates. The set is {x in X : every clause >= 0}; a clause is
/// v(0,x) (dense), v_j1(0,x_j) + v_j2(0,x_{j+1}) (sparse, j < K) or
/// v_K(0,x_K,x_N) (sparse, last clique).
class RoaCertificate {
public:
    RoaCertificate() = default;
    RoaCertificate(Mode mode, unsigned degree, std::string system_name, VarList state_vars,
                   std::vector<std::size_t> block_sizes, AffineMap state_map, double time_scale,
                   std::map<std::string, Polynomial> polys, double objective);

    [[nodiscard]] Mode mode() const noexcept { return mode_; }
    [[nodiscard]] unsigned degree() const noexcept { return degree_; }
    [[nodiscard]] const std::string& system_name() const noexcept { return system_name_; }
    [[nodiscard]] const VarList& state_vars() const noexcept { return state_vars_; }
    [[nodiscard]] const std::vector<std::size_t>& block_sizes() const noexcept { return block_sizes_; }
    [[nodiscard]] const AffineMap& state_map() const noexcept { return state_map_; }
    [[nodiscard]] double time_scale() const noexcept { return time_scale_; }
    [[nodiscard]] const std::map<std::string, Polynomial>& polys() const noexcept { return polys_; }
    [[nodiscard]] const Polynomial& poly(const std::string& name) const;
    [[nodiscard]] double objective() const noexcept { return objective_; }
    [[nodiscard]] std::size_t n_clauses() const noexcept { return clauses_.size(); }
    /// Number of w polynomials (1 dense, K sparse).
    [[nodiscard]] std::size_t n_cliques() const noexcept;

    /// Clause values at a point given in original coordinates (no domain check).
    [[nodiscard]] std::vector<double> clause_values(std::span<const double> x0) const;
    [[nodiscard]] Membership member(std::span<const double> x0) const;
    /// Sum over cliques of the integral of w_j over Y_j, original coordinates.
    [[nodiscard]] double w_integral() const;

private:
    struct Term {
        PolyEvaluator eval;                // p(0, .) over the listed states
        std::vector<std::size_t> states;   // state indices in evaluation order
    };
    struct Clause {
        std::vector<Term> terms;
    };
    void build_clauses();

    Mode mode_ = Mode::dense;
    unsigned degree_ = 0;
    std::string system_name_;
    VarList state_vars_;
    std::vector<std::size_t> block_sizes_;
    AffineMap state_map_;
    double time_scale_ = 1.0;
    std::map<std::string, Polynomial> polys_;
    double objective_ = 0.0;
    std::vector<Clause> clauses_;
};

/// Reads the decision polynomials of a usable solution. Throws SolveError
/// when the solution is not usable.
RoaCertificate extract(const RoaProgram& prog, const ConicSolution& sol);

/// Versioned text form; load(save(c)) gives bit-identical member() results.
std::string save_certificate(const RoaCertificate& cert);
RoaCertificate load_certificate(std::string_view text);
void save_certificate_file(const RoaCertificate& cert, const std::string& path);
RoaCertificate load_certificate_file(const std::string& path);

} // namespace roa
