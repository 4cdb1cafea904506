#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "roa/conic.hpp"
#include "roa/poly.hpp"

namespace roa {

/// constant + sum_k linear[k].second * y[linear[k].first], slots ascending.
struct AffineCoeff {
    double constant = 0.0;
    std::vector<std::pair<std::uint32_t, double>> linear;

    [[nodiscard]] bool is_zero() const noexcept { return constant == 0.0 && linear.empty(); }
    [[nodiscard]] double evaluate(const std::vector<double>& y) const;
    AffineCoeff& operator+=(const AffineCoeff& other);
    AffineCoeff& operator*=(double s);
    friend bool operator==(const AffineCoeff&, const AffineCoeff&) = default;
};

/// Polynomial whose coefficients are affine in the global decision vector.
class AffinePoly {
public:
    using TermMap = std::map<Monomial, AffineCoeff>;

    AffinePoly() = default;
    explicit AffinePoly(VarList vars) : vars_(std::move(vars)) {}

    /// Constant coefficients only; `p` must live on `vars`.
    static AffinePoly from_polynomial(const Polynomial& p);

    [[nodiscard]] const VarList& vars() const noexcept { return vars_; }
    [[nodiscard]] const TermMap& terms() const noexcept { return terms_; }
    /// Largest degree of a monomial with a structurally nonzero coefficient.
    [[nodiscard]] int degree() const;

    void add_term(const Monomial& m, const AffineCoeff& c);

    AffinePoly& operator+=(const AffinePoly& other);
    AffinePoly& operator-=(const AffinePoly& other);
    AffinePoly& operator*=(double s);
    friend AffinePoly operator+(AffinePoly a, const AffinePoly& b) { return a += b; }
    friend AffinePoly operator-(AffinePoly a, const AffinePoly& b) { return a -= b; }
    friend AffinePoly operator-(AffinePoly a) { return a *= -1.0; }
    friend AffinePoly operator+(AffinePoly a, const Polynomial& b) { return a += from_polynomial(b); }
    friend AffinePoly operator-(AffinePoly a, const Polynomial& b) { return a -= from_polynomial(b); }

    /// Product with a fixed polynomial on the same variables.
    [[nodiscard]] AffinePoly multiply(const Polynomial& p) const;
    [[nodiscard]] AffinePoly partial_derivative(std::size_t var) const;
    [[nodiscard]] AffinePoly fix_variable(std::size_t var, double value) const;
    /// The polynomial obtained for a concrete decision vector.
    [[nodiscard]] Polynomial instantiate(const std::vector<double>& y) const;

private:
    void check_same_vars(const AffinePoly& other) const;
    VarList vars_;
    TermMap terms_;
};

/// Unknown polynomial over a subset of the program variables, with one
/// decision slot per monomial of monomial_basis(|vars|, degree).
struct DecisionPoly {
    std::string name;
    VarList vars;
    std::vector<std::size_t> var_indices;  // positions in the program variable list
    unsigned degree = 0;
    std::vector<Monomial> basis;           // over `vars`
    std::uint32_t first_slot = 0;

    [[nodiscard]] std::size_t n_slots() const noexcept { return basis.size(); }
};

/// {z : g_l(s) >= 0 for all l} over named variables, where the generators
/// are written in chart coordinates s with z = center + half * s (s = z
/// when the chart is empty). `box` bounds z.
struct SemialgebraicDomain {
    VarList vars;
    Box box;
    std::vector<Polynomial> generators;  // over `vars`, in chart coordinates
    bool has_ball = false;
    std::vector<double> center, half;

    [[nodiscard]] bool has_chart() const noexcept { return !center.empty(); }
    /// Chart coordinates of a point given in domain variables.
    [[nodiscard]] std::vector<double> to_chart(std::span<const double> z) const;
};

/// The box in its centered unit chart: one generator (1 + s_c)(1 - s_c) per
/// coordinate plus the ball k - |s|^2.
SemialgebraicDomain box_domain(VarList vars, const Box& box);

/// No generators: Putinar reduces to a plain SOS condition.
SemialgebraicDomain free_domain(VarList vars);

/// target >= 0 on domain, certified at relaxation order `order`.
struct SosConstraint {
    std::string name;
    AffinePoly target;  // over the program variables
    SemialgebraicDomain domain;
    unsigned order = 1;
};

/// Decision polynomials, Putinar constraints and a linear objective.
class SosProgram {
public:
    SosProgram() = default;
    explicit SosProgram(VarList vars) : vars_(std::move(vars)) {}

    [[nodiscard]] const VarList& vars() const noexcept { return vars_; }
    [[nodiscard]] const std::vector<DecisionPoly>& decisions() const noexcept { return decisions_; }
    [[nodiscard]] const std::vector<SosConstraint>& constraints() const noexcept { return constraints_; }
    [[nodiscard]] const std::map<std::uint32_t, double>& objective() const noexcept { return objective_; }
    [[nodiscard]] std::size_t n_slots() const noexcept { return n_slots_; }

    /// Declare an unknown polynomial of the given degree over `vars`.
    const DecisionPoly& add_decision(const std::string& name, const VarList& vars, unsigned degree);
    /// Same, restricted to the given monomials over `vars`.
    const DecisionPoly& add_decision(const std::string& name, const VarList& vars, std::vector<Monomial> basis);
    [[nodiscard]] const DecisionPoly& decision(const std::string& name) const;
    /// The named decision polynomial as an affine polynomial over vars().
    [[nodiscard]] AffinePoly affine(const std::string& name) const;

    /// Adds `target >= 0 on domain`. The default order is
    /// max(1, ceil(deg(target) / 2)).
    void add_constraint(const std::string& name, AffinePoly target, SemialgebraicDomain domain,
                        std::optional<unsigned> order = std::nullopt);

    /// objective += weight * integral of decision `name` over `box`.
    void add_integral_objective(const std::string& name, const Box& box, double weight = 1.0);
    void add_objective(std::uint32_t slot, double weight);

    /// Values of every decision polynomial for a decision vector.
    [[nodiscard]] std::map<std::string, Polynomial> instantiate(const std::vector<double>& y) const;

private:
    VarList vars_;
    std::vector<DecisionPoly> decisions_;
    std::vector<SosConstraint> constraints_;
    std::map<std::uint32_t, double> objective_;
    std::size_t n_slots_ = 0;
};

/// Gram block of one Putinar term sigma_l * g_l.
struct GramBlockLayout {
    std::vector<Monomial> basis;  // over the domain variables
    Polynomial multiplier;        // g_l, or the constant 1 for sigma_0
};

/// Output of putinar_expand: blocks numbered from 0, free entries
/// addressing decision slots, one row per chart monomial.
struct PutinarExpansion {
    std::vector<GramBlockLayout> blocks;
    std::vector<EqualityRow> rows;
};

PutinarExpansion putinar_expand(const SosConstraint& c);

struct ConstraintLayout {
    std::size_t first_row = 0;
    std::size_t n_rows = 0;
    std::size_t first_block = 0;
    std::vector<GramBlockLayout> blocks;  // bases and multipliers in chart coordinates
    SemialgebraicDomain domain;
};

struct CompiledProgram {
    ConicProblem problem;
    std::vector<ConstraintLayout> layouts;  // one per constraint, in order
};

/// Free variables are the decision slots, PSD blocks the Gram matrices,
/// rows the union of all coefficient-matching equalities.
ConicProblem compile(const SosProgram& prog);
CompiledProgram compile_with_layout(const SosProgram& prog);

/// Largest Gram dimension across constraints (0 for an empty program).
std::size_t max_block_dim(const SosProgram& prog);

/// sum_l b_l(s)^T Q_l b_l(s) g_l(s) at a point given in domain variables.
double gram_value(const ConstraintLayout& layout, const std::vector<Eigen::MatrixXd>& blocks,
                  std::span<const double> point);

/// Largest |target(z) - gram_value(z)| over `n_points` uniform samples of the
/// domain box, for every constraint of a compiled program.
std::vector<double> reconstruction_errors(const SosProgram& prog, const CompiledProgram& compiled,
                                          const ConicSolution& sol, std::size_t n_points, std::uint64_t seed);

} // namespace roa
