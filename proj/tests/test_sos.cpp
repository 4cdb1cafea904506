#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "roa/error.hpp"
#include "roa/sos.hpp"

using namespace roa;

namespace {

SosConstraint fixed_constraint(const Polynomial& target, SemialgebraicDomain dom, unsigned order) {
    return {"c", AffinePoly::from_polynomial(target), std::move(dom), order};
}

// Random polynomial with integer-free uniform coefficients on all monomials of degree <= deg.
Polynomial random_poly(const VarList& vars, unsigned deg, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Polynomial::TermMap terms;
    for (const auto& m : monomial_basis(vars.size(), deg)) terms.emplace(m, u(rng));
    return Polynomial(vars, std::move(terms));
}

// Explicit Gram point of sum_k q_k^2 in the basis monomial_basis(dim, half).
Eigen::MatrixXd explicit_gram(const std::vector<Polynomial>& squares, std::size_t dim, unsigned half) {
    const auto basis = monomial_basis(dim, half);
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(basis.size()),
                                              static_cast<Eigen::Index>(basis.size()));
    for (const auto& q : squares) {
        Eigen::VectorXd c = Eigen::VectorXd::Zero(Q.rows());
        for (std::size_t i = 0; i < basis.size(); ++i) c(static_cast<Eigen::Index>(i)) = q.coefficient(basis[i]);
        Q += c * c.transpose();
    }
    return Q;
}

Polynomial motzkin() {
    return Polynomial::parse("x^4*y^2 + x^2*y^4 - 3*x^2*y^2 + 1", {"x", "y"});
}

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

} // namespace

TEST(Sos, UnivariateOrderOneHasThreeRows) {
    const VarList v{"x"};
    const auto exp = putinar_expand(fixed_constraint(Polynomial::parse("1 + x", v), box_domain(v, Box::cube(1, -1, 1)), 1));
    EXPECT_EQ(exp.rows.size(), 3u);
    ASSERT_EQ(exp.blocks.size(), 3u);  // sigma_0, box, ball
    EXPECT_EQ(exp.blocks[0].basis.size(), 2u);
    EXPECT_EQ(exp.blocks[1].basis.size(), 1u);
}

TEST(Sos, HandExpandedCertificateIsFeasible) {
    // 1 + x = (1 + x)^2 / 2 + (1 - x^2) / 2 on [-1, 1].
    const VarList v{"x"};
    SosProgram prog(v);
    prog.add_constraint("c", AffinePoly::from_polynomial(Polynomial::parse("1 + x", v)),
                        box_domain(v, Box::cube(1, -1, 1)), 1);
    const auto compiled = compile_with_layout(prog);
    std::vector<Eigen::MatrixXd> blocks{Eigen::MatrixXd::Constant(2, 2, 0.5), Eigen::MatrixXd::Constant(1, 1, 0.5),
                                        Eigen::MatrixXd::Zero(1, 1)};
    const auto r = equality_residuals(compiled.problem, {}, blocks);
    EXPECT_LT(max_abs(r), 1e-15);
}

TEST(Sos, FiveVariablesOrderFiveGramDimension) {
    const VarList v{"t", "a", "b", "c", "d"};
    const auto exp = putinar_expand(fixed_constraint(Polynomial::constant(v, 1.0), box_domain(v, Box::cube(5, -1, 1)), 5));
    EXPECT_EQ(exp.blocks[0].basis.size(), 252u);
    EXPECT_EQ(exp.blocks[1].basis.size(), 126u);
    EXPECT_EQ(exp.rows.size(), binomial(15, 5));
}

TEST(Sos, RowCountMatchesBinomial) {
    for (std::size_t k = 1; k <= 4; ++k) {
        VarList v;
        for (std::size_t i = 0; i < k; ++i) v.push_back("x" + std::to_string(i + 1));
        for (unsigned r = 1; r <= 3; ++r) {
            const auto exp =
                putinar_expand(fixed_constraint(Polynomial::constant(v, 1.0), box_domain(v, Box::cube(k, -1, 1)), r));
            EXPECT_EQ(exp.rows.size(), binomial(k + 2 * r, k));
        }
    }
}

TEST(Sos, DegreeOverflowNamesConstraint) {
    const VarList v{"x"};
    const SosConstraint c{"too_high", AffinePoly::from_polynomial(Polynomial::parse("x^4", v)), free_domain(v), 1};
    try {
        putinar_expand(c);
        FAIL() << "expected StructuralError";
    } catch (const StructuralError& e) {
        EXPECT_NE(std::string(e.what()).find("too_high"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("4"), std::string::npos);
    }
}

TEST(Sos, EmptyProgram) {
    const SosProgram prog({"x"});
    const auto p = compile(prog);
    EXPECT_EQ(p.psd_dims.size(), 0u);
    EXPECT_EQ(p.rows.size(), 0u);
    EXPECT_EQ(max_block_dim(prog), 0u);
}

TEST(Sos, DecisionSlotCount) {
    SosProgram prog({"t", "x1", "x2"});
    const auto& d = prog.add_decision("v", {"t", "x1", "x2"}, 4);
    EXPECT_EQ(d.n_slots(), binomial(7, 3));
    const auto& w = prog.add_decision("w", {"x1"}, 3);
    EXPECT_EQ(w.first_slot, binomial(7, 3));
    EXPECT_EQ(prog.n_slots(), binomial(7, 3) + 4);
    EXPECT_THROW(prog.add_decision("w", {"x1"}, 2), StructuralError);
}

TEST(Sos, AffineCalculusMatchesPolynomialCalculus) {
    const VarList v{"t", "x"};
    SosProgram prog(v);
    prog.add_decision("p", v, 3);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> y(prog.n_slots());
    for (auto& c : y) c = u(rng);
    const auto a = prog.affine("p");
    const auto p = a.instantiate(y);
    const auto f = Polynomial::parse("x^2 - 0.5*t", v);
    EXPECT_EQ(a.multiply(f).instantiate(y), p * f);
    EXPECT_EQ(a.partial_derivative(1).instantiate(y), p.partial_derivative("x"));
    EXPECT_EQ(a.fix_variable(0, 0.0).instantiate(y), p.fix_variable(0, 0.0));
    const auto pt = std::vector<double>{0.3, -0.7};
    EXPECT_NEAR(a.fix_variable(0, 1.0).instantiate(y).evaluate(pt), p.evaluate(std::vector<double>{1.0, -0.7}), 1e-12);
    EXPECT_EQ(prog.instantiate(y).at("p"), p);
}

TEST(Sos, CompileIsDeterministic) {
    const VarList v{"t", "x"};
    SosProgram prog(v);
    prog.add_decision("p", v, 2);
    prog.add_constraint("c", prog.affine("p") + Polynomial::parse("1 + t*x", v), box_domain(v, Box({0, -1}, {1, 1})));
    const auto a = compile(prog);
    const auto b = compile(prog);
    EXPECT_EQ(a, b);
    EXPECT_EQ(export_problem(a, ExportFormat::native_json), export_problem(b, ExportFormat::native_json));
}

TEST(Sos, ConstantLowerBoundHasIntegralTwo) {
    const VarList v{"x"};
    SosProgram prog(v);
    prog.add_decision("w", v, 2);
    prog.add_constraint("w_minus_one", prog.affine("w") - Polynomial::constant(v, 1.0), box_domain(v, Box::cube(1, -1, 1)));
    prog.add_integral_objective("w", Box::cube(1, -1, 1));
    const auto compiled = compile_with_layout(prog);
    const auto sol = solve(compiled.problem);
    ASSERT_TRUE(sol.usable()) << sol.diagnostic;
    EXPECT_NEAR(sol.objective, 2.0, 1e-5);
    const auto w = prog.instantiate(sol.free_values).at("w");
    EXPECT_NEAR(w.evaluate(std::vector<double>{0.3}), 1.0, 1e-4);
    EXPECT_LT(max_abs(reconstruction_errors(prog, compiled, sol, 100, 1)), 1e-6);
}

TEST(Sos, ExplicitSumsOfSquaresAreFeasible) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t dim = 1 + trial % 3;
        VarList v;
        for (std::size_t i = 0; i < dim; ++i) v.push_back("x" + std::to_string(i + 1));
        const unsigned half = 1 + trial % 3;
        std::vector<Polynomial> squares;
        Polynomial sum(v);
        for (int k = 0; k < 3; ++k) {
            squares.push_back(random_poly(v, half, rng));
            sum += squares.back() * squares.back();
        }
        SosProgram prog(v);
        prog.add_constraint("sos", AffinePoly::from_polynomial(sum), free_domain(v), half);
        const auto problem = compile(prog);
        // Oracle: the explicit Gram matrix satisfies every equality.
        const auto r = equality_residuals(problem, {}, {explicit_gram(squares, dim, half)});
        EXPECT_LT(max_abs(r), 1e-12);
        const auto sol = solve(problem);
        EXPECT_TRUE(sol.usable()) << sol.diagnostic;
    }
}

TEST(Sos, MotzkinIsNotASumOfSquares) {
    const VarList v{"x", "y"};
    SosProgram prog(v);
    prog.add_constraint("motzkin", AffinePoly::from_polynomial(motzkin()), free_domain(v), 3);
    const auto sol = solve(compile(prog));
    EXPECT_EQ(sol.status, SolveStatus::infeasible) << sol.diagnostic;
}

TEST(Sos, MaxBlockDim) {
    const VarList v{"t", "x1", "x2", "x3"};
    SosProgram prog(v);
    prog.add_constraint("c", AffinePoly::from_polynomial(Polynomial::constant(v, 1.0)), box_domain(v, Box::cube(4, -1, 1)), 5);
    EXPECT_EQ(max_block_dim(prog), 126u);
}
