#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "roa/error.hpp"
#include "roa/poly.hpp"

using namespace roa;

namespace {

VarList xs(std::size_t n) {
    VarList v;
    for (std::size_t i = 0; i < n; ++i) v.push_back("x" + std::to_string(i + 1));
    return v;
}

Polynomial random_poly(const VarList& vars, unsigned deg, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Polynomial::TermMap terms;
    for (const auto& m : monomial_basis(vars.size(), deg)) {
        if (u(rng) > 0.0) terms.emplace(m, u(rng));
    }
    return Polynomial(vars, std::move(terms));
}

std::vector<double> random_point(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> p(n);
    for (auto& c : p) c = u(rng);
    return p;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

} // namespace

TEST(Poly, DifferenceOfSquares) {
    const VarList v{"x"};
    const auto p = Polynomial::parse("x + 1", v) * Polynomial::parse("x - 1", v);
    EXPECT_EQ(p, Polynomial::parse("x^2 - 1", v));
    EXPECT_EQ(p.degree(), 2);
}

TEST(Poly, ZeroAnnihilatesAndOneIsIdentity) {
    const VarList v{"x", "y"};
    const auto p = Polynomial::parse("x^2 + x^2*y^2", v);
    const auto zero = p * Polynomial(v);
    EXPECT_TRUE(zero.is_zero());
    EXPECT_EQ(zero.degree(), kZeroDegree);
    EXPECT_EQ(p * Polynomial::constant(v, 1.0), p);
}

TEST(Poly, MismatchedVariablesThrow) {
    const auto p = Polynomial::parse("x", {"x"});
    const auto q = Polynomial::parse("y", {"y"});
    EXPECT_THROW((void)(p * q), StructuralError);
    EXPECT_THROW((void)(p + q), StructuralError);
}

TEST(Poly, PowerRule) {
    const VarList v{"x", "y"};
    EXPECT_EQ(Polynomial::parse("x^2*y", v).partial_derivative("x"), Polynomial::parse("2*x*y", v));
    EXPECT_TRUE(Polynomial::parse("x^2", v).partial_derivative("y").is_zero());
    const VarList tv{"t"};
    EXPECT_EQ(Polynomial::parse("t*(1 - t)", tv).partial_derivative("t"), Polynomial::parse("1 - 2*t", tv));
    EXPECT_THROW((void)Polynomial::parse("x", v).partial_derivative("z"), StructuralError);
}

TEST(Poly, Evaluate) {
    const VarList v{"x1", "x2", "x3"};
    const auto f = Polynomial::parse("(x1^2 + x2^2 - 0.25)*x1", v);
    EXPECT_EQ(f.evaluate(std::vector<double>{0, 0, 0}), 0.0);
    EXPECT_EQ(f.evaluate(std::vector<double>{0.5, 0, 0}), 0.0);
    EXPECT_EQ(Polynomial::parse("x^2 + 1", {"x"}).evaluate(std::vector<double>{2.0}), 5.0);
    EXPECT_THROW((void)f.evaluate(std::vector<double>{1.0}), StructuralError);
}

TEST(Poly, SubstituteAffine) {
    const VarList v{"x"};
    EXPECT_EQ(Polynomial::parse("x^2", v).substitute_affine(AffineMap({2.0}, {0.0})), Polynomial::parse("4*x^2", v));
    const auto p = Polynomial::parse("3*x^3 - x + 2", v);
    EXPECT_EQ(p.substitute_affine(AffineMap::identity(1)), p);
    EXPECT_EQ(Polynomial::parse("t", {"t"}).substitute_affine(AffineMap({100.0}, {0.0})),
              Polynomial::parse("100*t", {"t"}));
    EXPECT_THROW((void)p.substitute_affine(AffineMap::identity(2)), StructuralError);
}

TEST(Poly, BoxIntegral) {
    EXPECT_NEAR(box_integral(Polynomial::parse("x^2", {"x"}), Box::cube(1, -1, 1)), 2.0 / 3.0, 1e-15);
    EXPECT_EQ(box_integral(Polynomial::constant(xs(2), 1.0), Box::cube(2, -1, 1)), 4.0);
    EXPECT_EQ(box_integral(Polynomial::parse("x", {"x"}), Box::cube(1, -1, 1)), 0.0);
    EXPECT_THROW(Box({1.0}, {1.0}), StructuralError);
    EXPECT_THROW((void)box_integral(Polynomial::parse("x", {"x"}), Box::cube(2, -1, 1)), StructuralError);
}

TEST(Poly, MonomialBasisCountsAndOrder) {
    EXPECT_EQ(monomial_basis(4, 2).size(), 15u);
    EXPECT_EQ(monomial_basis(21, 4).size(), 12650u);
    const auto one = monomial_basis(1, 0);
    ASSERT_EQ(one.size(), 1u);
    EXPECT_EQ(one[0].degree(), 0u);
    const auto b = monomial_basis(2, 2);
    const std::vector<std::vector<unsigned>> expected{{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}};
    ASSERT_EQ(b.size(), expected.size());
    for (std::size_t i = 0; i < b.size(); ++i) EXPECT_EQ(b[i].exponents(), expected[i]);
    for (std::size_t i = 1; i < b.size(); ++i) EXPECT_LT(b[i - 1], b[i]);
}

TEST(Poly, CleanupDropsTinyCoefficients) {
    const VarList v{"x"};
    const auto p = Polynomial::parse("x + 1", v) - Polynomial::parse("x + 1e-13*x^2", v);
    EXPECT_EQ(p, Polynomial::constant(v, 1.0));
    for (const auto& [m, c] : p.terms()) EXPECT_GE(std::abs(c), kCleanupThreshold);
}

TEST(Poly, ParserRejectsUnknownIdentifiers) {
    EXPECT_THROW(Polynomial::parse("x1 + y", {"x1"}), ParseError);
    EXPECT_THROW(Polynomial::parse("x1 +", {"x1"}), ParseError);
    EXPECT_THROW(Polynomial::parse("x1^-1", {"x1"}), ParseError);
}

TEST(Poly, TextRoundTrip) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto vars = xs(1 + trial % 4);
        const auto p = random_poly(vars, 5, rng);
        EXPECT_EQ(Polynomial::parse(p.to_string(), vars), p) << p.to_string();
    }
}

TEST(PolyProperty, ProductEvaluatesToProductOfValues) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const auto vars = xs(1 + trial % 4);
        const auto p = random_poly(vars, 1 + trial % 6, rng);
        const auto q = random_poly(vars, 6 - trial % 6, rng);
        const auto pq = p * q;
        for (int k = 0; k < 100; ++k) {
            const auto pt = random_point(vars.size(), rng);
            EXPECT_LT(rel_err(pq.evaluate(pt), p.evaluate(pt) * q.evaluate(pt)), 1e-9);
        }
    }
}

TEST(PolyProperty, DerivativeMatchesFiniteDifferences) {
    std::mt19937_64 rng(2);
    const double h = 1e-5;
    for (int trial = 0; trial < 10; ++trial) {
        const auto vars = xs(1 + trial % 4);
        const auto p = random_poly(vars, 6, rng);
        for (std::size_t var = 0; var < vars.size(); ++var) {
            const auto dp = p.partial_derivative(var);
            for (int k = 0; k < 100; ++k) {
                auto pt = random_point(vars.size(), rng);
                auto hi = pt, lo = pt;
                hi[var] += h;
                lo[var] -= h;
                EXPECT_NEAR(dp.evaluate(pt), (p.evaluate(hi) - p.evaluate(lo)) / (2 * h), 1e-6);
            }
        }
    }
}

TEST(PolyProperty, IntegralMatchesMidpointRule) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 6; ++trial) {
        const std::size_t dim = 1 + trial % 2;
        const auto vars = xs(dim);
        const auto p = random_poly(vars, 4, rng);
        const Box box = dim == 1 ? Box({-0.5}, {1.5}) : Box({-1.0, 0.0}, {0.5, 2.0});
        const int cells = dim == 1 ? 10000 : 400;
        double sum = 0.0;
        std::vector<double> pt(dim);
        const double hx = (box.upper(0) - box.lower(0)) / cells;
        const double hy = dim == 2 ? (box.upper(1) - box.lower(1)) / cells : 1.0;
        for (int i = 0; i < cells; ++i) {
            pt[0] = box.lower(0) + (i + 0.5) * hx;
            if (dim == 1) {
                sum += p.evaluate(pt) * hx;
                continue;
            }
            for (int j = 0; j < cells; ++j) {
                pt[1] = box.lower(1) + (j + 0.5) * hy;
                sum += p.evaluate(pt) * hx * hy;
            }
        }
        const double exact = box_integral(p, box);
        EXPECT_LT(std::abs(sum - exact) / std::max(1e-3, std::abs(exact)), 1e-4);
    }
}

TEST(PolyProperty, AffineSubstitutionInverts) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.2, 3.0);
    for (int trial = 0; trial < 20; ++trial) {
        const auto vars = xs(1 + trial % 3);
        const auto p = random_poly(vars, 5, rng);
        std::vector<double> scale(vars.size()), offset(vars.size());
        for (std::size_t i = 0; i < vars.size(); ++i) {
            scale[i] = trial % 2 ? u(rng) : -u(rng);
            offset[i] = u(rng) - 1.5;
        }
        const AffineMap map(scale, offset);
        const auto q = p.substitute_affine(map);
        for (int k = 0; k < 20; ++k) {
            const auto y = random_point(vars.size(), rng);
            EXPECT_LT(rel_err(q.evaluate(y), p.evaluate(map.apply(y))), 1e-9);
        }
        const auto back = q.substitute_affine(map.inverse());
        for (const auto& m : monomial_basis(vars.size(), 5)) EXPECT_NEAR(back.coefficient(m), p.coefficient(m), 1e-9);
    }
}

TEST(PolyProperty, AffineMapInverseComposesToIdentity) {
    const AffineMap m({2.0, -0.5}, {1.0, 3.0});
    const auto id = m.compose(m.inverse());
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_NEAR(id.scale()[i], 1.0, 1e-12);
        EXPECT_NEAR(id.offset()[i], 0.0, 1e-12);
    }
    EXPECT_THROW(AffineMap({0.0}, {1.0}), StructuralError);
}

TEST(Poly, EvaluatorAgreesWithEvaluate) {
    std::mt19937_64 rng(6);
    const auto vars = xs(3);
    const auto p = random_poly(vars, 6, rng);
    const PolyEvaluator ev(p);
    for (int k = 0; k < 50; ++k) {
        const auto pt = random_point(3, rng);
        EXPECT_LT(rel_err(ev(pt), p.evaluate(pt)), 1e-12);
    }
}
