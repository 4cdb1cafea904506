#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "roa/error.hpp"
#include "roa/system.hpp"

using namespace roa;

namespace {

ChainSystem three_scalar_blocks(const std::vector<std::string>& f) {
    const VarList v{"x1", "x2", "x3"};
    std::vector<Block> blocks;
    for (const auto& name : v) blocks.push_back({name, {name}, Box::cube(1, -1, 1), Box::cube(1, -0.5, 0.5)});
    std::vector<Polynomial> dyn;
    for (const auto& s : f) dyn.push_back(Polynomial::parse(s, v));
    return ChainSystem("chain", blocks, dyn, 2.0);
}

std::vector<double> eval_field(const ChainSystem& sys, std::span<const double> x) {
    std::vector<double> out;
    for (const auto& f : sys.dynamics()) out.push_back(f.evaluate(x));
    return out;
}

} // namespace

TEST(System, BicylinderShape) {
    const auto sys = bicylinder();
    EXPECT_EQ(sys.n_blocks(), 3u);
    EXPECT_EQ(sys.dim(), 3u);
    EXPECT_EQ(sys.horizon(), 100.0);
    EXPECT_EQ(sys.state_box().volume(), 8.0);
    EXPECT_EQ(sys.target_box(), Box::cube(3, -0.1, 0.1));
    for (double v : eval_field(sys, std::vector<double>{0, 0, 0})) EXPECT_EQ(v, 0.0);
    const auto f = eval_field(sys, std::vector<double>{0.5, 0.3, 0.2});
    EXPECT_NEAR(f[0], (0.25 + 0.09 - 0.25) * 0.5, 1e-15);
    EXPECT_NEAR(f[1], (0.09 + 0.04 - 0.25) * 0.3, 1e-15);
    EXPECT_NEAR(f[2], (0.09 + 0.04 - 0.25) * 0.2, 1e-15);
    const auto cl = validate_chain(sys);
    ASSERT_EQ(cl.size(), 2u);
    EXPECT_EQ(cl[0].vars, (VarList{"x1", "x2"}));
    EXPECT_EQ(cl[1].vars, (VarList{"x2", "x3"}));
}

TEST(System, ChainViolationNamesTermAndBlock) {
    const auto sys = three_scalar_blocks({"x1*x3", "x2", "x3"});
    try {
        (void)validate_chain(sys);
        FAIL() << "expected StructuralError";
    } catch (const StructuralError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("x1*x3"), std::string::npos) << msg;
        EXPECT_NE(msg.find("'x1'"), std::string::npos) << msg;
    }
}

TEST(System, LastBlockMayDependOnPrevious) {
    EXPECT_NO_THROW((void)validate_chain(three_scalar_blocks({"x2", "x3", "x2*x3"})));
    EXPECT_THROW((void)validate_chain(three_scalar_blocks({"x2", "x3", "x1"})), StructuralError);
}

TEST(System, TwoBlocksGiveOneClique) {
    const VarList v{"x1", "x2"};
    std::vector<Block> blocks{{"a", {"x1"}, Box::cube(1, -1, 1), Box::cube(1, -1, 1)},
                              {"b", {"x2"}, Box::cube(1, -1, 1), Box::cube(1, -1, 1)}};
    const ChainSystem sys("pair", blocks, {Polynomial::parse("x1*x2", v), Polynomial::parse("x1 + x2", v)}, 1.0);
    EXPECT_EQ(validate_chain(sys).size(), 1u);
}

TEST(System, ConstructorRejectsBadInput) {
    const VarList v{"x1"};
    const Block good{"a", {"x1"}, Box::cube(1, -1, 1), Box::cube(1, -0.1, 0.1)};
    const Block outside{"a", {"x1"}, Box::cube(1, -1, 1), Box::cube(1, -2, 0.1)};
    EXPECT_THROW(ChainSystem("s", {good}, {Polynomial(v)}, 0.0), StructuralError);
    EXPECT_THROW(ChainSystem("s", {outside}, {Polynomial(v)}, 1.0), StructuralError);
    EXPECT_THROW(ChainSystem("s", {good}, {}, 1.0), StructuralError);
}

TEST(System, VdpChainShape) {
    const auto sys = vdp_chain(10, 42);
    EXPECT_EQ(sys.dim(), 20u);
    EXPECT_EQ(sys.n_blocks(), 11u);
    EXPECT_EQ(sys.horizon(), 30.0);
    EXPECT_EQ(sys.state_box(), Box::cube(20, -1, 1));
    EXPECT_EQ(sys.target_box(), Box::cube(20, -0.1, 0.1));
    for (double v : eval_field(sys, std::vector<double>(20, 0.0))) EXPECT_EQ(v, 0.0);
    const auto cl = validate_chain(sys);
    EXPECT_EQ(cl.size(), 10u);
    std::size_t widest = 0;
    for (const auto& c : cl) widest = std::max(widest, c.dim());
    EXPECT_EQ(widest, 4u);
    EXPECT_THROW((void)vdp_chain(1, 42), StructuralError);
}

TEST(System, VdpCouplingsAreSeededAndBounded) {
    const auto a = vdp_couplings(10, 7);
    EXPECT_EQ(a, vdp_couplings(10, 7));
    EXPECT_NE(a, vdp_couplings(10, 8));
    EXPECT_EQ(a.size(), 9u);
    for (double e : a) {
        EXPECT_GE(e, -0.5);
        EXPECT_LE(e, 0.5);
    }
}

TEST(System, VdpOscillatorTerms) {
    const std::size_t k = 3;
    const auto sys = vdp_chain(k, 1);
    const auto eps = vdp_couplings(k, 1);
    // Oscillator 1 is (x1, x2) = (y1, z1); z2 is x4.
    std::vector<double> x{0.3, -0.2, 0.1, 0.4, -0.6, 0.7};
    const auto f = eval_field(sys, x);
    EXPECT_NEAR(f[0], -2.0 * x[1], 1e-15);
    EXPECT_NEAR(f[1], 0.8 * x[0] + 10.0 * (1.44 * x[0] * x[0] - 0.21) * x[1] + eps[0] * x[3] * x[0], 1e-14);
    // Last oscillator: z_K is x5, y_K is x6, and it is unperturbed.
    EXPECT_NEAR(f[5], -2.0 * x[4], 1e-15);
    EXPECT_NEAR(f[4], 0.8 * x[5] + 10.0 * (1.44 * x[5] * x[5] - 0.21) * x[4], 1e-14);
}

TEST(System, ValidateAcceptsIffSupportFitsOneClique) {
    std::mt19937_64 rng(9);
    const VarList v{"x1", "x2", "x3", "x4"};
    std::vector<Block> blocks;
    for (const auto& name : v) blocks.push_back({name, {name}, Box::cube(1, -1, 1), Box::cube(1, -1, 1)});
    const auto basis = monomial_basis(4, 2);
    std::uniform_int_distribution<std::size_t> pick(0, basis.size() - 1);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Polynomial> f(4, Polynomial(v));
        const std::size_t row = trial % 4;
        const auto& m = basis[pick(rng)];
        f[row].add_term(m, 1.0);
        std::size_t lo = 4, hi = 0;
        for (std::size_t i = 0; i < 4; ++i) {
            if (m[i] > 0) {
                lo = std::min(lo, i);
                hi = std::max(hi, i);
            }
        }
        // Row i may use blocks {i, i+1}; the last row uses {N-2, N-1}.
        const std::size_t first = row + 1 < 4 ? row : 2;
        const bool allowed = lo == 4 || (lo >= first && hi <= first + 1);
        const ChainSystem sys("s", blocks, f, 1.0);
        if (allowed) {
            EXPECT_NO_THROW((void)validate_chain(sys));
        } else {
            EXPECT_THROW((void)validate_chain(sys), StructuralError);
        }
    }
}

TEST(System, NormalizeIsIdentityOnUnitSystem) {
    const auto sys = static_chain(3);
    const auto ns = normalize(sys);
    EXPECT_EQ(ns.state_map, AffineMap::identity(3));
    EXPECT_EQ(ns.time_scale, 1.0);
    EXPECT_EQ(ns.system, sys);
}

TEST(System, NormalizeAppliesChainRule) {
    // x' = x on X = [-2, 2], T = 3: with x = 2y and t = 3 tau, dy/dtau = 3 y.
    const VarList v{"x1", "x2"};
    std::vector<Block> blocks{{"a", {"x1"}, Box::cube(1, -2, 2), Box::cube(1, -1, 1)},
                              {"b", {"x2"}, Box::cube(1, 0, 4), Box::cube(1, 1, 3)}};
    const ChainSystem sys("lin", blocks, {Polynomial::parse("x1", v), Polynomial::parse("x1*x2", v)}, 3.0);
    const auto ns = normalize(sys);
    EXPECT_EQ(ns.state_map.scale(), (std::vector<double>{2.0, 2.0}));
    EXPECT_EQ(ns.state_map.offset(), (std::vector<double>{0.0, 2.0}));
    EXPECT_EQ(ns.system.dynamics()[0], Polynomial::parse("3*x1", v));
    // x2' = x1 x2 with x1 = 2 y1, x2 = 2 y2 + 2: y2' = 3 (2 y1)(2 y2 + 2) / 2.
    EXPECT_EQ(ns.system.dynamics()[1], Polynomial::parse("6*x1*x2 + 6*x1", v));
    EXPECT_EQ(ns.system.block(1).target, Box({-0.5}, {0.5}));
    const std::vector<double> x{1.0, 3.0};
    const auto y = ns.to_normalized(x);
    EXPECT_EQ(ns.to_original(y), x);
}

TEST(System, DenormalizeRoundTripsCoefficients) {
    for (const auto& sys : {bicylinder(), vdp_chain(4, 3)}) {
        const auto back = denormalize(normalize(sys));
        EXPECT_EQ(back.horizon(), sys.horizon());
        for (std::size_t i = 0; i < sys.dim(); ++i) {
            const auto& a = sys.dynamics()[i];
            const auto& b = back.dynamics()[i];
            for (const auto& m : monomial_basis(sys.dim(), 3)) EXPECT_NEAR(a.coefficient(m), b.coefficient(m), 1e-9);
        }
    }
}

TEST(System, JsonRoundTripIsIdempotent) {
    for (const auto& sys : {bicylinder(), vdp_chain(3, 5), static_chain(4)}) {
        const auto text = save_system_json(sys);
        const auto once = load_system_json(text);
        EXPECT_EQ(save_system_json(once), text);
        EXPECT_EQ(load_system_json(save_system_json(once)), once);
        EXPECT_EQ(once.state_box(), sys.state_box());
    }
}

TEST(System, JsonRejectsMalformedConfigs) {
    EXPECT_THROW((void)load_system_json("{"), ParseError);
    EXPECT_THROW((void)load_system_json(R"({"version": 99})"), ParseError);
    auto text = save_system_json(bicylinder());
    const auto pos = text.find("x2");
    text.replace(pos, 2, "q2");
    EXPECT_THROW((void)load_system_json(text), Error);
}
