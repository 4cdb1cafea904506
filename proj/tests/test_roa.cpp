#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "roa/error.hpp"
#include "roa/roa.hpp"

using namespace roa;

namespace {

RoaCertificate constant_dense_cert(double v_value) {
    const VarList states{"x1", "x2", "x3"};
    const VarList tv{"t", "x1", "x2", "x3"};
    std::map<std::string, Polynomial> polys{{"v", Polynomial::constant(tv, v_value)},
                                            {"w", Polynomial::constant(states, 1.0)}};
    return RoaCertificate(Mode::dense, 2, "bicylinder", states, {1, 1, 1}, AffineMap::identity(3), 100.0, polys, 8.0);
}

const RoaProgram& bicylinder_sparse4() {
    static const RoaProgram prog = build_sparse(bicylinder(), 4);
    return prog;
}

const RoaCertificate& bicylinder_sparse4_cert() {
    static const RoaCertificate cert = [] {
        const auto& prog = bicylinder_sparse4();
        const auto sol = solve(compile(prog.program));
        return extract(prog, sol);
    }();
    return cert;
}

} // namespace

TEST(Roa, DenseBicylinderShape) {
    const auto prog = build_dense(bicylinder(), 4);
    EXPECT_EQ(prog.program.constraints().size(), 4u);
    EXPECT_EQ(prog.program.vars().size(), 4u);
    EXPECT_EQ(prog.program.decision("v").vars.size(), 4u);
    EXPECT_EQ(prog.program.decision("w").vars.size(), 3u);
    EXPECT_THROW((void)build_dense(bicylinder(), 5), StructuralError);
    EXPECT_THROW((void)build_sparse(bicylinder(), 3), StructuralError);
}

TEST(Roa, SparseBicylinderDeclaresPerCliquePolynomials) {
    const auto& prog = bicylinder_sparse4();
    for (const char* name : {"v1_1", "v1_2", "u1", "w1", "v2", "w2"}) EXPECT_NO_THROW((void)prog.program.decision(name));
    EXPECT_EQ(prog.program.decision("v1_1").vars, (VarList{"t", "x1"}));
    EXPECT_EQ(prog.program.decision("u1").vars, (VarList{"t", "x2"}));
    EXPECT_EQ(prog.program.decision("w1").vars, (VarList{"x1", "x2"}));
    EXPECT_EQ(prog.program.decision("v2").vars, (VarList{"t", "x2", "x3"}));
    EXPECT_EQ(prog.program.constraints().size(), 9u);
}

TEST(Roa, GramSizesAtDegreeEight) {
    const auto sparse = estimate_size(bicylinder(), Mode::sparse, 8);
    const auto dense = estimate_size(bicylinder(), Mode::dense, 8);
    EXPECT_EQ(sparse.max_block_dim, 56u);
    EXPECT_EQ(dense.max_block_dim, 126u);
    EXPECT_EQ(max_block_dim(build_sparse(bicylinder(), 8).program), 56u);
    EXPECT_EQ(max_block_dim(build_dense(bicylinder(), 8).program), 126u);
}

TEST(Roa, EstimateMatchesBuiltProgram) {
    for (const auto& sys : {bicylinder(), vdp_chain(3, 1), static_chain(4)}) {
        for (unsigned d : {2u, 4u, 6u}) {
            for (auto mode : {Mode::dense, Mode::sparse}) {
                const auto est = estimate_size(sys, mode, d);
                const auto prog = build(sys, mode, d);
                const auto compiled = compile(prog.program);
                EXPECT_EQ(est.max_block_dim, max_block_dim(prog.program)) << sys.name() << " d=" << d;
                EXPECT_EQ(est.total_rows, compiled.rows.size()) << sys.name() << " d=" << d;
                ASSERT_EQ(est.constraints.size(), prog.program.constraints().size());
                for (std::size_t i = 0; i < est.constraints.size(); ++i) {
                    EXPECT_EQ(est.constraints[i].name, prog.program.constraints()[i].name);
                }
            }
        }
    }
}

TEST(Roa, VdpDenseIsTooLargeAndSparseStaysSmall) {
    const auto sys = vdp_chain(10, 42);
    const auto dense = estimate_size(sys, Mode::dense, 8);
    EXPECT_EQ(dense.max_block_dim, binomial(26, 5));
    EXPECT_GE(dense.max_block_dim, 10000u);
    const auto sparse = estimate_size(sys, Mode::sparse, 8);
    std::size_t widest = 0;
    for (const auto& c : sparse.constraints) widest = std::max(widest, c.n_vars);
    EXPECT_EQ(widest, 5u);
    EXPECT_EQ(sparse.max_block_dim, binomial(10, 5));
}

TEST(Roa, StaticChainDenseObjectiveIsVolume) {
    const auto prog = build_dense(static_chain(3), 2);
    const auto sol = solve(compile(prog.program));
    ASSERT_TRUE(sol.usable()) << sol.diagnostic;
    EXPECT_NEAR(sol.objective, 8.0, 1e-5);
    const auto cert = extract(prog, sol);
    EXPECT_NEAR(cert.w_integral(), sol.objective, 1e-6 * std::abs(sol.objective));
    const std::vector<double> x{0.9, -0.9, 0.5};
    EXPECT_TRUE(cert.member(x).member);
}

TEST(Roa, StaticChainSparseObjectiveIsSumOfCliqueVolumes) {
    const auto prog = build_sparse(static_chain(3), 2);
    const auto sol = solve(compile(prog.program));
    ASSERT_TRUE(sol.usable()) << sol.diagnostic;
    EXPECT_NEAR(sol.objective, 8.0, 1e-5);
    const auto cert = extract(prog, sol);
    EXPECT_EQ(cert.n_cliques(), 2u);
    EXPECT_NEAR(cert.w_integral(), sol.objective, 1e-6 * std::abs(sol.objective));
}

TEST(Roa, ConstantCertificatesGiveAllOrNothing) {
    const auto yes = constant_dense_cert(1.0);
    const auto no = constant_dense_cert(-1.0);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int k = 0; k < 50; ++k) {
        const std::vector<double> x{u(rng), u(rng), u(rng)};
        const auto a = yes.member(x);
        EXPECT_TRUE(a.member);
        EXPECT_EQ(a.margin, 1.0);
        EXPECT_FALSE(no.member(x).member);
    }
}

TEST(Roa, MembershipOutsideDomain) {
    const auto cert = constant_dense_cert(1.0);
    const auto m = cert.member(std::vector<double>{1.5, 0.0, 0.0});
    EXPECT_FALSE(m.in_domain);
    EXPECT_FALSE(m.member);
    EXPECT_EQ(m.margin, -std::numeric_limits<double>::infinity());
    EXPECT_THROW((void)cert.member(std::vector<double>{0.0, 0.0}), StructuralError);
}

TEST(Roa, ExtractRejectsUnusableSolution) {
    ConicSolution sol;
    sol.status = SolveStatus::failed;
    sol.diagnostic = "iteration limit reached";
    try {
        (void)extract(bicylinder_sparse4(), sol);
        FAIL() << "expected SolveError";
    } catch (const SolveError& e) {
        EXPECT_NE(std::string(e.what()).find("degree"), std::string::npos);
    }
}

TEST(Roa, BicylinderSparseCertificateContainsOrigin) {
    const auto& cert = bicylinder_sparse4_cert();
    const auto m = cert.member(std::vector<double>{0.0, 0.0, 0.0});
    EXPECT_TRUE(m.member);
    EXPECT_NEAR(cert.w_integral(), cert.objective(), 1e-6 * cert.objective());
    EXPECT_LE(cert.objective(), 8.0 + 8.0 + 1e-6);
}

TEST(Roa, CertificateRoundTripIsBitExact) {
    const auto& cert = bicylinder_sparse4_cert();
    const auto text = save_certificate(cert);
    const auto back = load_certificate(text);
    EXPECT_EQ(save_certificate(back), text);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int k = 0; k < 200; ++k) {
        const std::vector<double> x{u(rng), u(rng), u(rng)};
        const auto a = cert.member(x);
        const auto b = back.member(x);
        EXPECT_EQ(a.member, b.member);
        EXPECT_EQ(a.margin, b.margin);
    }
    EXPECT_THROW((void)load_certificate("roa-certificate 99\n"), ParseError);
}

TEST(Roa, ModeNames) {
    EXPECT_EQ(mode_from_string("dense"), Mode::dense);
    EXPECT_EQ(to_string(Mode::sparse), "sparse");
    EXPECT_THROW((void)mode_from_string("tree"), ParseError);
}
