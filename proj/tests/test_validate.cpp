#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "roa/error.hpp"
#include "roa/validate.hpp"

using namespace roa;

namespace {

RoaCertificate dense_cert(const ChainSystem& sys, double v_value) {
    const auto ns = normalize(sys);
    VarList tv{"t"};
    for (const auto& v : sys.state_vars()) tv.push_back(v);
    std::vector<std::size_t> sizes;
    for (const auto& b : sys.blocks()) sizes.push_back(b.dim());
    std::map<std::string, Polynomial> polys{{"v", Polynomial::constant(tv, v_value)},
                                            {"w", Polynomial::constant(sys.state_vars(), 1.0)}};
    return RoaCertificate(Mode::dense, 2, sys.name(), sys.state_vars(), sizes, ns.state_map, ns.time_scale, polys,
                          sys.state_box().volume());
}

} // namespace

TEST(Validate, TrivialSystemHasNoViolations) {
    const auto sys = static_chain(3);
    const auto res = soundness_sweep(dense_cert(sys, 0.0), sys, 200, 1);
    EXPECT_EQ(res.samples, 200u);
    EXPECT_EQ(res.confirmed, 200u);
    EXPECT_EQ(res.violations, 0u);
    EXPECT_TRUE(res.passed());
}

TEST(Validate, BrokenCertificateFailsAtEveryRoaPoint) {
    const auto sys = bicylinder();
    const auto res = soundness_sweep(dense_cert(sys, -1.0), sys, 100, 2);
    EXPECT_GT(res.confirmed, 0u);
    EXPECT_EQ(res.violations, res.confirmed);
    EXPECT_FALSE(res.witnesses.empty());
    EXPECT_LE(res.witnesses.size(), 10u);
    EXPECT_EQ(res.worst_margin, -1.0);
}

TEST(Validate, ViolationsAreMonotoneInTolerance) {
    const auto sys = static_chain(3);
    const auto cert = dense_cert(sys, -1e-4);
    const auto strict = soundness_sweep(cert, sys, 50, 3, 0.0, -1e-6);
    const auto loose = soundness_sweep(cert, sys, 50, 3, 0.0, -1e-3);
    EXPECT_LE(loose.violations, strict.violations);
    EXPECT_EQ(strict.violations, 50u);
    EXPECT_EQ(loose.violations, 0u);
}

TEST(Validate, SweepsAreDeterministic) {
    const auto sys = bicylinder();
    const auto cert = dense_cert(sys, -1.0);
    const auto a = soundness_sweep(cert, sys, 40, 9);
    const auto b = soundness_sweep(cert, sys, 40, 9);
    EXPECT_EQ(a.confirmed, b.confirmed);
    EXPECT_EQ(a.violations, b.violations);
}

TEST(Validate, MismatchedCertificateIsRejected) {
    EXPECT_THROW((void)soundness_sweep(dense_cert(static_chain(3), 0.0), bicylinder(), 10, 1), StructuralError);
    EXPECT_THROW(check_compatible(dense_cert(static_chain(4), 0.0), bicylinder()), StructuralError);
}

TEST(Validate, VolumeOfConstantCertificates) {
    const auto sys = bicylinder();
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto full = mc_volume(dense_cert(sys, 1.0), 1000, seed);
        EXPECT_EQ(full.estimate, 8.0);
        EXPECT_EQ(full.std_error, 0.0);
    }
    const auto empty = mc_volume(dense_cert(sys, -1.0), 1000, 1);
    EXPECT_EQ(empty.estimate, 0.0);
    EXPECT_EQ(empty.members, 0u);
}

TEST(Validate, ResidualSweepSeesFeasibilityAndItsLoss) {
    const auto sys = static_chain(3);
    const auto prog = build_dense(sys, 2);
    const auto exact = residual_sweep(dense_cert(sys, 0.0), prog, 200, 1);
    ASSERT_EQ(exact.size(), 4u);
    for (const auto& r : exact) EXPECT_GE(r.minimum, 0.0) << r.name;
    const auto shifted = residual_sweep(dense_cert(sys, 1.0), prog, 200, 1);
    for (std::size_t i = 0; i < shifted.size(); ++i) {
        if (shifted[i].name == "terminal") EXPECT_GT(shifted[i].minimum, exact[i].minimum);
        if (shifted[i].name == "initial") EXPECT_LT(shifted[i].minimum, 0.0);
    }
}

TEST(Validate, GridShapeAndValues) {
    const auto cert = dense_cert(bicylinder(), 1.0);
    GridSpec spec{{0}, {2}, {}, std::nullopt};
    const auto g = grid_sample(cert, spec);
    ASSERT_EQ(g.rows.size(), 2u);
    EXPECT_EQ(g.rows[0][0], -1.0);
    EXPECT_EQ(g.rows[1][0], 1.0);
    for (const auto& row : g.rows) EXPECT_EQ(row.back(), 1.0);

    GridSpec plane{{0, 2}, {5, 3}, {0.0, 0.3, 0.0}, std::nullopt};
    const auto p = grid_sample(cert, plane);
    EXPECT_EQ(p.rows.size(), 15u);
    std::ostringstream os;
    write_grid(os, cert, plane, p);
    const auto text = os.str();
    EXPECT_NE(text.find("# axes x1 x3"), std::string::npos);
    EXPECT_NE(text.find("x2=0.3"), std::string::npos);
    EXPECT_NE(text.find("# degree 2"), std::string::npos);

    EXPECT_THROW((void)grid_sample(cert, GridSpec{{0, 1, 2, 0}, {2, 2, 2, 2}, {}, std::nullopt}), StructuralError);
    EXPECT_THROW((void)grid_sample(cert, GridSpec{{0}, {1}, {}, std::nullopt}), StructuralError);
}

TEST(Validate, ReportJsonIsVersioned) {
    const auto sys = static_chain(3);
    const auto cert = dense_cert(sys, 0.0);
    ValidationReport rep;
    rep.system = sys.name();
    rep.mode = "dense";
    rep.degree = 2;
    rep.soundness = soundness_sweep(cert, sys, 20, 1);
    rep.residuals = residual_sweep(cert, build_dense(sys, 2), 20, 1);
    rep.volume = mc_volume(cert, 100, 1);
    rep.timings = {{"validate", 0.1}};
    const auto j = nlohmann::json::parse(report_json(rep));
    EXPECT_EQ(j["version"], 1);
    EXPECT_EQ(j["passed"], true);
    EXPECT_EQ(j["soundness"]["violations"], 0);
    EXPECT_EQ(j["residuals"].size(), 4u);
    EXPECT_NE(report_summary(rep).find("PASS"), std::string::npos);
}
