#include <gtest/gtest.h>

#include <cmath>

#include "spme/pme_solver.hpp"
#include "spme/transforms.hpp"

using namespace spme;

namespace {

DensityField bump_field(std::size_t n, const BumpProfile& b = {0.0, 0.5, 1.0}) {
    return initial_density(b, Grid1D{-1.0, 1.0, n});
}

double trapezoid_abs(const ExtendedField& f) {
    double s = 0.0;
    for (std::size_t i = 0; i < f.values.size(); ++i) {
        const double w = (i == 0 || i + 1 == f.values.size()) ? 0.5 : 1.0;
        s += w * std::abs(f.values[i]);
    }
    return s * f.grid.dx;
}

PressureField constant_pressure(double c, std::size_t n, double t = 0.0) {
    return PressureField{NodeGrid{0.0, 0.1, n}, t, std::vector<double>(n, c), 2.0};
}

}  // namespace

TEST(ShiftField, ZeroShiftIsIdentity) {
    const auto e = extend(bump_field(64), 0.5, 0.0);
    EXPECT_EQ(shift_field(e, 0.0).values, e.values);
}

TEST(ShiftField, GridAlignedShiftIsIndexShift) {
    const auto e = extend(bump_field(64), 0.5, 0.0);
    const double h = e.grid.dx;
    const auto s = shift_field(e, h);
    for (std::size_t i = 0; i + 1 < e.values.size(); ++i) EXPECT_EQ(s.values[i], e.values[i + 1]);
    EXPECT_EQ(s.values.back(), e.fill);
    const auto l = shift_field(e, -3.0 * h);
    for (std::size_t i = 3; i < e.values.size(); ++i) EXPECT_EQ(l.values[i], e.values[i - 3]);
}

TEST(ShiftField, MassIsTranslationInvariant) {
    const auto e = extend(bump_field(128), 0.6, 0.0);
    const double mass = trapezoid_abs(e);
    for (double delta : {0.0123, -0.31, 0.4999})
        EXPECT_NEAR(trapezoid_abs(shift_field(e, delta)), mass, 1e-10) << "delta=" << delta;
}

TEST(ShiftField, BeyondMarginIsRangeError) {
    const auto e = extend(bump_field(32), 0.2, 0.0);
    EXPECT_THROW(shift_field(e, e.margin * 1.5), RangeError);
    EXPECT_NO_THROW(shift_field(e, -e.margin));
}

TEST(ShiftField, RoundTripErrorIsSecondOrder) {
    std::vector<double> err;
    for (std::size_t n : {64u, 128u, 256u}) {
        const auto e = extend(bump_field(n), 0.5, 0.0);
        const double delta = 0.3 * e.grid.dx + 0.0371;
        const auto back = shift_field(shift_field(e, delta), -delta);
        double m = 0.0;
        for (std::size_t i = 0; i < e.values.size(); ++i) m = std::max(m, std::abs(back.values[i] - e.values[i]));
        err.push_back(m);
    }
    EXPECT_GT(err[0] / err[1], 3.0);
    EXPECT_GT(err[1] / err[2], 3.0);
}

TEST(Pressure, PointExamples) {
    EXPECT_EQ(to_pressure(std::vector<double>{0.0}, 2.0)[0], 0.0);
    EXPECT_DOUBLE_EQ(to_pressure(std::vector<double>{1.0}, 2.0)[0], 2.0);
    EXPECT_DOUBLE_EQ(to_pressure(std::vector<double>{0.5}, 3.0)[0], 0.375);
}

TEST(Pressure, ExponentAtMostOneIsConfigError) {
    EXPECT_THROW(to_pressure(std::vector<double>{1.0}, 1.0), ConfigError);
    EXPECT_THROW(to_pressure(std::vector<double>{1.0}, 0.5), ConfigError);
    EXPECT_THROW(to_pressure(std::vector<double>{-1.0}, 2.0), ConfigError);
}

TEST(Pressure, RoundTripAndMonotone) {
    std::vector<double> u;
    for (int i = 0; i <= 100; ++i) u.push_back(0.02 * i);
    for (double m : {1.5, 2.0, 3.0, 4.5}) {
        const auto p = to_pressure(u, m);
        const auto back = from_pressure(p, m);
        for (std::size_t i = 0; i < u.size(); ++i) EXPECT_NEAR(back[i], u[i], 1e-12);
        for (std::size_t i = 1; i < p.size(); ++i) EXPECT_GT(p[i], p[i - 1]);
    }
}

TEST(FlowFrame, ZeroPathIsIdentity) {
    const auto p = BrownianPath::from_values(std::vector<double>(11, 0.0), 0.1);
    std::vector<DensityField> snaps{bump_field(64), bump_field(64)};
    snaps[1].time = 0.5;
    const auto moved = flow_frame(snaps, p, 1.0, FrameMode::to_moving, 0.3, 0.0);
    for (std::size_t k = 0; k < snaps.size(); ++k) EXPECT_EQ(moved[k].values, extend(snaps[k], 0.3, 0.0).values);
}

TEST(FlowFrame, RoundTripWithinInterpolationError) {
    const auto path = sample_path(1.0, 0.01, 17);
    std::vector<double> err;
    for (std::size_t n : {100u, 200u}) {
        std::vector<DensityField> snaps;
        for (double t : {0.2, 0.5, 1.0}) {
            auto f = bump_field(n);
            f.time = t;
            snaps.push_back(f);
        }
        const double margin = ambient_margin(1.0, path.max_abs(), snaps[0].grid.h());
        const auto moved = flow_frame(snaps, path, 1.0, FrameMode::to_moving, margin, 0.0);
        const auto back = flow_frame(moved, path, 1.0, FrameMode::to_lab);
        double m = 0.0;
        for (std::size_t k = 0; k < snaps.size(); ++k) {
            const auto ref = extend(snaps[k], margin, 0.0);
            for (std::size_t i = 0; i < ref.values.size(); ++i) m = std::max(m, std::abs(back[k].values[i] - ref.values[i]));
        }
        const double h = snaps[0].grid.h();
        EXPECT_LE(m, 40.0 * h * h) << "n=" << n;
        err.push_back(m);
    }
    EXPECT_GT(err[0] / err[1], 3.0);
}

TEST(FlowFrame, TooSmallAmbientGridIsRangeError) {
    const auto path = BrownianPath::from_values({0.0, 0.5, 1.0}, 0.5);
    auto f = bump_field(64);
    f.time = 1.0;
    EXPECT_THROW(flow_frame(std::vector<DensityField>{f}, path, 1.0, FrameMode::to_moving, 0.5, 0.0), RangeError);
}

TEST(FlowFrame, DomainBoundaryFollowsPath) {
    SolverConfig cfg;
    cfg.grid = Grid1D{-1.0, 1.0, 128};
    cfg.epsilon = 0.02;
    cfg.t_end = 0.5;
    const auto path = sample_path(cfg.t_end, 0.005, 23);
    const auto trace = solve(cfg, mollify(path, cfg.epsilon), initial_density(BumpProfile{0.0, 0.5, 1.0}, cfg.grid), 0.05);
    const double h = cfg.grid.h();
    const double sentinel = -1.0;
    const double margin = ambient_margin(cfg.nu, path.max_abs(), h);
    const auto moved = flow_frame(trace.snapshots, path, cfg.nu, FrameMode::to_moving, margin, sentinel, cfg.epsilon);
    for (const auto& f : moved) {
        std::size_t first = f.values.size(), last = 0;
        for (std::size_t i = 0; i < f.values.size(); ++i)
            if (f.values[i] != sentinel) {
                first = std::min(first, i);
                last = i;
            }
        ASSERT_LT(first, f.values.size());
        const double x = cfg.nu * path.value_at(f.time);
        EXPECT_NEAR(f.grid.x(first), cfg.grid.a + x, 2.0 * h) << "t=" << f.time;
        EXPECT_NEAR(f.grid.x(last), cfg.grid.b + x, 2.0 * h) << "t=" << f.time;
        EXPECT_NEAR(f.domain_lo, cfg.grid.a + x, 1e-12);
    }
}

TEST(UpperEnvelope, SingleFieldZeroRadiiIsIdentity) {
    PressureField p{NodeGrid{0.0, 0.1, 5}, 0.0, {0.0, 1.0, 3.0, 2.0, 0.5}, 2.0};
    const auto env = upper_envelope({{p}}, 0.0, 0.0);
    ASSERT_EQ(env.size(), 1u);
    EXPECT_EQ(env[0].values, p.values);
}

TEST(UpperEnvelope, ConstantsGivePointwiseMax) {
    const auto env = upper_envelope({{constant_pressure(1.0, 6)}, {constant_pressure(3.0, 6)}, {constant_pressure(2.0, 6)}},
                                    0.25, 0.1);
    for (double v : env[0].values) EXPECT_EQ(v, 3.0);
}

TEST(UpperEnvelope, DominatesMembersAndIsMonotoneInRadiiAndFamily) {
    std::vector<std::vector<PressureField>> family;
    for (int k = 0; k < 3; ++k) {
        std::vector<PressureField> hist;
        for (int l = 0; l < 4; ++l) {
            PressureField p{NodeGrid{0.0, 0.1, 20}, 0.1 * l, std::vector<double>(20), 2.0};
            for (std::size_t i = 0; i < 20; ++i) p.values[i] = std::sin(0.7 * i + k + 0.3 * l) + 1.0;
            hist.push_back(p);
        }
        family.push_back(hist);
    }
    const auto small = upper_envelope(family, 0.1, 0.2);
    const auto wide = upper_envelope(family, 0.3, 0.5);
    auto fewer = family;
    fewer.pop_back();
    const auto sub = upper_envelope(fewer, 0.1, 0.2);
    for (std::size_t l = 0; l < 4; ++l)
        for (std::size_t i = 0; i < 20; ++i) {
            for (const auto& member : family) EXPECT_GE(small[l].values[i], member[l].values[i]);
            EXPECT_GE(wide[l].values[i], small[l].values[i]);
            EXPECT_GE(small[l].values[i], sub[l].values[i]);
        }
}

TEST(UpperEnvelope, EmptyFamilyIsConfigError) {
    EXPECT_THROW(upper_envelope({}, 0.1, 0.1), ConfigError);
    EXPECT_THROW(upper_envelope({{constant_pressure(1.0, 4)}, {constant_pressure(1.0, 5)}}, 0.1, 0.1), ShapeError);
}

TEST(PressureResidual, ConstantFieldIsZero) {
    std::vector<PressureField> frames{constant_pressure(2.0, 20, 0.0), constant_pressure(2.0, 20, 0.1),
                                      constant_pressure(2.0, 20, 0.2)};
    const std::vector<double> lo(3, 0.0), hi(3, 1.9);
    const auto r = pressure_residual(frames, lo, hi, 2.0, 0.3);
    EXPECT_EQ(r.max, 0.0);
    EXPECT_GT(r.points, 0u);
}

TEST(PressureResidual, LinearFieldGivesMinusOne) {
    std::vector<PressureField> frames;
    for (int l = 0; l < 3; ++l) {
        PressureField p{NodeGrid{0.0, 0.1, 20}, 0.1 * l, std::vector<double>(20), 3.0};
        for (std::size_t i = 0; i < 20; ++i) p.values[i] = p.grid.x(i);
        frames.push_back(p);
    }
    const std::vector<double> lo(3, 0.0), hi(3, 1.9);
    const auto r = pressure_residual(frames, lo, hi, 3.0, 0.3);
    EXPECT_NEAR(r.max, 1.0, 1e-12);
    EXPECT_GT(r.points, 0u);
    EXPECT_NEAR(r.l1, 1.0 * (static_cast<double>(r.points) * 0.1 * 0.1), 1e-12);
}

TEST(PressureResidual, TooFewLevelsIsShapeError) {
    std::vector<PressureField> frames{constant_pressure(1.0, 5), constant_pressure(1.0, 5, 0.1)};
    EXPECT_THROW(pressure_residual(frames, {0.0, 0.0}, {1.0, 1.0}, 2.0, 0.1), ShapeError);
}

TEST(PressureResidual, SolverOutputConvergesAtFirstOrderInTime) {
    // Diffusive scaling: dt ~ h^2, so scaling n by sqrt(2) halves dt. The
    // snapshot spacing follows dt.
    std::vector<double> norms;
    for (std::size_t n : {90u, 127u}) {
        SolverConfig cfg;
        cfg.nu = 0.0;
        cfg.epsilon = 0.2;
        cfg.grid = Grid1D{-1.0, 1.0, n};
        cfg.t_end = 0.06;
        cfg.cfl = 0.9;
        const auto path = BrownianPath::from_values(std::vector<double>(101, 0.0), 0.01);
        const auto u0 = initial_density(BumpProfile{0.0, 0.6, 1.0}, cfg.grid);
        const double spacing = 1e-3 * (90.0 / static_cast<double>(n)) * (90.0 / static_cast<double>(n));
        const auto trace = solve(cfg, mollify(path, 0.02), u0, spacing);
        std::vector<PressureField> frames;
        std::vector<double> lo, hi;
        for (const auto& s : trace.snapshots) {
            frames.push_back(to_pressure(s, cfg.m));
            lo.push_back(cfg.grid.a);
            hi.push_back(cfg.grid.b);
        }
        norms.push_back(pressure_residual(frames, lo, hi, cfg.m, 0.4).l1);
    }
    const double ratio = norms[0] / norms[1];
    RecordProperty("ratio", std::to_string(ratio));
    EXPECT_GE(ratio, 1.5);
    EXPECT_LE(ratio, 3.0);
}

TEST(PressureBounds, TransformedApproximationsStayInBand) {
    SolverConfig cfg;
    cfg.grid = Grid1D{-1.0, 1.0, 96};
    cfg.epsilon = 0.02;
    cfg.t_end = 0.4;
    const auto path = sample_path(cfg.t_end, 0.005, 31);
    const auto mp = mollify(path, cfg.epsilon);
    const auto u0 = initial_density(BumpProfile{0.0, 0.5, 1.0}, cfg.grid);
    const auto trace = solve(cfg, mp, u0, 0.05);
    const double margin = ambient_margin(cfg.nu, path.max_abs(), cfg.grid.h());
    const auto moved = flow_frame(trace.snapshots, mp, cfg.nu, FrameMode::to_moving, margin, cfg.epsilon);
    const double lo = pressure_of(cfg.epsilon, cfg.m);
    const double hi = pressure_of(cfg.epsilon + u0.max(), cfg.m);
    for (const auto& f : moved)
        for (double p : to_pressure(f, cfg.m).values) {
            EXPECT_GE(p, lo - 1e-12);
            EXPECT_LE(p, hi + 1e-12);
        }
}
