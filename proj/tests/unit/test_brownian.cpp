#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "spme/brownian.hpp"
#include "spme/rng.hpp"

using namespace spme;

namespace {

BrownianPath linear_path(double horizon, double dt, double slope = 1.0) {
    const auto n = static_cast<std::size_t>(std::llround(horizon / dt));
    std::vector<double> v(n + 1);
    for (std::size_t k = 0; k <= n; ++k) v[k] = slope * static_cast<double>(k) * dt;
    return BrownianPath::from_values(v, dt);
}

/// All-pairs Hoelder constant.
double hoelder_brute_force(const BrownianPath& p, double alpha) {
    const auto v = p.values();
    const auto t = p.t_grid();
    double c = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = i + 1; j < v.size(); ++j) c = std::max(c, std::abs(v[j] - v[i]) / std::pow(t[j] - t[i], alpha));
    return c;
}

}  // namespace

TEST(SamplePath, ZeroGeneratorGivesZeroPath) {
    const auto p = sample_path(1.0, 0.5, 7, [] { return 0.0; });
    ASSERT_EQ(p.size(), 3u);
    for (double v : p.values()) EXPECT_EQ(v, 0.0);
}

TEST(SamplePath, GridStartsAtZeroAndIsUniform) {
    const auto p = sample_path(1.0, 0.01, 3);
    EXPECT_EQ(p.values()[0], 0.0);
    EXPECT_EQ(p.t_grid()[0], 0.0);
    for (std::size_t k = 1; k < p.size(); ++k) EXPECT_NEAR(p.t_grid()[k] - p.t_grid()[k - 1], 0.01, 1e-15);
    EXPECT_NEAR(p.horizon(), 1.0, 1e-12);
}

TEST(SamplePath, IncrementVarianceWithinChiSquareBounds) {
    const double dt = 1.0 / 1024.0;
    const auto p = sample_path(1.0, dt, 42);
    ASSERT_EQ(p.size(), 1025u);
    const auto v = p.values();
    double mean = 0.0;
    for (std::size_t k = 1; k < v.size(); ++k) mean += v[k] - v[k - 1];
    mean /= 1024.0;
    double ss = 0.0;
    for (std::size_t k = 1; k < v.size(); ++k) ss += (v[k] - v[k - 1] - mean) * (v[k] - v[k - 1] - mean);
    const double var = ss / 1023.0;
    EXPECT_GE(var, 0.8 * dt);
    EXPECT_LE(var, 1.2 * dt);
}

TEST(SamplePath, SameSeedIsByteIdentical) {
    const auto a = sample_path(1.0, 0.01, 99);
    const auto b = sample_path(1.0, 0.01, 99);
    const auto m = mollify(a, 0.05);
    std::ostringstream sa, sb;
    write_path_binary(sa, a, m);
    write_path_binary(sb, b, mollify(b, 0.05));
    EXPECT_EQ(sa.str(), sb.str());
    EXPECT_EQ(a.digest(), b.digest());
    EXPECT_NE(a.digest(), sample_path(1.0, 0.01, 100).digest());
}

TEST(SamplePath, RejectsBadArguments) {
    EXPECT_THROW(sample_path(0.0, 0.1, 1), ConfigError);
    EXPECT_THROW(sample_path(1.0, -0.1, 1), ConfigError);
    EXPECT_THROW(sample_path(1.0, 0.6, 1), ConfigError);
}

TEST(SamplePath, DerivedSeedsDiffer) {
    EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
    EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
    EXPECT_EQ(derive_seed(5, 3), derive_seed(5, 3));
}

TEST(SamplePath, IncrementsLookIndependent) {
    // Lag-one correlation of 1e5 increments is O(1/sqrt(n)).
    const auto p = sample_path(100.0, 1e-3, 11);
    const auto v = p.values();
    double s11 = 0.0, s12 = 0.0;
    for (std::size_t k = 2; k < v.size(); ++k) {
        const double a = v[k - 1] - v[k - 2], b = v[k] - v[k - 1];
        s11 += a * a;
        s12 += a * b;
    }
    EXPECT_LT(std::abs(s12 / s11), 4.0 / std::sqrt(static_cast<double>(v.size())));
}

TEST(Mollifier, UnitMassAndSymmetricFirstMoment) {
    const Mollifier rho;
    double mass = 0.0;
    for (double w : rho.weights()) mass += w;
    EXPECT_NEAR(mass, 1.0, 1e-14);
    EXPECT_NEAR(rho.first_moment(), 0.5, 1e-12);
    EXPECT_THROW(Mollifier(32), ConfigError);
}

TEST(Mollify, ZeroPathGivesZero) {
    const auto p = BrownianPath::from_values(std::vector<double>(101, 0.0), 0.01);
    const auto m = mollify(p, 0.05);
    for (double v : m.values()) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(m.drift_at(0.5), 0.0);
}

TEST(Mollify, LinearPathShiftsByFirstMoment) {
    const double eps = 0.05;
    const auto p = linear_path(1.0, 0.001);
    const auto m = mollify(p, eps);
    for (double t : {0.05, 0.1, 0.37, 0.8, 1.0}) {
        EXPECT_NEAR(m.value_at(t), t - eps * 0.5, 1e-8) << "t=" << t;
        EXPECT_NEAR(m.drift_at(t), 1.0, 1e-6) << "t=" << t;
    }
}

TEST(Mollify, StartsAtZero) {
    const auto p = sample_path(1.0, 0.001, 5);
    EXPECT_EQ(mollify(p, 0.01).value_at(0.0), 0.0);
}

TEST(Mollify, RejectsUnresolvedEpsilon) {
    const auto p = sample_path(1.0, 0.01, 5);
    EXPECT_THROW(mollify(p, 0.015), ResolutionError);
    EXPECT_NO_THROW(mollify(p, 0.02));
}

TEST(Mollify, AdaptedUnderFutureMutation) {
    const auto base = sample_path(1.0, 0.001, 8);
    std::vector<double> values(base.values().begin(), base.values().end());
    const auto before = mollify(BrownianPath::from_values(values, 0.001), 0.02);
    const std::size_t cut = 500;
    for (std::size_t k = cut + 1; k < values.size(); ++k) values[k] += 10.0;
    const auto after = mollify(BrownianPath::from_values(values, 0.001), 0.02);
    for (std::size_t k = 0; k <= cut; ++k) {
        EXPECT_EQ(before.values()[k], after.values()[k]);
    }
    EXPECT_EQ(before.drift_at(0.5), after.drift_at(0.5));
    EXPECT_NE(before.values()[cut + 1], after.values()[cut + 1]);
}

TEST(Mollify, SupBoundedBySupOfPath) {
    for (std::uint64_t s = 1; s <= 5; ++s) {
        const auto p = sample_path(2.0, 0.001, s);
        const auto m = mollify(p, 0.05);
        double sup = 0.0;
        for (double v : m.values()) sup = std::max(sup, std::abs(v));
        EXPECT_LE(sup, p.max_abs() + 1e-15);
    }
}

TEST(SupDistance, DirectCases) {
    const std::vector<double> a{0, 1, 0}, b{0, 0.5, 0};
    EXPECT_EQ(sup_distance(a, a), 0.0);
    EXPECT_EQ(sup_distance(a, b), 0.5);
    EXPECT_THROW(sup_distance(std::vector<double>{1, 2}, std::vector<double>{1}), ShapeError);
}

TEST(SupDistance, GridMismatchIsShapeError) {
    const auto p = sample_path(1.0, 0.001, 2);
    const auto q = sample_path(1.0, 0.002, 2);
    EXPECT_THROW(sup_distance(p, mollify(q, 0.01)), ShapeError);
}

TEST(SupDistance, DecreasesAlongEpsilonLadder) {
    const auto p = sample_path(1.0, 1.0 / 4096.0, 42);
    double prev = std::numeric_limits<double>::infinity();
    for (double eps : {0.1, 0.05, 0.025}) {
        const double d = sup_distance(p, mollify(p, eps));
        EXPECT_LT(d, prev) << "eps=" << eps;
        prev = d;
    }
}

TEST(SupDistance, BoundedByHoelderWindow) {
    const auto p = sample_path(1.0, 1.0 / 4096.0, 42);
    const double c = hoelder_constant(p, 0.4).c_alpha;
    for (double eps : {0.1, 0.05, 0.025}) EXPECT_LE(sup_distance(p, mollify(p, eps)), c * std::pow(2.0 * eps, 0.4) + 1e-12);
}

TEST(Hoelder, TrivialCases) {
    EXPECT_EQ(hoelder_constant(BrownianPath::from_values({0, 0, 0, 0}, 0.25), 0.4).c_alpha, 0.0);
    EXPECT_NEAR(hoelder_constant(BrownianPath::from_values({0, 1}, 1.0), 0.4).c_alpha, 1.0, 1e-15);
    EXPECT_THROW(hoelder_constant(BrownianPath::from_values({0, 1}, 1.0), 0.3), ConfigError);
    EXPECT_THROW(hoelder_constant(BrownianPath::from_values({0, 1}, 1.0), 0.5), ConfigError);
}

TEST(Hoelder, MatchesAllPairsOracle) {
    for (std::uint64_t s : {1u, 42u, 77u}) {
        const auto p = sample_path(1.0, 1.0 / 512.0, s);
        EXPECT_DOUBLE_EQ(hoelder_constant(p, 0.4).c_alpha, hoelder_brute_force(p, 0.4)) << "seed " << s;
        EXPECT_DOUBLE_EQ(hoelder_constant(p, 0.45).c_alpha, hoelder_brute_force(p, 0.45)) << "seed " << s;
    }
}

TEST(Hoelder, SubGridNeverIncreases) {
    const auto p = sample_path(1.0, 1.0 / 1024.0, 3);
    const double full = hoelder_constant(p, 0.4).c_alpha;
    EXPECT_LE(hoelder_constant(p.restrict(2), 0.4).c_alpha, full);
    EXPECT_LE(hoelder_constant(p.restrict(8), 0.4).c_alpha, full);
}

TEST(BrownianPath, ValueAtInterpolatesAndGuardsHorizon) {
    const auto p = BrownianPath::from_values({0.0, 1.0, 3.0}, 0.5);
    EXPECT_EQ(p.value_at(-1.0), 0.0);
    EXPECT_DOUBLE_EQ(p.value_at(0.25), 0.5);
    EXPECT_DOUBLE_EQ(p.value_at(0.75), 2.0);
    EXPECT_DOUBLE_EQ(p.value_at(1.0), 3.0);
    EXPECT_THROW(p.value_at(1.1), RangeError);
}

TEST(BrownianPath, RestrictKeepsEveryStrideSample) {
    const auto p = sample_path(1.0, 0.01, 4);
    const auto q = p.restrict(4);
    EXPECT_NEAR(q.dt(), 0.04, 1e-15);
    for (std::size_t k = 0; k < q.size(); ++k) EXPECT_EQ(q.values()[k], p.values()[4 * k]);
}

TEST(PathIo, CsvSchemaAndBinaryRoundTrip) {
    const auto p = sample_path(0.1, 0.01, 12);
    const auto m = mollify(p, 0.02);
    std::ostringstream csv;
    write_path_csv(csv, p, m);
    std::istringstream lines(csv.str());
    std::string header;
    std::getline(lines, header);
    EXPECT_EQ(header, "t,B,B_eps");
    std::size_t rows = 0;
    for (std::string line; std::getline(lines, line);) ++rows;
    EXPECT_EQ(rows, p.size());

    std::stringstream bin;
    write_path_binary(bin, p, m);
    const auto rec = read_path_binary(bin);
    EXPECT_EQ(rec.path.seed(), 12u);
    EXPECT_EQ(rec.epsilon, 0.02);
    EXPECT_EQ(rec.path.digest(), p.digest());
    for (std::size_t k = 0; k < p.size(); ++k) EXPECT_EQ(rec.mollified[k], m.values()[k]);

    std::stringstream bad("NOTAPATH");
    EXPECT_ANY_THROW(read_path_binary(bad));
}
