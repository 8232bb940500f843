#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "spme/extinction.hpp"

using namespace spme;

namespace {

/// Root of 3t = 1 + t^{1/3}, 18-digit bisection.
constexpr double linear_crossing_root = 0.617127690955641464;

SolveTrace hand_trace(const std::vector<double>& times, const std::vector<double>& excess, double eps = 0.01) {
    SolveTrace tr;
    tr.epsilon = eps;
    const Grid1D g{-1.0, 1.0, 8};
    for (std::size_t k = 0; k < times.size(); ++k) {
        DensityField f(g, times[k], eps);
        f.values[3] = eps + excess[k];
        tr.snapshots.push_back(f);
    }
    return tr;
}

McConfig tiny_mc(std::size_t paths) {
    McConfig c;
    c.solver.grid = Grid1D{-1.0, 1.0, 24};
    c.solver.epsilon = 0.04;
    c.solver.stop_when_extinct = true;
    c.initial = BumpProfile{0.0, 0.5, 0.25};
    c.paths = paths;
    c.horizons = stats::log_space(0.1, 2.0, 5);
    c.snapshot_dt = 0.05;
    return c;
}

}  // namespace

TEST(DetectExtinction, ConstantTraceIsExtinctAtFirstSnapshot) {
    const auto tr = hand_trace({0.0, 0.5, 1.0}, {0.0, 0.0, 0.0});
    const auto t = detect_extinction(tr, 1e-9, tr.epsilon);
    ASSERT_TRUE(t);
    EXPECT_EQ(*t, 0.0);
}

TEST(DetectExtinction, NeverDecayingIsCensored) {
    const auto tr = hand_trace({0.0, 0.5, 1.0}, {1.0, 0.9, 0.8});
    EXPECT_FALSE(detect_extinction(tr, 0.1, tr.epsilon));
}

TEST(DetectExtinction, ExponentialDecayCrossesAtTwo) {
    std::vector<double> times, excess;
    for (int k = 0; k <= 40; ++k) {
        times.push_back(0.1 * k);
        excess.push_back(std::exp(-0.1 * k));
    }
    const auto tr = hand_trace(times, excess);
    const auto t = detect_extinction(tr, std::exp(-2.0) * (1.0 + 1e-12), tr.epsilon);
    ASSERT_TRUE(t);
    EXPECT_GE(*t, 2.0 - 1e-12);
    EXPECT_LE(*t, 2.0 + 0.1);
}

TEST(DetectExtinction, ReignitionIsIntegrityError) {
    const auto tr = hand_trace({0.0, 0.5, 1.0, 1.5}, {1.0, 0.0, 0.5, 0.0});
    EXPECT_THROW(detect_extinction(tr, 1e-3, tr.epsilon), IntegrityError);
}

TEST(HittingTime, ZeroPathIsCensored) {
    const auto p = BrownianPath::from_values(std::vector<double>(1001, 0.0), 0.01);
    EXPECT_FALSE(hitting_time(p, 1.0, 1.0, 2.0, 1.0, Convention::paper));
    EXPECT_FALSE(hitting_time(p, 1.0, 1.0, 2.0, 1.0, Convention::heuristic));
}

TEST(HittingTime, LinearPathMatchesBisectionRoot) {
    const double dt = 1e-3;
    std::vector<double> v(2001);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = 3.0 * static_cast<double>(k) * dt;
    const auto p = BrownianPath::from_values(v, dt);
    const auto t = hitting_time(p, 1.0, 1.0, 2.0, 1.0, Convention::paper);
    ASSERT_TRUE(t);
    EXPECT_NEAR(*t, linear_crossing_root, dt);
}

TEST(HittingTime, ConventionsDifferByNoiseStrength) {
    const double dt = 1e-3;
    std::vector<double> v(4001);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = -1.5 * static_cast<double>(k) * dt;
    const auto p = BrownianPath::from_values(v, dt);
    const auto paper = hitting_time(p, 1.0, 1.0, 2.0, 2.0, Convention::paper);
    const auto heur = hitting_time(p, 1.0, 1.0, 2.0, 2.0, Convention::heuristic);
    ASSERT_TRUE(paper && heur);
    EXPECT_NEAR(*heur, linear_crossing_root, dt);
    EXPECT_GT(*paper, *heur);
}

TEST(HittingTime, MonotoneInBarrierConstant) {
    for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
        const auto p = sample_path(50.0, 0.01, seed);
        double prev = 0.0;
        for (double M : {0.1, 0.5, 1.0, 2.0, 4.0}) {
            const auto t = hitting_time(p, 1.0, M, 2.0, 1.0, Convention::heuristic);
            const double v = t ? *t : std::numeric_limits<double>::infinity();
            EXPECT_GE(v, prev) << "seed " << seed << " M " << M;
            prev = v;
        }
    }
}

TEST(HittingTime, InvalidBarrierIsConfigError) {
    const auto p = sample_path(1.0, 0.01, 1);
    EXPECT_THROW(hitting_time(p, 0.0, 1.0, 2.0, 1.0, Convention::paper), ConfigError);
    EXPECT_THROW(hitting_time(p, 1.0, -1.0, 2.0, 1.0, Convention::paper), ConfigError);
    EXPECT_THROW(parse_convention("other"), ConfigError);
}

TEST(PathOnlyHitting, StreamMatchesSampledPath) {
    const Barrier b{1.0, 0.5, 2.0, 1.0, Convention::heuristic};
    for (std::size_t i = 0; i < 5; ++i) {
        const auto seed = derive_seed(7, i);
        const auto direct = hitting_time(sample_path(30.0, 0.01, seed), b);
        const auto streamed = stream_hitting_time(b, 30.0, 0.01, seed);
        ASSERT_EQ(direct.has_value(), streamed.has_value());
        if (direct) {
            EXPECT_EQ(*direct, *streamed);
        }
    }
}

TEST(PathOnlyHitting, CdfMonotoneAndWorkerIndependent) {
    const Barrier b{2.0, 1.0, 2.0, 1.0, Convention::heuristic};
    const auto h = stats::log_space(0.1, 100.0, 10);
    const auto a = path_only_hitting(b, 300, h, 0.01, 3, 1);
    const auto c = path_only_hitting(b, 300, h, 0.01, 3, 3);
    EXPECT_EQ(a.cdf, c.cdf);
    EXPECT_EQ(a.times, c.times);
    for (std::size_t k = 1; k < a.cdf.size(); ++k) EXPECT_GE(a.cdf[k], a.cdf[k - 1]);
    const auto q = a.quantile(0.5);
    ASSERT_TRUE(q);
    EXPECT_GE(a.probability_by(*q), 0.5);
}

TEST(McExtinction, ZeroNoiseGivesFlatExtinctionCurve) {
    auto c = tiny_mc(3);
    c.solver.nu = 0.0;
    c.solver.stop_when_extinct = false;
    const auto r = mc_extinction(c);
    for (double p : r.summary.p_ext) EXPECT_EQ(p, 0.0);
    for (double p : r.summary.p_hat) EXPECT_EQ(p, 0.0);
}

TEST(McExtinction, SmallRunIsDeterministicAcrossRerunsAndWorkers) {
    auto c = tiny_mc(4);
    const auto a = mc_extinction(c);
    c.workers = 3;
    const auto b = mc_extinction(c);
    std::ostringstream sa, sb;
    write_summary_csv(sa, a.summary);
    write_records_csv(sa, a.records);
    write_summary_csv(sb, b.summary);
    write_records_csv(sb, b.records);
    EXPECT_EQ(sa.str(), sb.str());
    ASSERT_EQ(a.records.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(a.records[i].index, i);
        EXPECT_EQ(a.records[i].seed, derive_seed(c.master_seed, i));
        EXPECT_FALSE(a.records[i].failed);
    }
}

TEST(McExtinction, SummaryInvariants) {
    const auto r = mc_extinction(tiny_mc(6));
    const auto& s = r.summary;
    ASSERT_EQ(s.p_ext.size(), s.horizons.size());
    for (std::size_t h = 0; h < s.horizons.size(); ++h) {
        EXPECT_GE(s.p_ext[h], 0.0);
        EXPECT_LE(s.p_ext[h], 1.0);
        EXPECT_LE(s.p_ext_lo[h], s.p_ext[h]);
        EXPECT_GE(s.p_ext_hi[h], s.p_ext[h]);
        if (h > 0) {
            EXPECT_GE(s.p_ext[h], s.p_ext[h - 1]);
            EXPECT_GE(s.p_hat[h], s.p_hat[h - 1]);
        }
    }
    EXPECT_EQ(s.valid, 6u);
    EXPECT_GT(s.M_bar, 0.0);
}

TEST(McExtinction, FailuresAboveFivePercentAbortTheRun) {
    auto c = tiny_mc(4);
    c.solver.max_steps = 2;
    EXPECT_THROW(mc_extinction(c), IntegrityError);
}

TEST(McExtinction, RejectsTooFewPaths) {
    EXPECT_THROW(mc_extinction(tiny_mc(1)), ConfigError);
    auto c = tiny_mc(3);
    c.horizons = {1.0, 0.5};
    EXPECT_THROW(mc_extinction(c), ConfigError);
}

TEST(McExtinction, CsvSchemas) {
    const auto r = mc_extinction(tiny_mc(2));
    std::ostringstream s, rec;
    write_summary_csv(s, r.summary);
    write_records_csv(rec, r.records);
    EXPECT_EQ(s.str().substr(0, s.str().find('\n')), "T,p_ext,p_ext_lo,p_ext_hi,p_hat,p_hat_lo,p_hat_hi");
    EXPECT_EQ(rec.str().substr(0, rec.str().find('\n')),
              "index,seed,T_extinct,T_hat,T_hat_paper,T_hat_heuristic,epsilon,config_digest,path_digest,failed");
    std::size_t lines = 0;
    for (char ch : rec.str()) lines += ch == '\n';
    EXPECT_EQ(lines, 3u);
}
