#include <gtest/gtest.h>

#include <cmath>

#include "spme/stats.hpp"

using namespace spme;

TEST(Wilson, KnownValues) {
    // k = 5, n = 10, z = 1.96: centre 0.5, half width 0.2658.
    const auto ci = stats::wilson(5, 10);
    EXPECT_NEAR(ci.lo, 0.236593090512564, 1e-9);
    EXPECT_NEAR(ci.hi, 0.763406909487436, 1e-9);
    const auto zero = stats::wilson(0, 20);
    EXPECT_EQ(zero.lo, 0.0);
    EXPECT_GT(zero.hi, 0.0);
    const auto all = stats::wilson(20, 20);
    EXPECT_NEAR(all.hi, 1.0, 1e-15);
    EXPECT_LT(all.lo, 1.0);
    const auto empty = stats::wilson(0, 0);
    EXPECT_EQ(empty.lo, 0.0);
    EXPECT_EQ(empty.hi, 1.0);
}

TEST(Wilson, ShrinksWithSampleSize) {
    EXPECT_GT(stats::wilson(10, 20).half_width(), stats::wilson(100, 200).half_width());
}

TEST(LeastSquares, ExactLine) {
    const std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
    const auto f = stats::least_squares(x, y);
    EXPECT_NEAR(f.slope, 2.0, 1e-14);
    EXPECT_NEAR(f.intercept, 1.0, 1e-14);
    EXPECT_THROW(stats::least_squares(std::vector<double>{1}, std::vector<double>{1}), ShapeError);
    EXPECT_THROW(stats::least_squares(std::vector<double>{1, 1}, std::vector<double>{1, 2}), ShapeError);
}

TEST(PowerLaw, RecoversExponent) {
    const std::vector<double> x{0.1, 0.05, 0.025}, y{std::pow(0.1, 1.5), std::pow(0.05, 1.5), std::pow(0.025, 1.5)};
    EXPECT_NEAR(stats::power_law_exponent(x, y), 1.5, 1e-12);
    EXPECT_THROW(stats::power_law_exponent(std::vector<double>{1, 2}, std::vector<double>{0, 1}), ShapeError);
}

TEST(LogSpace, EndpointsAndRatio) {
    const auto v = stats::log_space(0.1, 20.0, 12);
    ASSERT_EQ(v.size(), 12u);
    EXPECT_EQ(v.front(), 0.1);
    EXPECT_EQ(v.back(), 20.0);
    for (std::size_t i = 2; i < v.size(); ++i) EXPECT_NEAR(v[i] / v[i - 1], v[1] / v[0], 1e-12);
    EXPECT_EQ(stats::log_space(1.0, 5.0, 1), std::vector<double>{5.0});
    EXPECT_THROW(stats::log_space(0.0, 1.0, 3), ConfigError);
}

TEST(MeanSe, Values) {
    const std::vector<double> v{1, 2, 3, 4};
    const auto r = stats::mean_se(v);
    EXPECT_DOUBLE_EQ(r.mean, 2.5);
    EXPECT_NEAR(r.se, std::sqrt(5.0 / 3.0 / 4.0), 1e-15);
    EXPECT_EQ(stats::mean_se(std::vector<double>{}).mean, 0.0);
}
