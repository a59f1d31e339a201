#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "formcount/experiments.hpp"

using namespace formcount;

namespace {

ExperimentConfig base_config()
{
    ExperimentConfig c;
    c.sig = Signature(3, 2, 2);
    c.g_seed = 1;
    c.kappa = 1.0;
    c.c = 2.0;
    c.t_grid = {8.0, 12.0, 16.0};
    c.samples = 100000;
    return c;
}

} // namespace

TEST(ExperimentConfig, JsonRoundTrip)
{
    auto c = base_config();
    c.kappa_prime = 1.5;
    c.nu_claimed = 0.25;
    const json j = c;
    const auto d = j.get<ExperimentConfig>();
    EXPECT_EQ(json(d), j);
    EXPECT_EQ(d.kappa_prime_value(), 1.5);
    EXPECT_EQ(ExperimentConfig{}.kappa_prime_value(), 0.25);
}

TEST(ExperimentConfig, FormFromSeedIsReproducible)
{
    const auto c = base_config();
    EXPECT_EQ(c.make_form().g(), c.make_form().g());
    auto e = c;
    e.g_seed = 2;
    EXPECT_NE(c.make_form().g(), e.make_form().g());
    ExperimentConfig id;
    id.sig = Signature(2, 1, 2);
    EXPECT_EQ(id.make_form().g(), Matrix::identity(3));
}

TEST(FixedTarget, SeriesShape)
{
    const auto c = base_config();
    const auto series = fixed_target_run(c, 1);
    ASSERT_EQ(series.size(), 3u);
    for (const auto& p : series) {
        EXPECT_TRUE(p.error.empty());
        EXPECT_NEAR(p.I.length(), 2.0 / p.t, 1e-12);
        EXPECT_TRUE(p.exists);
        EXPECT_NEAR(p.normalized_error, p.abs_error / std::pow(p.t, 2.0), 1e-12);
        EXPECT_NEAR(p.prediction / p.count, 1.0, 0.5);
    }
}

TEST(FixedTarget, RecordsPerPointFailures)
{
    auto c = base_config();
    c.t_grid = {8.0, 1e12};
    const auto series = fixed_target_run(c, 1);
    ASSERT_EQ(series.size(), 2u);
    EXPECT_TRUE(series[0].error.empty());
    EXPECT_FALSE(series[1].error.empty());
}

TEST(FixedTarget, Validation)
{
    auto c = base_config();
    c.kappa = 3.0;
    EXPECT_THROW(fixed_target_run(c, 1), ValidationError);
    c = base_config();
    c.t_grid = {};
    EXPECT_THROW(fixed_target_run(c, 1), ValidationError);
    c = base_config();
    c.t_grid = {4.0, 2.0};
    EXPECT_THROW(fixed_target_run(c, 1), ValidationError);
    c = base_config();
    c.c = 0.0;
    EXPECT_THROW(fixed_target_run(c, 1), ValidationError);
}

TEST(UniformTarget, WindowsAndSpotChecks)
{
    auto c = base_config();
    c.kappa = 0.5;
    c.t_grid = {12.0, 20.0};
    c.spot_checks = 10;
    const auto pts = uniform_target_run(c, 1);
    ASSERT_EQ(pts.size(), 2u);
    for (const auto& p : pts) {
        EXPECT_TRUE(p.error.empty()) << p.error;
        EXPECT_NEAR(p.window_length, std::pow(p.t, -0.5), 1e-12);
        EXPECT_EQ(p.subdivisions, static_cast<std::size_t>(std::ceil(std::pow(p.t, 0.25))));
        EXPECT_EQ(p.spot_checks.size(), 10u);
        EXPECT_EQ(p.spot_mismatches(), 0u);
        EXPECT_GT(p.windows, 0u);
        EXPECT_NEAR(p.worst.length(), p.window_length, 1e-9);
        EXPECT_GE(p.worst.lo, -p.N);
        EXPECT_LE(p.worst.hi, p.N);
        EXPECT_GE(p.worst_rel_error, 0.0);
        EXPECT_GT(p.min_count, 0);
    }
}

TEST(UniformTarget, Validation)
{
    auto c = base_config();
    c.kappa = 2.0;
    EXPECT_THROW(uniform_target_run(c, 1), ValidationError);
    c = base_config();
    c.kappa = 0.5;
    c.eta = 2.0;
    EXPECT_THROW(uniform_target_run(c, 1), ValidationError);
    c.eta = 0.0;
    c.kappa_prime = 0.1;
    EXPECT_THROW(uniform_target_run(c, 1), ValidationError);
}

TEST(Supmin, IdentityExamples)
{
    const auto F = PolyForm::identity(Signature(2, 1, 2));
    const auto r = supmin_run(F, 1.0, 1.0);
    EXPECT_TRUE(r.finite);
    EXPECT_DOUBLE_EQ(r.supmin, 0.5);
    EXPECT_DOUBLE_EQ(r.argmax_xi, -0.5);
    // Integer values only, so the supmin never drops below 1/2.
    EXPECT_DOUBLE_EQ(supmin_run(F, 6.0, 3.0).supmin, 0.5);
}

TEST(Supmin, ExcludingTheOrigin)
{
    const auto F = PolyForm::identity(Signature(2, 1, 2));
    SupminOptions o;
    o.exclude_origin = true;
    // Without the origin the values within |v| <= 1 are -1 and 1.
    const auto r = supmin_run(F, 1.0, 1.0, o);
    EXPECT_DOUBLE_EQ(r.supmin, 1.0);
    EXPECT_DOUBLE_EQ(r.argmax_xi, 0.0);
}

TEST(Supmin, NonIncreasingInT)
{
    std::mt19937_64 rng(5);
    const auto F = random_form(Signature(2, 1, 2), 0.3, rng);
    double prev = std::numeric_limits<double>::infinity();
    for (double t = 1.0; t <= 10.0; t += 1.0) {
        const auto r = supmin_run(F, t, 2.0);
        EXPECT_LE(r.supmin, prev);
        prev = r.supmin;
    }
    EXPECT_LT(prev, 0.5);
}

TEST(FitExponent, RecoversSlope)
{
    const std::vector<double> t{1.0, 2.0, 4.0, 8.0};
    std::vector<double> e;
    for (double x : t)
        e.push_back(3.0 * std::pow(x, -0.75));
    const auto f = fit_exponent(t, e);
    EXPECT_NEAR(f.slope, -0.75, 1e-12);
    EXPECT_NEAR(std::exp(f.intercept), 3.0, 1e-12);
    EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
    EXPECT_THROW(fit_exponent(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0, 2.0}),
                 ValidationError);
    EXPECT_THROW(fit_exponent(t, std::vector<double>{1.0, 0.0, 1.0, 1.0}), ValidationError);
}
