#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "formcount/geometry.hpp"

using namespace formcount;

TEST(SphereMass, EuclideanCase)
{
    // For d = 2 the cone mass is the surface area of the unit sphere.
    EXPECT_NEAR(sphere_mass(1, 2), 2.0, 1e-12);
    EXPECT_NEAR(sphere_mass(2, 2), 2.0 * std::numbers::pi, 1e-12);
    EXPECT_NEAR(sphere_mass(3, 2), 4.0 * std::numbers::pi, 1e-12);
    // l^4 unit ball in R^1 is [-1, 1].
    EXPECT_NEAR(sphere_mass(1, 4), 2.0, 1e-12);
    EXPECT_THROW(sphere_mass(0, 2), ValidationError);
    EXPECT_THROW(sphere_mass(2, 3), ValidationError);
}

TEST(SampleCone, PointsLieOnTheUnitSphere)
{
    std::mt19937_64 rng(1);
    for (int d : {2, 4, 6}) {
        for (int k : {1, 2, 3}) {
            for (int i = 0; i < 200; ++i) {
                const auto p = sample_cone(k, d, rng);
                double s = 0.0;
                for (double x : p.u)
                    s += std::pow(std::abs(x), d);
                EXPECT_NEAR(s, 1.0, 1e-12);
            }
        }
    }
}

TEST(SampleCone, SymmetricMoments)
{
    // E[u1^2] = 1/k for the uniform measure on the Euclidean sphere.
    std::mt19937_64 rng(2);
    const int k = 3, N = 200000;
    double m1 = 0.0, m2 = 0.0;
    for (int i = 0; i < N; ++i) {
        const auto p = sample_cone(k, 2, rng);
        m1 += p.u[0];
        m2 += p.u[0] * p.u[0];
    }
    EXPECT_NEAR(m1 / N, 0.0, 0.01);
    EXPECT_NEAR(m2 / N, 1.0 / 3.0, 0.005);
}

TEST(ComputeCf, ClosedFormsForIdentity)
{
    const double c212 = compute_cf(PolyForm::identity(Signature(2, 1, 2)), 100000, 1).value;
    EXPECT_NEAR(c212, std::numbers::pi * std::sqrt(2.0), 1e-3 * c212);
    const double c222 = compute_cf(PolyForm::identity(Signature(2, 2, 2)), 100000, 1).value;
    EXPECT_NEAR(c222, std::numbers::pi * std::numbers::pi / 2.0, 1e-3 * c222);
    const double c322 = compute_cf(PolyForm::identity(Signature(3, 2, 2)), 100000, 1).value;
    EXPECT_NEAR(c322, 4.65257613309258635, 1e-3 * c322);
}

TEST(ComputeCf, DeterministicAndWorkerIndependent)
{
    std::mt19937_64 rng(3);
    const auto F = random_form(Signature(3, 1, 2), 0.3, rng);
    const auto a = compute_cf(F, 100000, 42, 1);
    const auto b = compute_cf(F, 100000, 42, 4);
    EXPECT_EQ(a.value, b.value);
    EXPECT_EQ(a.std_error, b.std_error);
    const auto c = compute_cf(F, 100000, 43, 1);
    EXPECT_NE(a.value, c.value);
    ASSERT_TRUE(F.cached_cf().has_value());
}

TEST(ComputeCf, QuarticAgreesWithVolume)
{
    // c_F |I| T^(n-d) must match the volume of the region for large T.
    const auto F = PolyForm::identity(Signature(3, 2, 4));
    const auto cf = compute_cf(F, 400000, 5);
    const Interval I(-1.0, 1.0);
    const double T = 30.0;
    const auto vol = mc_volume(F, I, T, 400000, 6);
    const double pred = predicted_volume(cf.value, F.sig(), I, T);
    EXPECT_NEAR(vol.estimate / pred, 1.0, 0.05);
}

TEST(ComputeCf, RejectsBadInput)
{
    EXPECT_THROW(compute_cf(PolyForm::identity(Signature(2, 1, 2)), 0, 1), ValidationError);
    EXPECT_THROW(compute_cf(PolyForm::identity(Signature(1, 1, 2)), 100, 1), ValidationError);
}

TEST(PredictedVolume, Scaling)
{
    const Signature sig(2, 1, 2);
    EXPECT_DOUBLE_EQ(predicted_volume(2.0, sig, Interval(0.0, 3.0), 5.0), 30.0);
    EXPECT_DOUBLE_EQ(predicted_volume(2.0, sig, Interval(1.0, 1.0), 5.0), 0.0);
    EXPECT_THROW(predicted_volume(2.0, sig, Interval(0.0, 1.0), 0.0), ValidationError);
}

TEST(McVolume, ChordMatchesHitOrMiss)
{
    std::mt19937_64 rng(7);
    const auto F = random_form(Signature(2, 2, 2), 0.3, rng);
    const Interval I(-2.0, 3.0);
    const auto a = mc_volume(F, I, 6.0, 400000, 1, VolumeMethod::chord);
    const auto b = mc_volume(F, I, 6.0, 400000, 2, VolumeMethod::hit_or_miss);
    EXPECT_NEAR(a.estimate, b.estimate, 5.0 * std::hypot(a.std_error, b.std_error));
    EXPECT_LT(a.std_error, b.std_error);
}

TEST(McVolume, WholeBallWhenIntervalCoversRange)
{
    // |F| <= n |v|^2 on B_T when g = identity, so a wide interval captures the ball.
    const auto F = PolyForm::identity(Signature(2, 1, 2));
    const auto v = mc_volume(F, Interval(-100.0, 100.0), 3.0, 100000, 1);
    EXPECT_NEAR(v.estimate, ball_volume(3, 3.0), 5.0 * v.std_error);
    const auto h = mc_volume(F, Interval(-100.0, 100.0), 3.0, 1000, 1, VolumeMethod::hit_or_miss);
    EXPECT_NEAR(h.estimate, ball_volume(3, 3.0), 1e-9 * h.estimate);
}

TEST(McVolume, KnownQuadratureVolumes)
{
    const auto F = PolyForm::identity(Signature(2, 1, 2));
    const double exact[][2] = {{10.0, 42.94782212194998}, {20.0, 87.37669199877567}};
    for (const auto& [T, vol] : exact) {
        const auto v = mc_volume(F, Interval(-0.5, 0.5), T, 1 << 20, 3);
        EXPECT_NEAR(v.estimate, vol, 5.0 * v.std_error);
    }
}

TEST(McVolumeBatch, NestedRegionsAreMonotone)
{
    std::mt19937_64 rng(9);
    const auto F = random_form(Signature(2, 1, 2), 0.3, rng);
    const std::vector<FormRegion> regions{
        {Interval(-0.1, 0.1), 5.0}, {Interval(-0.5, 0.5), 6.0}, {Interval(-1.0, 1.0), 8.0}};
    const auto v = mc_volume_batch(F, regions, 20000, 4);
    ASSERT_EQ(v.size(), 3u);
    EXPECT_LE(v[0].estimate, v[1].estimate);
    EXPECT_LE(v[1].estimate, v[2].estimate);
    // Same seed, same estimate as the single-region call on the largest ball.
    const auto single = mc_volume(F, regions[2].I, regions[2].T, 20000, 4);
    EXPECT_NEAR(single.estimate, v[2].estimate, 1e-9 * single.estimate);
}

TEST(McVolume, RejectsBadInput)
{
    const auto F = PolyForm::identity(Signature(2, 1, 2));
    EXPECT_THROW(mc_volume(F, Interval(0.0, 1.0), 0.0, 100, 1), ValidationError);
    EXPECT_THROW(mc_volume(F, Interval(0.0, 1.0), 1.0, 0, 1), ValidationError);
    EXPECT_THROW(volume_method_from_string("simpson"), ValidationError);
}
