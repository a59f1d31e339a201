#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "formcount/discrepancy.hpp"

using namespace formcount;

TEST(VolumeMode, RoundTrip)
{
    for (auto m : {VolumeMode::predicted, VolumeMode::monte_carlo, VolumeMode::closed_form})
        EXPECT_EQ(volume_mode_from_string(to_string(m)), m);
    EXPECT_THROW(volume_mode_from_string("guess"), ValidationError);
}

TEST(Discrepancy, PredictedAndMonteCarloAgreeForLargeT)
{
    const auto F = PolyForm::identity(Signature(3, 2, 2));
    const Interval I(-1.0, 1.0);
    DiscrepancyOptions a, b;
    a.samples = b.samples = 200000;
    b.mode = VolumeMode::monte_carlo;
    const auto pa = discrepancy(F, I, 25.0, a);
    const auto pb = discrepancy(F, I, 25.0, b);
    EXPECT_EQ(pa.count, pb.count);
    EXPECT_NEAR(pa.volume / pb.volume, 1.0, 0.02);
    EXPECT_DOUBLE_EQ(pa.disc, std::abs(static_cast<double>(pa.count) - pa.volume));
    EXPECT_EQ(pb.volume_mode, VolumeMode::monte_carlo);
}

TEST(Discrepancy, RejectsBadInput)
{
    const auto F = PolyForm::identity(Signature(2, 1, 2));
    EXPECT_THROW(discrepancy(F, Interval(0.0, 1.0), 0.0), ValidationError);
    EXPECT_THROW(discrepancy(PolyForm::identity(Signature(1, 1, 2)), Interval(0.0, 1.0), 2.0),
                 ValidationError);
}

TEST(SecondMoment, SiegelMeanOfBallCounts)
{
    const auto rep = second_moment_experiment(EuclideanBall{3, 200.0}, 100, 10007, 1);
    EXPECT_EQ(rep.samples.size(), 100u);
    EXPECT_NEAR(rep.mean_count / 200.0, 1.0, 5.0 * rep.mean_count_stderr / 200.0 + 0.02);
    EXPECT_GT(rep.mean_sq_disc, 0.0);
    EXPECT_DOUBLE_EQ(rep.ratio, rep.mean_sq_disc / rep.vol);
    // Ball counts are even: the lattice is symmetric and the origin is excluded.
    for (const auto& s : rep.samples)
        EXPECT_EQ(s.count % 2, 0);
}

TEST(SecondMoment, DeterministicAndSeeded)
{
    MomentOptions one, four;
    one.workers = 1;
    four.workers = 4;
    const auto a = second_moment_experiment(EuclideanBall{3, 100.0}, 20, 1009, 7, one);
    const auto b = second_moment_experiment(EuclideanBall{3, 100.0}, 20, 1009, 7, four);
    ASSERT_EQ(a.samples.size(), b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        EXPECT_EQ(a.samples[i].count, b.samples[i].count);
        EXPECT_EQ(a.samples[i].lattice_seed, b.samples[i].lattice_seed);
    }
    const auto c = second_moment_experiment(EuclideanBall{3, 100.0}, 20, 1009, 8, one);
    EXPECT_NE(a.samples.front().lattice_seed, c.samples.front().lattice_seed);
}

TEST(SecondMoment, FormRegion)
{
    FormRegionSpec spec;
    spec.sig = Signature(2, 1, 2);
    spec.I = Interval(-1.0, 1.0);
    spec.t = 15.0;
    spec.volume_samples = 1 << 16;
    const auto rep = second_moment_experiment(spec, 30, 1009, 3);
    EXPECT_EQ(region_dim(spec), 3);
    EXPECT_NEAR(rep.mean_count / rep.vol, 1.0, 0.15);
}

TEST(SecondMoment, RejectsBadInput)
{
    EXPECT_THROW(second_moment_experiment(EuclideanBall{3, 100.0}, 1, 1009, 0), ValidationError);
    EXPECT_THROW(second_moment_experiment(EuclideanBall{3, 100.0}, 10, 1000, 0), ValidationError);
    EXPECT_THROW(second_moment_experiment(EuclideanBall{3, 0.5}, 10, 1009, 0), ValidationError);
}

TEST(Exceedance, ChebyshevBound)
{
    const auto rep = second_moment_experiment(EuclideanBall{3, 100.0}, 200, 10007, 2);
    for (double T : {5.0, 10.0, 20.0, 100.0}) {
        const auto e = exceedance_fraction(rep, T);
        EXPECT_LE(e.fraction, e.chebyshev + 3.0 * e.std_error);
        EXPECT_EQ(e.k, 200);
    }
    EXPECT_DOUBLE_EQ(exceedance_fraction(rep, 0.0).fraction, 1.0);
    EXPECT_THROW(exceedance_fraction(rep, -1.0), ValidationError);
    const auto single = exceedance_fraction(EuclideanBall{3, 100.0}, 1e9, 1, 1009, 0);
    EXPECT_EQ(single.k, 1);
    EXPECT_EQ(single.fraction, 0.0);
}

TEST(Interpolation, HoldsOnNestedTriples)
{
    std::mt19937_64 rng(4);
    InterpolationOptions io;
    io.samples = 1 << 14;
    for (int i = 0; i < 20; ++i) {
        const auto F = random_form(Signature(2, 1, 2), 0.3, rng);
        const NestedRegion inner{Interval(-0.2, 0.3), 4.0}, mid{Interval(-0.5, 0.5), 6.0},
            outer{Interval(-1.0, 2.0), 7.0};
        io.seed = static_cast<std::uint64_t>(i);
        const auto r = interpolation_check(F, inner, mid, outer, io);
        EXPECT_TRUE(r.holds);
        EXPECT_GE(r.slack, 0.0);
        EXPECT_LE(r.inner.volume, r.mid.volume);
        EXPECT_LE(r.mid.volume, r.outer.volume);
    }
}

TEST(Interpolation, RejectsNonNestedRegions)
{
    const auto F = PolyForm::identity(Signature(2, 1, 2));
    const NestedRegion a{Interval(-1.0, 1.0), 5.0}, b{Interval(-0.5, 0.5), 6.0};
    EXPECT_FALSE(region_contains(a, b));
    EXPECT_TRUE(region_contains(b, NestedRegion{Interval(0.0, 0.0), 1.0}));
    EXPECT_THROW(interpolation_check(F, a, b, b), ValidationError);
}
