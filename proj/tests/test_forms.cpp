#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "formcount/forms.hpp"
#include "formcount/rng.hpp"

using namespace formcount;

namespace {

Matrix rotation3(double a, double b)
{
    Matrix rz = Matrix::identity(3), rx = Matrix::identity(3);
    rz(0, 0) = std::cos(a);
    rz(0, 1) = -std::sin(a);
    rz(1, 0) = std::sin(a);
    rz(1, 1) = std::cos(a);
    rx(1, 1) = std::cos(b);
    rx(1, 2) = -std::sin(b);
    rx(2, 1) = std::sin(b);
    rx(2, 2) = std::cos(b);
    return rz * rx;
}

} // namespace

TEST(Signature, RejectsOddOrSmallDegree)
{
    EXPECT_THROW(Signature(2, 1, 3), ValidationError);
    EXPECT_THROW(Signature(2, 1, 0), ValidationError);
    EXPECT_THROW(Signature(0, 3, 2), ValidationError);
    EXPECT_NO_THROW(Signature(2, 1, 2));
}

TEST(Signature, CountingRegimeNeedsNAboveD)
{
    EXPECT_THROW(Signature(1, 1, 2).require_counting_regime(), ValidationError);
    EXPECT_THROW(Signature(1, 1, 4).require_counting_regime(), ValidationError);
    EXPECT_NO_THROW(Signature(2, 1, 2).require_counting_regime());
}

TEST(Signature, SymmetricSpaceDimension)
{
    EXPECT_EQ(Signature(2, 1, 2).symmetric_space_dim(), 5);
    EXPECT_EQ(Signature(3, 2, 2).symmetric_space_dim(), 14);
}

TEST(EvalF0, Examples)
{
    const std::vector<std::int64_t> pyth{3, 4, 5};
    EXPECT_EQ(eval_f0(Signature(2, 1, 2), std::span<const std::int64_t>(pyth)), 0);
    const std::vector<std::int64_t> v{2, 1};
    EXPECT_EQ(eval_f0(Signature(1, 1, 4), std::span<const std::int64_t>(v)), 15);
    const std::vector<double> zero{0.0, 0.0, 0.0};
    EXPECT_EQ(eval_f0(Signature(2, 1, 2), std::span<const double>(zero)), 0.0);
}

TEST(EvalF0, IntegralDoublesAreExact)
{
    // 2^26 + 1 squared is not representable in a double; the difference is.
    const double big = 67108865.0;
    const std::vector<double> v{big, 0.0, big - 1.0};
    const double expected = 2.0 * big - 1.0;
    EXPECT_EQ(eval_f0(Signature(2, 1, 2), std::span<const double>(v)), expected);
}

TEST(EvalF0, DimensionMismatch)
{
    const std::vector<double> v{1.0, 2.0};
    EXPECT_THROW(eval_f0(Signature(2, 1, 2), std::span<const double>(v)), DimensionMismatch);
}

TEST(EvalForm, IdentityMatchesF0)
{
    const auto F = PolyForm::identity(Signature(3, 2, 4));
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    for (int i = 0; i < 100; ++i) {
        std::vector<double> v(5);
        for (auto& x : v)
            x = nd(rng);
        EXPECT_DOUBLE_EQ(eval_form(F, v), eval_f0(F.sig(), std::span<const double>(v)));
    }
}

TEST(EvalForm, Unipotent)
{
    Matrix g = Matrix::identity(3);
    g(1, 0) = 1.0; // row 2, column 1
    const PolyForm F(Signature(2, 1, 2), g);
    const std::vector<double> v{1.0, 1.0, 1.0};
    EXPECT_DOUBLE_EQ(eval_form(F, v), 4.0);
}

TEST(EvalForm, EvenInRandomDirections)
{
    std::mt19937_64 rng(11);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 20; ++trial) {
        const auto F = random_form(Signature(2, 2, 2), 0.4, rng);
        for (int i = 0; i < 500; ++i) {
            std::vector<double> v(4), w(4);
            for (std::size_t k = 0; k < 4; ++k) {
                v[k] = nd(rng);
                w[k] = -v[k];
            }
            EXPECT_EQ(eval_form(F, v), eval_form(F, w));
        }
    }
}

TEST(EvalForm, ExactPathIntegerMatrixAndSymmetry)
{
    std::mt19937_64 rng(5);
    const auto G = random_unipotent_rational(3, 3, 4, 2, rng);
    const PolyForm F(Signature(2, 1, 2), G);
    std::uniform_int_distribution<std::int64_t> c(-20, 20);
    for (int i = 0; i < 200; ++i) {
        std::vector<std::int64_t> v{c(rng), c(rng), c(rng)}, w{-v[0], -v[1], -v[2]};
        const auto [num, den] = eval_form_exact(F, v);
        const auto [num2, den2] = eval_form_exact(F, w);
        EXPECT_TRUE(num == num2 && den == den2);
        // Cross-check against big rationals.
        BigRational val = 0;
        for (std::size_t j = 0; j < 3; ++j) {
            BigRational s = 0;
            for (std::size_t k = 0; k < 3; ++k)
                s += BigRational(v[k]) * G.entry(k, j);
            val += j < 2 ? BigRational(s * s) : BigRational(-s * s);
        }
        EXPECT_EQ(BigRational(exact::to_big(num), exact::to_big(den)), val);
    }
}

TEST(PolyForm, RejectsNonUnitDeterminant)
{
    EXPECT_THROW(PolyForm(Signature(2, 1, 2), Matrix::diagonal({2.0, 1.0, 1.0})), ValidationError);
    EXPECT_NO_THROW(PolyForm(Signature(2, 1, 2), Matrix::diagonal({2.0, 1.0, 0.5})));
    EXPECT_THROW(PolyForm(Signature(2, 1, 2), Matrix::identity(4)), DimensionMismatch);
    EXPECT_THROW(PolyForm(Signature(2, 1, 2), RationalMatrix(3, {2, 0, 0, 0, 1, 0, 0, 0, 1}, 1)),
                 ValidationError);
}

TEST(PolyForm, InverseIsCached)
{
    std::mt19937_64 rng(17);
    const auto F = random_form(Signature(3, 2, 2), 0.3, rng);
    const Matrix prod = F.g() * F.g_inv();
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j)
            EXPECT_NEAR(prod(i, j), i == j ? 1.0 : 0.0, 1e-9);
    EXPECT_NEAR(determinant(F.g()), 1.0, 1e-12);
}

TEST(MatrixNorm, Examples)
{
    EXPECT_NEAR(matrix_norm(Matrix::identity(4)), 1.0, 1e-12);
    EXPECT_NEAR(matrix_norm(Matrix::diagonal({2.0, 1.0, 0.5})), 2.0, 1e-9);
    EXPECT_NEAR(matrix_norm(rotation3(0.7, -1.3)), 1.0, 1e-12);
    EXPECT_THROW(matrix_norm(Matrix::diagonal({1.0, 0.0, 1.0})), SingularMatrix);
}

TEST(MatrixNorm, SymmetricUnderInverseAndAtLeastOne)
{
    std::mt19937_64 rng(23);
    for (int i = 0; i < 50; ++i) {
        const auto F = random_form(Signature(2, 2, 2), 0.5, rng);
        const double a = matrix_norm(F.g()), b = matrix_norm(F.g_inv());
        EXPECT_NEAR(a, b, 1e-8 * a);
        EXPECT_GE(a, 1.0 - 1e-12);
    }
}

TEST(NormBall, Membership)
{
    EXPECT_TRUE(in_norm_ball(Matrix::identity(3), 0.1));
    EXPECT_FALSE(in_norm_ball(Matrix::diagonal({2.0, 1.0, 0.5}), 0.5));
    EXPECT_THROW(in_norm_ball(Matrix::identity(3), 0.0), ValidationError);
}

// For |g| < 1 + eps: B_{(1-eps)t} is inside B_t g, i.e. |u g^-1| <= t whenever
// |u| <= (1-eps) t. Probed with random vectors.
TEST(NormBall, SandwichProbe)
{
    std::mt19937_64 rng(29);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    const double eps = 0.3;
    int accepted = 0;
    while (accepted < 100) {
        Matrix x(3);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j)
                x(i, j) = 0.1 * nd(rng);
        const double tr = x(0, 0) + x(1, 1) + x(2, 2);
        for (std::size_t i = 0; i < 3; ++i)
            x(i, i) -= tr / 3.0;
        const Matrix g = expm(x);
        if (!in_norm_ball(g, eps))
            continue;
        ++accepted;
        const Matrix ginv = inverse(g);
        const double t = 1.0 + 50.0 * ud(rng);
        for (int k = 0; k < 100; ++k) {
            std::vector<double> u{nd(rng), nd(rng), nd(rng)};
            const double scale = (1.0 - eps) * t * ud(rng) / norm2(u);
            for (auto& c : u)
                c *= scale;
            EXPECT_LE(norm2(row_times(u, ginv)), t * (1.0 + 1e-12));
            // and the outer half of the sandwich: |u g| <= (1 + eps) |u|
            EXPECT_LE(norm2(row_times(u, g)), (1.0 + eps) * norm2(u) * (1.0 + 1e-12));
        }
    }
}

TEST(ShrinkingInterval, Examples)
{
    const auto I = shrinking_interval(ShrinkingFamily(0.0, 2.0, 1.0), 10.0);
    EXPECT_DOUBLE_EQ(I.lo, -0.1);
    EXPECT_DOUBLE_EQ(I.hi, 0.1);
    for (double t : {0.5, 3.0, 1e6}) {
        const auto J = shrinking_interval(ShrinkingFamily(5.0, 1.0, 0.0), t);
        EXPECT_EQ(J, Interval(4.5, 5.5));
    }
    EXPECT_THROW(shrinking_interval(ShrinkingFamily(0.0, 1.0, 1.0), 0.0), ValidationError);
    EXPECT_THROW(ShrinkingFamily(0.0, -1.0, 1.0), ValidationError);
}

TEST(ShrinkingInterval, LengthAndNesting)
{
    const ShrinkingFamily fam(0.3, 1.7, 0.8);
    std::vector<double> grid;
    for (double t = 0.5; t < 500.0; t *= 1.37)
        grid.push_back(t);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto I = shrinking_interval(fam, grid[i]);
        EXPECT_NEAR(I.length(), 1.7 * std::pow(grid[i], -0.8), 1e-14);
        for (std::size_t j = i; j < grid.size(); ++j)
            EXPECT_TRUE(I.contains(shrinking_interval(fam, grid[j])));
    }
}

TEST(Interval, HalfOpen)
{
    const Interval I(-0.5, 0.5);
    EXPECT_TRUE(I.contains(-0.5));
    EXPECT_FALSE(I.contains(0.5));
    EXPECT_TRUE(Interval(1.0, 1.0).empty());
    EXPECT_THROW(Interval(1.0, 0.0), ValidationError);
}

TEST(FormJson, RoundTrip)
{
    std::mt19937_64 rng(31);
    const auto F = random_form(Signature(2, 1, 2), 0.3, rng);
    const auto G = form_from_json(form_to_json(F));
    EXPECT_EQ(G.g(), F.g());
    EXPECT_EQ(G.sig(), F.sig());

    const json jr = {{"p", 2}, {"q", 1}, {"d", 2}, {"g_num", {1, 1, 0, 0, 1, 0, 0, 0, 1}}, {"g_den", 1}};
    const auto R = form_from_json(jr);
    ASSERT_TRUE(R.exact().has_value());
    EXPECT_EQ(form_to_json(R), jr);
    EXPECT_TRUE(form_from_json(json{{"p", 2}, {"q", 1}, {"d", 2}}).exact().has_value());
}
