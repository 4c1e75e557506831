#include "decongest/baselines.hpp"
#include "decongest/oracle_enum.hpp"

#include "../support/oracles.hpp"

#include <gtest/gtest.h>

using namespace decongest;

TEST(Lasso, StrongestSignalEntersFirst)
{
    Rng rng(51);
    const Matrix x = oracle::uniform_matrix(200, 5, rng);
    Vector y(200);
    for (int i = 0; i < 200; ++i) y(i) = 3.0 * x(i, 3) + 1.0 * x(i, 1) + 0.01 * rng.uniform(-1, 1);
    const LassoPath path = lasso_path(x, y);
    const FeatureOrdering ord = lasso_ordering(path);
    EXPECT_EQ(ord.order[0], 3);
    EXPECT_EQ(ord.order[1], 1);
    EXPECT_EQ(path.lambdas.size(), 100u);
    EXPECT_GT(path.lambdas.front(), path.lambdas.back());
    EXPECT_EQ(ord.top(2).to_string(), "01010");
}

TEST(Lasso, MatchesLeastSquaresAtSmallPenalty)
{
    Rng rng(52);
    const Matrix x = oracle::uniform_matrix(100, 3, rng);
    Vector y(100);
    for (int i = 0; i < 100; ++i) y(i) = 2 * x(i, 0) - x(i, 2) + 0.5 * x(i, 1);
    const LassoPath path = lasso_path(x, y, 100, 1e-6);
    // Standardized least squares: coefficients scale with column std.
    Matrix z = x.rowwise() - x.colwise().mean();
    Vector sd = (z.array().square().colwise().sum() / 100.0).sqrt();
    const Vector truth = (Vector(3) << 2, 0.5, -1).finished();
    for (int l = 0; l < 3; ++l) EXPECT_NEAR(path.final_coef(l), truth(l) * sd(l), 1e-3);
}

TEST(PricePred, PicksPriceDrivingFeatures)
{
    Rng rng(53);
    const Matrix x = oracle::uniform_matrix(30, 6, rng);
    const Vector p = 0.8 * x.col(2) + 0.4 * x.col(5);
    EXPECT_EQ(price_pred_mask(x, p, 2).to_string(), "001001");
}

TEST(ChoicePred, UsesMeanProjectedWeights)
{
    PredictorWeights w{(Matrix(2, 4) << 1, 0, 5, 2, 0, 3, 0, 2).finished()};
    const Matrix u = (Matrix(2, 2) << 1, 0, 1, 0).finished();
    EXPECT_EQ(choice_pred_mask(w, u, 2).to_string(), "0011");
}

TEST(RandomBaseline, SeededAndBounded)
{
    Rng rng(54);
    std::vector<Market> mks{oracle::random_market(5, 4, 6, rng), oracle::random_market(5, 4, 6, rng)};
    const RandomBaseline a = random_baseline(mks, 3, 30, 9);
    const RandomBaseline b = random_baseline(mks, 3, 30, 9);
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_EQ(a.per_draw.size(), 30u);
    double best = 0.0;
    for_each_mask(6, 3, [&](const Mask& m) { best = std::max(best, mean_mask_welfare(mks, m)); });
    EXPECT_LE(a.mean, best + 1e-12);
}
