#include "decongest/objectives.hpp"

#include "../support/oracles.hpp"

#include <gtest/gtest.h>

using namespace decongest;

TEST(Decomposition, TermsSumToExpectedWelfare)
{
    Rng rng(21);
    for (int t = 0; t < 50; ++t) {
        const Market mk = oracle::random_market(7, 4, 5, rng);
        const Mask mask = Mask::from_indices(5, rng.sample_without_replacement(5, 2));
        const ValueView view = perceived_values(mk, mask);
        const ChoiceProfile y = choose_from_values(view.perceived, mk.prices);
        const WelfareDecomposition d = welfare_decomposition(y, view.true_values);
        EXPECT_NEAR(d.total, oracle::expected_welfare(y.choices, view.true_values), 1e-12);
        EXPECT_LE(d.term_ii, 1e-15);
    }
}

TEST(Proxy, HandComputedBreakdown)
{
    const ChoiceProfile y = ChoiceProfile::from_choices({1, 1, 2, 0}, 3);
    const Vector p = (Vector(3) << 0.4, 0.3, 0.9).finished();
    const ProxyBreakdown b = proxy_welfare(y, p, 0.25, true);
    EXPECT_NEAR(b.selection, 0.4 + 0.4 + 0.3, 1e-15);
    EXPECT_DOUBLE_EQ(b.decongestion, 1.0);
    EXPECT_DOUBLE_EQ(b.no_choice_penalty, 1.0);
    EXPECT_NEAR(b.combined, 0.75 * 1.1 - 0.25 * 2.0, 1e-15);
    EXPECT_NEAR(b.lower_bound(), 0.1, 1e-15);
    EXPECT_THROW(proxy_welfare(y, p, 1.5, false), Error);
}

TEST(Proxy, LowerBoundHoldsUnderZeroImputation)
{
    Rng rng(22);
    for (int t = 0; t < 300; ++t) {
        const int d = 2 + static_cast<int>(rng.index(6));
        const Market mk = oracle::random_market(2 + static_cast<int>(rng.index(6)), 2 + static_cast<int>(rng.index(6)), d, rng);
        const Mask mask = Mask::from_indices(d, rng.sample_without_replacement(d, static_cast<int>(rng.index(d + 1))));
        EXPECT_GE(lower_bound_gap(mk, mask, Imputation::zero), -1e-9);
    }
}

TEST(Lambda, DefaultFormula)
{
    EXPECT_DOUBLE_EQ(default_lambda(6, 12), 0.75);
    EXPECT_DOUBLE_EQ(default_lambda(0, 12), 1.0);
    EXPECT_THROW(default_lambda(13, 12), Error);
}

TEST(MaskWelfare, MeanOverMarkets)
{
    Rng rng(23);
    std::vector<Market> mks{oracle::random_market(4, 3, 4, rng), oracle::random_market(4, 3, 4, rng)};
    const Mask mask = Mask::from_indices(4, {0, 2});
    EXPECT_NEAR(mean_mask_welfare(mks, mask), 0.5 * (mask_welfare(mks[0], mask) + mask_welfare(mks[1], mask)), 1e-15);
    EXPECT_THROW(mean_mask_welfare({}, mask), Error);
}
