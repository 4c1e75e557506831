#include "decongest/dataset.hpp"
#include "decongest/nmf.hpp"
#include "decongest/policy.hpp"
#include "decongest/ratings.hpp"

#include "../support/oracles.hpp"

#include <gtest/gtest.h>

#include <set>
#include <sstream>

using namespace decongest;

TEST(Ratings, ParsesTabSeparatedLines)
{
    std::istringstream in("196\t242\t3\t881250949\n186\t302\t3\t891717742\n196\t302\t5\t1\n");
    const RatingSet r = parse_ratings(in);
    EXPECT_EQ(r.entries.size(), 3u);
    EXPECT_EQ(r.num_users(), 2);
    EXPECT_EQ(r.num_items(), 2);
}

TEST(Ratings, ErrorsCarryLineNumbers)
{
    std::istringstream bad("1\t2\t3\t4\n1\t2\tx\t4\n");
    try {
        parse_ratings(bad);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
    std::istringstream range("1\t2\t9\t4\n");
    EXPECT_THROW(parse_ratings(range), Error);
    std::istringstream fields("1\t2\t3\n");
    EXPECT_THROW(parse_ratings(fields), Error);
    std::istringstream empty("");
    EXPECT_THROW(parse_ratings(empty), Error);
    EXPECT_THROW(ingest_ratings("/nonexistent/u.data"), Error);
}

TEST(Ratings, WriteParseRoundTrip)
{
    const RatingSet r = generate_ratings(SyntheticRatingsSpec{30, 20, 3, 0.3, 0.5, 4});
    std::stringstream io;
    write_ratings(io, r);
    const RatingSet back = parse_ratings(io);
    ASSERT_EQ(back.entries.size(), r.entries.size());
    for (std::size_t t = 0; t < r.entries.size(); ++t) EXPECT_DOUBLE_EQ(back.entries[t].value, r.entries[t].value);
}

TEST(Nmf, ObjectiveNeverIncreases)
{
    Rng rng(41);
    std::vector<Rating> obs;
    for (int i = 0; i < 20; ++i)
        for (int j = 0; j < 20; ++j)
            if (rng.uniform() < 0.4) obs.push_back({i, j, rng.uniform(0, 5)});
    const NmfResult r = masked_nmf(obs, 20, 20, 3, {300, 2});
    for (std::size_t t = 1; t < r.objective.size(); ++t) EXPECT_LE(r.objective[t], r.objective[t - 1] + 1e-10);
    EXPECT_GE(r.left.minCoeff(), 0.0);
    EXPECT_GE(r.right.minCoeff(), 0.0);
}

TEST(Nmf, RankErrors)
{
    EXPECT_THROW(masked_nmf({{0, 0, 1.0}}, 2, 2, 3), Error);
    EXPECT_THROW(masked_nmf({}, 2, 2, 1), Error);
}

TEST(Factorize, PoolHasUnitBoundedValues)
{
    const RatingSet r = generate_ratings(SyntheticRatingsSpec{80, 60, 4, 0.3, 0.5, 5});
    FactorizeOptions fo;
    fo.d = 6;
    fo.iterations = 100;
    const FactorizedPool pool = factorize(r, fo);
    EXPECT_EQ(pool.item_features.cols(), 6);
    EXPECT_EQ(pool.user_features.cols(), 3);
    const Matrix v = pool.preferences * pool.item_features.transpose();
    EXPECT_LE(v.maxCoeff(), 1.0 + 1e-12);
    EXPECT_GE(v.minCoeff(), 0.0);
}

TEST(Markets, SamplingShapesAndSeeds)
{
    const RatingSet r = generate_ratings(SyntheticRatingsSpec{80, 60, 4, 0.3, 0.5, 6});
    FactorizeOptions fo;
    fo.d = 6;
    fo.iterations = 50;
    const FactorizedPool pool = factorize(r, fo);
    const auto a = sample_markets(pool, MarketSampling{5, 7, 4}, PriceScheme::mid(), 1);
    const auto b = sample_markets(pool, MarketSampling{5, 7, 4}, PriceScheme::mid(), 1);
    ASSERT_EQ(a.size(), 4u);
    EXPECT_EQ(a[0].num_items(), 5);
    EXPECT_EQ(a[0].num_users(), 7);
    for (std::size_t l = 0; l < a.size(); ++l) {
        EXPECT_EQ(a[l].prices, b[l].prices);
        EXPECT_EQ(oracle::ce_violation(true_values(a[l]), core_prices(true_values(a[l])).matching.item_of_user, a[l].prices), "");
    }
}

TEST(Folds, PartitionIndices)
{
    const auto folds = make_folds(20, 3, 9);
    std::multiset<int> all;
    for (const auto& f : folds) {
        all.insert(f.begin(), f.end());
        EXPECT_GE(f.size(), 6u);
    }
    EXPECT_EQ(all.size(), 20u);
    EXPECT_EQ(std::set<int>(all.begin(), all.end()).size(), 20u);
    EXPECT_EQ(complement(20, folds[0]).size(), 20 - folds[0].size());
    EXPECT_THROW(make_folds(2, 3, 0), Error);
}

TEST(Policy, TopkAndSampling)
{
    const Vector s = (Vector(5) << 0.3, 0.9, 0.9, 0.1, 0.5).finished();
    EXPECT_EQ(topk_mask(s, 2).to_string(), "01100");
    Rng rng(3);
    const Vector p = feature_probabilities(s, 1.0);
    EXPECT_NEAR(p.sum(), 1.0, 1e-12);
    for (int t = 0; t < 50; ++t) EXPECT_EQ(sample_mask(p, 3, rng).cardinality(), 3);
    EXPECT_EQ(uniform_mask(6, 2, rng).cardinality(), 2);
}

TEST(Policy, MonteCarloMaskProbabilityMatchesExact)
{
    // Sequential sampling without replacement: P({0,1}) = p0 p1/(1-p0) + p1 p0/(1-p1).
    const Vector p = (Vector(3) << 0.5, 0.3, 0.2).finished();
    const double exact = 0.5 * 0.3 / 0.5 + 0.3 * 0.5 / 0.7;
    const auto est = mask_probability_mc(Mask({1, 1, 0}), p, 200000, 5);
    EXPECT_NEAR(est.probability, exact, 4 * est.standard_error + 1e-3);
}

TEST(Policy, DefaultPolicyConcentratesOnDefaultMask)
{
    const Mask mu0 = Mask::from_indices(6, {0, 2, 4});
    const DefaultPolicy pi0 = default_policy(mu0);
    Rng rng(8);
    int hits = 0;
    for (int t = 0; t < 200; ++t) hits += sample_mask(pi0.probabilities(), 3, rng) == mu0;
    EXPECT_GT(hits, 190);
    EXPECT_GT(pi0.probabilities().minCoeff(), 0.0);
}

TEST(Dataset, RowsAndSeeds)
{
    Rng rng(44);
    std::vector<Market> mks;
    for (int l = 0; l < 3; ++l) {
        Market mk = oracle::random_market(4, 3, 5, rng);
        mk.user_features = oracle::uniform_matrix(4, 2, rng);
        mks.push_back(mk);
    }
    const ChoiceDataset a = sample_uniform_dataset(mks, 2, 10);
    const ChoiceDataset b = sample_uniform_dataset(mks, 2, 10);
    EXPECT_EQ(a.samples.size(), 3u);
    EXPECT_EQ(a.num_rows(), 12u);
    for (std::size_t s = 0; s < a.samples.size(); ++s) {
        EXPECT_EQ(a.samples[s].mask, b.samples[s].mask);
        EXPECT_EQ(a.samples[s].choices, choose(mks[a.samples[s].market], a.samples[s].mask).choices);
    }
}
