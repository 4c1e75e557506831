#pragma once

#include "decongest/market.hpp"
#include "decongest/nmf.hpp"
#include "decongest/policy.hpp"
#include "decongest/pricing.hpp"
#include "decongest/rng.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

namespace decongest {

struct MarketSampling {
    int m = 20;
    int n = 20;
    int L = 240;
};

/// Markets over one fixed item set, each with a fresh set of users and its own
/// prices. Scheme noise is re-seeded per market.
inline std::vector<Market> sample_markets(const FactorizedPool& pool, const MarketSampling& shape,
                                          const PriceScheme& scheme, std::uint64_t seed)
{
    scheme.validate();
    const int items_total = static_cast<int>(pool.item_features.rows());
    const int users_total = static_cast<int>(pool.preferences.rows());
    require(shape.m > 0 && shape.n > 0 && shape.L > 0, "sample_markets: sizes must be positive");
    require(shape.m <= items_total, "sample_markets: pool has " + std::to_string(items_total) + " items, need " +
                                        std::to_string(shape.m));
    require(shape.n <= users_total, "sample_markets: pool has " + std::to_string(users_total) + " users, need " +
                                        std::to_string(shape.n));
    Rng item_rng(derive_seed(seed, "items"));
    const std::vector<int> items = item_rng.sample_without_replacement(items_total, shape.m);
    Matrix x(shape.m, pool.item_features.cols());
    for (int j = 0; j < shape.m; ++j) x.row(j) = pool.item_features.row(items[j]);

    std::vector<Market> markets;
    markets.reserve(shape.L);
    for (int l = 0; l < shape.L; ++l) {
        Rng rng(derive_seed(seed, "users", l));
        const std::vector<int> users = rng.sample_without_replacement(users_total, shape.n);
        Market mk;
        mk.item_features = x;
        Matrix b(shape.n, pool.preferences.cols());
        Matrix u(shape.n, pool.user_features.cols());
        for (int i = 0; i < shape.n; ++i) {
            b.row(i) = pool.preferences.row(users[i]);
            u.row(i) = pool.user_features.row(users[i]);
        }
        mk.preferences = std::move(b);
        mk.user_features = std::move(u);
        PriceScheme s = scheme;
        s.seed = derive_seed(scheme.seed, "market-prices", l);
        mk.prices = apply_scheme(true_values(mk), s);
        markets.push_back(std::move(mk));
    }
    return markets;
}

/// Seeded partition of 0..count-1 into `folds` test sets of near-equal size.
inline std::vector<std::vector<int>> make_folds(int count, int folds, std::uint64_t seed)
{
    require(folds >= 2 && folds <= count, "make_folds: need 2 <= folds <= count");
    std::vector<int> order(count);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);
    std::vector<std::vector<int>> out(folds);
    for (int t = 0; t < count; ++t) out[t % folds].push_back(order[t]);
    for (auto& f : out) std::sort(f.begin(), f.end());
    return out;
}

/// Indices of 0..count-1 not in `test`.
inline std::vector<int> complement(int count, const std::vector<int>& test)
{
    std::vector<char> in(count, 0);
    for (int t : test) in[t] = 1;
    std::vector<int> out;
    for (int t = 0; t < count; ++t)
        if (!in[t]) out.push_back(t);
    return out;
}

template <typename T>
std::vector<T> subset(const std::vector<T>& xs, const std::vector<int>& idx)
{
    std::vector<T> out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(xs[i]);
    return out;
}

struct ChoiceSample {
    int market = 0;
    Mask mask;
    std::vector<int> choices;  // 0 = none, j = item j-1
    double propensity = 0.0;   // estimated P_pi0(mask); 0 when not recorded
    double weight = 1.0;       // importance weight used by weighted training
};

struct ChoiceDataset {
    std::vector<Market> markets;
    std::vector<ChoiceSample> samples;

    std::size_t num_rows() const
    {
        std::size_t r = 0;
        for (const ChoiceSample& s : samples) r += s.choices.size();
        return r;
    }
};

/// Choices made under masks drawn per market from a mask sampler.
template <typename MaskSampler>
ChoiceDataset simulate_choices(const std::vector<Market>& markets, MaskSampler&& draw, int masks_per_market,
                               Imputation mode = Imputation::zero)
{
    ChoiceDataset data;
    data.markets = markets;
    for (std::size_t l = 0; l < markets.size(); ++l) {
        for (int r = 0; r < masks_per_market; ++r) {
            ChoiceSample s;
            s.market = static_cast<int>(l);
            s.mask = draw(l, r);
            s.choices = choose(markets[l], s.mask, mode).choices;
            data.samples.push_back(std::move(s));
        }
    }
    return data;
}

struct DatasetOptions {
    int masks_per_market = 1;
    long propensity_samples = 0;  // 0 disables propensity estimates
    Imputation mode = Imputation::zero;
};

/// Logged data: each market's choices under mask(s) drawn from the default policy.
inline ChoiceDataset sample_dataset(const std::vector<Market>& markets, const DefaultPolicy& policy, int k,
                                    std::uint64_t seed, const DatasetOptions& opt = {})
{
    require(k == policy.default_mask.cardinality(), "sample_dataset: k must match the default mask");
    const Vector probs = policy.probabilities();
    for (Eigen::Index l = 0; l < probs.size(); ++l) {
        if (!(probs(l) > 0.0)) throw Error("sample_dataset: default policy has a zero-probability feature");
    }
    ChoiceDataset data = simulate_choices(
        markets,
        [&](std::size_t l, int r) {
            Rng rng(derive_seed(seed, "pi0-mask", l * 1000003ULL + r));
            return sample_mask(probs, k, rng);
        },
        opt.masks_per_market, opt.mode);
    if (opt.propensity_samples > 0) {
        for (std::size_t t = 0; t < data.samples.size(); ++t) {
            data.samples[t].propensity =
                mask_probability_mc(data.samples[t].mask, probs, opt.propensity_samples, derive_seed(seed, "propensity", t))
                    .probability;
        }
    }
    return data;
}

/// Choices under uniformly random k-masks (counterfactual evaluation data).
inline ChoiceDataset sample_uniform_dataset(const std::vector<Market>& markets, int k, std::uint64_t seed,
                                            Imputation mode = Imputation::zero)
{
    require(!markets.empty(), "sample_uniform_dataset: no markets");
    const int d = static_cast<int>(markets.front().num_features());
    return simulate_choices(
        markets,
        [&](std::size_t l, int) {
            Rng rng(derive_seed(seed, "uniform-mask", l));
            return uniform_mask(d, k, rng);
        },
        1, mode);
}

}  // namespace decongest
