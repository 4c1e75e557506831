#pragma once

#include "decongest/rng.hpp"
#include "decongest/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace decongest {

/// softmax(theta / tau).
inline Vector feature_probabilities(const Vector& theta, double tau = 1.0)
{
    require(tau > 0.0, "feature_probabilities: temperature must be positive");
    require(theta.allFinite(), "feature_probabilities: non-finite theta");
    Vector p = ((theta.array() - theta.maxCoeff()) / tau).exp().matrix();
    return p / p.sum();
}

/// The k largest entries (ties go to the lower index).
inline Mask topk_mask(const Vector& scores, int k)
{
    const int d = static_cast<int>(scores.size());
    require(k >= 0 && k <= d, "topk_mask: k out of range");
    std::vector<int> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores(a) > scores(b); });
    order.resize(k);
    return Mask::from_indices(d, order);
}

/// Draws k features one at a time, each proportional to its probability among
/// the features not yet drawn.
inline Mask sample_mask(const Vector& probabilities, int k, Rng& rng)
{
    const int d = static_cast<int>(probabilities.size());
    require(k >= 0 && k <= d, "sample_mask: k out of range");
    std::vector<int> bits(d, 0);
    for (int t = 0; t < k; ++t) {
        double total = 0.0;
        for (int l = 0; l < d; ++l)
            if (!bits[l]) total += probabilities(l);
        double u = rng.uniform() * total;
        int pick = -1;
        for (int l = 0; l < d; ++l) {
            if (bits[l]) continue;
            pick = l;
            u -= probabilities(l);
            if (u < 0.0) break;
        }
        bits[pick] = 1;
    }
    return Mask(std::move(bits));
}

/// Uniformly random k-subset.
inline Mask uniform_mask(int d, int k, Rng& rng)
{
    return Mask::from_indices(d, rng.sample_without_replacement(d, k));
}

struct MaskProbabilityEstimate {
    double probability = 0.0;
    double standard_error = 0.0;
    long hits = 0;
    long samples = 0;
};

/// Monte Carlo frequency of drawing exactly `mask` by sequential sampling.
inline MaskProbabilityEstimate mask_probability_mc(const Mask& mask, const Vector& probabilities, long samples,
                                                   std::uint64_t seed)
{
    require(samples > 0, "mask_probability_mc: need at least one sample");
    require(static_cast<Eigen::Index>(mask.dim()) == probabilities.size(), "mask_probability_mc: dimension mismatch");
    MaskProbabilityEstimate est;
    est.samples = samples;
    Rng rng(seed);
    for (long s = 0; s < samples; ++s) {
        if (sample_mask(probabilities, mask.cardinality(), rng) == mask) ++est.hits;
    }
    est.probability = static_cast<double>(est.hits) / samples;
    est.standard_error = std::sqrt(est.probability * (1.0 - est.probability) / samples);
    return est;
}

/// P_target(mask) / P_behavior(mask), both estimated by Monte Carlo.
inline double propensity_ratio(const Mask& mask, const Vector& target_probabilities,
                               const Vector& behavior_probabilities, long mc_samples, std::uint64_t seed)
{
    const MaskProbabilityEstimate behavior =
        mask_probability_mc(mask, behavior_probabilities, mc_samples, derive_seed(seed, "behavior"));
    if (behavior.hits == 0) {
        throw Error("propensity_ratio: behavior policy never drew mask " + mask.to_string() + " in " +
                    std::to_string(mc_samples) + " samples (full support violated or too few samples)");
    }
    const MaskProbabilityEstimate target =
        mask_probability_mc(mask, target_probabilities, mc_samples, derive_seed(seed, "target"));
    return target.probability / behavior.probability;
}

/// Logging policy concentrated on a default mask but with full support.
struct DefaultPolicy {
    Vector theta;
    double temperature = 0.05;
    Mask default_mask;

    Vector probabilities() const { return feature_probabilities(theta, temperature); }
};

inline DefaultPolicy default_policy(const Mask& default_mask, double on_value = 3.0, double off_value = 1.0,
                                    double temperature = 0.05)
{
    DefaultPolicy policy;
    policy.default_mask = default_mask;
    policy.temperature = temperature;
    policy.theta.resize(default_mask.dim());
    for (std::size_t l = 0; l < default_mask.dim(); ++l)
        policy.theta(l) = default_mask.revealed(l) ? on_value : off_value;
    const Vector p = policy.probabilities();
    for (Eigen::Index l = 0; l < p.size(); ++l) {
        if (!(p(l) > 0.0)) throw Error("default_policy: feature " + std::to_string(l) + " has zero probability");
    }
    return policy;
}

}  // namespace decongest
