#pragma once

#include "decongest/pricing.hpp"
#include "decongest/rng.hpp"
#include "decongest/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace decongest {

enum class Imputation { zero, mean };

inline std::string to_string(Imputation mode) { return mode == Imputation::zero ? "zero" : "mean"; }

inline Imputation imputation_from_string(const std::string& s)
{
    if (s == "zero") return Imputation::zero;
    if (s == "mean") return Imputation::mean;
    throw Error("unknown imputation mode '" + s + "'");
}

/// One economy: m items (features X, prices p) and n users (features U and,
/// when known, private preference vectors B).
struct Market {
    Matrix item_features;               // m x d, non-negative
    Vector prices;                      // m, non-negative
    Matrix user_features;               // n x d'
    std::optional<Matrix> preferences;  // n x d, non-negative
    /// Values are raised to this power (1 = linear values). Applied to both
    /// true and perceived values, so v <= v^rho holds on [0, 1].
    double dispersion = 1.0;

    Eigen::Index num_items() const { return item_features.rows(); }
    Eigen::Index num_features() const { return item_features.cols(); }
    Eigen::Index num_users() const
    {
        return preferences ? preferences->rows() : user_features.rows();
    }
    bool has_preferences() const { return preferences.has_value(); }

    void validate(double tol = 1e-9) const
    {
        require(item_features.allFinite() && prices.allFinite(), "market: non-finite entries");
        require(prices.size() == item_features.rows(), "market: price vector length must equal item count");
        require(item_features.size() == 0 || item_features.minCoeff() >= 0.0, "market: item features must be non-negative");
        require(prices.size() == 0 || prices.minCoeff() >= 0.0, "market: prices must be non-negative");
        require(dispersion > 0.0 && dispersion <= 1.0, "market: dispersion power must lie in (0, 1]");
        if (preferences) {
            const Matrix& b = *preferences;
            require(b.allFinite(), "market: non-finite preferences");
            require(b.cols() == item_features.cols(), "market: preference dimension must equal item feature dimension");
            require(b.size() == 0 || b.minCoeff() >= 0.0, "market: preferences must be non-negative");
            require(user_features.rows() == 0 || user_features.rows() == b.rows(),
                    "market: user feature and preference row counts differ");
            const Matrix v = b * item_features.transpose();
            require(v.size() == 0 || (v.minCoeff() >= -tol && v.maxCoeff() <= 1.0 + tol),
                    "market: values must lie in [0, 1]");
        }
    }
};

/// True, perceived, and hidden values (v = perceived + hidden).
struct ValueView {
    Matrix true_values;
    Matrix perceived;
    Matrix hidden;
};

namespace detail {

inline const Matrix& preferences_of(const Market& market)
{
    require(market.has_preferences(), "preferences required");
    return *market.preferences;
}

inline Matrix apply_power(Matrix v, double rho)
{
    if (rho == 1.0) return v;
    return v.cwiseMax(0.0).array().pow(rho).matrix();
}

/// Item features as a user sees them under the mask.
inline Matrix revealed_features(const Market& market, const Mask& mask, Imputation mode)
{
    require(static_cast<Eigen::Index>(mask.dim()) == market.num_features(), "mask dimension must equal item feature dimension");
    Matrix z = market.item_features;
    const Eigen::Index m = z.rows();
    for (Eigen::Index l = 0; l < z.cols(); ++l) {
        if (mask.revealed(l)) continue;
        const double fill = (mode == Imputation::mean && m > 0) ? z.col(l).mean() : 0.0;
        z.col(l).setConstant(fill);
    }
    return z;
}

}  // namespace detail

/// v_ij = (beta_i . x_j)^rho.
inline Matrix true_values(const Market& market)
{
    const Matrix& b = detail::preferences_of(market);
    return detail::apply_power(b * market.item_features.transpose(), market.dispersion);
}

inline ValueView perceived_values(const Market& market, const Mask& mask, Imputation mode = Imputation::zero)
{
    const Matrix& b = detail::preferences_of(market);
    ValueView view;
    view.true_values = true_values(market);
    view.perceived = detail::apply_power(b * detail::revealed_features(market, mask, mode).transpose(), market.dispersion);
    view.hidden = view.true_values - view.perceived;
    return view;
}

/// y_i in {0..m}; 0 is "no choice", j >= 1 is item j-1.
struct ChoiceProfile {
    std::vector<int> choices;
    std::vector<int> demand;  // n_j per item

    Eigen::Index num_users() const { return static_cast<Eigen::Index>(choices.size()); }
    Eigen::Index num_items() const { return static_cast<Eigen::Index>(demand.size()); }

    int no_choice_count() const
    {
        return static_cast<int>(std::count(choices.begin(), choices.end(), 0));
    }

    /// n x m indicator matrix y.
    Matrix indicator() const
    {
        Matrix y = Matrix::Zero(num_users(), num_items());
        for (std::size_t i = 0; i < choices.size(); ++i) {
            if (choices[i] > 0) y(i, choices[i] - 1) = 1.0;
        }
        return y;
    }

    static ChoiceProfile from_choices(std::vector<int> choices, Eigen::Index num_items)
    {
        ChoiceProfile out;
        out.demand.assign(num_items, 0);
        for (int c : choices) {
            require(c >= 0 && c <= num_items, "choice index out of range");
            if (c > 0) ++out.demand[c - 1];
        }
        out.choices = std::move(choices);
        return out;
    }
};

/// Argmax of utility per row with the strict-positivity no-choice rule and
/// lowest-index tie breaking.
inline ChoiceProfile choose_from_utilities(const Matrix& utilities)
{
    std::vector<int> choices(utilities.rows(), 0);
    for (Eigen::Index i = 0; i < utilities.rows(); ++i) {
        double best = 0.0;
        for (Eigen::Index j = 0; j < utilities.cols(); ++j) {
            if (utilities(i, j) > best) {
                best = utilities(i, j);
                choices[i] = static_cast<int>(j) + 1;
            }
        }
    }
    return ChoiceProfile::from_choices(std::move(choices), utilities.cols());
}

inline ChoiceProfile choose_from_values(const Matrix& values, const Vector& prices)
{
    return choose_from_utilities(values.rowwise() - prices.transpose());
}

inline ChoiceProfile choose(const Market& market, const Mask& mask, Imputation mode = Imputation::zero)
{
    return choose_from_values(perceived_values(market, mask, mode).perceived, market.prices);
}

/// Full-information choices y* = argmax_j v_ij - p_j.
inline ChoiceProfile rational_choices(const Market& market)
{
    return choose_from_values(true_values(market), market.prices);
}

enum class AllocationKind { expected, realized };

struct Allocation {
    AllocationKind kind = AllocationKind::expected;
    Matrix matrix;  // n x m
};

/// Random single-round rule: each demanded item goes to one of its choosers
/// uniformly at random. Expected mode returns the win probabilities y_ij / n_j.
inline Allocation allocate(const ChoiceProfile& choices, AllocationKind mode, std::uint64_t seed = 0)
{
    Allocation alloc;
    alloc.kind = mode;
    alloc.matrix = Matrix::Zero(choices.num_users(), choices.num_items());
    if (mode == AllocationKind::expected) {
        for (std::size_t i = 0; i < choices.choices.size(); ++i) {
            const int c = choices.choices[i];
            if (c > 0) alloc.matrix(i, c - 1) = 1.0 / choices.demand[c - 1];
        }
        return alloc;
    }
    std::vector<std::vector<int>> choosers(choices.num_items());
    for (std::size_t i = 0; i < choices.choices.size(); ++i) {
        if (choices.choices[i] > 0) choosers[choices.choices[i] - 1].push_back(static_cast<int>(i));
    }
    Rng rng(seed);
    for (std::size_t j = 0; j < choosers.size(); ++j) {
        if (choosers[j].empty()) continue;
        const int winner = choosers[j][rng.index(choosers[j].size())];
        alloc.matrix(winner, j) = 1.0;
    }
    return alloc;
}

/// Sum of allocation-weighted true values.
inline double welfare(const Allocation& alloc, const Matrix& true_values)
{
    require(alloc.matrix.rows() == true_values.rows() && alloc.matrix.cols() == true_values.cols(),
            "welfare: allocation and value shapes differ");
    return alloc.matrix.cwiseProduct(true_values).sum();
}

inline double welfare(const Allocation& alloc, const ValueView& values) { return welfare(alloc, values.true_values); }

/// Expected welfare of a choice profile under the random single-round rule.
inline double expected_welfare(const ChoiceProfile& choices, const Matrix& true_values)
{
    return welfare(allocate(choices, AllocationKind::expected), true_values);
}

/// Excess demand with per-item supply (unit supply by default).
inline double congestion_count(const ChoiceProfile& choices, const std::vector<int>& supply = {})
{
    double total = 0.0;
    for (std::size_t j = 0; j < choices.demand.size(); ++j) {
        const int c = supply.empty() ? 1 : supply[j];
        total += std::max(0, choices.demand[j] - c);
    }
    return total;
}

inline int allocated_items(const ChoiceProfile& choices)
{
    return static_cast<int>(std::count_if(choices.demand.begin(), choices.demand.end(), [](int n) { return n > 0; }));
}

/// Ranks (1 = smallest) with ties sharing their average rank.
inline std::vector<double> average_ranks(const std::vector<double>& xs)
{
    std::vector<std::size_t> order(xs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(xs.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
        i = j + 1;
    }
    return ranks;
}

/// Kendall's coefficient of concordance of the users' item rankings.
inline double kendalls_w(const Matrix& scores)
{
    const Eigen::Index n = scores.rows();
    const Eigen::Index m = scores.cols();
    require(m >= 2, "kendalls_w: need at least two items");
    require(n >= 2, "kendalls_w: need at least two users");
    Vector rank_sums = Vector::Zero(m);
    for (Eigen::Index i = 0; i < n; ++i) {
        std::vector<double> row(m);
        for (Eigen::Index j = 0; j < m; ++j) row[j] = scores(i, j);
        const std::vector<double> r = average_ranks(row);
        for (Eigen::Index j = 0; j < m; ++j) rank_sums(j) += r[j];
    }
    const double nn = static_cast<double>(n);
    const double mm = static_cast<double>(m);
    const double mean = nn * (mm + 1.0) / 2.0;
    const double s = (rank_sums.array() - mean).square().sum();
    const double w = 12.0 * s / (nn * nn * (mm * mm * mm - mm));
    return std::clamp(w, 0.0, 1.0);
}

inline double kendalls_w(const ValueView& view) { return kendalls_w(view.perceived); }

/// Concordance of the users' perceived-utility rankings (perceived value minus
/// price), i.e. of the preferences that drive choices.
inline double preference_concordance(const ValueView& view, const Vector& prices)
{
    return kendalls_w(Matrix(view.perceived.rowwise() - prices.transpose()));
}

using Pricer = std::function<Vector(const Matrix&)>;

inline Pricer mid_pricer()
{
    return [](const Matrix& v) { return mid_prices(v); };
}

/// (1/m) || p~ - p ||_1 where p~ are prices recomputed on perceived values.
inline double perceptive_distortion(const Market& market, const Mask& mask, const Pricer& pricer = mid_pricer(),
                                    Imputation mode = Imputation::zero)
{
    const ValueView view = perceived_values(market, mask, mode);
    const Vector p_tilde = pricer(view.perceived.cwiseMax(0.0));
    const double m = static_cast<double>(market.num_items());
    return m == 0 ? 0.0 : (p_tilde - market.prices).cwiseAbs().sum() / m;
}

/// Adds uniform noise in [0, magnitude) to every preference entry so that best
/// responses are generically unique.
inline Market perturb_preferences(Market market, std::uint64_t seed, double magnitude = 1e-9)
{
    Matrix& b = *market.preferences;
    Rng rng(seed);
    for (Eigen::Index i = 0; i < b.rows(); ++i)
        for (Eigen::Index l = 0; l < b.cols(); ++l) b(i, l) += rng.uniform(0.0, magnitude);
    return market;
}

}  // namespace decongest
