#pragma once

#include "decongest/assignment.hpp"
#include "decongest/market.hpp"
#include "decongest/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace decongest {

/// (v_max - v_min) / v_min <= 1 / (m - 1); vacuous for a single item.
inline bool prop1_condition(const Matrix& values)
{
    require(values.size() > 0, "prop1_condition: empty value matrix");
    const double lo = values.minCoeff();
    const double hi = values.maxCoeff();
    if (!(lo > 0.0)) throw Error("prop1_condition: values must be positive");
    const Eigen::Index m = values.cols();
    if (m <= 1) return true;
    return (hi - lo) / lo <= 1.0 / static_cast<double>(m - 1);
}

/// Calls f(item_of_user, size, welfare) for every partial matching.
template <typename F>
void for_each_partial_matching(const Matrix& values, F&& f)
{
    const Eigen::Index n = values.rows(), m = values.cols();
    std::vector<int> item_of(n, -1);
    std::vector<char> used(m, 0);
    std::function<void(Eigen::Index, int, double)> rec = [&](Eigen::Index i, int size, double w) {
        if (i == n) {
            f(item_of, size, w);
            return;
        }
        rec(i + 1, size, w);
        for (Eigen::Index j = 0; j < m; ++j) {
            if (used[j]) continue;
            used[j] = 1;
            item_of[i] = static_cast<int>(j);
            rec(i + 1, size + 1, w + values(i, j));
            item_of[i] = -1;
            used[j] = 0;
        }
    };
    rec(0, 0, 0.0);
}

/// Congestion monotonicity by enumeration: the worst allocation of s items
/// is at least as good as the best allocation of s - 1 items, for every s.
inline bool brute_force_monotone(const Matrix& values, double tol = 1e-12)
{
    require(values.rows() <= 6 && values.cols() <= 6, "brute_force_monotone: limited to 6 x 6");
    const int smax = static_cast<int>(std::min(values.rows(), values.cols()));
    std::vector<double> lo(smax + 1, std::numeric_limits<double>::infinity());
    std::vector<double> hi(smax + 1, -std::numeric_limits<double>::infinity());
    for_each_partial_matching(values, [&](const std::vector<int>&, int s, double w) {
        lo[s] = std::min(lo[s], w);
        hi[s] = std::max(hi[s], w);
    });
    for (int s = 1; s <= smax; ++s)
        if (lo[s] < hi[s - 1] - tol) return false;
    return true;
}

/// A deterministic allocation: item index per user, -1 when unallocated.
struct DeterministicAllocation {
    std::vector<int> item_of_user;

    std::vector<int> agents() const
    {
        std::vector<int> out;
        for (std::size_t i = 0; i < item_of_user.size(); ++i)
            if (item_of_user[i] >= 0) out.push_back(static_cast<int>(i));
        return out;
    }

    std::vector<int> items() const
    {
        std::vector<int> out;
        for (int j : item_of_user)
            if (j >= 0) out.push_back(j);
        std::sort(out.begin(), out.end());
        return out;
    }

    void validate(Eigen::Index n, Eigen::Index m) const
    {
        require(static_cast<Eigen::Index>(item_of_user.size()) == n, "allocation: one entry per user required");
        std::vector<char> seen(m, 0);
        for (int j : item_of_user) {
            if (j < 0) continue;
            require(j < m, "allocation: item index out of range");
            require(!seen[j], "allocation: item allocated twice");
            seen[j] = 1;
        }
    }
};

/// Every allocated agent holds its best response under perceived values.
inline bool is_admissible(const Market& market, const Mask& mask, const DeterministicAllocation& a,
                          Imputation mode = Imputation::zero)
{
    a.validate(market.num_users(), market.num_items());
    const ChoiceProfile y = choose(market, mask, mode);
    for (std::size_t i = 0; i < a.item_of_user.size(); ++i) {
        const int j = a.item_of_user[i];
        if (j >= 0 && y.choices[i] != j + 1) return false;
    }
    return true;
}

/// One winner per demanded item; the lowest-index chooser by default, or the
/// `pick`-th chooser (mod count).
inline DeterministicAllocation admissible_allocation(const ChoiceProfile& y, const std::vector<int>& pick = {})
{
    DeterministicAllocation a;
    a.item_of_user.assign(y.choices.size(), -1);
    std::vector<std::vector<int>> choosers(y.num_items());
    for (std::size_t i = 0; i < y.choices.size(); ++i)
        if (y.choices[i] > 0) choosers[y.choices[i] - 1].push_back(static_cast<int>(i));
    for (std::size_t j = 0; j < choosers.size(); ++j) {
        if (choosers[j].empty()) continue;
        const std::size_t t = pick.empty() ? 0 : static_cast<std::size_t>(pick[j]) % choosers[j].size();
        a.item_of_user[choosers[j][t]] = static_cast<int>(j);
    }
    return a;
}

constexpr double margin_cap = 1e6;

/// Smallest perceived-utility lead of an allocated agent's item over the other
/// allocated items, floored at 0; capped when no competing item exists.
inline double margin(const Market& market, const Mask& mask, const DeterministicAllocation& a,
                     Imputation mode = Imputation::zero)
{
    require(is_admissible(market, mask, a, mode), "margin: allocation is not admissible");
    const Matrix util = perceived_values(market, mask, mode).perceived.rowwise() - market.prices.transpose();
    const std::vector<int> g = a.items();
    double delta = margin_cap;
    for (int i : a.agents()) {
        const int own = a.item_of_user[i];
        for (int j : g) {
            if (j == own) continue;
            delta = std::min(delta, util(i, own) - util(i, j));
        }
    }
    return std::max(0.0, delta);
}

/// Welfare-optimal among matchings of the allocated agents to the allocated
/// items, at true values.
inline bool restricted_optimal(const Matrix& values, const DeterministicAllocation& a, double tol = 1e-9)
{
    a.validate(values.rows(), values.cols());
    const std::vector<int> n_a = a.agents();
    const std::vector<int> g_a = a.items();
    if (n_a.empty()) return true;
    Matrix sub(n_a.size(), g_a.size());
    for (std::size_t r = 0; r < n_a.size(); ++r)
        for (std::size_t c = 0; c < g_a.size(); ++c) sub(r, c) = values(n_a[r], g_a[c]);
    double w = 0.0;
    for (int i : n_a) w += values(i, a.item_of_user[i]);
    return w >= optimal_welfare(sub) - tol;
}

inline bool restricted_optimal(const Market& market, const DeterministicAllocation& a, double tol = 1e-9)
{
    return restricted_optimal(true_values(market), a, tol);
}

struct ConditionCheck {
    bool holds = false;
    double slack = 0.0;  // margin minus the worst left-hand side
};

struct ConditionReport {
    double margin = 0.0;
    ConditionCheck item_hidden_similarity;     // 1
    ConditionCheck agent_hidden_indifference;  // 2
    ConditionCheck top_item_consistency;       // 3, value clause
    ConditionCheck price_variation;            // 3, price clause
    ConditionCheck small_hidden_features;      // 4
    ConditionCheck agent_hidden_similarity;    // 5
    bool pointing_consistency = false;         // within allocated items
    bool pointing_consistency_all_items = false;
    bool hidden_value_inequality = false;      // v^H own >= v^H other - margin

    bool condition(int c) const
    {
        switch (c) {
        case 1: return item_hidden_similarity.holds;
        case 2: return agent_hidden_indifference.holds;
        case 3: return top_item_consistency.holds && price_variation.holds;
        case 4: return small_hidden_features.holds;
        case 5: return agent_hidden_similarity.holds;
        }
        throw Error("condition index must be 1..5");
    }

    bool any_condition() const
    {
        for (int c = 1; c <= 5; ++c)
            if (condition(c)) return true;
        return false;
    }
};

/// Evaluates the five sufficient conditions and the consistency properties of
/// an admissible allocation with margin delta. Linear values only.
inline ConditionReport check_conditions(const Market& market, const Mask& mask, const DeterministicAllocation& a,
                                        double delta, Imputation mode = Imputation::zero, double tol = 1e-12)
{
    require(market.dispersion == 1.0, "check_conditions: requires linear values (dispersion 1)");
    require(is_admissible(market, mask, a, mode), "check_conditions: allocation is not admissible");
    const Matrix& b = detail::preferences_of(market);
    const Matrix& x = market.item_features;
    const Vector hidden = Vector::Ones(mask.dim()) - mask.as_vector();
    const ValueView view = perceived_values(market, mask, mode);
    const std::vector<int> g = a.items();
    const std::vector<int> agents = a.agents();

    ConditionReport rep;
    rep.margin = delta;
    auto finish = [&](ConditionCheck& c, double worst) {
        c.slack = delta - worst;
        c.holds = worst <= delta + tol;
    };

    double w1 = 0.0, w3p = 0.0, w4 = 0.0;
    for (int j : g) {
        w4 = std::max(w4, hidden.cwiseProduct(x.row(j).transpose()).cwiseAbs().sum());
        for (int jj : g) {
            w1 = std::max(w1, hidden.cwiseProduct((x.row(j) - x.row(jj)).transpose()).cwiseAbs().sum());
            w3p = std::max(w3p, std::abs(market.prices(j) - market.prices(jj)));
        }
    }
    double w2 = 0.0, w5 = 0.0;
    for (int i : agents) {
        w2 = std::max(w2, hidden.cwiseProduct(b.row(i).transpose()).cwiseAbs().sum());
        for (int ii : agents)
            w5 = std::max(w5, hidden.cwiseProduct((b.row(i) - b.row(ii)).transpose()).cwiseAbs().sum());
    }
    // Top-item value consistency: any revealed-top item is near-top in hidden value.
    double w3v = 0.0;
    for (int i : agents) {
        double top_perceived = -std::numeric_limits<double>::infinity();
        double top_hidden = -std::numeric_limits<double>::infinity();
        for (int j : g) {
            top_perceived = std::max(top_perceived, view.perceived(i, j));
            top_hidden = std::max(top_hidden, view.hidden(i, j));
        }
        for (int j : g)
            if (view.perceived(i, j) >= top_perceived) w3v = std::max(w3v, top_hidden - view.hidden(i, j));
    }
    finish(rep.item_hidden_similarity, w1);
    finish(rep.agent_hidden_indifference, w2);
    finish(rep.top_item_consistency, w3v);
    finish(rep.price_variation, w3p);
    finish(rep.small_hidden_features, w4);
    finish(rep.agent_hidden_similarity, w5);

    const Matrix util = view.true_values.rowwise() - market.prices.transpose();
    rep.pointing_consistency = rep.pointing_consistency_all_items = rep.hidden_value_inequality = true;
    for (int i : agents) {
        const int own = a.item_of_user[i];
        for (int j : g) {
            if (util(i, j) > util(i, own) + 1e-9) rep.pointing_consistency = false;
            if (view.hidden(i, own) < view.hidden(i, j) - delta - tol) rep.hidden_value_inequality = false;
        }
        for (Eigen::Index j = 0; j < util.cols(); ++j)
            if (util(i, j) > util(i, own) + 1e-9) rep.pointing_consistency_all_items = false;
    }
    return rep;
}

/// Product-structure lottery: competitor set N_j for each allocated item j,
/// each member wins j with probability 1 / |N_j|.
struct RandomizedAllocation {
    std::vector<int> items;                     // G
    std::vector<std::vector<int>> competitors;  // N_j, parallel to items

    void validate(Eigen::Index n, Eigen::Index m) const
    {
        require(items.size() == competitors.size(), "randomized allocation: one competitor set per item");
        std::vector<char> agent_seen(n, 0), item_seen(m, 0);
        for (std::size_t t = 0; t < items.size(); ++t) {
            require(items[t] >= 0 && items[t] < m, "randomized allocation: item out of range");
            require(!item_seen[items[t]], "randomized allocation: duplicate item");
            item_seen[items[t]] = 1;
            require(!competitors[t].empty(), "randomized allocation: empty competitor set");
            for (int i : competitors[t]) {
                require(i >= 0 && i < n, "randomized allocation: agent out of range");
                require(!agent_seen[i], "randomized allocation: competitor sets must be disjoint");
                agent_seen[i] = 1;
            }
        }
    }

    /// Pr[i]: 1 / |N_j| for a competitor of j, 0 otherwise.
    std::vector<double> win_probabilities(Eigen::Index n) const
    {
        std::vector<double> p(n, 0.0);
        for (const auto& set : competitors)
            for (int i : set) p[i] = 1.0 / static_cast<double>(set.size());
        return p;
    }

    /// Calls f(allocation, probability) for every allocation in the support.
    template <typename F>
    void for_each_support(Eigen::Index n, F&& f) const
    {
        DeterministicAllocation a;
        a.item_of_user.assign(n, -1);
        std::function<void(std::size_t, double)> rec = [&](std::size_t t, double prob) {
            if (t == items.size()) {
                f(a, prob);
                return;
            }
            for (int i : competitors[t]) {
                a.item_of_user[i] = items[t];
                rec(t + 1, prob / static_cast<double>(competitors[t].size()));
                a.item_of_user[i] = -1;
            }
        };
        rec(0, 1.0);
    }

    /// Randomized allocation of a choice profile under the single-round rule.
    static RandomizedAllocation from_choices(const ChoiceProfile& y)
    {
        RandomizedAllocation r;
        std::vector<std::vector<int>> choosers(y.num_items());
        for (std::size_t i = 0; i < y.choices.size(); ++i)
            if (y.choices[i] > 0) choosers[y.choices[i] - 1].push_back(static_cast<int>(i));
        for (std::size_t j = 0; j < choosers.size(); ++j) {
            if (choosers[j].empty()) continue;
            r.items.push_back(static_cast<int>(j));
            r.competitors.push_back(choosers[j]);
        }
        return r;
    }
};

/// Exact expected welfare by enumerating the support.
inline double expected_welfare(const RandomizedAllocation& r, const Matrix& values)
{
    r.validate(values.rows(), values.cols());
    double w = 0.0;
    r.for_each_support(values.rows(), [&](const DeterministicAllocation& a, double prob) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.item_of_user.size(); ++i)
            if (a.item_of_user[i] >= 0) s += values(i, a.item_of_user[i]);
        w += prob * s;
    });
    return w;
}

struct Theorem1Verdict {
    bool hypotheses_met = false;
    std::string reason;  // why hypotheses fail
    double welfare_a = 0.0;
    double welfare_b = 0.0;
    bool strict_expected = false;
    bool holds = false;
};

/// Checks the hypotheses (B extends A, B restricted optimal on its support)
/// and, when they hold, the welfare ordering W(B) >= W(A), strict when G(B)
/// strictly contains G(A) and every value is positive.
inline Theorem1Verdict theorem1_check(const RandomizedAllocation& a, const RandomizedAllocation& b, const Matrix& values,
                                      double tol = 1e-9)
{
    const Eigen::Index n = values.rows(), m = values.cols();
    a.validate(n, m);
    b.validate(n, m);
    Theorem1Verdict v;
    std::vector<char> in_b(m, 0);
    for (int j : b.items) in_b[j] = 1;
    for (int j : a.items) {
        if (!in_b[j]) {
            v.reason = "hypotheses not met: B does not allocate item " + std::to_string(j);
            return v;
        }
    }
    const std::vector<double> pa = a.win_probabilities(n), pb = b.win_probabilities(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (pb[i] < pa[i] - 1e-15) {
            v.reason = "hypotheses not met: agent " + std::to_string(i) + " faces more congestion under B";
            return v;
        }
    }
    bool optimal = true;
    b.for_each_support(n, [&](const DeterministicAllocation& alloc, double) {
        if (optimal && !restricted_optimal(values, alloc)) optimal = false;
    });
    if (!optimal) {
        v.reason = "hypotheses not met: B is not restricted optimal";
        return v;
    }
    v.hypotheses_met = true;
    v.welfare_a = expected_welfare(a, values);
    v.welfare_b = expected_welfare(b, values);
    v.strict_expected = b.items.size() > a.items.size() && values.minCoeff() > 0.0;
    v.holds = v.strict_expected ? v.welfare_b > v.welfare_a : v.welfare_b >= v.welfare_a - tol;
    return v;
}

}  // namespace decongest
