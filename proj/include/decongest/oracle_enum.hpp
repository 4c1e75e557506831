#pragma once

#include "decongest/market.hpp"
#include "decongest/objectives.hpp"
#include "decongest/predictor.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace decongest {

enum class ObjectiveKind { welfare_oracle, predictive_oracle, selection_only, decongestion_only, lower_bound, proxy };

inline std::string to_string(ObjectiveKind k)
{
    switch (k) {
    case ObjectiveKind::welfare_oracle: return "welfare_oracle";
    case ObjectiveKind::predictive_oracle: return "predictive_oracle";
    case ObjectiveKind::selection_only: return "selection_only";
    case ObjectiveKind::decongestion_only: return "decongestion_only";
    case ObjectiveKind::lower_bound: return "lower_bound";
    case ObjectiveKind::proxy: return "proxy";
    }
    return "unknown";
}

inline ObjectiveKind objective_kind(const std::string& name)
{
    using K = ObjectiveKind;
    for (K k : {K::welfare_oracle, K::predictive_oracle, K::selection_only, K::decongestion_only, K::lower_bound, K::proxy})
        if (to_string(k) == name) return k;
    throw Error("unknown objective '" + name + "'");
}

/// An objective to maximize over masks; lambda and penalty apply to `proxy` only.
struct Objective {
    ObjectiveKind kind = ObjectiveKind::welfare_oracle;
    double lambda = 0.5;
    bool no_choice_penalty = false;

    static Objective of(ObjectiveKind k) { return Objective{k, 0.5, false}; }
    static Objective proxy(double lambda, bool penalty) { return Objective{ObjectiveKind::proxy, lambda, penalty}; }
    std::string name() const { return to_string(kind); }
};

inline std::vector<Objective> all_objectives(double proxy_lambda, bool proxy_penalty)
{
    using K = ObjectiveKind;
    return {Objective::of(K::welfare_oracle), Objective::of(K::predictive_oracle), Objective::of(K::selection_only),
            Objective::of(K::decongestion_only), Objective::of(K::lower_bound), Objective::proxy(proxy_lambda, proxy_penalty)};
}

/// Objective value from choices and true values (values may be empty for the
/// value-free kinds).
inline double objective_value(const Objective& obj, const ChoiceProfile& y, const Vector& prices, const Matrix& v)
{
    const bool needs_values = obj.kind == ObjectiveKind::welfare_oracle || obj.kind == ObjectiveKind::predictive_oracle;
    require(!needs_values || v.size() > 0, "preferences required");
    switch (obj.kind) {
    case ObjectiveKind::welfare_oracle:
        return expected_welfare(y, v);
    case ObjectiveKind::predictive_oracle: {
        double s = 0.0;
        for (std::size_t i = 0; i < y.choices.size(); ++i)
            if (y.choices[i] > 0) s += v(i, y.choices[i] - 1);
        return s;
    }
    case ObjectiveKind::selection_only:
        return proxy_welfare(y, prices, 0.5, false).selection;
    case ObjectiveKind::decongestion_only:
        return -proxy_welfare(y, prices, 0.5, false).decongestion;
    case ObjectiveKind::lower_bound:
        return proxy_welfare(y, prices, 0.5, false).lower_bound();
    case ObjectiveKind::proxy:
        return proxy_welfare(y, prices, obj.lambda, obj.no_choice_penalty).combined;
    }
    return 0.0;
}

/// Objective of one mask. Choices come from the market's own choice model
/// unless a predictor is supplied.
inline double evaluate_mask(const Market& market, const Mask& mask, const Objective& obj,
                            const PredictorWeights* predictor = nullptr, Imputation mode = Imputation::zero)
{
    Matrix v;
    ChoiceProfile y;
    if (market.has_preferences()) {
        const ValueView view = perceived_values(market, mask, mode);
        v = view.true_values;
        y = predictor ? predict_choices(*predictor, market, mask) : choose_from_values(view.perceived, market.prices);
    } else {
        require(predictor != nullptr, "preferences required");
        y = predict_choices(*predictor, market, mask);
    }
    return objective_value(obj, y, market.prices, v);
}

/// C(n, k) as a double (exact for the sizes enumerated here).
inline double binomial(int n, int k)
{
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return std::round(r);
}

/// Calls f(mask) for every k-subset of d features in lexicographic order of
/// index sets.
template <typename F>
void for_each_mask(int d, int k, F&& f)
{
    require(k >= 0 && k <= d, "for_each_mask: k out of range");
    std::vector<int> idx(k);
    for (int i = 0; i < k; ++i) idx[i] = i;
    for (;;) {
        f(Mask::from_indices(d, idx));
        int i = k - 1;
        while (i >= 0 && idx[i] == d - k + i) --i;
        if (i < 0) return;
        ++idx[i];
        for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
}

struct SweepOptions {
    double cap = 1e6;
    bool distortion = false;
    bool kendalls_w = false;
    double tie_tolerance = 1e-12;
    Imputation mode = Imputation::zero;
    Pricer pricer = mid_pricer();
};

struct MaskRecord {
    Mask mask;
    std::vector<double> objective;  // one per swept objective
    double welfare = 0.0;
    double congestion = 0.0;
    int allocated = 0;
    int no_choice = 0;
    double distortion = std::numeric_limits<double>::quiet_NaN();
    double kendalls_w = std::numeric_limits<double>::quiet_NaN();           // rankings by perceived value
    double utility_concordance = std::numeric_limits<double>::quiet_NaN();  // rankings by perceived utility
};

struct MaskSweepResult {
    std::vector<Objective> objectives;
    std::vector<MaskRecord> records;
    std::vector<std::vector<int>> argmax;  // record indices per objective

    /// Mean, min and max true welfare over an objective's argmax set.
    struct ArgmaxWelfare {
        double mean = 0.0;
        double min = 0.0;
        double max = 0.0;
        std::size_t size = 0;
    };

    ArgmaxWelfare argmax_welfare(std::size_t objective) const
    {
        ArgmaxWelfare out;
        const std::vector<int>& set = argmax.at(objective);
        out.size = set.size();
        out.min = std::numeric_limits<double>::infinity();
        out.max = -std::numeric_limits<double>::infinity();
        for (int r : set) {
            const double w = records[r].welfare;
            out.mean += w;
            out.min = std::min(out.min, w);
            out.max = std::max(out.max, w);
        }
        out.mean /= static_cast<double>(set.size());
        return out;
    }
};

/// Exhaustive search over all k-masks; every mask within tie_tolerance of an
/// objective's maximum lands in its argmax set.
inline MaskSweepResult sweep(const Market& market, int k, const std::vector<Objective>& objectives,
                             const SweepOptions& opt = {})
{
    const int d = static_cast<int>(market.num_features());
    require(k >= 0 && k <= d, "sweep: k out of range");
    require(!objectives.empty(), "sweep: no objectives");
    const double count = binomial(d, k);
    if (count > opt.cap) {
        throw Error("sweep: C(" + std::to_string(d) + ", " + std::to_string(k) + ") masks exceed the enumeration cap; use the mask learner instead");
    }
    MaskSweepResult res;
    res.objectives = objectives;
    res.records.reserve(static_cast<std::size_t>(count));
    const Matrix v = true_values(market);
    for_each_mask(d, k, [&](const Mask& mask) {
        MaskRecord rec;
        rec.mask = mask;
        const ValueView view = perceived_values(market, mask, opt.mode);
        const ChoiceProfile y = choose_from_values(view.perceived, market.prices);
        for (const Objective& o : objectives) rec.objective.push_back(objective_value(o, y, market.prices, v));
        rec.welfare = expected_welfare(y, v);
        rec.congestion = congestion_count(y);
        rec.allocated = allocated_items(y);
        rec.no_choice = y.no_choice_count();
        if (opt.distortion) rec.distortion = perceptive_distortion(market, mask, opt.pricer, opt.mode);
        if (opt.kendalls_w) {
            rec.kendalls_w = kendalls_w(view);
            rec.utility_concordance = preference_concordance(view, market.prices);
        }
        res.records.push_back(std::move(rec));
    });
    res.argmax.resize(objectives.size());
    for (std::size_t o = 0; o < objectives.size(); ++o) {
        double best = -std::numeric_limits<double>::infinity();
        for (const MaskRecord& r : res.records) best = std::max(best, r.objective[o]);
        for (std::size_t r = 0; r < res.records.size(); ++r)
            if (res.records[r].objective[o] >= best - opt.tie_tolerance) res.argmax[o].push_back(static_cast<int>(r));
    }
    return res;
}

/// One CSV row per mask: mask bits, each objective, then diagnostics.
inline void write_sweep_csv(std::ostream& out, const MaskSweepResult& res)
{
    out << "mask";
    for (const Objective& o : res.objectives) out << ',' << o.name();
    out << ",welfare,congestion,allocated_items,no_choice,distortion,kendalls_w,utility_concordance\n";
    out.precision(17);
    for (const MaskRecord& r : res.records) {
        out << r.mask.to_string();
        for (double v : r.objective) out << ',' << v;
        out << ',' << r.welfare << ',' << r.congestion << ',' << r.allocated << ',' << r.no_choice << ',';
        if (!std::isnan(r.distortion)) out << r.distortion;
        out << ',';
        if (!std::isnan(r.kendalls_w)) out << r.kendalls_w;
        out << ',';
        if (!std::isnan(r.utility_concordance)) out << r.utility_concordance;
        out << '\n';
    }
}

}  // namespace decongest
