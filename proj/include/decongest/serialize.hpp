#pragma once

#include "decongest/dataset.hpp"
#include "decongest/mask_learner.hpp"
#include "decongest/market.hpp"
#include "decongest/nmf.hpp"
#include "decongest/predictor.hpp"
#include "decongest/pricing.hpp"
#include "decongest/theory.hpp"

#include "json.hpp"

#include <fstream>
#include <string>
#include <vector>

namespace decongest {

using json = nlohmann::json;

constexpr int schema_version = 1;

inline json to_json(const Matrix& a)
{
    json rows = json::array();
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < a.cols(); ++j) row.push_back(a(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline json to_json(const Vector& v)
{
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

inline Matrix matrix_from_json(const json& j, Eigen::Index cols_if_empty = 0)
{
    require(j.is_array(), "json: matrix must be an array of rows");
    const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
    const Eigen::Index cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : cols_if_empty;
    Matrix a(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        require(j[i].is_array() && static_cast<Eigen::Index>(j[i].size()) == cols, "json: ragged matrix");
        for (Eigen::Index c = 0; c < cols; ++c) a(i, c) = j[i][c].get<double>();
    }
    return a;
}

inline Vector vector_from_json(const json& j)
{
    require(j.is_array(), "json: vector must be an array");
    Vector v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
    return v;
}

inline json to_json(const Mask& m) { return m.bits(); }

inline Mask mask_from_json(const json& j) { return Mask(j.get<std::vector<int>>()); }

inline json to_json(const Market& mk)
{
    json j;
    j["schema_version"] = schema_version;
    j["item_features"] = to_json(mk.item_features);
    j["prices"] = to_json(mk.prices);
    j["user_features"] = to_json(mk.user_features);
    if (mk.preferences) j["preferences"] = to_json(*mk.preferences);
    j["dispersion"] = mk.dispersion;
    return j;
}

inline Market market_from_json(const json& j)
{
    require(j.value("schema_version", 0) == schema_version, "market json: unsupported schema version");
    Market mk;
    mk.item_features = matrix_from_json(j.at("item_features"));
    mk.prices = vector_from_json(j.at("prices"));
    mk.user_features = matrix_from_json(j.at("user_features"));
    if (j.contains("preferences") && !j["preferences"].is_null())
        mk.preferences = matrix_from_json(j["preferences"], mk.item_features.cols());
    mk.dispersion = j.value("dispersion", 1.0);
    mk.validate();
    return mk;
}

inline json to_json(const std::vector<Market>& markets)
{
    json j;
    j["schema_version"] = schema_version;
    j["markets"] = json::array();
    for (const Market& mk : markets) j["markets"].push_back(to_json(mk));
    return j;
}

inline std::vector<Market> markets_from_json(const json& j)
{
    require(j.value("schema_version", 0) == schema_version, "markets json: unsupported schema version");
    std::vector<Market> out;
    for (const json& m : j.at("markets")) out.push_back(market_from_json(m));
    return out;
}

inline json to_json(const FactorizedPool& pool)
{
    json j;
    j["schema_version"] = schema_version;
    j["item_features"] = to_json(pool.item_features);
    j["preferences"] = to_json(pool.preferences);
    j["user_features"] = to_json(pool.user_features);
    j["feature_map"] = to_json(pool.feature_map);
    j["rating_objective_final"] = pool.rating_objective.empty() ? 0.0 : pool.rating_objective.back();
    j["preference_objective_final"] = pool.preference_objective.empty() ? 0.0 : pool.preference_objective.back();
    return j;
}

inline FactorizedPool pool_from_json(const json& j)
{
    require(j.value("schema_version", 0) == schema_version, "pool json: unsupported schema version");
    FactorizedPool p;
    p.item_features = matrix_from_json(j.at("item_features"));
    p.preferences = matrix_from_json(j.at("preferences"));
    p.user_features = matrix_from_json(j.at("user_features"));
    p.feature_map = matrix_from_json(j.at("feature_map"));
    return p;
}

inline json to_json(const PredictorWeights& w)
{
    json j;
    j["schema_version"] = schema_version;
    j["shape"] = {w.W.rows(), w.W.cols()};
    j["W"] = to_json(w.W);
    return j;
}

inline PredictorWeights weights_from_json(const json& j)
{
    PredictorWeights w;
    const auto shape = j.at("shape").get<std::vector<Eigen::Index>>();
    require(shape.size() == 2, "weights json: shape must have two entries");
    w.W = matrix_from_json(j.at("W"), shape[1]);
    require(w.W.rows() == shape[0] && w.W.cols() == shape[1], "weights json: shape header does not match W");
    return w;
}

inline json to_json(const ChoiceDataset& data)
{
    json j = to_json(data.markets);
    j["samples"] = json::array();
    for (const ChoiceSample& s : data.samples) {
        j["samples"].push_back(
            {{"market", s.market}, {"mask", to_json(s.mask)}, {"choices", s.choices}, {"propensity", s.propensity}, {"weight", s.weight}});
    }
    return j;
}

inline ChoiceDataset dataset_from_json(const json& j)
{
    ChoiceDataset data;
    data.markets = markets_from_json(j);
    for (const json& s : j.at("samples")) {
        ChoiceSample c;
        c.market = s.at("market").get<int>();
        c.mask = mask_from_json(s.at("mask"));
        c.choices = s.at("choices").get<std::vector<int>>();
        c.propensity = s.value("propensity", 0.0);
        c.weight = s.value("weight", 1.0);
        require(c.market >= 0 && c.market < static_cast<int>(data.markets.size()), "dataset json: market index out of range");
        data.samples.push_back(std::move(c));
    }
    return data;
}

inline json to_json(const LearnedMask& lm)
{
    json j;
    j["schema_version"] = schema_version;
    j["theta"] = to_json(lm.theta);
    j["feature_probabilities"] = to_json(lm.feature_probabilities());
    j["k"] = lm.k;
    j["learned_k"] = lm.learned_k;
    j["inverted"] = lm.inverted;
    j["log"] = {{"batch_objective", lm.log.batch_objective},
                {"eval_epochs", lm.log.eval_epochs},
                {"eval_objective", lm.log.eval_objective}};
    return j;
}

inline LearnedMask learned_mask_from_json(const json& j)
{
    LearnedMask lm;
    lm.theta = vector_from_json(j.at("theta"));
    lm.k = j.at("k").get<int>();
    lm.learned_k = j.at("learned_k").get<int>();
    lm.inverted = j.at("inverted").get<bool>();
    if (j.contains("log")) {
        lm.log.batch_objective = j["log"].value("batch_objective", std::vector<double>{});
        lm.log.eval_epochs = j["log"].value("eval_epochs", std::vector<int>{});
        lm.log.eval_objective = j["log"].value("eval_objective", std::vector<double>{});
    }
    return lm;
}

inline json to_json(const PricingSolution& s)
{
    return {{"assignment", s.item_of_user}, {"prices", to_json(s.prices)}, {"profits", to_json(s.profits)}, {"objective", s.objective}};
}

inline json to_json(const ConditionCheck& c) { return {{"holds", c.holds}, {"slack", c.slack}}; }

inline json to_json(const ConditionReport& r)
{
    return {{"margin", r.margin},
            {"condition_1", to_json(r.item_hidden_similarity)},
            {"condition_2", to_json(r.agent_hidden_indifference)},
            {"condition_3_top_item", to_json(r.top_item_consistency)},
            {"condition_3_price_variation", to_json(r.price_variation)},
            {"condition_4", to_json(r.small_hidden_features)},
            {"condition_5", to_json(r.agent_hidden_similarity)},
            {"pointing_consistency", r.pointing_consistency},
            {"pointing_consistency_all_items", r.pointing_consistency_all_items},
            {"hidden_value_inequality", r.hidden_value_inequality}};
}

inline json read_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error("invalid JSON in '" + path + "': " + e.what());
    }
}

inline void write_json_file(const std::string& path, const json& j)
{
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
}

}  // namespace decongest
