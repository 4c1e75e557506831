#pragma once

#include "decongest/adam.hpp"
#include "decongest/dataset.hpp"
#include "decongest/market.hpp"
#include "decongest/rng.hpp"

#include <cmath>
#include <cstdint>
#include <sstream>
#include <utility>
#include <vector>

namespace decongest {

/// Bilinear form W (d' x d): user i scores item j as u_i W (x_j * mu) - p_j.
struct PredictorWeights {
    Matrix W;
};

inline Matrix masked_item_features(const Market& market, const Vector& mask_weights)
{
    require(mask_weights.size() == market.num_features(), "mask dimension must equal item feature dimension");
    return market.item_features * mask_weights.asDiagonal();
}

/// n x (m + 1) scores; the last column is the null option, fixed at 0.
inline Matrix score_matrix(const PredictorWeights& w, const Market& market, const Vector& mask_weights)
{
    require(w.W.rows() == market.user_features.cols() && w.W.cols() == market.num_features(),
            "predictor: weight shape does not match market");
    const Eigen::Index m = market.num_items();
    Matrix s(market.user_features.rows(), m + 1);
    s.leftCols(m) = (market.user_features * w.W * masked_item_features(market, mask_weights).transpose()).rowwise() -
                    market.prices.transpose();
    s.col(m).setZero();
    return s;
}

/// Scores of one user, items first then the null option.
inline Vector scores(const PredictorWeights& w, const Market& market, const Mask& mask, Eigen::Index user)
{
    return score_matrix(w, market, mask.as_vector()).row(user).transpose();
}

/// Row-wise softmax(scores / tau_f).
inline Matrix predict_soft(const PredictorWeights& w, const Market& market, const Mask& mask, double tau_f)
{
    require(tau_f > 0.0, "predict_soft: temperature must be positive");
    const Matrix s = score_matrix(w, market, mask.as_vector());
    Matrix q(s.rows(), s.cols());
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        q.row(i) = ((s.row(i).array() - s.row(i).maxCoeff()) / tau_f).exp().matrix();
        q.row(i) /= q.row(i).sum();
    }
    return q;
}

/// Hard predictions with the same rule as the market's choice model:
/// best positive score, else no choice.
inline ChoiceProfile predict_choices(const PredictorWeights& w, const Market& market, const Mask& mask)
{
    const Matrix s = score_matrix(w, market, mask.as_vector());
    return choose_from_utilities(s.leftCols(market.num_items()));
}

struct PredictorConfig {
    double learning_rate = 1e-3;
    int epochs = 150;
    int batch_size = 20;  // user rows per step
    double tau_f = 5e-4;
    bool ipw = false;
    std::uint64_t seed = 0;
};

struct PredictorTraining {
    PredictorWeights weights;
    std::vector<double> epoch_loss;
};

inline PredictorWeights init_weights(Eigen::Index d_user, Eigen::Index d, std::uint64_t seed)
{
    Rng rng(seed);
    const double s = 1.0 / std::sqrt(static_cast<double>(d * d_user));
    PredictorWeights w;
    w.W.resize(d_user, d);
    for (Eigen::Index k = 0; k < w.W.size(); ++k) w.W(k) = rng.uniform(-s, s);
    return w;
}

namespace detail {

/// Cross-entropy of one user row and its gradient contribution to W.
inline double row_loss(const Matrix& w, const Market& mk, const Matrix& z, Eigen::Index i, int label, double tau,
                       double weight, Matrix* grad)
{
    const Eigen::Index m = mk.num_items();
    const RowVector u = mk.user_features.row(i);
    Vector logits(m + 1);
    logits.head(m) = (z * (w.transpose() * u.transpose())) - mk.prices;
    logits(m) = 0.0;
    logits /= tau;
    const double mx = logits.maxCoeff();
    Vector q = (logits.array() - mx).exp().matrix();
    const double zsum = q.sum();
    q /= zsum;
    const int cls = label == 0 ? static_cast<int>(m) : label - 1;
    const double loss = -(logits(cls) - mx - std::log(zsum));
    if (grad) {
        Vector g = q;
        g(cls) -= 1.0;
        g *= weight / tau;
        // d loss / d W = u^T (g_items^T Z)
        grad->noalias() += u.transpose() * (g.head(m).transpose() * z);
    }
    return weight * loss;
}

}  // namespace detail

/// Weighted mean cross-entropy over all user rows and its gradient.
inline double dataset_loss(const PredictorWeights& w, const ChoiceDataset& data, double tau_f, bool weighted,
                           Matrix* grad = nullptr)
{
    double total = 0.0;
    double rows = 0.0;
    if (grad) *grad = Matrix::Zero(w.W.rows(), w.W.cols());
    for (const ChoiceSample& s : data.samples) {
        const Market& mk = data.markets[s.market];
        const Matrix z = masked_item_features(mk, s.mask.as_vector());
        const double wt = weighted ? s.weight : 1.0;
        for (std::size_t i = 0; i < s.choices.size(); ++i) {
            total += detail::row_loss(w.W, mk, z, static_cast<Eigen::Index>(i), s.choices[i], tau_f, wt, grad);
            rows += 1.0;
        }
    }
    if (rows > 0.0) {
        total /= rows;
        if (grad) *grad /= rows;
    }
    return total;
}

/// Adam on the (optionally importance-weighted) cross-entropy of soft predictions.
inline PredictorTraining train_predictor(const ChoiceDataset& data, const PredictorConfig& cfg = {})
{
    require(!data.samples.empty(), "train_predictor: empty dataset");
    require(cfg.epochs >= 0 && cfg.batch_size > 0 && cfg.tau_f > 0.0, "train_predictor: invalid configuration");
    const Market& first = data.markets.at(data.samples.front().market);
    PredictorTraining out;
    out.weights = init_weights(first.user_features.cols(), first.num_features(), derive_seed(cfg.seed, "predictor-init"));
    Matrix& w = out.weights.W;
    Adam adam(w.rows(), w.cols(), AdamConfig{cfg.learning_rate});

    std::vector<Matrix> z(data.samples.size());
    std::vector<std::pair<int, int>> rows;  // (sample, user)
    for (std::size_t t = 0; t < data.samples.size(); ++t) {
        const ChoiceSample& s = data.samples[t];
        z[t] = masked_item_features(data.markets[s.market], s.mask.as_vector());
        for (std::size_t i = 0; i < s.choices.size(); ++i) rows.emplace_back(static_cast<int>(t), static_cast<int>(i));
    }
    require(!rows.empty(), "train_predictor: dataset has no user rows");

    Rng rng(derive_seed(cfg.seed, "predictor-batches"));
    Matrix grad(w.rows(), w.cols());
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(rows);
        double epoch_total = 0.0;
        for (std::size_t start = 0; start < rows.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(rows.size(), start + cfg.batch_size);
            grad.setZero();
            double batch_loss = 0.0;
            for (std::size_t r = start; r < end; ++r) {
                const ChoiceSample& s = data.samples[rows[r].first];
                const double wt = cfg.ipw ? s.weight : 1.0;
                batch_loss += detail::row_loss(w, data.markets[s.market], z[rows[r].first], rows[r].second,
                                               s.choices[rows[r].second], cfg.tau_f, wt, &grad);
            }
            const double count = static_cast<double>(end - start);
            if (!std::isfinite(batch_loss) || !grad.allFinite()) {
                std::ostringstream os;
                os << "train_predictor: non-finite loss at epoch " << epoch << ", rows " << start << ".." << end
                   << " (batch loss " << batch_loss << ", |W| " << w.norm() << ")";
                throw Error(os.str());
            }
            epoch_total += batch_loss;
            adam.step(w, grad / count);
        }
        out.epoch_loss.push_back(epoch_total / static_cast<double>(rows.size()));
    }
    return out;
}

/// Fraction of user rows whose hard prediction matches the observed choice.
inline double accuracy(const PredictorWeights& w, const ChoiceDataset& data)
{
    require(!data.samples.empty(), "accuracy: empty dataset");
    long hits = 0, total = 0;
    for (const ChoiceSample& s : data.samples) {
        const ChoiceProfile pred = predict_choices(w, data.markets[s.market], s.mask);
        for (std::size_t i = 0; i < s.choices.size(); ++i) {
            hits += pred.choices[i] == s.choices[i];
            ++total;
        }
    }
    require(total > 0, "accuracy: dataset has no user rows");
    return static_cast<double>(hits) / static_cast<double>(total);
}

/// Importance weights P_uniform(mask) / P_pi0(mask), normalized to mean 1.
/// Requires recorded propensities.
inline void set_uniform_target_weights(ChoiceDataset& data)
{
    double sum = 0.0;
    for (ChoiceSample& s : data.samples) {
        if (!(s.propensity > 0.0)) throw Error("importance weights: sample without a positive propensity");
        s.weight = 1.0 / s.propensity;
        sum += s.weight;
    }
    const double mean = sum / static_cast<double>(data.samples.size());
    for (ChoiceSample& s : data.samples) s.weight /= mean;
}

}  // namespace decongest
