#pragma once

#include "decongest/adam.hpp"
#include "decongest/autodiff.hpp"
#include "decongest/market.hpp"
#include "decongest/objectives.hpp"
#include "decongest/policy.hpp"
#include "decongest/predictor.hpp"
#include "decongest/rng.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace decongest {

struct LearnerConfig {
    int k = 1;
    double lambda = 0.5;
    bool no_choice_penalty = true;
    int N = 20;
    double tau_gumbel = 2.0;
    double tau_topk = 0.2;
    double tau_f = 0.01;
    double learning_rate = 1e-2;
    int epochs = 300;
    bool invert_when_k_large = true;
    int eval_draws = 64;
    int eval_every = 25;
    std::uint64_t seed = 0;

    void validate(int d) const
    {
        require(d > 0 && k >= 1 && k <= d, "learner: need 1 <= k <= d");
        require(lambda >= 0.0 && lambda <= 1.0, "learner: lambda must lie in [0, 1]");
        require(N >= 1, "learner: N must be at least 1");
        require(tau_gumbel > 0.0 && tau_topk > 0.0 && tau_f > 0.0, "learner: temperatures must be positive");
        require(epochs >= 0 && eval_draws >= 1, "learner: invalid epoch or evaluation counts");
    }

    /// Whether the learner works with inverted masks for this d.
    bool inverted(int d) const { return invert_when_k_large && 2 * k > d; }
    int learned_k(int d) const { return inverted(d) ? d - k : k; }
};

namespace detail {

/// Relaxed top-k on the tape. `noise` is a 1 x d row of standard Gumbel draws.
inline ad::Var relaxed_topk(const ad::Var& theta, const Matrix& noise, int k, double tau_gumbel, double tau_topk)
{
    ad::Tape& tape = *theta.tape();
    ad::Var keys = (1.0 / tau_gumbel) * (ad::log_softmax_rows(theta) + tape.constant(noise));
    ad::Var total = tape.constant(Matrix::Zero(1, theta.cols()));
    for (int t = 0; t < k; ++t) {
        ad::Var alpha = ad::softmax_rows(keys, tau_topk);
        total = total + alpha;
        if (t + 1 < k) keys = keys + ad::log1m(alpha);
    }
    return ad::clamp(total, 0.0, 1.0);
}

/// Per-market constants: U W, X^T, and p as a row.
struct LearnerMarket {
    Matrix uw;
    Matrix xt;
    Matrix price_row;
};

inline std::vector<LearnerMarket> prepare_markets(const std::vector<Market>& markets, const PredictorWeights& w)
{
    std::vector<LearnerMarket> out;
    out.reserve(markets.size());
    for (const Market& mk : markets) {
        require(w.W.rows() == mk.user_features.cols() && w.W.cols() == mk.num_features(),
                "learner: predictor shape does not match market");
        out.push_back(LearnerMarket{mk.user_features * w.W, mk.item_features.transpose(), mk.prices.transpose()});
    }
    return out;
}

/// Soft lambda-combined objective of one market under a soft mask.
inline ad::Var soft_market_objective(ad::Tape& tape, const ad::Var& soft, const LearnerMarket& mk, double lambda,
                                     bool penalty, double tau_f)
{
    const Eigen::Index n = mk.uw.rows();
    const Eigen::Index m = mk.xt.cols();
    ad::Var price = tape.constant(mk.price_row);
    ad::Var s = ad::sub_row(ad::matmul(ad::scale_columns(tape.constant(mk.uw), soft), tape.constant(mk.xt)), price);
    ad::Var q = ad::softmax_rows(ad::hcat(s, tape.constant(Matrix::Zero(n, 1))), tau_f);
    ad::Var ybar = ad::columns(q, 0, m);
    ad::Var selection = ad::sum(ad::scale_columns(ybar, price));
    ad::Var cost = ad::sum(ad::relu(ad::col_sum(ybar) - 1.0));
    if (penalty) cost = cost + ad::sum(ad::columns(q, m, 1));
    return (1.0 - lambda) * selection - lambda * cost;
}

inline Matrix gumbel_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed)
{
    Rng rng(seed);
    Matrix g(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) g(i, j) = rng.gumbel();
    return g;
}

}  // namespace detail

/// One relaxed k-subset from softmax(theta) with the given Gumbel noise (1 x d).
inline Vector sample_relaxed_mask(const Vector& theta, int k, double tau_gumbel, double tau_topk, const Matrix& noise)
{
    require(k >= 0 && k <= theta.size(), "sample_relaxed_mask: k out of range");
    require(noise.rows() == 1 && noise.cols() == theta.size(), "sample_relaxed_mask: noise must be 1 x d");
    ad::Tape tape;
    ad::Var th = tape.constant(theta.transpose());
    if (k == 0) return Vector::Zero(theta.size());
    return detail::relaxed_topk(th, noise, k, tau_gumbel, tau_topk).value().row(0).transpose();
}

inline Vector sample_relaxed_mask(const Vector& theta, int k, double tau_gumbel, double tau_topk, std::uint64_t seed)
{
    return sample_relaxed_mask(theta, k, tau_gumbel, tau_topk, detail::gumbel_matrix(1, theta.size(), seed));
}

struct SoftProxyValue {
    double value = 0.0;
    Vector gradient;  // d value / d theta
};

/// Mean soft objective over the noise rows (one relaxed mask each) and all
/// markets, with its exact gradient at fixed noise.
inline SoftProxyValue soft_proxy(const Vector& theta, const std::vector<Market>& markets, const PredictorWeights& w,
                                 const LearnerConfig& cfg, const Matrix& noise, bool with_gradient = true)
{
    const int d = static_cast<int>(theta.size());
    cfg.validate(d);
    require(!markets.empty(), "soft_proxy: no markets");
    require(noise.cols() == d && noise.rows() >= 1, "soft_proxy: noise must be N x d");
    const std::vector<detail::LearnerMarket> prepared = detail::prepare_markets(markets, w);
    const int kk = cfg.learned_k(d);
    const bool inv = cfg.inverted(d);

    ad::Tape tape;
    ad::Var th = with_gradient ? tape.parameter(theta.transpose()) : tape.constant(theta.transpose());
    ad::Var total = tape.constant(Matrix::Zero(1, 1));
    for (Eigen::Index r = 0; r < noise.rows(); ++r) {
        ad::Var soft = detail::relaxed_topk(th, noise.row(r), kk, cfg.tau_gumbel, cfg.tau_topk);
        if (inv) soft = (-1.0) * soft + 1.0;
        for (const detail::LearnerMarket& mk : prepared)
            total = total + detail::soft_market_objective(tape, soft, mk, cfg.lambda, cfg.no_choice_penalty, cfg.tau_f);
    }
    const double count = static_cast<double>(noise.rows()) * static_cast<double>(prepared.size());
    ad::Var objective = (1.0 / count) * total;
    SoftProxyValue out;
    out.value = objective.scalar();
    if (!std::isfinite(out.value)) throw Error("soft_proxy: non-finite objective");
    if (with_gradient) {
        tape.backward(objective);
        out.gradient = th.grad().row(0).transpose();
    }
    return out;
}

struct LearnerLog {
    std::vector<double> batch_objective;  // per epoch, before the update
    std::vector<int> eval_epochs;
    std::vector<double> eval_objective;   // fixed held-out noise set
};

struct LearnedMask {
    Vector theta;
    int k = 0;
    int learned_k = 0;
    bool inverted = false;
    LearnerLog log;

    Vector feature_probabilities() const { return decongest::feature_probabilities(theta); }
};

/// Adam ascent on the soft proxy. Fresh Gumbel noise each epoch; the N masks
/// are shared by all markets in a step.
inline LearnedMask fit_mask(const std::vector<Market>& markets, const PredictorWeights& w, const LearnerConfig& cfg)
{
    require(!markets.empty(), "fit_mask: empty market list");
    const int d = static_cast<int>(markets.front().num_features());
    cfg.validate(d);
    LearnedMask out;
    out.k = cfg.k;
    out.learned_k = cfg.learned_k(d);
    out.inverted = cfg.inverted(d);
    out.theta = Vector::Zero(d);
    const Matrix eval_noise = detail::gumbel_matrix(cfg.eval_draws, d, derive_seed(cfg.seed, "eval-noise"));
    auto evaluate = [&](int epoch) {
        out.log.eval_epochs.push_back(epoch);
        out.log.eval_objective.push_back(soft_proxy(out.theta, markets, w, cfg, eval_noise, false).value);
    };

    Adam adam(d, 1, AdamConfig{cfg.learning_rate});
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.eval_every > 0 && epoch % cfg.eval_every == 0) evaluate(epoch);
        const Matrix noise = detail::gumbel_matrix(cfg.N, d, derive_seed(cfg.seed, "train-noise", epoch));
        const SoftProxyValue v = soft_proxy(out.theta, markets, w, cfg, noise, true);
        out.log.batch_objective.push_back(v.value);
        Matrix th = out.theta;
        adam.step(th, -v.gradient);
        out.theta = th.col(0);
    }
    evaluate(cfg.epochs);
    return out;
}

/// Hard mask from the learned distribution: k largest theta entries, or the
/// complement of the largest d - k when learning was inverted.
inline Mask learned_topk(const LearnedMask& lm)
{
    const Mask m = topk_mask(lm.theta, lm.learned_k);
    return lm.inverted ? m.inverted() : m;
}

inline Mask sample_learned(const LearnedMask& lm, Rng& rng)
{
    const Mask m = sample_mask(lm.feature_probabilities(), lm.learned_k, rng);
    return lm.inverted ? m.inverted() : m;
}

/// Mean hard proxy over markets with choices predicted by the frozen model.
inline double predicted_proxy(const std::vector<Market>& markets, const PredictorWeights& w, const Mask& mask,
                              double lambda, bool penalty)
{
    require(!markets.empty(), "predicted_proxy: no markets");
    double total = 0.0;
    for (const Market& mk : markets)
        total += proxy_welfare(predict_choices(w, mk, mask), mk.prices, lambda, penalty).combined;
    return total / static_cast<double>(markets.size());
}

enum class DeployMode { topk, committed_sample, policy };

inline std::string to_string(DeployMode m)
{
    switch (m) {
    case DeployMode::topk: return "topk";
    case DeployMode::committed_sample: return "committed_sample";
    case DeployMode::policy: return "policy";
    }
    return "unknown";
}

struct DeployReport {
    DeployMode mode = DeployMode::topk;
    std::vector<Mask> masks;
    std::vector<double> welfare;  // mean test welfare per mask
    double mean_welfare = 0.0;
};

struct DeployOptions {
    int committed_draws = 20;
    int policy_draws = 50;
    std::uint64_t seed = 0;
    Imputation mode = Imputation::zero;
};

/// Turns a learned distribution into deployed mask(s) and reports true welfare
/// on the evaluation markets. The committed variant selects by predicted proxy
/// on the training markets.
inline DeployReport deploy(const LearnedMask& lm, DeployMode mode, const std::vector<Market>& train_markets,
                           const std::vector<Market>& eval_markets, const PredictorWeights& w, const LearnerConfig& cfg,
                           const DeployOptions& opt = {})
{
    DeployReport rep;
    rep.mode = mode;
    Rng rng(derive_seed(opt.seed, to_string(mode)));
    switch (mode) {
    case DeployMode::topk:
        rep.masks.push_back(learned_topk(lm));
        break;
    case DeployMode::committed_sample: {
        require(!train_markets.empty(), "deploy: committed sampling needs training markets");
        double best = -std::numeric_limits<double>::infinity();
        Mask chosen;
        for (int t = 0; t < opt.committed_draws; ++t) {
            const Mask m = sample_learned(lm, rng);
            const double v = predicted_proxy(train_markets, w, m, cfg.lambda, cfg.no_choice_penalty);
            if (v > best) {
                best = v;
                chosen = m;
            }
        }
        rep.masks.push_back(chosen);
        break;
    }
    case DeployMode::policy:
        for (int t = 0; t < opt.policy_draws; ++t) rep.masks.push_back(sample_learned(lm, rng));
        break;
    }
    double total = 0.0;
    for (const Mask& m : rep.masks) {
        rep.welfare.push_back(mean_mask_welfare(eval_markets, m, opt.mode));
        total += rep.welfare.back();
    }
    rep.mean_welfare = total / static_cast<double>(rep.masks.size());
    return rep;
}

}  // namespace decongest
