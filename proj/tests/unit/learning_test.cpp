#include "decongest/mask_learner.hpp"
#include "decongest/predictor.hpp"

#include "../support/oracles.hpp"

#include <gtest/gtest.h>

using namespace decongest;

namespace {

// Markets whose users follow a linear model B = U W*, so a predictor can fit them.
std::vector<Market> linear_markets(int count, int n, int m, int d, int dp, Matrix& w_true, std::uint64_t seed)
{
    Rng rng(seed);
    w_true = oracle::uniform_matrix(dp, d, rng, 0.0, 1.0);
    std::vector<Market> out;
    for (int l = 0; l < count; ++l) {
        Market mk;
        mk.item_features = oracle::uniform_matrix(m, d, rng);
        mk.user_features = oracle::uniform_matrix(n, dp, rng);
        Matrix b = mk.user_features * w_true;
        const double top = (b * mk.item_features.transpose()).maxCoeff();
        mk.user_features /= top;
        mk.preferences = b / top;
        mk.prices = mid_prices(true_values(mk));
        out.push_back(mk);
    }
    return out;
}

}  // namespace

TEST(Predictor, LossMatchesDirectCrossEntropy)
{
    Matrix wt;
    const auto mks = linear_markets(2, 4, 3, 5, 2, wt, 1);
    const ChoiceDataset data = sample_uniform_dataset(mks, 2, 3);
    Rng rng(2);
    PredictorWeights w{oracle::uniform_matrix(2, 5, rng, -1, 1)};
    const double tau = 0.3;
    double direct = 0.0;
    int rows = 0;
    for (const ChoiceSample& s : data.samples) {
        const Matrix q = predict_soft(w, mks[s.market], s.mask, tau);
        for (std::size_t i = 0; i < s.choices.size(); ++i) {
            const int col = s.choices[i] > 0 ? s.choices[i] - 1 : static_cast<int>(q.cols()) - 1;
            direct -= std::log(q(i, col));
            ++rows;
        }
    }
    EXPECT_NEAR(dataset_loss(w, data, tau, false), direct / rows, 1e-10);
}

TEST(Predictor, GradientMatchesFiniteDifferences)
{
    Matrix wt;
    const auto mks = linear_markets(3, 5, 4, 6, 3, wt, 3);
    const ChoiceDataset data = sample_uniform_dataset(mks, 3, 4);
    Rng rng(5);
    PredictorWeights w{oracle::uniform_matrix(3, 6, rng, -1, 1)};
    Matrix g;
    dataset_loss(w, data, 0.2, false, &g);
    Vector flat = Eigen::Map<const Vector>(w.W.data(), w.W.size());
    const Vector fd = oracle::finite_difference(
        [&](const Vector& v) {
            PredictorWeights p{Eigen::Map<const Matrix>(v.data(), 3, 6)};
            return dataset_loss(p, data, 0.2, false);
        },
        flat, 1e-6);
    const Vector an = Eigen::Map<const Vector>(g.data(), g.size());
    EXPECT_LT((an - fd).norm(), 1e-6 * std::max(1.0, fd.norm()));
}

TEST(Predictor, TrainingLearnsLinearChoices)
{
    Matrix wt;
    const auto mks = linear_markets(40, 10, 6, 6, 3, wt, 7);
    const ChoiceDataset data = sample_uniform_dataset(mks, 3, 8);
    PredictorConfig cfg;
    cfg.learning_rate = 1e-2;
    cfg.epochs = 200;
    cfg.tau_f = 0.01;
    const PredictorTraining tr = train_predictor(data, cfg);
    EXPECT_LT(tr.epoch_loss.back(), tr.epoch_loss.front());
    const double acc = accuracy(tr.weights, data);
    EXPECT_GT(acc, 3.0 / 7.0);  // well above chance among m + 1 options
}

TEST(Predictor, ShapeMismatchIsReported)
{
    Matrix wt;
    const auto mks = linear_markets(1, 3, 3, 4, 2, wt, 9);
    PredictorWeights w{Matrix::Zero(3, 4)};
    EXPECT_THROW(predict_soft(w, mks[0], Mask::full(4), 0.1), Error);
}

TEST(Predictor, ImportanceWeightsNormalizeToMeanOne)
{
    Matrix wt;
    const auto mks = linear_markets(5, 3, 3, 5, 2, wt, 10);
    ChoiceDataset data = sample_dataset(mks, default_policy(Mask::from_indices(5, {0, 1})), 2, 4, DatasetOptions{2, 2000});
    set_uniform_target_weights(data);
    double mean = 0.0;
    for (const auto& s : data.samples) {
        EXPECT_GT(s.propensity, 0.0);
        mean += s.weight;
    }
    EXPECT_NEAR(mean / data.samples.size(), 1.0, 1e-12);
}

TEST(RelaxedTopk, SumsToKAndSharpensTowardHardTopk)
{
    Rng rng(11);
    Vector theta(8);
    for (int l = 0; l < 8; ++l) theta(l) = rng.uniform(-2, 2);
    const Matrix noise = detail::gumbel_matrix(1, 8, 4);
    const Vector soft = sample_relaxed_mask(theta, 3, 1.0, 1e-3, noise);
    EXPECT_NEAR(soft.sum(), 3.0, 1e-6);
    EXPECT_GE(soft.minCoeff(), 0.0);
    EXPECT_LE(soft.maxCoeff(), 1.0);
    // At low temperature the relaxation is the top-k of the perturbed keys.
    const Vector keys = (theta.array() - std::log(theta.array().exp().sum())).matrix() + noise.row(0).transpose();
    const Mask hard = topk_mask(keys, 3);
    for (int l = 0; l < 8; ++l) EXPECT_NEAR(soft(l), hard[l], 1e-3);
}

TEST(Learner, InversionForLargeK)
{
    LearnerConfig cfg;
    cfg.k = 9;
    EXPECT_TRUE(cfg.inverted(12));
    EXPECT_EQ(cfg.learned_k(12), 3);
    cfg.invert_when_k_large = false;
    EXPECT_FALSE(cfg.inverted(12));
    cfg.k = 13;
    EXPECT_THROW(cfg.validate(12), Error);
}

TEST(Learner, SoftProxyGradientMatchesFiniteDifferences)
{
    Matrix wt;
    auto mks = linear_markets(2, 4, 3, 6, 2, wt, 12);
    PredictorWeights w{wt};
    for (int k : {2, 4}) {
        LearnerConfig cfg;
        cfg.k = k;
        cfg.tau_f = 0.2;
        cfg.N = 2;
        const Matrix noise = detail::gumbel_matrix(2, 6, 99);
        Vector theta = Vector::LinSpaced(6, -0.5, 0.5);
        const Vector g = soft_proxy(theta, mks, w, cfg, noise).gradient;
        const Vector fd = oracle::finite_difference([&](const Vector& t) { return soft_proxy(t, mks, w, cfg, noise, false).value; }, theta, 1e-5);
        EXPECT_LT((g - fd).norm(), 1e-5 * std::max(g.norm(), fd.norm()));
    }
}

TEST(Learner, FitImprovesEvaluationObjectiveAndDeploys)
{
    Matrix wt;
    const auto mks = linear_markets(8, 8, 6, 8, 3, wt, 13);
    PredictorWeights w{wt};
    LearnerConfig cfg;
    cfg.k = 3;
    cfg.epochs = 60;
    cfg.N = 4;
    cfg.eval_draws = 8;
    cfg.eval_every = 20;
    const LearnedMask lm = fit_mask(mks, w, cfg);
    ASSERT_GE(lm.log.eval_objective.size(), 2u);
    EXPECT_GE(lm.log.eval_objective.back(), lm.log.eval_objective.front());
    EXPECT_EQ(learned_topk(lm).cardinality(), 3);
    DeployOptions opt;
    opt.committed_draws = 4;
    opt.policy_draws = 5;
    for (DeployMode mode : {DeployMode::topk, DeployMode::committed_sample, DeployMode::policy}) {
        const DeployReport rep = deploy(lm, mode, mks, mks, w, cfg, opt);
        for (const Mask& m : rep.masks) EXPECT_EQ(m.cardinality(), 3);
        EXPECT_TRUE(std::isfinite(rep.mean_welfare));
    }
}
