#pragma once

#include "decongest/baselines.hpp"
#include "decongest/dataset.hpp"
#include "decongest/mask_learner.hpp"
#include "decongest/nmf.hpp"
#include "decongest/oracle_enum.hpp"
#include "decongest/predictor.hpp"
#include "decongest/ratings.hpp"
#include "decongest/serialize.hpp"
#include "decongest/stats.hpp"
#include "decongest/synthetic.hpp"
#include "decongest/table.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace decongest {

struct Fig3Config {
    int n = 8;
    int m = 8;
    int d = 14;
    int k = 6;
    int instances = 10;
    std::vector<double> alphas{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    std::vector<double> rhos{1.0, 0.8, 0.6, 0.4, 0.2};
    double rho_alpha = 0.2;
    double correlation_alpha = 0.2;
    double proxy_lambda = -1.0;  // < 0: 1 - k / (2d)
    bool proxy_penalty = true;
};

struct PoolConfig {
    std::string ratings_path;  // empty: synthetic ratings
    SyntheticRatingsSpec synthetic{943, 1682, 8, 0.063, 0.5, 0};
    int d = 12;
    int d_user = 0;
    int nmf_iterations = 500;
};

struct ExperimentConfig {
    std::string experiment = "fig3";  // fig3 | fig4 | prices | lambda
    std::uint64_t seed = 0;
    std::string output_dir;          // empty: $DECONGEST_OUTPUT_DIR or ./results
    int jobs = 1;
    Imputation imputation = Imputation::zero;

    Fig3Config fig3;

    PoolConfig pool;
    MarketSampling markets{20, 20, 240};
    int sample_sets = 6;
    int folds = 6;
    int folds_used = 0;  // 0: all folds
    std::vector<int> k_values{2, 4, 6, 8, 10};
    PredictorConfig predictor;
    LearnerConfig learner;
    double lambda = -1.0;  // < 0: 1 - k / (2d)
    int random_draws = 100;
    int committed_draws = 20;
    int policy_draws = 50;
    double oracle_cap = 1e4;
    bool uniform_accuracy = true;

    int robustness_k = 6;
    std::vector<double> gammas{0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<double> noises{0.0, 0.05, 0.1, 0.2};
    std::vector<double> lambdas{0.0, 0.25, 0.5, 0.75, 1.0};

    void validate() const
    {
        require(experiment == "fig3" || experiment == "fig4" || experiment == "prices" || experiment == "lambda",
                "config: experiment must be one of fig3, fig4, prices, lambda");
        require(jobs >= 1, "config: jobs must be at least 1");
        require(fig3.k >= 1 && fig3.k <= fig3.d && fig3.instances >= 1, "config: fig3 needs 1 <= k <= d and instances >= 1");
        require(pool.d >= 1, "config: pool.d must be positive");
        for (int k : k_values) require(k >= 1 && k <= pool.d, "config: every k must satisfy 1 <= k <= d");
        require(robustness_k >= 1 && robustness_k <= pool.d, "config: robustness_k must satisfy 1 <= k <= d");
        require(sample_sets >= 1 && folds >= 2 && folds <= markets.L, "config: need sample_sets >= 1 and 2 <= folds <= L");
        require(folds_used >= 0 && folds_used <= folds, "config: folds_used must lie in [0, folds]");
        require(lambda <= 1.0, "config: lambda must be <= 1");
        if (!pool.ratings_path.empty())
            require(std::filesystem::exists(pool.ratings_path), "config: ratings file '" + pool.ratings_path + "' does not exist");
    }
};

inline json to_json(const ExperimentConfig& c)
{
    json j;
    j["experiment"] = c.experiment;
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    j["jobs"] = c.jobs;
    j["imputation"] = to_string(c.imputation);
    j["fig3"] = {{"n", c.fig3.n}, {"m", c.fig3.m}, {"d", c.fig3.d}, {"k", c.fig3.k}, {"instances", c.fig3.instances},
                 {"alphas", c.fig3.alphas}, {"rhos", c.fig3.rhos}, {"rho_alpha", c.fig3.rho_alpha},
                 {"correlation_alpha", c.fig3.correlation_alpha}, {"proxy_lambda", c.fig3.proxy_lambda},
                 {"proxy_penalty", c.fig3.proxy_penalty}};
    j["pool"] = {{"ratings_path", c.pool.ratings_path},
                 {"synthetic",
                  {{"users", c.pool.synthetic.users}, {"items", c.pool.synthetic.items}, {"rank", c.pool.synthetic.rank},
                   {"density", c.pool.synthetic.density}, {"noise", c.pool.synthetic.noise}}},
                 {"d", c.pool.d}, {"d_user", c.pool.d_user}, {"nmf_iterations", c.pool.nmf_iterations}};
    j["markets"] = {{"m", c.markets.m}, {"n", c.markets.n}, {"L", c.markets.L}};
    j["sample_sets"] = c.sample_sets;
    j["folds"] = c.folds;
    j["folds_used"] = c.folds_used;
    j["k_values"] = c.k_values;
    j["predictor"] = {{"learning_rate", c.predictor.learning_rate}, {"epochs", c.predictor.epochs},
                      {"batch_size", c.predictor.batch_size}, {"tau_f", c.predictor.tau_f}, {"ipw", c.predictor.ipw}};
    j["learner"] = {{"N", c.learner.N}, {"tau_gumbel", c.learner.tau_gumbel}, {"tau_topk", c.learner.tau_topk},
                    {"tau_f", c.learner.tau_f}, {"learning_rate", c.learner.learning_rate}, {"epochs", c.learner.epochs},
                    {"invert_when_k_large", c.learner.invert_when_k_large}, {"no_choice_penalty", c.learner.no_choice_penalty},
                    {"eval_draws", c.learner.eval_draws}, {"eval_every", c.learner.eval_every}};
    j["lambda"] = c.lambda;
    j["random_draws"] = c.random_draws;
    j["committed_draws"] = c.committed_draws;
    j["policy_draws"] = c.policy_draws;
    j["oracle_cap"] = c.oracle_cap;
    j["uniform_accuracy"] = c.uniform_accuracy;
    j["robustness_k"] = c.robustness_k;
    j["gammas"] = c.gammas;
    j["noises"] = c.noises;
    j["lambdas"] = c.lambdas;
    return j;
}

namespace detail {

template <typename T>
void read_key(const json& j, const char* key, T& out)
{
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw Error(std::string("config: bad value for '") + key + "': " + e.what());
    }
}

inline void reject_unknown(const json& j, const json& reference, const std::string& where)
{
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!reference.contains(it.key())) throw Error("config: unknown key '" + where + it.key() + "'");
}

}  // namespace detail

/// Reads a config, starting from defaults; unknown keys are rejected.
inline ExperimentConfig config_from_json(const json& j)
{
    ExperimentConfig c;
    const json ref = to_json(c);
    require(j.is_object(), "config: top level must be an object");
    detail::reject_unknown(j, ref, "");
    using detail::read_key;
    read_key(j, "experiment", c.experiment);
    read_key(j, "seed", c.seed);
    read_key(j, "output_dir", c.output_dir);
    read_key(j, "jobs", c.jobs);
    if (j.contains("imputation")) c.imputation = imputation_from_string(j["imputation"].get<std::string>());
    if (j.contains("fig3")) {
        const json& f = j["fig3"];
        detail::reject_unknown(f, ref["fig3"], "fig3.");
        read_key(f, "n", c.fig3.n);
        read_key(f, "m", c.fig3.m);
        read_key(f, "d", c.fig3.d);
        read_key(f, "k", c.fig3.k);
        read_key(f, "instances", c.fig3.instances);
        read_key(f, "alphas", c.fig3.alphas);
        read_key(f, "rhos", c.fig3.rhos);
        read_key(f, "rho_alpha", c.fig3.rho_alpha);
        read_key(f, "correlation_alpha", c.fig3.correlation_alpha);
        read_key(f, "proxy_lambda", c.fig3.proxy_lambda);
        read_key(f, "proxy_penalty", c.fig3.proxy_penalty);
    }
    if (j.contains("pool")) {
        const json& p = j["pool"];
        detail::reject_unknown(p, ref["pool"], "pool.");
        read_key(p, "ratings_path", c.pool.ratings_path);
        read_key(p, "d", c.pool.d);
        read_key(p, "d_user", c.pool.d_user);
        read_key(p, "nmf_iterations", c.pool.nmf_iterations);
        if (p.contains("synthetic")) {
            const json& s = p["synthetic"];
            detail::reject_unknown(s, ref["pool"]["synthetic"], "pool.synthetic.");
            read_key(s, "users", c.pool.synthetic.users);
            read_key(s, "items", c.pool.synthetic.items);
            read_key(s, "rank", c.pool.synthetic.rank);
            read_key(s, "density", c.pool.synthetic.density);
            read_key(s, "noise", c.pool.synthetic.noise);
        }
    }
    if (j.contains("markets")) {
        const json& m = j["markets"];
        detail::reject_unknown(m, ref["markets"], "markets.");
        read_key(m, "m", c.markets.m);
        read_key(m, "n", c.markets.n);
        read_key(m, "L", c.markets.L);
    }
    read_key(j, "sample_sets", c.sample_sets);
    read_key(j, "folds", c.folds);
    read_key(j, "folds_used", c.folds_used);
    read_key(j, "k_values", c.k_values);
    if (j.contains("predictor")) {
        const json& p = j["predictor"];
        detail::reject_unknown(p, ref["predictor"], "predictor.");
        read_key(p, "learning_rate", c.predictor.learning_rate);
        read_key(p, "epochs", c.predictor.epochs);
        read_key(p, "batch_size", c.predictor.batch_size);
        read_key(p, "tau_f", c.predictor.tau_f);
        read_key(p, "ipw", c.predictor.ipw);
    }
    if (j.contains("learner")) {
        const json& l = j["learner"];
        detail::reject_unknown(l, ref["learner"], "learner.");
        read_key(l, "N", c.learner.N);
        read_key(l, "tau_gumbel", c.learner.tau_gumbel);
        read_key(l, "tau_topk", c.learner.tau_topk);
        read_key(l, "tau_f", c.learner.tau_f);
        read_key(l, "learning_rate", c.learner.learning_rate);
        read_key(l, "epochs", c.learner.epochs);
        read_key(l, "invert_when_k_large", c.learner.invert_when_k_large);
        read_key(l, "no_choice_penalty", c.learner.no_choice_penalty);
        read_key(l, "eval_draws", c.learner.eval_draws);
        read_key(l, "eval_every", c.learner.eval_every);
    }
    read_key(j, "lambda", c.lambda);
    read_key(j, "random_draws", c.random_draws);
    read_key(j, "committed_draws", c.committed_draws);
    read_key(j, "policy_draws", c.policy_draws);
    read_key(j, "oracle_cap", c.oracle_cap);
    read_key(j, "uniform_accuracy", c.uniform_accuracy);
    read_key(j, "robustness_k", c.robustness_k);
    read_key(j, "gammas", c.gammas);
    read_key(j, "noises", c.noises);
    read_key(j, "lambdas", c.lambdas);
    c.validate();
    return c;
}

/// Human-readable list of every config key with its default.
inline std::string config_schema()
{
    std::ostringstream os;
    os << "Experiment config: a JSON object. Every key is optional; defaults shown.\n"
       << "  experiment      fig3 | fig4 | prices | lambda\n"
       << "  seed            master seed; every task seed is derived from it\n"
       << "  output_dir      output root (else $DECONGEST_OUTPUT_DIR, else ./results)\n"
       << "  jobs            worker threads\n"
       << "  imputation      zero | mean (masked features read as 0 or as the item mean)\n"
       << "  fig3.*          synthetic mixture-market enumeration study\n"
       << "  pool.*          ratings source and factorization (empty ratings_path: synthetic ratings)\n"
       << "  markets.*       items m, users n, market count L per sample set\n"
       << "  sample_sets, folds, folds_used, k_values\n"
       << "  predictor.*     choice model training\n"
       << "  learner.*       mask learner (k and lambda come from the experiment)\n"
       << "  lambda          proxy weight; negative means 1 - k / (2d)\n"
       << "  random_draws, committed_draws, policy_draws, oracle_cap, uniform_accuracy\n"
       << "  robustness_k, gammas, noises   price robustness grids\n"
       << "  lambdas         lambda sweep grid\n\n"
       << "Defaults:\n"
       << to_json(ExperimentConfig{}).dump(2) << '\n';
    return os.str();
}

inline std::string config_hash(const ExperimentConfig& c)
{
    json j = to_json(c);
    // Execution details do not change results.
    j.erase("jobs");
    j.erase("output_dir");
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(j.dump());
    return os.str();
}

inline std::filesystem::path output_root(const ExperimentConfig& c)
{
    if (!c.output_dir.empty()) return c.output_dir;
    if (const char* env = std::getenv("DECONGEST_OUTPUT_DIR"); env && *env) return env;
    return "results";
}

inline const std::vector<std::string>& result_columns()
{
    static const std::vector<std::string> cols{
        "experiment", "task", "method", "k", "alpha", "rho", "gamma", "epsilon", "lambda", "instance", "sample_set", "fold",
        "welfare", "welfare_min", "welfare_max", "argmax_size", "allocated_items", "congestion", "distortion", "kendalls_w",
        "accuracy", "mask", "master_seed", "config_hash"};
    return cols;
}

inline const std::vector<std::string>& summary_columns()
{
    static const std::vector<std::string> cols{
        "experiment", "method", "k", "gamma", "epsilon", "lambda", "replicates", "mean", "std", "se", "ci95",
        "random_mean", "relative_to_random", "master_seed", "config_hash"};
    return cols;
}

/// Rows per table name produced by one task.
using TaskOutput = std::map<std::string, std::vector<Row>>;

struct Task {
    std::string id;
    std::function<TaskOutput()> run;
};

struct Plan {
    std::vector<Task> tasks;
    std::map<std::string, std::vector<std::string>> tables;  // name -> columns
};

struct ExperimentResult {
    std::map<std::string, Table> tables;
    double runtime_seconds = 0.0;
    std::string config_hash;
};

namespace detail {

inline double nan() { return std::numeric_limits<double>::quiet_NaN(); }

inline Row base_row(const std::string& experiment, const std::string& task, const std::string& method)
{
    return Row{{"experiment", experiment}, {"task", task}, {"method", method}};
}

inline double fig3_lambda(const Fig3Config& f) { return f.proxy_lambda < 0.0 ? default_lambda(f.k, f.d) : f.proxy_lambda; }

inline MixtureSpec fig3_spec(const ExperimentConfig& c, int instance, double alpha, double rho)
{
    MixtureSpec s;
    s.n = c.fig3.n;
    s.m = c.fig3.m;
    s.d = c.fig3.d;
    s.alpha = alpha;
    s.rho = rho;
    s.seed = derive_seed(c.seed, "fig3-instance", static_cast<std::uint64_t>(instance));
    return s;
}

/// One market: sweep every k-mask and report each objective's argmax welfare.
inline TaskOutput fig3_sweep_task(const ExperimentConfig& c, const std::string& id, int instance, double alpha, double rho,
                                  bool correlations)
{
    const Market market = make_mixture_market(fig3_spec(c, instance, alpha, rho));
    SweepOptions opt;
    opt.mode = c.imputation;
    opt.distortion = correlations;
    opt.kendalls_w = correlations;
    const std::vector<Objective> objectives = all_objectives(fig3_lambda(c.fig3), c.fig3.proxy_penalty);
    const MaskSweepResult res = sweep(market, c.fig3.k, objectives, opt);
    TaskOutput out;
    for (std::size_t o = 0; o < objectives.size(); ++o) {
        const auto aw = res.argmax_welfare(o);
        const MaskRecord& rep = res.records[res.argmax[o].front()];
        Row r = base_row("fig3", id, objectives[o].name());
        r["k"] = static_cast<long long>(c.fig3.k);
        r["alpha"] = alpha;
        r["rho"] = rho;
        if (objectives[o].kind == ObjectiveKind::proxy) r["lambda"] = objectives[o].lambda;
        r["instance"] = static_cast<long long>(instance);
        r["welfare"] = aw.mean;
        r["welfare_min"] = aw.min;
        r["welfare_max"] = aw.max;
        r["argmax_size"] = static_cast<long long>(aw.size);
        r["allocated_items"] = static_cast<double>(rep.allocated);
        r["congestion"] = rep.congestion;
        r["kendalls_w"] = kendalls_w(true_values(market));
        r["mask"] = rep.mask.to_string();
        out["results"].push_back(std::move(r));
    }
    if (correlations) {
        std::vector<double> w, dist, kw, uc;
        for (const MaskRecord& rec : res.records) {
            w.push_back(rec.welfare);
            dist.push_back(rec.distortion);
            kw.push_back(rec.kendalls_w);
            uc.push_back(rec.utility_concordance);
            out["masks"].push_back(Row{{"task", id}, {"instance", static_cast<long long>(instance)}, {"alpha", alpha},
                                       {"mask", rec.mask.to_string()}, {"welfare", rec.welfare},
                                       {"distortion", rec.distortion}, {"kendalls_w", rec.kendalls_w},
                                       {"utility_concordance", rec.utility_concordance}, {"congestion", rec.congestion}});
        }
        out["correlations"].push_back(Row{{"task", id}, {"instance", static_cast<long long>(instance)}, {"alpha", alpha},
                                          {"spearman_distortion", spearman(w, dist)},
                                          {"spearman_kendalls_w", spearman(w, kw)}, {"spearman_utility_concordance", spearman(w, uc)},
                                          {"masks", static_cast<long long>(w.size())}});
    }
    return out;
}

inline std::string fmt_param(double x)
{
    return format_cell(Cell{x});
}

}  // namespace detail

inline Plan plan_fig3(const ExperimentConfig& c)
{
    Plan p;
    p.tables["results"] = result_columns();
    p.tables["masks"] = {"task", "instance", "alpha", "mask", "welfare", "distortion", "kendalls_w", "utility_concordance", "congestion",
                         "master_seed", "config_hash"};
    p.tables["correlations"] = {"task", "instance", "alpha", "spearman_distortion", "spearman_kendalls_w",
                                "spearman_utility_concordance", "masks",
                                "master_seed", "config_hash"};
    for (int inst = 0; inst < c.fig3.instances; ++inst) {
        for (double a : c.fig3.alphas) {
            const bool corr = a == c.fig3.correlation_alpha;
            const std::string id = "fig3/alpha/" + std::to_string(inst) + "/" + detail::fmt_param(a);
            p.tasks.push_back({id, [c, id, inst, a, corr] { return detail::fig3_sweep_task(c, id, inst, a, 1.0, corr); }});
        }
        for (double rho : c.fig3.rhos) {
            const std::string id = "fig3/rho/" + std::to_string(inst) + "/" + detail::fmt_param(rho);
            const double a = c.fig3.rho_alpha;
            p.tasks.push_back({id, [c, id, inst, a, rho] { return detail::fig3_sweep_task(c, id, inst, a, rho, false); }});
        }
    }
    return p;
}

/// Ratings (file or synthetic) factorized into the market pool.
inline FactorizedPool build_pool(const ExperimentConfig& c)
{
    RatingSet ratings;
    if (c.pool.ratings_path.empty()) {
        SyntheticRatingsSpec spec = c.pool.synthetic;
        spec.seed = derive_seed(c.seed, "ratings");
        ratings = generate_ratings(spec);
    } else {
        ratings = ingest_ratings(c.pool.ratings_path);
    }
    FactorizeOptions fo;
    fo.d = c.pool.d;
    fo.d_user = c.pool.d_user;
    fo.iterations = c.pool.nmf_iterations;
    fo.seed = derive_seed(c.seed, "factorize");
    return factorize(ratings, fo);
}

/// Shared inputs of the learning experiments.
struct LearningInputs {
    FactorizedPool pool;
};

struct ReplicateSpec {
    int sample_set = 0;
    int fold = 0;
    int k = 0;
    PriceScheme scheme;
    double lambda = -1.0;  // < 0: default
    std::string experiment;
    double gamma = detail::nan();
    double epsilon = detail::nan();
};

struct MaskStats {
    double welfare = 0.0;
    double allocated = 0.0;
    double congestion = 0.0;
};

inline MaskStats mask_stats(const std::vector<Market>& markets, const Mask& mask, Imputation mode)
{
    MaskStats s;
    for (const Market& mk : markets) {
        const ValueView view = perceived_values(mk, mask, mode);
        const ChoiceProfile y = choose_from_values(view.perceived, mk.prices);
        s.welfare += expected_welfare(y, view.true_values);
        s.allocated += allocated_items(y);
        s.congestion += congestion_count(y);
    }
    const double n = static_cast<double>(markets.size());
    s.welfare /= n;
    s.allocated /= n;
    s.congestion /= n;
    return s;
}

/// Train / test markets of one (sample set, fold) under a price scheme. Seeds
/// do not depend on the scheme, so schemes differ only in prices.
inline std::pair<std::vector<Market>, std::vector<Market>> replicate_markets(const ExperimentConfig& c,
                                                                            const FactorizedPool& pool,
                                                                            const ReplicateSpec& r)
{
    PriceScheme scheme = r.scheme;
    scheme.seed = derive_seed(c.seed, "price-noise", static_cast<std::uint64_t>(r.sample_set));
    const std::vector<Market> markets =
        sample_markets(pool, c.markets, scheme, derive_seed(c.seed, "sample-set", static_cast<std::uint64_t>(r.sample_set)));
    const auto folds = make_folds(c.markets.L, c.folds, derive_seed(c.seed, "folds", static_cast<std::uint64_t>(r.sample_set)));
    const std::vector<int>& test = folds.at(r.fold);
    return {subset(markets, complement(c.markets.L, test)), subset(markets, test)};
}

/// Full learning pipeline on one replicate: logged data under the default
/// policy, predictor, mask learner, deployment variants and baselines.
inline TaskOutput learning_replicate(const ExperimentConfig& c, const FactorizedPool& pool, const ReplicateSpec& r,
                                     const std::string& id, bool baselines)
{
    const auto [train, test] = replicate_markets(c, pool, r);
    const int d = c.pool.d;
    const int k = r.k;
    const std::uint64_t rseed =
        derive_seed(c.seed, "replicate", static_cast<std::uint64_t>((r.sample_set * 1009 + r.fold) * 1009 + k));
    const double lambda = r.lambda < 0.0 ? default_lambda(k, d) : r.lambda;

    const Mask mu0 = price_pred_mask(train.front().item_features, mean_item_prices(train), k);
    const DefaultPolicy pi0 = default_policy(mu0);
    const ChoiceDataset data = sample_dataset(train, pi0, k, derive_seed(rseed, "pi0-data"), DatasetOptions{1, 0, c.imputation});
    PredictorConfig pc = c.predictor;
    pc.seed = derive_seed(rseed, "predictor");
    const PredictorTraining trained = train_predictor(data, pc);
    const PredictorWeights& w = trained.weights;

    LearnerConfig lc = c.learner;
    lc.k = k;
    lc.lambda = lambda;
    lc.seed = derive_seed(rseed, "learner");
    const LearnedMask lm = fit_mask(train, w, lc);

    TaskOutput out;
    auto emit = [&](const std::string& method, const std::vector<Mask>& masks, double accuracy_value = detail::nan()) {
        Row row = detail::base_row(r.experiment, id, method);
        row["k"] = static_cast<long long>(k);
        row["gamma"] = r.gamma;
        row["epsilon"] = r.epsilon;
        row["lambda"] = lambda;
        row["sample_set"] = static_cast<long long>(r.sample_set);
        row["fold"] = static_cast<long long>(r.fold);
        if (!masks.empty()) {
            MaskStats total;
            for (const Mask& m : masks) {
                const MaskStats s = mask_stats(test, m, c.imputation);
                total.welfare += s.welfare;
                total.allocated += s.allocated;
                total.congestion += s.congestion;
            }
            const double n = static_cast<double>(masks.size());
            row["welfare"] = total.welfare / n;
            row["allocated_items"] = total.allocated / n;
            row["congestion"] = total.congestion / n;
            if (masks.size() == 1) row["mask"] = masks.front().to_string();
        }
        row["accuracy"] = accuracy_value;
        out["results"].push_back(std::move(row));
    };

    DeployOptions dopt;
    dopt.committed_draws = c.committed_draws;
    dopt.policy_draws = c.policy_draws;
    dopt.seed = derive_seed(rseed, "deploy");
    dopt.mode = c.imputation;
    emit("dbr_topk", {learned_topk(lm)});
    emit("dbr_committed", deploy(lm, DeployMode::committed_sample, train, test, w, lc, dopt).masks);
    emit("dbr_policy", deploy(lm, DeployMode::policy, train, test, w, lc, dopt).masks);

    // The random baseline is always reported: relative welfare is normalized by it.
    {
        Rng rng(derive_seed(rseed, "random-baseline"));
        std::vector<Mask> masks;
        for (int t = 0; t < c.random_draws; ++t) masks.push_back(uniform_mask(d, k, rng));
        emit("random", masks);
    }
    if (baselines) {
        emit("price_pred", {mu0});
        Matrix users(0, train.front().user_features.cols());
        for (const Market& mk : train) {
            Matrix grown(users.rows() + mk.user_features.rows(), users.cols());
            grown << users, mk.user_features;
            users = std::move(grown);
        }
        emit("choice_pred", {choice_pred_mask(w, users, k)});
        if (binomial(d, k) <= c.oracle_cap) {
            double best = -std::numeric_limits<double>::infinity();
            Mask best_mask;
            for_each_mask(d, k, [&](const Mask& m) {
                const double v = mean_mask_welfare(test, m, c.imputation);
                if (v > best) {
                    best = v;
                    best_mask = m;
                }
            });
            emit("oracle", {best_mask});
        }
        emit("predictor", {}, accuracy(w, data));
        if (c.uniform_accuracy)
            emit("predictor_uniform_masks", {}, accuracy(w, sample_uniform_dataset(test, k, derive_seed(rseed, "uniform-eval"), c.imputation)));
    }
    return out;
}

inline std::vector<std::pair<int, int>> replicate_grid(const ExperimentConfig& c)
{
    std::vector<std::pair<int, int>> out;
    const int folds = c.folds_used > 0 ? c.folds_used : c.folds;
    for (int s = 0; s < c.sample_sets; ++s)
        for (int f = 0; f < folds; ++f) out.emplace_back(s, f);
    return out;
}

inline std::string replicate_id(const std::string& exp, const std::string& param, int s, int f, int k)
{
    return exp + "/" + param + "/" + std::to_string(s) + "/" + std::to_string(f) + "/" + std::to_string(k);
}

inline Plan plan_learning(const ExperimentConfig& c)
{
    Plan p;
    p.tables["results"] = result_columns();
    auto pool = std::make_shared<FactorizedPool>(build_pool(c));
    auto add = [&](const std::string& id, ReplicateSpec spec, bool baselines) {
        p.tasks.push_back({id, [c, pool, spec, id, baselines] { return learning_replicate(c, *pool, spec, id, baselines); }});
    };
    for (const auto& [s, f] : replicate_grid(c)) {
        if (c.experiment == "fig4") {
            for (int k : c.k_values) {
                ReplicateSpec spec{s, f, k, PriceScheme::mid(), c.lambda, "fig4"};
                add(replicate_id("fig4", "main", s, f, k), spec, true);
            }
        } else if (c.experiment == "prices") {
            const int k = c.robustness_k;
            for (double g : c.gammas) {
                ReplicateSpec spec{s, f, k, PriceScheme::interpolated(g), c.lambda, "prices"};
                spec.gamma = g;
                spec.epsilon = 0.0;
                add(replicate_id("prices", "gamma=" + detail::fmt_param(g), s, f, k), spec, false);
            }
            for (double e : c.noises) {
                ReplicateSpec spec{s, f, k, PriceScheme::noisy_prices(e, 0), c.lambda, "prices"};
                spec.gamma = 0.5;
                spec.epsilon = e;
                add(replicate_id("prices", "epsilon=" + detail::fmt_param(e), s, f, k), spec, false);
            }
        } else {
            const int k = c.robustness_k;
            std::vector<double> grid = c.lambdas;
            const double def = default_lambda(k, c.pool.d);
            if (std::find(grid.begin(), grid.end(), def) == grid.end()) grid.push_back(def);
            for (double l : grid) {
                ReplicateSpec spec{s, f, k, PriceScheme::mid(), l, "lambda"};
                add(replicate_id("lambda", "lambda=" + detail::fmt_param(l), s, f, k), spec, false);
            }
        }
    }
    return p;
}

inline Plan plan_experiment(const ExperimentConfig& c)
{
    c.validate();
    return c.experiment == "fig3" ? plan_fig3(c) : plan_learning(c);
}

/// Runs tasks on `jobs` threads; outputs are stored by task index so the
/// merged tables do not depend on scheduling.
inline std::vector<TaskOutput> run_tasks(const std::vector<Task>& tasks, int jobs)
{
    std::vector<TaskOutput> outputs(tasks.size());
    std::vector<std::exception_ptr> errors(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t t = next++; t < tasks.size(); t = next++) {
            try {
                outputs[t] = tasks[t].run();
            } catch (...) {
                errors[t] = std::current_exception();
            }
        }
    };
    const int n = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
    if (n == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        if (errors[t]) {
            try {
                std::rethrow_exception(errors[t]);
            } catch (const std::exception& e) {
                throw Error("task " + tasks[t].id + " failed: " + e.what());
            }
        }
    }
    return outputs;
}

/// Mean, standard error and random-relative welfare per method and setting.
inline Table summarize_learning(const Table& results, const std::string& experiment, const std::string& seed,
                                const std::string& hash)
{
    Table out(summary_columns());
    using Key = std::tuple<std::string, std::string, std::string, std::string, std::string>;  // method k gamma eps lambda
    std::map<Key, std::vector<double>> groups;
    std::vector<Key> order;
    for (std::size_t r = 0; r < results.size(); ++r) {
        if (results.at(r, "welfare").empty()) continue;
        Key key{results.at(r, "method"), results.at(r, "k"), results.at(r, "gamma"), results.at(r, "epsilon"),
                results.at(r, "lambda")};
        auto [it, fresh] = groups.try_emplace(key);
        if (fresh) order.push_back(key);
        it->second.push_back(results.number(r, "welfare"));
    }
    for (const Key& key : order) {
        const auto& [method, k, gamma, eps, lambda] = key;
        const Summary s = summarize(groups[key]);
        Row row{{"experiment", experiment}, {"method", method}, {"k", k}, {"gamma", gamma}, {"epsilon", eps},
                {"lambda", lambda}, {"replicates", static_cast<long long>(s.count)}, {"mean", s.mean},
                {"std", s.std}, {"se", s.se}, {"ci95", s.ci95}, {"master_seed", seed}, {"config_hash", hash}};
        const Key rkey{"random", k, gamma, eps, lambda};
        if (auto it = groups.find(rkey); it != groups.end()) {
            const double rm = summarize(it->second).mean;
            row["random_mean"] = rm;
            row["relative_to_random"] = rm != 0.0 ? s.mean / rm : detail::nan();
        }
        out.add(row);
    }
    return out;
}

/// Plans, runs and merges an experiment; tables are not written to disk.
inline ExperimentResult run_experiment(const ExperimentConfig& c)
{
    const auto start = std::chrono::steady_clock::now();
    const Plan plan = plan_experiment(c);
    const std::vector<TaskOutput> outputs = run_tasks(plan.tasks, c.jobs);
    ExperimentResult res;
    res.config_hash = config_hash(c);
    const std::string seed = std::to_string(c.seed);
    for (const auto& [name, cols] : plan.tables) res.tables.emplace(name, Table(cols));
    for (const TaskOutput& out : outputs) {
        for (const auto& [name, rows] : out) {
            Table& t = res.tables.at(name);
            for (Row row : rows) {
                row["master_seed"] = seed;
                row["config_hash"] = res.config_hash;
                t.add(row);
            }
        }
    }
    if (c.experiment != "fig3") res.tables.emplace("summary", summarize_learning(res.tables.at("results"), c.experiment, seed, res.config_hash));
    res.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
}

inline ExperimentResult run_fig3(ExperimentConfig c)
{
    c.experiment = "fig3";
    return run_experiment(c);
}

inline ExperimentResult run_fig4(ExperimentConfig c)
{
    c.experiment = "fig4";
    return run_experiment(c);
}

inline ExperimentResult run_price_robustness(ExperimentConfig c)
{
    c.experiment = "prices";
    return run_experiment(c);
}

inline ExperimentResult run_lambda_sweep(ExperimentConfig c)
{
    c.experiment = "lambda";
    return run_experiment(c);
}

/// Writes <root>/<experiment>/<table>.csv plus run.json (config, hash, runtime).
inline std::filesystem::path write_experiment(const ExperimentConfig& c, const ExperimentResult& res)
{
    const std::filesystem::path dir = output_root(c) / c.experiment;
    std::filesystem::create_directories(dir);
    json meta;
    meta["config"] = to_json(c);
    meta["config_hash"] = res.config_hash;
    meta["master_seed"] = c.seed;
    meta["runtime_seconds"] = res.runtime_seconds;
    meta["tables"] = json::array();
    for (const auto& [name, table] : res.tables) {
        std::ofstream out(dir / (name + ".csv"));
        if (!out) throw Error("cannot write " + (dir / (name + ".csv")).string());
        table.write_csv(out);
        meta["tables"].push_back(name + ".csv");
    }
    write_json_file((dir / "run.json").string(), meta);
    return dir;
}

struct VerifyReport {
    std::size_t checked = 0;
    std::vector<std::string> mismatches;
    bool ok() const { return checked > 0 && mismatches.empty(); }
};

/// Re-runs the tasks behind `samples` seeded row picks of a results table (all
/// rows when samples <= 0) and compares every cell of the regenerated rows.
inline VerifyReport verify_table(const ExperimentConfig& c, const Table& table, int samples, std::uint64_t pick_seed)
{
    require(table.size() > 0, "verify: empty table");
    require(table.has_column("task") && table.has_column("config_hash"), "verify: table lacks task/config_hash columns");
    const std::string hash = config_hash(c);
    VerifyReport rep;
    const Plan plan = plan_experiment(c);
    Rng rng(pick_seed);
    const bool all_rows = samples <= 0;
    const std::size_t picks = all_rows ? table.size() : static_cast<std::size_t>(samples);
    std::map<std::string, TaskOutput> cache;
    for (std::size_t s = 0; s < picks; ++s) {
        const std::size_t r = all_rows ? s : rng.index(table.size());
        if (table.at(r, "config_hash") != hash) {
            rep.mismatches.push_back("row " + std::to_string(r) + ": config hash " + table.at(r, "config_hash") +
                                     " does not match the supplied config (" + hash + ")");
            continue;
        }
        const std::string& id = table.at(r, "task");
        const auto it = std::find_if(plan.tasks.begin(), plan.tasks.end(), [&](const Task& t) { return t.id == id; });
        if (it == plan.tasks.end()) {
            rep.mismatches.push_back("row " + std::to_string(r) + ": task " + id + " is not part of this config");
            continue;
        }
        auto cached = cache.find(id);
        if (cached == cache.end()) cached = cache.emplace(id, it->run()).first;
        TaskOutput& out = cached->second;
        // Locate the regenerated row: same table shape, same task, same position among the task's rows.
        std::size_t position = 0;
        for (std::size_t q = 0; q < r; ++q)
            if (table.at(q, "task") == id) ++position;
        std::string table_name;
        for (const auto& [name, cols] : plan.tables)
            if (cols == table.columns()) table_name = name;
        if (!table_name.empty() && (!out.count(table_name) || out.at(table_name).size() <= position)) table_name.clear();
        if (table_name.empty()) {
            rep.mismatches.push_back("row " + std::to_string(r) + ": task output has no matching table");
            continue;
        }
        Row regenerated = out[table_name][position];
        regenerated["master_seed"] = std::to_string(c.seed);
        regenerated["config_hash"] = hash;
        Table probe(table.columns());
        probe.add(regenerated);
        ++rep.checked;
        for (const std::string& col : table.columns()) {
            if (probe.at(0, col) != table.at(r, col))
                rep.mismatches.push_back("row " + std::to_string(r) + " column " + col + ": stored '" + table.at(r, col) +
                                         "' vs recomputed '" + probe.at(0, col) + "'");
        }
    }
    return rep;
}

}  // namespace decongest
