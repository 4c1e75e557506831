// decongest: command-line front end to the library.

#include "decongest/experiments.hpp"
#include "decongest/theory.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

using namespace decongest;

namespace {

void emit(const json& j, const std::string& path)
{
    if (path.empty() || path == "-") std::cout << j.dump(2) << '\n';
    else write_json_file(path, j);
}

Matrix read_matrix_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw Error(path + ":" + std::to_string(line_no) + ": '" + cell + "' is not a number");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw Error(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(rows.front().size()) + " columns");
        rows.push_back(std::move(row));
    }
    require(!rows.empty(), path + ": no rows");
    Matrix a(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) a(i, j) = rows[i][j];
    return a;
}

Mask parse_mask(const std::string& bits)
{
    std::vector<int> out;
    for (char ch : bits) {
        require(ch == '0' || ch == '1', "mask must be a string of 0/1 characters");
        out.push_back(ch - '0');
    }
    return Mask(out);
}

std::vector<Market> load_markets(const std::string& path) { return markets_from_json(read_json_file(path)); }

json pricing_json(const Matrix& v, const std::string& which)
{
    if (which == "buyer") return to_json(buyer_optimal_prices(v));
    if (which == "seller") return to_json(seller_optimal_prices(v));
    if (which == "mid") {
        const CorePrices core = core_prices(v);
        return {{"assignment", core.matching.item_of_user}, {"prices", to_json(core.mid)}, {"objective", core.matching.objective}};
    }
    require(which == "all", "--which must be buyer, seller, mid or all");
    const CorePrices core = core_prices(v);
    return {{"assignment", core.matching.item_of_user},
            {"objective", core.matching.objective},
            {"buyer", to_json(core.buyer)},
            {"seller", to_json(core.seller)},
            {"mid", to_json(core.mid)}};
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Decongestion by representation: markets, prices, masks and experiments"};
    app.require_subcommand(0, 1);
    std::uint64_t seed = 0;
    int jobs = 1;
    bool print_schema = false;
    app.add_option("--seed", seed, "Master seed")->capture_default_str();
    app.add_option("--jobs", jobs, "Worker threads for experiments")->check(CLI::PositiveNumber);
    app.add_flag("--print-config-schema", print_schema, "Print the experiment config keys and defaults");

    // gen-synthetic
    auto* gen = app.add_subcommand("gen-synthetic", "Write synthetic ratings in user<TAB>item<TAB>rating<TAB>time format");
    SyntheticRatingsSpec rspec;
    std::string gen_out;
    gen->add_option("--users", rspec.users)->capture_default_str();
    gen->add_option("--items", rspec.items)->capture_default_str();
    gen->add_option("--rank", rspec.rank)->capture_default_str();
    gen->add_option("--density", rspec.density)->capture_default_str();
    gen->add_option("--noise", rspec.noise)->capture_default_str();
    gen->add_option("-o,--output", gen_out)->required();

    // ingest-ratings
    auto* ingest = app.add_subcommand("ingest-ratings", "Validate a ratings file and report its shape");
    std::string ingest_in;
    ingest->add_option("-i,--input", ingest_in)->required();

    // factorize
    auto* fact = app.add_subcommand("factorize", "Two-stage NMF of a ratings file into a market pool");
    std::string fact_in, fact_out;
    FactorizeOptions fopt;
    fact->add_option("-i,--input", fact_in)->required();
    fact->add_option("-o,--output", fact_out)->required();
    fact->add_option("--d", fopt.d, "Item feature dimension")->capture_default_str();
    fact->add_option("--d-user", fopt.d_user, "User feature dimension (0: d/2)")->capture_default_str();
    fact->add_option("--iterations", fopt.iterations)->capture_default_str();

    // make-markets
    auto* mk = app.add_subcommand("make-markets", "Sample markets from a pool, or build synthetic mixture markets");
    std::string mk_pool, mk_out, mk_scheme = "ce_mid";
    MarketSampling shape{20, 20, 10};
    MixtureSpec mix;
    double mk_gamma = 0.5, mk_noise = 0.0, mk_weight = 0.0;
    int mk_count = 1;
    mk->add_option("--pool", mk_pool, "Pool JSON from factorize; omit for mixture markets");
    mk->add_option("-o,--output", mk_out)->required();
    mk->add_option("--m", shape.m, "Items per market")->capture_default_str();
    mk->add_option("--n", shape.n, "Users per market")->capture_default_str();
    mk->add_option("--L", shape.L, "Number of markets (pool mode)")->capture_default_str();
    mk->add_option("--scheme", mk_scheme, "ce_mid, ce_interpolated, ce_noisy_values, ce_noisy_prices, heuristic_avg_value, interpolate_to_heuristic")
        ->capture_default_str();
    mk->add_option("--gamma", mk_gamma)->capture_default_str();
    mk->add_option("--noise", mk_noise)->capture_default_str();
    mk->add_option("--weight", mk_weight)->capture_default_str();
    mk->add_option("--d", mix.d, "Feature dimension (mixture mode)")->capture_default_str();
    mk->add_option("--alpha", mix.alpha, "Homogeneity weight (mixture mode)")->capture_default_str();
    mk->add_option("--rho", mix.rho, "Value dispersion power (mixture mode)")->capture_default_str();
    mk->add_option("--count", mk_count, "Number of mixture markets")->capture_default_str();

    // price
    auto* price = app.add_subcommand("price", "Optimal assignment and CE prices for a value matrix (CSV in, JSON out)");
    std::string price_in, price_out, which = "all";
    price->add_option("-i,--input", price_in, "CSV value matrix, one user per row")->required();
    price->add_option("-o,--output", price_out);
    price->add_option("--which", which, "buyer, seller, mid or all")->capture_default_str();

    // train-predictor
    auto* tp = app.add_subcommand("train-predictor", "Log choices under a default policy and fit the choice model");
    std::string tp_markets, tp_out, tp_default, tp_data_out;
    int tp_k = 6;
    PredictorConfig pcfg;
    bool tp_uniform = false;
    tp->add_option("--markets", tp_markets)->required();
    tp->add_option("-o,--output", tp_out)->required();
    tp->add_option("--k", tp_k)->capture_default_str();
    tp->add_option("--default-mask", tp_default, "0/1 string; default: top-k price-predictive features");
    tp->add_flag("--uniform-masks", tp_uniform, "Log under uniformly random masks instead");
    tp->add_option("--epochs", pcfg.epochs)->capture_default_str();
    tp->add_option("--learning-rate", pcfg.learning_rate)->capture_default_str();
    tp->add_option("--batch-size", pcfg.batch_size)->capture_default_str();
    tp->add_option("--tau", pcfg.tau_f)->capture_default_str();
    tp->add_option("--dataset-output", tp_data_out, "Also write the logged dataset");

    // learn-mask
    auto* lmc = app.add_subcommand("learn-mask", "Fit a mask distribution with the differentiable proxy");
    std::string lm_markets, lm_weights, lm_out;
    LearnerConfig lcfg;
    lcfg.k = 6;
    double lm_lambda = -1.0;
    lmc->add_option("--markets", lm_markets)->required();
    lmc->add_option("--weights", lm_weights)->required();
    lmc->add_option("-o,--output", lm_out)->required();
    lmc->add_option("--k", lcfg.k)->capture_default_str();
    lmc->add_option("--lambda", lm_lambda, "Proxy weight; negative means 1 - k/(2d)")->capture_default_str();
    lmc->add_option("--epochs", lcfg.epochs)->capture_default_str();
    lmc->add_option("--learning-rate", lcfg.learning_rate)->capture_default_str();
    lmc->add_option("--N", lcfg.N, "Relaxed masks per step")->capture_default_str();

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "True welfare of a mask or a learned mask distribution on markets");
    std::string ev_markets, ev_mask, ev_learned, ev_mode = "topk", ev_train, ev_weights, ev_imp = "zero";
    int ev_draws = 50;
    ev->add_option("--markets", ev_markets)->required();
    ev->add_option("--mask", ev_mask, "0/1 string");
    ev->add_option("--learned", ev_learned, "Learned mask JSON");
    ev->add_option("--mode", ev_mode, "topk, committed_sample or policy")->capture_default_str();
    ev->add_option("--train-markets", ev_train, "Markets for committed-sample selection");
    ev->add_option("--weights", ev_weights, "Predictor weights for committed-sample selection");
    ev->add_option("--draws", ev_draws)->capture_default_str();
    ev->add_option("--imputation", ev_imp, "zero or mean")->capture_default_str();

    // sweep-masks
    auto* sw = app.add_subcommand("sweep-masks", "Enumerate every k-mask of one market (CSV)");
    std::string sw_markets, sw_out;
    int sw_index = 0, sw_k = 6;
    double sw_cap = 1e6;
    sw->add_option("--markets", sw_markets)->required();
    sw->add_option("--index", sw_index)->capture_default_str();
    sw->add_option("--k", sw_k)->capture_default_str();
    sw->add_option("--cap", sw_cap, "Maximum number of masks")->capture_default_str();
    sw->add_option("-o,--output", sw_out);

    // theory-check
    auto* th = app.add_subcommand("theory-check", "Margin, Conditions 1-5 and restricted optimality for a mask");
    std::string th_markets, th_mask;
    int th_index = 0;
    th->add_option("--markets", th_markets)->required();
    th->add_option("--mask", th_mask)->required();
    th->add_option("--index", th_index)->capture_default_str();

    // experiment
    auto* ex = app.add_subcommand("experiment", "Run fig3, fig4, prices or lambda and write CSV tables");
    std::string ex_kind, ex_config, ex_out;
    ex->add_option("kind", ex_kind, "fig3 | fig4 | prices | lambda")->required()->check(CLI::IsMember({"fig3", "fig4", "prices", "lambda"}));
    ex->add_option("--config", ex_config, "JSON config (see --print-config-schema)");
    ex->add_option("--output-dir", ex_out);

    // verify
    auto* ver = app.add_subcommand("verify", "Re-run sampled rows of a results table and compare");
    std::string ver_config, ver_table;
    int ver_samples = 5;
    ver->add_option("--config", ver_config, "Config used for the run (run.json or a config file)")->required();
    ver->add_option("--table", ver_table, "results.csv")->required();
    ver->add_option("--samples", ver_samples, "Rows to check (0: all)")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (print_schema) {
            std::cout << config_schema();
            return 0;
        }
        if (*gen) {
            rspec.seed = seed;
            std::ofstream out(gen_out);
            if (!out) throw Error("cannot write '" + gen_out + "'");
            const RatingSet r = generate_ratings(rspec);
            write_ratings(out, r);
            std::cerr << "wrote " << r.entries.size() << " ratings (" << r.num_users() << " users, " << r.num_items() << " items)\n";
        } else if (*ingest) {
            const RatingSet r = ingest_ratings(ingest_in);
            emit({{"ratings", r.entries.size()}, {"users", r.num_users()}, {"items", r.num_items()},
                  {"density", static_cast<double>(r.entries.size()) / (static_cast<double>(r.num_users()) * r.num_items())}},
                 "-");
        } else if (*fact) {
            fopt.seed = seed;
            const FactorizedPool pool = factorize(ingest_ratings(fact_in), fopt);
            write_json_file(fact_out, to_json(pool));
        } else if (*mk) {
            PriceScheme scheme;
            scheme.kind = price_scheme_kind(mk_scheme);
            scheme.gamma = mk_gamma;
            scheme.noise = mk_noise;
            scheme.weight = mk_weight;
            scheme.seed = derive_seed(seed, "cli-price-noise");
            std::vector<Market> markets;
            if (!mk_pool.empty()) {
                markets = sample_markets(pool_from_json(read_json_file(mk_pool)), shape, scheme, seed);
            } else {
                mix.n = shape.n;
                mix.m = shape.m;
                const Pricer pricer = [scheme](const Matrix& v) { return apply_scheme(v, scheme); };
                for (int l = 0; l < mk_count; ++l) {
                    mix.seed = derive_seed(seed, "cli-mixture", static_cast<std::uint64_t>(l));
                    markets.push_back(make_mixture_market(mix, pricer));
                }
            }
            write_json_file(mk_out, to_json(markets));
        } else if (*price) {
            emit(pricing_json(read_matrix_csv(price_in), which), price_out);
        } else if (*tp) {
            const std::vector<Market> markets = load_markets(tp_markets);
            const int d = static_cast<int>(markets.front().num_features());
            ChoiceDataset data;
            if (tp_uniform) {
                data = sample_uniform_dataset(markets, tp_k, derive_seed(seed, "cli-uniform-data"));
            } else {
                const Mask mu0 = tp_default.empty() ? price_pred_mask(markets.front().item_features, mean_item_prices(markets), tp_k)
                                                    : parse_mask(tp_default);
                require(static_cast<int>(mu0.dim()) == d, "default mask length must equal the feature dimension");
                data = sample_dataset(markets, default_policy(mu0), mu0.cardinality(), derive_seed(seed, "cli-pi0-data"));
            }
            pcfg.seed = derive_seed(seed, "cli-predictor");
            const PredictorTraining tr = train_predictor(data, pcfg);
            json j = to_json(tr.weights);
            j["training_loss"] = tr.epoch_loss;
            j["accuracy"] = accuracy(tr.weights, data);
            write_json_file(tp_out, j);
            if (!tp_data_out.empty()) write_json_file(tp_data_out, to_json(data));
            std::cerr << "final loss " << tr.epoch_loss.back() << ", training accuracy " << j["accuracy"].get<double>() << '\n';
        } else if (*lmc) {
            const std::vector<Market> markets = load_markets(lm_markets);
            const PredictorWeights w = weights_from_json(read_json_file(lm_weights));
            const int d = static_cast<int>(markets.front().num_features());
            lcfg.lambda = lm_lambda < 0 ? default_lambda(lcfg.k, d) : lm_lambda;
            lcfg.seed = derive_seed(seed, "cli-learner");
            const LearnedMask lm = fit_mask(markets, w, lcfg);
            json j = to_json(lm);
            j["topk_mask"] = learned_topk(lm).to_string();
            j["lambda"] = lcfg.lambda;
            write_json_file(lm_out, j);
            std::cerr << "top-k mask " << learned_topk(lm).to_string() << '\n';
        } else if (*ev) {
            const std::vector<Market> markets = load_markets(ev_markets);
            const Imputation mode = imputation_from_string(ev_imp);
            std::vector<Mask> masks;
            if (!ev_mask.empty()) {
                masks.push_back(parse_mask(ev_mask));
            } else {
                require(!ev_learned.empty(), "evaluate needs --mask or --learned");
                const LearnedMask lm = learned_mask_from_json(read_json_file(ev_learned));
                Rng rng(derive_seed(seed, "cli-evaluate"));
                if (ev_mode == "topk") {
                    masks.push_back(learned_topk(lm));
                } else if (ev_mode == "policy") {
                    for (int t = 0; t < ev_draws; ++t) masks.push_back(sample_learned(lm, rng));
                } else {
                    require(ev_mode == "committed_sample", "--mode must be topk, committed_sample or policy");
                    require(!ev_train.empty() && !ev_weights.empty(), "committed_sample needs --train-markets and --weights");
                    LearnerConfig cfg;
                    cfg.k = lm.k;
                    DeployOptions opt;
                    opt.committed_draws = ev_draws;
                    opt.seed = derive_seed(seed, "cli-deploy");
                    opt.mode = mode;
                    masks = deploy(lm, DeployMode::committed_sample, load_markets(ev_train), markets,
                                   weights_from_json(read_json_file(ev_weights)), cfg, opt)
                                .masks;
                }
            }
            std::vector<double> w;
            for (const Mask& m : masks) w.push_back(mean_mask_welfare(markets, m, mode));
            const Summary s = summarize(w);
            json j{{"welfare", s.mean}, {"std_over_masks", s.std}, {"masks", json::array()}};
            for (const Mask& m : masks) j["masks"].push_back(m.to_string());
            emit(j, "-");
        } else if (*sw) {
            const std::vector<Market> markets = load_markets(sw_markets);
            require(sw_index >= 0 && sw_index < static_cast<int>(markets.size()), "--index out of range");
            const Market& m = markets[sw_index];
            SweepOptions opt;
            opt.cap = sw_cap;
            opt.distortion = opt.kendalls_w = true;
            const MaskSweepResult res = sweep(m, sw_k, all_objectives(default_lambda(sw_k, static_cast<int>(m.num_features())), true), opt);
            if (sw_out.empty()) {
                write_sweep_csv(std::cout, res);
            } else {
                std::ofstream out(sw_out);
                write_sweep_csv(out, res);
            }
        } else if (*th) {
            const std::vector<Market> markets = load_markets(th_markets);
            require(th_index >= 0 && th_index < static_cast<int>(markets.size()), "--index out of range");
            const Market& m = markets[th_index];
            const Mask mask = parse_mask(th_mask);
            const DeterministicAllocation a = admissible_allocation(choose(m, mask));
            const double delta = margin(m, mask, a);
            json j = to_json(check_conditions(m, mask, a, delta));
            j["allocation"] = a.item_of_user;
            j["restricted_optimal"] = restricted_optimal(m, a);
            emit(j, "-");
        } else if (*ex) {
            ExperimentConfig c = ex_config.empty() ? ExperimentConfig{} : config_from_json(read_json_file(ex_config));
            c.experiment = ex_kind;
            if (app.count("--seed")) c.seed = seed;
            if (app.count("--jobs")) c.jobs = jobs;
            if (!ex_out.empty()) c.output_dir = ex_out;
            c.validate();
            const ExperimentResult res = run_experiment(c);
            const auto dir = write_experiment(c, res);
            std::cerr << "wrote " << res.tables.size() << " tables to " << dir.string() << " in " << res.runtime_seconds << " s (config "
                      << res.config_hash << ")\n";
        } else if (*ver) {
            json cj = read_json_file(ver_config);
            if (cj.contains("config") && cj.contains("config_hash")) cj = cj["config"];
            ExperimentConfig c = config_from_json(cj);
            std::ifstream in(ver_table);
            if (!in) throw Error("cannot open '" + ver_table + "'");
            const VerifyReport rep = verify_table(c, Table::read_csv(in), ver_samples, derive_seed(seed, "cli-verify"));
            for (const std::string& m : rep.mismatches) std::cerr << "mismatch: " << m << '\n';
            std::cout << (rep.ok() ? "verified " : "FAILED ") << rep.checked << " rows\n";
            return rep.ok() ? 0 : 1;
        } else {
            std::cout << app.help();
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
