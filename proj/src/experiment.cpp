#include "epic/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "epic/baselines.hpp"
#include "epic/epic.hpp"
#include "epic/mathx.hpp"
#include "epic/rng.hpp"

namespace epic {

using nlohmann::json;

const std::vector<std::string> kKnownMethods{
    "reg_split", "weighted",     "mondrian",     "cqr",
    "cqr_r",     "epic_gp",      "epic_mdn",     "epic_bart",
    "epic_knn",  "aps_split",    "epic_aps_knn", "epic_aps_dropout"};

namespace {

bool is_classification_method(const std::string& name) {
    return name == "aps_split" || name == "epic_aps_knn" || name == "epic_aps_dropout";
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t hash = 14695981039346656037ull;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    return hash;
}

std::string response_to_string(ScoreResponse response) {
    switch (response) {
        case ScoreResponse::automatic: return "auto";
        case ScoreResponse::gaussian: return "gaussian";
        case ScoreResponse::log_scale: return "log";
    }
    return "auto";
}

ScoreResponse response_from_string(const std::string& name) {
    if (name == "auto") return ScoreResponse::automatic;
    if (name == "gaussian") return ScoreResponse::gaussian;
    if (name == "log") return ScoreResponse::log_scale;
    throw ConfigError("response must be auto, gaussian, or log");
}

json predictive_to_json(const PredictiveConfig& cfg) {
    json out;
    out["gp"] = {{"lengthscale_grid", cfg.gp.lengthscale_grid},
                 {"signal_grid", cfg.gp.signal_grid},
                 {"noise_grid", cfg.gp.noise_grid},
                 {"max_train_points", cfg.gp.max_train_points},
                 {"hyper_subsample", cfg.gp.hyper_subsample},
                 {"response", response_to_string(cfg.gp.response)}};
    out["mdn"] = {{"components", cfg.mdn.components}, {"hidden", cfg.mdn.hidden},
                  {"dropout", cfg.mdn.dropout},       {"mc_passes", cfg.mdn.mc_passes},
                  {"lr", cfg.mdn.lr},                 {"batch", cfg.mdn.batch},
                  {"max_epochs", cfg.mdn.max_epochs}, {"patience", cfg.mdn.patience},
                  {"sigma_floor", cfg.mdn.sigma_floor},
                  {"sample_mode", cfg.mdn.sample_mode},
                  {"sample_count", cfg.mdn.sample_count}};
    out["bart"] = {{"trees", cfg.bart.trees},
                   {"burn_in", cfg.bart.burn_in},
                   {"draws", cfg.bart.draws},
                   {"chains", cfg.bart.chains},
                   {"leaf_prior_k", cfg.bart.leaf_prior_k},
                   {"split_alpha", cfg.bart.split_alpha},
                   {"split_beta", cfg.bart.split_beta},
                   {"nu", cfg.bart.nu},
                   {"q", cfg.bart.q},
                   {"p_grow", cfg.bart.p_grow},
                   {"p_prune", cfg.bart.p_prune},
                   {"p_change", cfg.bart.p_change},
                   {"min_node", cfg.bart.min_node},
                   {"response", response_to_string(cfg.bart.response)}};
    out["knn"] = {{"k", cfg.knn.k}};
    return out;
}

void predictive_from_json(const json& in, PredictiveConfig& cfg) {
    if (in.contains("gp")) {
        const json& g = in.at("gp");
        if (g.contains("lengthscale_grid"))
            cfg.gp.lengthscale_grid = g.at("lengthscale_grid").get<std::vector<double>>();
        if (g.contains("signal_grid"))
            cfg.gp.signal_grid = g.at("signal_grid").get<std::vector<double>>();
        if (g.contains("noise_grid"))
            cfg.gp.noise_grid = g.at("noise_grid").get<std::vector<double>>();
        if (g.contains("max_train_points"))
            cfg.gp.max_train_points = g.at("max_train_points").get<std::size_t>();
        if (g.contains("hyper_subsample"))
            cfg.gp.hyper_subsample = g.at("hyper_subsample").get<std::size_t>();
        if (g.contains("response"))
            cfg.gp.response = response_from_string(g.at("response").get<std::string>());
    }
    if (in.contains("mdn")) {
        const json& m = in.at("mdn");
        if (m.contains("components")) cfg.mdn.components = m.at("components").get<int>();
        if (m.contains("hidden")) cfg.mdn.hidden = m.at("hidden").get<std::vector<int>>();
        if (m.contains("dropout")) cfg.mdn.dropout = m.at("dropout").get<double>();
        if (m.contains("mc_passes")) cfg.mdn.mc_passes = m.at("mc_passes").get<int>();
        if (m.contains("lr")) cfg.mdn.lr = m.at("lr").get<double>();
        if (m.contains("batch")) cfg.mdn.batch = m.at("batch").get<int>();
        if (m.contains("max_epochs")) cfg.mdn.max_epochs = m.at("max_epochs").get<int>();
        if (m.contains("patience")) cfg.mdn.patience = m.at("patience").get<int>();
        if (m.contains("sigma_floor")) cfg.mdn.sigma_floor = m.at("sigma_floor").get<double>();
        if (m.contains("sample_mode")) cfg.mdn.sample_mode = m.at("sample_mode").get<bool>();
        if (m.contains("sample_count")) cfg.mdn.sample_count = m.at("sample_count").get<int>();
    }
    if (in.contains("bart")) {
        const json& b = in.at("bart");
        if (b.contains("trees")) cfg.bart.trees = b.at("trees").get<int>();
        if (b.contains("burn_in")) cfg.bart.burn_in = b.at("burn_in").get<int>();
        if (b.contains("draws")) cfg.bart.draws = b.at("draws").get<int>();
        if (b.contains("chains")) cfg.bart.chains = b.at("chains").get<int>();
        if (b.contains("leaf_prior_k")) cfg.bart.leaf_prior_k = b.at("leaf_prior_k").get<double>();
        if (b.contains("split_alpha")) cfg.bart.split_alpha = b.at("split_alpha").get<double>();
        if (b.contains("split_beta")) cfg.bart.split_beta = b.at("split_beta").get<double>();
        if (b.contains("nu")) cfg.bart.nu = b.at("nu").get<double>();
        if (b.contains("q")) cfg.bart.q = b.at("q").get<double>();
        if (b.contains("p_grow")) cfg.bart.p_grow = b.at("p_grow").get<double>();
        if (b.contains("p_prune")) cfg.bart.p_prune = b.at("p_prune").get<double>();
        if (b.contains("p_change")) cfg.bart.p_change = b.at("p_change").get<double>();
        if (b.contains("min_node")) cfg.bart.min_node = b.at("min_node").get<int>();
        if (b.contains("response"))
            cfg.bart.response = response_from_string(b.at("response").get<std::string>());
    }
    if (in.contains("knn")) {
        const json& k = in.at("knn");
        if (k.contains("k")) cfg.knn.k = k.at("k").get<std::size_t>();
    }
}

} // namespace

std::string config_to_json(const ExperimentConfig& config) {
    json out;
    out["dataset"] = {{"kind", config.dataset},
                      {"n", config.n},
                      {"k_classes", config.k_classes},
                      {"spread", config.spread},
                      {"variance_convention",
                       config.convention == VarianceConvention::sd ? "sd" : "var"},
                      {"csv_path", config.csv_path},
                      {"target_column", config.target_column},
                      {"label_mode", config.label_mode},
                      {"predictions_csv", config.predictions_csv}};
    out["methods"] = config.methods;
    out["alpha"] = config.alpha;
    out["runs"] = config.n_runs;
    out["seed"] = config.seed;
    out["ratios"] = config.ratios;
    out["base_predictor"] = config.base_predictor;
    out["epic_base_score"] = config.epic_base_score;
    out["knn_k"] = config.knn_k;
    out["mondrian_bins"] = config.mondrian_bins;
    out["predictive"] = predictive_to_json(config.predictive);
    return out.dump(2);
}

ExperimentConfig config_from_json_text(const std::string& text) {
    json in;
    try {
        in = json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config JSON parse error: ") + e.what());
    }

    ExperimentConfig config;
    try {
        if (in.contains("dataset")) {
            const json& d = in.at("dataset");
            if (d.contains("kind")) config.dataset = d.at("kind").get<std::string>();
            if (d.contains("n")) config.n = d.at("n").get<std::size_t>();
            if (d.contains("k_classes")) config.k_classes = d.at("k_classes").get<int>();
            if (d.contains("spread")) config.spread = d.at("spread").get<double>();
            if (d.contains("variance_convention")) {
                const auto conv = d.at("variance_convention").get<std::string>();
                if (conv != "sd" && conv != "var")
                    throw ConfigError("variance_convention must be sd or var");
                config.convention =
                    conv == "sd" ? VarianceConvention::sd : VarianceConvention::var;
            }
            if (d.contains("csv_path")) config.csv_path = d.at("csv_path").get<std::string>();
            if (d.contains("target_column"))
                config.target_column = d.at("target_column").get<std::string>();
            if (d.contains("label_mode")) config.label_mode = d.at("label_mode").get<bool>();
            if (d.contains("predictions_csv"))
                config.predictions_csv = d.at("predictions_csv").get<std::string>();
        }
        if (in.contains("methods"))
            config.methods = in.at("methods").get<std::vector<std::string>>();
        if (in.contains("alpha")) config.alpha = in.at("alpha").get<double>();
        if (in.contains("runs")) config.n_runs = in.at("runs").get<int>();
        if (in.contains("seed")) config.seed = in.at("seed").get<std::uint64_t>();
        if (in.contains("ratios")) config.ratios = in.at("ratios").get<std::array<double, 3>>();
        if (in.contains("base_predictor"))
            config.base_predictor = in.at("base_predictor").get<std::string>();
        if (in.contains("epic_base_score"))
            config.epic_base_score = in.at("epic_base_score").get<std::string>();
        if (in.contains("knn_k")) config.knn_k = in.at("knn_k").get<int>();
        if (in.contains("mondrian_bins"))
            config.mondrian_bins = in.at("mondrian_bins").get<std::size_t>();
        if (in.contains("predictive")) predictive_from_json(in.at("predictive"), config.predictive);
        if (in.contains("threads")) config.threads = in.at("threads").get<int>();
        if (in.contains("out")) config.out_path = in.at("out").get<std::string>();
        if (in.contains("format")) config.format = in.at("format").get<std::string>();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config field error: ") + e.what());
    }

    if (!(config.alpha > 0.0 && config.alpha < 1.0))
        throw ConfigError("alpha must lie in (0,1)");
    if (config.n_runs < 1) throw ConfigError("runs must be >= 1");
    if (config.methods.empty()) throw ConfigError("methods list is empty");
    for (const std::string& m : config.methods)
        if (std::find(kKnownMethods.begin(), kKnownMethods.end(), m) == kKnownMethods.end())
            throw ConfigError("unknown method name: " + m);
    if (config.dataset != "bimodal" && config.dataset != "blobs" && config.dataset != "csv")
        throw ConfigError("dataset kind must be bimodal, blobs, or csv");
    if (config.dataset == "csv" && config.csv_path.empty())
        throw ConfigError("csv dataset needs csv_path");
    if (config.format != "json" && config.format != "csv")
        throw ConfigError("format must be json or csv");
    if (config.base_predictor != "knn" && config.base_predictor != "mlp" &&
        config.base_predictor != "external")
        throw ConfigError("base_predictor must be knn, mlp, or external");
    for (double r : config.ratios)
        if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("ratios must lie in [0,1]");
    if (config.ratios[0] + config.ratios[1] > 1.0 + 1e-12)
        throw ConfigError("train+cal ratio exceeds 1");
    if (config.epic_base_score != "residual" && config.epic_base_score != "cqr")
        throw ConfigError("epic_base_score must be residual or cqr");
    return config;
}

ExperimentConfig config_from_json_file(const std::string& path) {
    return config_from_json_text(read_text_file(path));
}

std::uint64_t config_hash(const ExperimentConfig& config) {
    return fnv1a(config_to_json(config));
}

int resolve_thread_count(int requested, int n_runs) {
    int workers = requested;
    if (workers <= 0) {
        if (const char* env = std::getenv("EPIC_THREADS")) workers = std::atoi(env);
        if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
        if (workers <= 0) workers = 1;
    }
    return std::clamp(workers, 1, std::max(1, n_runs));
}

namespace {

struct RegressionMethod {
    std::string name;
    std::size_t n_cal2 = 0;
    std::function<PredictionBand(const Dataset&, std::size_t)> band;
};

struct ClassificationMethod {
    std::string name;
    std::size_t n_cal2 = 0;
    std::function<PredictionSet(const Dataset&, std::size_t)> set;
};

struct RunContext {
    const ExperimentConfig& config;
    const Dataset& ds;
    const DataSplit& split;
    std::uint64_t run_seed;
    const ExternalPredictions* external;

    std::shared_ptr<const Predictor> g, mad, q_lo, q_hi;
    std::shared_ptr<const Classifier> classifier;

    std::shared_ptr<const Predictor> need_g() {
        if (g) return g;
        if (config.base_predictor == "external") {
            if (!external || !external->g) throw ConfigError("external predictions lack g");
            g = std::make_shared<ExternalPredictor>(*external->g);
            return g;
        }
        PredictorConfig pc;
        pc.kind = config.base_predictor == "mlp" ? PredictorConfig::Kind::mlp_mean
                                                 : PredictorConfig::Kind::knn_mean;
        pc.k = config.knn_k;
        g = fit_base_predictor(pc, ds, split.train, derive_seed(run_seed, 0x9001));
        return g;
    }

    std::shared_ptr<const Predictor> need_mad() {
        if (mad) return mad;
        // same predictor family as g, regressing training absolute residuals
        auto base = need_g();
        Dataset resid_ds;
        resid_ds.n = split.train.size();
        resid_ds.p = ds.p;
        resid_ds.columns = ds.columns;
        resid_ds.features.resize(resid_ds.n * ds.p);
        resid_ds.target.resize(resid_ds.n);
        for (std::size_t i = 0; i < split.train.size(); ++i) {
            const std::size_t row = split.train[i];
            std::copy_n(ds.row(row).data(), ds.p, resid_ds.features.data() + i * ds.p);
            resid_ds.target[i] = std::fabs(ds.target[row] - base->predict_row(ds, row));
        }
        std::vector<std::size_t> all(resid_ds.n);
        std::iota(all.begin(), all.end(), std::size_t{0});
        PredictorConfig pc;
        pc.kind = config.base_predictor == "mlp" ? PredictorConfig::Kind::mlp_mean
                                                 : PredictorConfig::Kind::knn_mean;
        pc.k = config.knn_k;
        mad = fit_base_predictor(pc, resid_ds, all, derive_seed(run_seed, 0x9002));
        return mad;
    }

    void need_quantiles() {
        if (q_lo && q_hi) return;
        if (config.base_predictor == "external" && external && external->q_lo &&
            external->q_hi) {
            q_lo = std::make_shared<ExternalPredictor>(*external->q_lo);
            q_hi = std::make_shared<ExternalPredictor>(*external->q_hi);
            return;
        }
        PredictorConfig pc;
        pc.kind = config.base_predictor == "mlp" ? PredictorConfig::Kind::mlp_pinball
                                                 : PredictorConfig::Kind::knn_quantile;
        pc.k = std::max(config.knn_k, 20);  // quantiles need a few more neighbors
        pc.tau = config.alpha / 2.0;
        q_lo = fit_base_predictor(pc, ds, split.train, derive_seed(run_seed, 0x9003));
        pc.tau = 1.0 - config.alpha / 2.0;
        q_hi = fit_base_predictor(pc, ds, split.train, derive_seed(run_seed, 0x9004));
    }

    std::shared_ptr<const Classifier> need_classifier() {
        if (classifier) return classifier;
        classifier = std::make_shared<KnnClassifier>(ds, split.train, config.knn_k);
        return classifier;
    }
};

ScoreFunction epic_base_score(RunContext& ctx) {
    if (ctx.config.epic_base_score == "cqr") {
        ctx.need_quantiles();
        return make_cqr_score(ctx.q_lo, ctx.q_hi);
    }
    return make_residual_score(ctx.need_g());
}

RegressionMethod build_regression_method(RunContext& ctx, const std::string& name,
                                         NominalLevel alpha) {
    const Dataset& ds = ctx.ds;
    const std::uint64_t method_seed = derive_seed(ctx.run_seed, fnv1a(name));

    if (name == "reg_split") {
        auto g = ctx.need_g();
        std::vector<double> scores(ctx.split.cal.size());
        for (std::size_t i = 0; i < ctx.split.cal.size(); ++i)
            scores[i] = std::fabs(ds.target[ctx.split.cal[i]] -
                                  g->predict_row(ds, ctx.split.cal[i]));
        const double t = conformal_quantile(scores, alpha);
        return {name, ctx.split.cal.size(),
                [g, t](const Dataset& d, std::size_t row) {
                    return reg_split_interval(g->predict_row(d, row), t);
                }};
    }
    if (name == "weighted") {
        auto g = ctx.need_g();
        auto mad = ctx.need_mad();
        std::vector<double> scores(ctx.split.cal.size());
        for (std::size_t i = 0; i < ctx.split.cal.size(); ++i) {
            const std::size_t row = ctx.split.cal[i];
            scores[i] = std::fabs(ds.target[row] - g->predict_row(ds, row)) /
                        std::max(mad->predict_row(ds, row), kMadFloor);
        }
        const double t = conformal_quantile(scores, alpha);
        return {name, ctx.split.cal.size(),
                [g, mad, t](const Dataset& d, std::size_t row) {
                    return weighted_interval(g->predict_row(d, row),
                                             mad->predict_row(d, row), t);
                }};
    }
    if (name == "mondrian") {
        auto g = ctx.need_g();
        auto mad = ctx.need_mad();
        std::vector<double> difficulty(ctx.split.cal.size());
        std::vector<double> scores(ctx.split.cal.size());
        for (std::size_t i = 0; i < ctx.split.cal.size(); ++i) {
            const std::size_t row = ctx.split.cal[i];
            difficulty[i] = mad->predict_row(ds, row);
            scores[i] = std::fabs(ds.target[row] - g->predict_row(ds, row));
        }
        auto bins = std::make_shared<MondrianBins>(
            mondrian_calibrate(difficulty, scores, alpha, ctx.config.mondrian_bins));
        return {name, ctx.split.cal.size(),
                [g, mad, bins](const Dataset& d, std::size_t row) {
                    return mondrian_interval(g->predict_row(d, row), *bins,
                                             mad->predict_row(d, row));
                }};
    }
    if (name == "cqr") {
        ctx.need_quantiles();
        auto lo = ctx.q_lo;
        auto hi = ctx.q_hi;
        std::vector<double> scores(ctx.split.cal.size());
        for (std::size_t i = 0; i < ctx.split.cal.size(); ++i) {
            const std::size_t row = ctx.split.cal[i];
            const auto [a, b] = std::minmax({lo->predict_row(ds, row), hi->predict_row(ds, row)});
            scores[i] = std::max(a - ds.target[row], ds.target[row] - b);
        }
        const double t = conformal_quantile(scores, alpha);
        return {name, ctx.split.cal.size(),
                [lo, hi, t](const Dataset& d, std::size_t row) {
                    const auto [a, b] =
                        std::minmax({lo->predict_row(d, row), hi->predict_row(d, row)});
                    return cqr_interval(a, b, t);
                }};
    }
    if (name == "cqr_r") {
        ctx.need_quantiles();
        auto lo = ctx.q_lo;
        auto hi = ctx.q_hi;
        std::vector<double> scores(ctx.split.cal.size());
        for (std::size_t i = 0; i < ctx.split.cal.size(); ++i) {
            const std::size_t row = ctx.split.cal[i];
            const auto [a, b] = std::minmax({lo->predict_row(ds, row), hi->predict_row(ds, row)});
            scores[i] = cqr_r_score(a, b, ds.target[row]);
        }
        const double t = conformal_quantile(scores, alpha);
        return {name, ctx.split.cal.size(),
                [lo, hi, t](const Dataset& d, std::size_t row) {
                    const auto [a, b] =
                        std::minmax({lo->predict_row(d, row), hi->predict_row(d, row)});
                    return cqr_r_interval(a, b, t);
                }};
    }

    // epic_* family
    PredictiveKind kind;
    if (name == "epic_gp") kind = PredictiveKind::gp_exact;
    else if (name == "epic_mdn") kind = PredictiveKind::mdn_dropout;
    else if (name == "epic_bart") kind = PredictiveKind::bart_lite;
    else if (name == "epic_knn") kind = PredictiveKind::knn_empirical;
    else throw ConfigError("unknown regression method: " + name);

    ScoreFunction score = epic_base_score(ctx);
    const bool cqr_base = score.kind == ScoreFunction::Kind::cqr;
    auto pipeline = std::make_shared<EpicPipeline>(epic_calibrate(
        std::move(score), kind, ds, ctx.split.cal, alpha, ctx.config.predictive,
        method_seed));
    return {name, pipeline->n_cal2,
            [pipeline, cqr_base](const Dataset& d, std::size_t row) {
                return cqr_base ? epic_interval_cqr(*pipeline, d, row)
                                : epic_interval_regression(*pipeline, d, row);
            }};
}

ClassificationMethod build_classification_method(RunContext& ctx, const std::string& name,
                                                 NominalLevel alpha) {
    const Dataset& ds = ctx.ds;
    const std::uint64_t method_seed = derive_seed(ctx.run_seed, fnv1a(name));
    auto base = ctx.need_classifier();

    if (name == "aps_split") {
        std::vector<double> scores(ctx.split.cal.size());
        for (std::size_t i = 0; i < ctx.split.cal.size(); ++i) {
            const std::size_t row = ctx.split.cal[i];
            scores[i] = aps_score(base->probs(ds.row(row)), ds.labels[row]);
        }
        const double t = conformal_quantile(scores, alpha);
        return {name, ctx.split.cal.size(),
                [base, t](const Dataset& d, std::size_t row) {
                    const std::vector<double> probs = base->probs(d.row(row));
                    PredictionSet set;
                    set.s_prime.resize(probs.size());
                    for (std::size_t y = 0; y < probs.size(); ++y) {
                        set.s_prime[y] = aps_score(probs, static_cast<int>(y));
                        if (set.s_prime[y] <= t) set.labels.push_back(static_cast<int>(y));
                    }
                    return set;
                }};
    }
    if (name == "epic_aps_knn" || name == "epic_aps_dropout") {
        const LabelPredictiveKind kind = name == "epic_aps_knn"
                                             ? LabelPredictiveKind::knn_label
                                             : LabelPredictiveKind::dropout_softmax;
        auto pipeline = std::make_shared<EpicClassPipeline>(
            epic_class_calibrate(base, kind, ds, ctx.split.cal, alpha,
                                 ctx.config.predictive.mdn, method_seed));
        return {name, pipeline->n_cal2,
                [pipeline](const Dataset& d, std::size_t row) {
                    return epic_class_set(*pipeline, d.row(row));
                }};
    }
    throw ConfigError("unknown classification method: " + name);
}

// synthetic kinds draw a fresh dataset per run; csv data is fixed and only
// the splits change
Dataset make_run_dataset(const ExperimentConfig& config, std::uint64_t run_seed) {
    if (config.dataset == "blobs")
        return generate_blobs_classification(config.n, config.k_classes, config.spread,
                                             derive_seed(run_seed, 0xDA7A))
            .first;
    return generate_bimodal_dgp(config.n, derive_seed(run_seed, 0xDA7A), config.convention);
}

MetricsReport evaluate_regression(const RegressionMethod& method, const Dataset& ds,
                                  const std::vector<std::size_t>& test, NominalLevel alpha) {
    std::vector<PredictionBand> bands(test.size());
    std::vector<double> ys(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
        bands[i] = method.band(ds, test[i]);
        ys[i] = ds.target[test[i]];
    }

    MetricsReport report;
    report.amc = marginal_coverage(bands, ys);
    std::vector<PredictionBand> finite;
    std::vector<double> finite_ys;
    for (std::size_t i = 0; i < bands.size(); ++i) {
        if (bands[i].degenerate) {
            report.n_degenerate += 1;
            continue;
        }
        finite.push_back(bands[i]);
        finite_ys.push_back(ys[i]);
    }
    if (!finite.empty()) {
        report.aisl = aisl(finite, finite_ys, alpha);
        report.mean_il = mean_interval_length(finite);
        report.pearson_rho = coverage_width_corr(finite, finite_ys);
    }
    return report;
}

MetricsReport evaluate_classification(const ClassificationMethod& method, const Dataset& ds,
                                      const std::vector<std::size_t>& test) {
    std::vector<PredictionSet> sets(test.size());
    std::vector<int> ys(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
        sets[i] = method.set(ds, test[i]);
        ys[i] = ds.labels[test[i]];
    }
    MetricsReport report;
    report.amc = marginal_coverage(sets, ys);
    report.ssc = ssc(sets, ys);
    return report;
}

} // namespace

std::vector<MetricsReport> run_experiment(const ExperimentConfig& config) {
    // revalidate: run_experiment may be called without the JSON path
    for (const std::string& m : config.methods)
        if (std::find(kKnownMethods.begin(), kKnownMethods.end(), m) == kKnownMethods.end())
            throw ConfigError("unknown method name: " + m);

    const std::uint64_t hash = config_hash(config);
    const NominalLevel alpha(config.alpha);

    Dataset shared;
    ExternalPredictions external;
    const bool has_external = !config.predictions_csv.empty();
    if (config.dataset == "csv") {
        shared = load_csv(config.csv_path, config.target_column, config.label_mode);
        if (has_external) external = load_predictions(config.predictions_csv, shared.n);
    } else if (has_external) {
        throw ConfigError("external predictions require a csv dataset");
    }

    const int n_runs = config.n_runs;
    std::vector<std::vector<MetricsReport>> per_run(n_runs);

    auto run_one = [&](int run_idx) {
        const std::uint64_t run_seed = derive_seed(config.seed, run_idx + 1);
        std::vector<MetricsReport> out;
        Dataset generated;
        DataSplit split;
        try {
            if (config.dataset != "csv") generated = make_run_dataset(config, run_seed);
            const std::size_t n = config.dataset == "csv" ? shared.n : generated.n;
            split = split_dataset(n, config.ratios, run_seed);
        } catch (const std::exception& e) {
            for (const std::string& name : config.methods) {
                MetricsReport report;
                report.method = name;
                report.dataset = config.dataset;
                report.run = run_idx;
                report.seed = run_seed;
                report.alpha = config.alpha;
                report.failed = true;
                report.error = e.what();
                report.config_hash = hash;
                out.push_back(std::move(report));
            }
            return out;
        }
        const Dataset& ds = config.dataset == "csv" ? shared : generated;

        RunContext ctx{config, ds, split, run_seed, has_external ? &external : nullptr,
                       nullptr, nullptr, nullptr, nullptr, nullptr};
        for (const std::string& name : config.methods) {
            MetricsReport report;
            try {
                if (is_classification_method(name)) {
                    if (!ds.classification())
                        throw ConfigError("method " + name + " needs a labeled dataset");
                    const ClassificationMethod method =
                        build_classification_method(ctx, name, alpha);
                    report = evaluate_classification(method, ds, split.test);
                    report.n_cal2 = method.n_cal2;
                } else {
                    if (ds.classification())
                        throw ConfigError("method " + name + " needs a regression dataset");
                    const RegressionMethod method = build_regression_method(ctx, name, alpha);
                    report = evaluate_regression(method, ds, split.test, alpha);
                    report.n_cal2 = method.n_cal2;
                }
            } catch (const std::exception& e) {
                report.failed = true;
                report.error = e.what();
            }
            report.method = name;
            report.dataset = config.dataset;
            report.run = run_idx;
            report.seed = run_seed;
            report.alpha = config.alpha;
            report.n_test = split.test.size();
            report.config_hash = hash;
            out.push_back(std::move(report));
        }
        return out;
    };

    const int workers = resolve_thread_count(config.threads, n_runs);
    if (workers <= 1) {
        for (int i = 0; i < n_runs; ++i) per_run[i] = run_one(i);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (;;) {
                    const int i = next.fetch_add(1);
                    if (i >= n_runs) break;
                    per_run[i] = run_one(i);
                }
            });
        for (auto& th : pool) th.join();
    }

    std::vector<MetricsReport> reports;
    for (auto& batch : per_run)
        for (auto& report : batch) reports.push_back(std::move(report));
    return reports;
}

namespace {

// bolding key: lower is better after this transform
double metric_key(const std::string& metric, double value, double alpha) {
    if (metric == "amc" || metric == "ssc") return std::fabs(value - (1.0 - alpha));
    return value;
}

json optional_to_json(const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
}

std::optional<double> optional_from_json(const json& v) {
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
}

const std::vector<std::string> kMetricNames{"amc", "aisl", "mean_il", "pearson_rho", "ssc"};

std::optional<double> metric_value(const MetricsReport& report, const std::string& name) {
    if (name == "amc") return report.amc;
    if (name == "aisl") return report.aisl;
    if (name == "mean_il") return report.mean_il;
    if (name == "pearson_rho") return report.pearson_rho;
    if (name == "ssc") return report.ssc;
    return std::nullopt;
}

} // namespace

AggregateReport aggregate(std::span<const MetricsReport> reports) {
    if (reports.empty()) throw ConfigError("aggregate: no reports");
    const std::uint64_t hash = reports[0].config_hash;
    for (const auto& report : reports)
        if (report.config_hash != hash)
            throw ConfigError("aggregate: reports come from different configs");

    AggregateReport agg;
    agg.dataset = reports[0].dataset;
    agg.alpha = reports[0].alpha;
    agg.config_hash = hash;

    std::vector<std::string> methods;
    std::map<std::string, std::vector<const MetricsReport*>> by_method;
    int max_run = 0;
    for (const auto& report : reports) {
        if (by_method.find(report.method) == by_method.end()) methods.push_back(report.method);
        max_run = std::max(max_run, report.run);
        if (report.failed) {
            agg.failed_runs[report.method] += 1;
            continue;
        }
        by_method[report.method].push_back(&report);
    }
    agg.methods = methods;
    agg.n_runs = max_run + 1;
    agg.metrics = kMetricNames;

    for (const std::string& metric : kMetricNames) {
        std::map<std::string, AggregateCell>& row = agg.cells[metric];
        std::map<std::string, std::pair<double, double>> key_stats;  // mean, se of key
        for (const std::string& method : methods) {
            std::vector<double> values, keys;
            for (const MetricsReport* report : by_method[method]) {
                const std::optional<double> v = metric_value(*report, metric);
                if (!v) continue;
                values.push_back(*v);
                keys.push_back(metric_key(metric, *v, agg.alpha));
            }
            if (values.empty()) continue;
            AggregateCell cell;
            cell.mean = mathx::mean(values);
            cell.two_sd = 2.0 * mathx::sample_sd(values);
            cell.single_run = values.size() == 1;
            row[method] = cell;
            const double se =
                mathx::sample_sd(keys) / std::sqrt(static_cast<double>(keys.size()));
            key_stats[method] = {mathx::mean(keys), se};
        }
        if (key_stats.empty()) continue;
        double best = std::numeric_limits<double>::infinity();
        for (const auto& [method, stat] : key_stats) best = std::min(best, stat.first);
        std::pair<double, double> best_stat{0.0, 0.0};
        for (const auto& [method, stat] : key_stats)
            if (stat.first == best) best_stat = stat;
        for (auto& [method, cell] : row) {
            const auto [mean_key, se] = key_stats[method];
            // bold iff mean +- 2 SE overlaps the best mean's interval
            cell.bold = mean_key - 2.0 * se <= best_stat.first + 2.0 * best_stat.second &&
                        best_stat.first - 2.0 * best_stat.second <= mean_key + 2.0 * se;
        }
    }
    return agg;
}

std::string reports_to_json(std::span<const MetricsReport> reports) {
    json arr = json::array();
    for (const auto& report : reports) {
        json r;
        r["method"] = report.method;
        r["dataset"] = report.dataset;
        r["run"] = report.run;
        r["seed"] = report.seed;
        r["alpha"] = report.alpha;
        r["n_test"] = report.n_test;
        r["n_cal2"] = report.n_cal2;
        r["amc"] = report.amc;
        r["aisl"] = optional_to_json(report.aisl);
        r["mean_il"] = optional_to_json(report.mean_il);
        r["pearson_rho"] = optional_to_json(report.pearson_rho);
        r["ssc"] = optional_to_json(report.ssc);
        r["n_degenerate"] = report.n_degenerate;
        r["failed"] = report.failed;
        r["error"] = report.error;
        r["config_hash"] = report.config_hash;
        arr.push_back(std::move(r));
    }
    json out;
    out["reports"] = std::move(arr);
    return out.dump(2) + "\n";
}

std::vector<MetricsReport> reports_from_json_text(const std::string& text) {
    const json in = json::parse(text);
    std::vector<MetricsReport> reports;
    for (const json& r : in.at("reports")) {
        MetricsReport report;
        report.method = r.at("method").get<std::string>();
        report.dataset = r.at("dataset").get<std::string>();
        report.run = r.at("run").get<int>();
        report.seed = r.at("seed").get<std::uint64_t>();
        report.alpha = r.at("alpha").get<double>();
        report.n_test = r.at("n_test").get<std::size_t>();
        report.n_cal2 = r.at("n_cal2").get<std::size_t>();
        report.amc = r.at("amc").get<double>();
        report.aisl = optional_from_json(r.at("aisl"));
        report.mean_il = optional_from_json(r.at("mean_il"));
        report.pearson_rho = optional_from_json(r.at("pearson_rho"));
        report.ssc = optional_from_json(r.at("ssc"));
        report.n_degenerate = r.at("n_degenerate").get<std::size_t>();
        report.failed = r.at("failed").get<bool>();
        report.error = r.at("error").get<std::string>();
        report.config_hash = r.at("config_hash").get<std::uint64_t>();
        reports.push_back(std::move(report));
    }
    return reports;
}

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string format_optional(const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
}

} // namespace

std::string reports_to_csv(std::span<const MetricsReport> reports) {
    std::ostringstream out;
    out << "method,dataset,run,seed,alpha,n_test,n_cal2,amc,aisl,mean_il,pearson_rho,ssc,"
           "n_degenerate,failed,config_hash\n";
    for (const auto& r : reports) {
        out << r.method << ',' << r.dataset << ',' << r.run << ',' << r.seed << ','
            << format_double(r.alpha) << ',' << r.n_test << ',' << r.n_cal2 << ','
            << format_double(r.amc) << ',' << format_optional(r.aisl) << ','
            << format_optional(r.mean_il) << ',' << format_optional(r.pearson_rho) << ','
            << format_optional(r.ssc) << ',' << r.n_degenerate << ',' << (r.failed ? 1 : 0)
            << ',' << r.config_hash << '\n';
    }
    return out.str();
}

std::string aggregate_to_json(const AggregateReport& report) {
    json out;
    out["dataset"] = report.dataset;
    out["alpha"] = report.alpha;
    out["n_runs"] = report.n_runs;
    out["methods"] = report.methods;
    out["config_hash"] = report.config_hash;
    json cells;
    for (const auto& [metric, row] : report.cells) {
        json jrow;
        for (const auto& [method, cell] : row)
            jrow[method] = {{"mean", cell.mean},
                            {"two_sd", cell.two_sd},
                            {"bold", cell.bold},
                            {"single_run", cell.single_run}};
        cells[metric] = std::move(jrow);
    }
    out["cells"] = std::move(cells);
    out["failed_runs"] = report.failed_runs;
    return out.dump(2) + "\n";
}

std::string aggregate_to_csv(const AggregateReport& report) {
    std::ostringstream out;
    out << "metric,method,mean,two_sd,bold,single_run\n";
    for (const auto& [metric, row] : report.cells)
        for (const auto& [method, cell] : row)
            out << metric << ',' << method << ',' << format_double(cell.mean) << ','
                << format_double(cell.two_sd) << ',' << (cell.bold ? 1 : 0) << ','
                << (cell.single_run ? 1 : 0) << '\n';
    return out.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open for writing: " + path);
    out << text;
    if (!out) throw ParseError("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::vector<BandDumpRow> dump_bands(const ExperimentConfig& config,
                                    const std::string& method, std::uint64_t seed) {
    if (std::find(kKnownMethods.begin(), kKnownMethods.end(), method) == kKnownMethods.end())
        throw ConfigError("unknown method name: " + method);
    if (is_classification_method(method))
        throw ConfigError("bands dump needs a regression method");

    ExperimentConfig one = config;
    one.seed = seed;
    Dataset shared;
    ExternalPredictions external;
    if (one.dataset == "csv") {
        shared = load_csv(one.csv_path, one.target_column, one.label_mode);
        if (!one.predictions_csv.empty())
            external = load_predictions(one.predictions_csv, shared.n);
    }
    const std::uint64_t run_seed = derive_seed(one.seed, 1);
    const Dataset ds =
        one.dataset == "csv" ? std::move(shared) : make_run_dataset(one, run_seed);
    DataSplit split = split_dataset(ds.n, one.ratios, run_seed);
    RunContext ctx{one, ds, split, run_seed,
                   one.predictions_csv.empty() ? nullptr : &external,
                   nullptr, nullptr, nullptr, nullptr, nullptr};
    const RegressionMethod fitted = build_regression_method(ctx, method, NominalLevel(one.alpha));

    std::vector<BandDumpRow> rows;
    rows.reserve(split.test.size());
    for (std::size_t row : split.test) {
        BandDumpRow out;
        out.x.assign(ds.row(row).begin(), ds.row(row).end());
        const PredictionBand band = fitted.band(ds, row);
        out.lo = band.lo;
        out.hi = band.hi;
        out.y = ds.target[row];
        out.covered = band.covers(out.y);
        rows.push_back(std::move(out));
    }
    return rows;
}

std::string bands_to_csv(std::span<const BandDumpRow> rows, std::size_t p) {
    std::ostringstream out;
    for (std::size_t j = 0; j < p; ++j) out << 'x' << j << ',';
    out << "lo,hi,y,covered\n";
    for (const auto& row : rows) {
        for (double v : row.x) out << format_double(v) << ',';
        out << format_double(row.lo) << ',' << format_double(row.hi) << ','
            << format_double(row.y) << ',' << (row.covered ? 1 : 0) << '\n';
    }
    return out.str();
}

} // namespace epic
