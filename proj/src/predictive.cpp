#include "epic/predictive.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "epic/mathx.hpp"
#include "predictive_impl.hpp"

namespace epic {

double ConditionalCdf::invert(double t) const {
    const auto [lo, hi] = bracket();
    return mathx::invert_monotone_cdf([this](double s) { return cdf(s); }, t, lo, hi,
                                      1e-8 * unit_scale());
}

double PredictiveModel::cdf(std::span<const double> x, double s) const {
    return condition(x)->cdf(s);
}

double PredictiveModel::invert_cdf(std::span<const double> x, double t) const {
    if (!(t >= 0.0 && t <= 1.0))
        throw InvalidT("invert_cdf: t must lie in [0,1], got " + std::to_string(t));
    return condition(x)->invert(t);
}

std::string to_string(PredictiveKind kind) {
    switch (kind) {
        case PredictiveKind::gp_exact: return "gp_exact";
        case PredictiveKind::mdn_dropout: return "mdn_dropout";
        case PredictiveKind::bart_lite: return "bart_lite";
        case PredictiveKind::knn_empirical: return "knn_empirical";
    }
    return "?";
}

PredictiveKind predictive_kind_from_string(const std::string& name) {
    if (name == "gp_exact" || name == "gp") return PredictiveKind::gp_exact;
    if (name == "mdn_dropout" || name == "mdn") return PredictiveKind::mdn_dropout;
    if (name == "bart_lite" || name == "bart") return PredictiveKind::bart_lite;
    if (name == "knn_empirical" || name == "knn") return PredictiveKind::knn_empirical;
    throw ConfigError("unknown predictive kind: " + name);
}

std::unique_ptr<PredictiveModel> fit_predictive(PredictiveKind kind,
                                                std::span<const double> x_rows,
                                                std::size_t n, std::size_t p,
                                                std::span<const double> scores,
                                                const PredictiveConfig& config,
                                                std::uint64_t seed) {
    if (n < 5) throw InsufficientData("fit_predictive: need at least 5 points");
    if (scores.size() != n || x_rows.size() != n * p)
        throw LengthMismatch("fit_predictive: shape mismatch");
    for (double s : scores)
        if (!std::isfinite(s)) throw NonFiniteScore("fit_predictive: non-finite score");

    switch (kind) {
        case PredictiveKind::gp_exact:
            return std::make_unique<detail::GpModel>(x_rows, n, p, scores, config.gp, seed);
        case PredictiveKind::mdn_dropout:
            return std::make_unique<detail::MdnModel>(x_rows, n, p, scores, config.mdn, seed);
        case PredictiveKind::bart_lite:
            return std::make_unique<detail::BartModel>(x_rows, n, p, scores, config.bart,
                                                       seed);
        case PredictiveKind::knn_empirical:
            return std::make_unique<detail::KnnEmpiricalModel>(x_rows, n, p, scores,
                                                               config.knn, seed);
    }
    throw ConfigError("unknown predictive kind");
}

std::vector<double> predictive_label_dist(const PredictiveModel& model,
                                          std::span<const double> x) {
    return model.label_dist(x);
}

std::unique_ptr<PredictiveModel> fit_label_predictive(LabelPredictiveKind kind,
                                                      const Dataset& ds,
                                                      std::span<const std::size_t> rows,
                                                      const MdnConfig& mdn_cfg,
                                                      std::uint64_t seed) {
    if (rows.size() < 5) throw InsufficientData("fit_label_predictive: need >= 5 points");
    if (!ds.classification()) throw NotAClassifier{};
    switch (kind) {
        case LabelPredictiveKind::knn_label: {
            const std::size_t k =
                std::max<std::size_t>(10, std::min<std::size_t>(rows.size(), rows.size() / 20));
            return std::make_unique<detail::KnnLabelModel>(ds, rows, k, seed);
        }
        case LabelPredictiveKind::dropout_softmax:
            return std::make_unique<detail::DropoutSoftmaxModel>(ds, rows, mdn_cfg, seed);
    }
    throw ConfigError("unknown label predictive kind");
}

namespace detail {

namespace {
constexpr char kMagic[8] = {'E', 'P', 'I', 'C', 'P', 'M', '1', '\n'};
}

const std::vector<double>& ModelBlob::arr(const std::string& name) const {
    for (const auto& [n, v] : arrays)
        if (n == name) return v;
    throw ParseError("model blob missing array '" + name + "'");
}

double ModelBlob::scalar(const std::string& name) const {
    const auto it = scalars.find(name);
    if (it == scalars.end()) throw ParseError("model blob missing scalar '" + name + "'");
    return it->second;
}

void ModelBlob::write(std::ostream& out) const {
    nlohmann::json header;
    header["kind"] = kind;
    header["seed"] = seed;
    header["scalars"] = scalars;
    auto& arrs = header["arrays"] = nlohmann::json::array();
    for (const auto& [name, values] : arrays)
        arrs.push_back({{"name", name}, {"len", values.size()}});
    const std::string hs = header.dump();

    out.write(kMagic, sizeof(kMagic));
    const auto len = static_cast<std::uint32_t>(hs.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& [name, values] : arrays)
        out.write(reinterpret_cast<const char*>(values.data()),
                  static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!out) throw ParseError("model blob write failed");
}

ModelBlob ModelBlob::read(std::istream& in) {
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
        throw ParseError("not a predictive model file");
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string hs(len, '\0');
    in.read(hs.data(), len);
    if (!in) throw ParseError("truncated model header");
    const nlohmann::json header = nlohmann::json::parse(hs);

    ModelBlob blob;
    blob.kind = header.at("kind").get<std::string>();
    blob.seed = header.at("seed").get<std::uint64_t>();
    blob.scalars = header.at("scalars").get<std::map<std::string, double>>();
    for (const auto& a : header.at("arrays")) {
        std::vector<double> values(a.at("len").get<std::size_t>());
        in.read(reinterpret_cast<char*>(values.data()),
                static_cast<std::streamsize>(values.size() * sizeof(double)));
        blob.arrays.emplace_back(a.at("name").get<std::string>(), std::move(values));
    }
    if (!in) throw ParseError("truncated model payload");
    return blob;
}

ScoreTransform ScoreTransform::resolve(ScoreResponse response,
                                       std::span<const double> scores) {
    ScoreTransform tr;
    if (response == ScoreResponse::gaussian) return tr;
    double min_s = scores.empty() ? 0.0 : scores[0];
    for (double s : scores) min_s = std::min(min_s, s);
    if (response == ScoreResponse::automatic && min_s < 0.0) return tr;

    tr.log_scale = true;
    std::vector<double> abs_sorted(scores.begin(), scores.end());
    for (double& v : abs_sorted) v = std::fabs(v);
    std::nth_element(abs_sorted.begin(), abs_sorted.begin() + abs_sorted.size() / 2,
                     abs_sorted.end());
    // keeps log(0 + offset) within a few nats of the bulk
    tr.offset = std::max(1e-9, 0.01 * abs_sorted[abs_sorted.size() / 2]);
    if (min_s < 0.0) tr.offset += -min_s;  // log_scale forced on signed scores
    return tr;
}

std::vector<double> scaler_to_flat(const FeatureScaler& sc) {
    std::vector<double> flat;
    flat.reserve(2 * sc.mean.size());
    flat.insert(flat.end(), sc.mean.begin(), sc.mean.end());
    flat.insert(flat.end(), sc.scale.begin(), sc.scale.end());
    return flat;
}

FeatureScaler scaler_from_flat(const std::vector<double>& flat) {
    FeatureScaler sc;
    const std::size_t p = flat.size() / 2;
    sc.mean.assign(flat.begin(), flat.begin() + p);
    sc.scale.assign(flat.begin() + p, flat.end());
    return sc;
}

std::vector<double> mlp_to_flat(const Mlp& net) {
    std::vector<double> flat;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        flat.insert(flat.end(), net.weights[l].begin(), net.weights[l].end());
        flat.insert(flat.end(), net.biases[l].begin(), net.biases[l].end());
    }
    return flat;
}

void mlp_layout(const Mlp& net, std::vector<double>& dims) {
    dims.push_back(static_cast<double>(net.in_dim()));
    for (std::size_t l = 0; l + 1 < net.biases.size(); ++l)
        dims.push_back(static_cast<double>(net.biases[l].size()));
    dims.push_back(static_cast<double>(net.out_dim()));
}

Mlp mlp_from_flat(const std::vector<double>& dims, const std::vector<double>& flat) {
    const int in_dim = static_cast<int>(dims.front());
    const int out_dim = static_cast<int>(dims.back());
    std::vector<int> hidden;
    for (std::size_t i = 1; i + 1 < dims.size(); ++i) hidden.push_back(static_cast<int>(dims[i]));
    Rng dummy(0);
    Mlp net(in_dim, hidden, out_dim, dummy);
    std::size_t pos = 0;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        std::copy_n(flat.begin() + pos, net.weights[l].size(), net.weights[l].begin());
        pos += net.weights[l].size();
        std::copy_n(flat.begin() + pos, net.biases[l].size(), net.biases[l].begin());
        pos += net.biases[l].size();
    }
    return net;
}

std::vector<double> masks_to_flat(const std::vector<DropoutMask>& masks) {
    std::vector<double> flat;
    for (const auto& m : masks)
        for (const auto& layer : m.layer_scale)
            flat.insert(flat.end(), layer.begin(), layer.end());
    return flat;
}

std::vector<DropoutMask> masks_from_flat(const std::vector<double>& flat, std::size_t t,
                                         const Mlp& net) {
    std::vector<DropoutMask> masks(t);
    std::size_t pos = 0;
    for (auto& m : masks) {
        for (std::size_t l = 0; l + 1 < net.biases.size(); ++l) {
            const std::size_t width = net.biases[l].size();
            m.layer_scale.emplace_back(flat.begin() + pos, flat.begin() + pos + width);
            pos += width;
        }
    }
    return masks;
}

} // namespace detail

std::unique_ptr<PredictiveModel> load_predictive(std::istream& in) {
    const detail::ModelBlob blob = detail::ModelBlob::read(in);
    if (blob.kind == "gp_exact") return std::make_unique<detail::GpModel>(blob);
    if (blob.kind == "mdn_dropout") return std::make_unique<detail::MdnModel>(blob);
    if (blob.kind == "bart_lite") return std::make_unique<detail::BartModel>(blob);
    if (blob.kind == "knn_empirical") return std::make_unique<detail::KnnEmpiricalModel>(blob);
    if (blob.kind == "knn_label") return std::make_unique<detail::KnnLabelModel>(blob);
    if (blob.kind == "dropout_softmax")
        return std::make_unique<detail::DropoutSoftmaxModel>(blob);
    throw ParseError("unknown model kind in file: " + blob.kind);
}

void save_predictive(const PredictiveModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open for writing: " + path);
    model.save(out);
}

std::unique_ptr<PredictiveModel> load_predictive(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open model file: " + path);
    return load_predictive(in);
}

} // namespace epic
