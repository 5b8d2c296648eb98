#include "epic/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "epic/rng.hpp"

namespace epic {

FeatureScaler FeatureScaler::fit(const Dataset& ds, std::span<const std::size_t> rows) {
    FeatureScaler sc;
    sc.mean.assign(ds.p, 0.0);
    sc.scale.assign(ds.p, 1.0);
    if (rows.empty()) return sc;
    for (std::size_t i : rows) {
        const auto x = ds.row(i);
        for (std::size_t j = 0; j < ds.p; ++j) sc.mean[j] += x[j];
    }
    for (std::size_t j = 0; j < ds.p; ++j) sc.mean[j] /= static_cast<double>(rows.size());
    std::vector<double> acc(ds.p, 0.0);
    for (std::size_t i : rows) {
        const auto x = ds.row(i);
        for (std::size_t j = 0; j < ds.p; ++j) {
            const double d = x[j] - sc.mean[j];
            acc[j] += d * d;
        }
    }
    for (std::size_t j = 0; j < ds.p; ++j) {
        const double sd = std::sqrt(acc[j] / static_cast<double>(rows.size()));
        sc.scale[j] = sd > 1e-12 ? sd : 1.0;
    }
    return sc;
}

FeatureScaler FeatureScaler::fit_raw(std::span<const double> x_rows, std::size_t n,
                                     std::size_t p) {
    FeatureScaler sc;
    sc.mean.assign(p, 0.0);
    sc.scale.assign(p, 1.0);
    if (n == 0) return sc;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) sc.mean[j] += x_rows[i * p + j];
    for (std::size_t j = 0; j < p; ++j) sc.mean[j] /= static_cast<double>(n);
    std::vector<double> acc(p, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) {
            const double d = x_rows[i * p + j] - sc.mean[j];
            acc[j] += d * d;
        }
    for (std::size_t j = 0; j < p; ++j) {
        const double sd = std::sqrt(acc[j] / static_cast<double>(n));
        sc.scale[j] = sd > 1e-12 ? sd : 1.0;
    }
    return sc;
}

void FeatureScaler::apply(std::span<const double> x, std::span<double> out) const {
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - mean[j]) / scale[j];
}

std::vector<double> FeatureScaler::transform_rows(const Dataset& ds,
                                                  std::span<const std::size_t> rows) const {
    std::vector<double> out(rows.size() * ds.p);
    for (std::size_t r = 0; r < rows.size(); ++r)
        apply(ds.row(rows[r]), std::span<double>(out.data() + r * ds.p, ds.p));
    return out;
}

std::vector<double> FeatureScaler::transform_raw(std::span<const double> x_rows,
                                                 std::size_t n, std::size_t p) const {
    std::vector<double> out(n * p);
    for (std::size_t i = 0; i < n; ++i)
        apply(std::span<const double>(x_rows.data() + i * p, p),
              std::span<double>(out.data() + i * p, p));
    return out;
}

AffineNormalizer AffineNormalizer::standardize(std::span<const double> values) {
    AffineNormalizer nz;
    if (values.empty()) return nz;
    double m = 0.0;
    for (double v : values) m += v;
    m /= static_cast<double>(values.size());
    double acc = 0.0;
    for (double v : values) acc += (v - m) * (v - m);
    const double sd = std::sqrt(acc / static_cast<double>(values.size()));
    nz.loc = m;
    nz.scale = sd > 1e-12 ? sd : 1.0;
    return nz;
}

AffineNormalizer AffineNormalizer::min_max_center(std::span<const double> values) {
    AffineNormalizer nz;
    if (values.empty()) return nz;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double range = *hi - *lo;
    nz.loc = 0.5 * (*hi + *lo);
    nz.scale = range > 1e-12 ? range : 1.0;
    return nz;
}

Dataset generate_bimodal_dgp(std::size_t n, std::uint64_t seed, VarianceConvention conv) {
    if (n < 8) throw InvalidN("generate_bimodal_dgp: n must be >= 8");
    const double sd_outer = conv == VarianceConvention::sd ? 0.1 : std::sqrt(0.1);
    const double sd_mid = conv == VarianceConvention::sd ? 2.1 : std::sqrt(2.1);

    const auto n_outer = static_cast<std::size_t>(std::floor(0.425 * static_cast<double>(n)));
    const std::size_t n_mid = n - 2 * n_outer;

    Dataset ds;
    ds.n = n;
    ds.p = 1;
    ds.features.reserve(n);
    ds.target.reserve(n);
    ds.columns = {"x"};
    ds.provenance = "bimodal_dgp";

    Rng rng(derive_seed(seed, 0xB1D0));
    auto push = [&](double x, double sd) {
        ds.features.push_back(x);
        ds.target.push_back(2.0 * std::sin(x) + sd * rng.normal());
    };
    for (std::size_t i = 0; i < n_outer; ++i) push(rng.uniform(0.0, 1.5), sd_outer);
    for (std::size_t i = 0; i < n_outer; ++i) push(rng.uniform(8.0, 10.0), sd_outer);
    for (std::size_t i = 0; i < n_mid; ++i) push(1.5 + 6.5 * rng.beta(8.0, 8.0), sd_mid);
    return ds;
}

double bimodal_noise_sd(double x, VarianceConvention conv) {
    const double sd_outer = conv == VarianceConvention::sd ? 0.1 : std::sqrt(0.1);
    const double sd_mid = conv == VarianceConvention::sd ? 2.1 : std::sqrt(2.1);
    return (x < 1.5 || x > 8.0) ? sd_outer : sd_mid;
}

std::vector<double> BlobsModel::posterior(std::span<const double> x) const {
    std::vector<double> logp(centers.size());
    for (std::size_t c = 0; c < centers.size(); ++c) {
        const double dx = x[0] - centers[c][0];
        const double dy = x[1] - centers[c][1];
        logp[c] = std::log(priors[c]) - (dx * dx + dy * dy) / (2.0 * spread * spread);
    }
    const double mx = *std::max_element(logp.begin(), logp.end());
    double z = 0.0;
    for (double& v : logp) {
        v = std::exp(v - mx);
        z += v;
    }
    for (double& v : logp) v /= z;
    return logp;
}

std::pair<Dataset, BlobsModel> generate_blobs_classification(std::size_t n, int k_classes,
                                                             double spread,
                                                             std::uint64_t seed) {
    if (k_classes < 1 || n < static_cast<std::size_t>(k_classes))
        throw InvalidN("generate_blobs_classification: need n >= k_classes >= 1");
    if (!(spread > 0.0))
        throw InvalidN("generate_blobs_classification: spread must be > 0");

    BlobsModel model;
    model.spread = spread;
    for (int c = 0; c < k_classes; ++c) {
        const double theta = 6.283185307179586477 * c / k_classes;
        model.centers.push_back({3.0 * std::cos(theta), 3.0 * std::sin(theta)});
    }

    Dataset ds;
    ds.n = n;
    ds.p = 2;
    ds.n_classes = k_classes;
    ds.columns = {"x0", "x1"};
    ds.provenance = "blobs";
    ds.features.reserve(2 * n);
    ds.labels.reserve(n);

    std::vector<std::size_t> counts(k_classes, n / k_classes);
    for (std::size_t c = 0; c < n % k_classes; ++c) counts[c] += 1;
    model.priors.resize(k_classes);
    for (int c = 0; c < k_classes; ++c)
        model.priors[c] = static_cast<double>(counts[c]) / static_cast<double>(n);

    Rng rng(derive_seed(seed, 0xB10B));
    for (int c = 0; c < k_classes; ++c) {
        for (std::size_t i = 0; i < counts[c]; ++i) {
            ds.features.push_back(model.centers[c][0] + spread * rng.normal());
            ds.features.push_back(model.centers[c][1] + spread * rng.normal());
            ds.labels.push_back(c);
        }
    }
    return {std::move(ds), std::move(model)};
}

DataSplit split_dataset(std::size_t n, std::array<double, 3> ratios, std::uint64_t seed) {
    for (double r : ratios)
        if (!(r >= 0.0 && r <= 1.0))
            throw InvalidN("split_dataset: ratios must lie in [0,1]");
    if (ratios[0] + ratios[1] > 1.0 + 1e-12)
        throw InvalidN("split_dataset: train+cal ratio exceeds 1");

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(derive_seed(seed, 0x5711));
    rng.shuffle(idx);

    const auto n_train = static_cast<std::size_t>(std::floor(ratios[0] * static_cast<double>(n)));
    const auto n_cal = static_cast<std::size_t>(std::floor(ratios[1] * static_cast<double>(n)));

    DataSplit split;
    split.seed = seed;
    split.train.assign(idx.begin(), idx.begin() + n_train);
    split.cal.assign(idx.begin() + n_train, idx.begin() + n_train + n_cal);
    split.test.assign(idx.begin() + n_train + n_cal, idx.end());
    return split;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
split_calibration(std::span<const std::size_t> cal_indices, std::uint64_t seed,
                  const CalSplitRule& rule) {
    const std::size_t n = cal_indices.size();
    std::size_t n2 = n <= rule.cap_threshold
                         ? static_cast<std::size_t>(
                               std::lround(rule.cal2_fraction * static_cast<double>(n)))
                         : rule.cal2_cap;
    n2 = std::min(n2, n);

    std::vector<std::size_t> shuffled(cal_indices.begin(), cal_indices.end());
    Rng rng(derive_seed(seed, 0xCA12));
    rng.shuffle(shuffled);
    std::vector<std::size_t> cal2(shuffled.begin(), shuffled.begin() + n2);
    std::vector<std::size_t> cal1(shuffled.begin() + n2, shuffled.end());
    return {std::move(cal1), std::move(cal2)};
}

SplitIndices make_split_indices(std::size_t n, std::array<double, 3> ratios,
                                std::uint64_t seed) {
    DataSplit base = split_dataset(n, ratios, seed);
    auto [cal1, cal2] = split_calibration(base.cal, seed);
    return SplitIndices{std::move(base.train), std::move(cal1), std::move(cal2),
                        std::move(base.test), seed};
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    cells.push_back(cur);
    return cells;
}

double parse_cell(const std::string& cell, std::size_t line_no, const std::string& col) {
    double value = 0.0;
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (end[-1] == ' ' || end[-1] == '\t')) --end;
    const auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc{} || res.ptr != end || !std::isfinite(value))
        throw ParseError("bad numeric cell '" + cell + "' at row " + std::to_string(line_no) +
                         ", column '" + col + "'");
    return value;
}

} // namespace

Dataset load_csv(const std::string& path, const std::string& target_column, bool label_mode) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open CSV file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty CSV file: " + path);
    const std::vector<std::string> header = split_line(line);

    std::ptrdiff_t target_col = -1;
    for (std::size_t j = 0; j < header.size(); ++j)
        if (header[j] == target_column) target_col = static_cast<std::ptrdiff_t>(j);
    if (target_col < 0) throw MissingColumn("target column '" + target_column + "' not in " + path);

    Dataset ds;
    ds.p = header.size() - 1;
    if (ds.p == 0) throw ParseError("CSV has no feature columns: " + path);
    for (std::size_t j = 0; j < header.size(); ++j)
        if (static_cast<std::ptrdiff_t>(j) != target_col) ds.columns.push_back(header[j]);
    ds.provenance = path;

    std::size_t line_no = 1;
    int max_label = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::vector<std::string> cells = split_line(line);
        if (cells.size() != header.size())
            throw ParseError("row " + std::to_string(line_no) + " has " +
                             std::to_string(cells.size()) + " cells, expected " +
                             std::to_string(header.size()));
        for (std::size_t j = 0; j < cells.size(); ++j) {
            const double v = parse_cell(cells[j], line_no, header[j]);
            if (static_cast<std::ptrdiff_t>(j) == target_col) {
                if (label_mode) {
                    const int lab = static_cast<int>(std::lround(v));
                    if (lab < 0 || std::fabs(v - lab) > 1e-9)
                        throw ParseError("label cell '" + cells[j] + "' at row " +
                                         std::to_string(line_no) + " is not a class index");
                    ds.labels.push_back(lab);
                    max_label = std::max(max_label, lab);
                } else {
                    ds.target.push_back(v);
                }
            } else {
                ds.features.push_back(v);
            }
        }
    }
    ds.n = label_mode ? ds.labels.size() : ds.target.size();
    if (ds.n == 0) throw ParseError("CSV has no data rows: " + path);
    if (label_mode) ds.n_classes = max_label + 1;
    return ds;
}

ExternalPredictions load_predictions(const std::string& path, std::size_t expect_rows) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open predictions file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty predictions file: " + path);
    const std::vector<std::string> header = split_line(line);

    ExternalPredictions out;
    std::vector<std::vector<double>*> sinks(header.size(), nullptr);
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (header[j] == "g") sinks[j] = &out.g.emplace();
        else if (header[j] == "q_lo") sinks[j] = &out.q_lo.emplace();
        else if (header[j] == "q_hi") sinks[j] = &out.q_hi.emplace();
        else throw ParseError("unknown predictions column '" + header[j] + "'");
    }

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::vector<std::string> cells = split_line(line);
        if (cells.size() != header.size())
            throw ParseError("predictions row " + std::to_string(line_no) + " is ragged");
        for (std::size_t j = 0; j < cells.size(); ++j)
            sinks[j]->push_back(parse_cell(cells[j], line_no, header[j]));
        ++out.rows;
    }
    if (out.rows != expect_rows)
        throw RowCountMismatch("predictions file has " + std::to_string(out.rows) +
                               " rows, dataset has " + std::to_string(expect_rows));
    return out;
}

void write_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open for writing: " + path);
    for (const auto& c : ds.columns) out << c << ',';
    out << (ds.classification() ? "label" : "y") << '\n';
    char buf[40];
    for (std::size_t i = 0; i < ds.n; ++i) {
        const auto x = ds.row(i);
        for (std::size_t j = 0; j < ds.p; ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", x[j]);
            out << buf << ',';
        }
        if (ds.classification()) {
            out << ds.labels[i] << '\n';
        } else {
            std::snprintf(buf, sizeof(buf), "%.17g", ds.target[i]);
            out << buf << '\n';
        }
    }
}

} // namespace epic
