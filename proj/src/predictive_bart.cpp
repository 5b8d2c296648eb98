#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "epic/mathx.hpp"
#include "epic/rng.hpp"
#include "predictive_impl.hpp"

namespace epic {

// Leaf value integrated out under its N(0, tau^2) prior.
double bart_node_log_marginal(double sum_r, double sum_r2, std::size_t n, double sigma2,
                              double tau2) {
    const double nn = static_cast<double>(n);
    const double denom = sigma2 + nn * tau2;
    return -0.5 * nn * std::log(6.283185307179586477 * sigma2) +
           0.5 * std::log(sigma2 / denom) - sum_r2 / (2.0 * sigma2) +
           tau2 * sum_r * sum_r / (2.0 * sigma2 * denom);
}

namespace detail {

namespace {

struct MixtureOfNormalsSlice final : ConditionalCdf {
    std::vector<double> means;   // per posterior draw, normalized units
    std::vector<double> sigmas;  // per posterior draw
    const AffineNormalizer* nz;
    const ScoreTransform* tr;

    double cdf(double s) const override {
        if (tr->below_support(s)) return 0.0;
        const double z = nz->forward(tr->forward(s));
        double acc = 0.0;
        for (std::size_t d = 0; d < means.size(); ++d)
            acc += mathx::normal_cdf((z - means[d]) / sigmas[d]);
        return std::clamp(acc / static_cast<double>(means.size()), 0.0, 1.0);
    }
    std::pair<double, double> bracket() const override {
        double lo = means[0], hi = means[0];
        for (std::size_t d = 0; d < means.size(); ++d) {
            lo = std::min(lo, means[d] - 16.0 * sigmas[d]);
            hi = std::max(hi, means[d] + 16.0 * sigmas[d]);
        }
        return {tr->inverse(nz->inverse(lo)), tr->inverse(nz->inverse(hi))};
    }
    double unit_scale() const override {
        if (!tr->log_scale) return nz->scale;
        double mid = 0.0;
        for (double m : means) mid += m;
        mid /= static_cast<double>(means.size());
        return std::max(1e-12, std::exp(nz->inverse(mid)) * nz->scale);
    }
};

struct NodeStats {
    std::size_t n = 0;
    double sum = 0.0;
    double sum2 = 0.0;

    void add(double r) {
        n += 1;
        sum += r;
        sum2 += r * r;
    }
    double log_marginal(double sigma2, double tau2) const {
        return bart_node_log_marginal(sum, sum2, n, sigma2, tau2);
    }
};

struct Routing {
    std::vector<int> leaves;                // reachable leaf node ids
    std::vector<int> nog;                   // internal nodes with two leaf children
    std::vector<int> depth;                 // per node id (reachable only)
    std::vector<std::vector<int>> rows;     // rows per leaf node id
};

void route(const BartTree& tree, const std::vector<double>& xs, std::size_t n,
           std::size_t p, Routing& ws) {
    ws.leaves.clear();
    ws.nog.clear();
    ws.depth.assign(tree.nodes.size(), 0);
    ws.rows.assign(tree.nodes.size(), {});

    // depth + leaf/nog discovery, iterative walk
    std::vector<int> stack{0};
    while (!stack.empty()) {
        const int id = stack.back();
        stack.pop_back();
        const auto& node = tree.nodes[id];
        if (node.is_leaf()) {
            ws.leaves.push_back(id);
            continue;
        }
        ws.depth[node.left] = ws.depth[id] + 1;
        ws.depth[node.right] = ws.depth[id] + 1;
        if (tree.nodes[node.left].is_leaf() && tree.nodes[node.right].is_leaf())
            ws.nog.push_back(id);
        stack.push_back(node.left);
        stack.push_back(node.right);
    }
    for (std::size_t i = 0; i < n; ++i) {
        int cur = 0;
        while (!tree.nodes[cur].is_leaf())
            cur = xs[i * p + tree.nodes[cur].var] <= tree.nodes[cur].split
                      ? tree.nodes[cur].left
                      : tree.nodes[cur].right;
        ws.rows[cur].push_back(static_cast<int>(i));
    }
}

// Split value drawn uniformly over the node's range of the chosen feature.
// Continuous proposals let posterior draws place boundaries anywhere inside
// data gaps, where the tree structure is genuinely uncertain; the rule
// density cancels between the tree prior and the proposal. Returns false if
// the node has no usable range or a child would fall under min_node.
bool draw_split(const std::vector<double>& xs, std::size_t p, const std::vector<int>& rows,
                int var, int min_node, Rng& rng, double& split_out) {
    double lo = xs[rows[0] * p + var];
    double hi = lo;
    for (int i : rows) {
        const double v = xs[i * p + var];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!(hi > lo)) return false;
    const double split = rng.uniform(lo, hi);
    std::size_t n_left = 0;
    for (int i : rows)
        if (xs[i * p + var] <= split) ++n_left;
    if (n_left < static_cast<std::size_t>(min_node) ||
        rows.size() - n_left < static_cast<std::size_t>(min_node))
        return false;
    split_out = split;
    return true;
}

NodeStats stats_for(const std::vector<int>& rows, const std::vector<double>& resid) {
    NodeStats st;
    for (int i : rows) st.add(resid[i]);
    return st;
}

struct Sampler {
    const std::vector<double>& xs;
    std::size_t n, p;
    const std::vector<double>& ys;
    const BartConfig& cfg;
    Rng& rng;

    double tau2;
    double lambda;
    double sigma2;

    std::vector<BartTree> trees;
    std::vector<std::vector<double>> tree_fit;
    std::vector<double> total_fit;
    std::vector<double> resid;
    Routing ws;

    double p_split(int d) const {
        return cfg.split_alpha * std::pow(1.0 + d, -cfg.split_beta);
    }

    void draw_leaves(BartTree& tree) {
        for (int leaf : ws.leaves) {
            const NodeStats st = stats_for(ws.rows[leaf], resid);
            const double denom = sigma2 + static_cast<double>(st.n) * tau2;
            const double post_mean = tau2 * st.sum / denom;
            const double post_sd = std::sqrt(tau2 * sigma2 / denom);
            tree.nodes[leaf].leaf = post_mean + post_sd * rng.normal();
        }
    }

    void update_tree(int t) {
        BartTree& tree = trees[t];
        for (std::size_t i = 0; i < n; ++i)
            resid[i] = ys[i] - (total_fit[i] - tree_fit[t][i]);
        route(tree, xs, n, p, ws);

        const bool root_only = tree.nodes[0].is_leaf();

        double u = rng.uniform();
        if (root_only) u = 0.0;  // grow is the only move from a stump
        if (u < cfg.p_grow) {
            try_grow(tree, root_only);
        } else if (u < cfg.p_grow + cfg.p_prune) {
            try_prune(tree);
        } else {
            try_change(tree);
        }

        route(tree, xs, n, p, ws);
        draw_leaves(tree);

        // refresh cached fits
        std::vector<double>& fit = tree_fit[t];
        for (int leaf : ws.leaves)
            for (int i : ws.rows[leaf]) {
                total_fit[i] += tree.nodes[leaf].leaf - fit[i];
                fit[i] = tree.nodes[leaf].leaf;
            }
    }

    void try_grow(BartTree& tree, bool root_only) {
        std::vector<int> growable;
        for (int leaf : ws.leaves)
            if (ws.rows[leaf].size() >= static_cast<std::size_t>(2 * cfg.min_node))
                growable.push_back(leaf);
        if (growable.empty()) return;

        const int leaf = growable[rng.below(growable.size())];
        const int var = static_cast<int>(rng.below(p));
        double split = 0.0;
        if (!draw_split(xs, p, ws.rows[leaf], var, cfg.min_node, rng, split)) return;

        NodeStats left, right;
        for (int i : ws.rows[leaf]) {
            if (xs[i * p + var] <= split)
                left.add(resid[i]);
            else
                right.add(resid[i]);
        }
        const NodeStats node{left.n + right.n, left.sum + right.sum, left.sum2 + right.sum2};

        const int d = ws.depth[leaf];
        // nog count after: the grown leaf becomes a nog; its parent stops
        // being one if it was
        int nog_after = static_cast<int>(ws.nog.size()) + 1;
        for (int g : ws.nog) {
            const auto& gn = tree.nodes[g];
            if (gn.left == leaf || gn.right == leaf) {
                nog_after -= 1;
                break;
            }
        }

        const double log_prior = std::log(p_split(d)) + 2.0 * std::log1p(-p_split(d + 1)) -
                                 std::log1p(-p_split(d));
        const double p_grow_used = root_only ? 1.0 : cfg.p_grow;
        const double log_proposal = std::log(cfg.p_prune) - std::log(p_grow_used) +
                                    std::log(static_cast<double>(growable.size())) -
                                    std::log(static_cast<double>(nog_after));
        const double log_lik = left.log_marginal(sigma2, tau2) +
                               right.log_marginal(sigma2, tau2) -
                               node.log_marginal(sigma2, tau2);

        if (std::log(std::max(rng.uniform(), 1e-300)) < log_prior + log_proposal + log_lik) {
            const int li = static_cast<int>(tree.nodes.size());
            tree.nodes.push_back(BartTreeNode{});
            tree.nodes.push_back(BartTreeNode{});
            tree.nodes[leaf].var = var;
            tree.nodes[leaf].split = split;
            tree.nodes[leaf].left = li;
            tree.nodes[leaf].right = li + 1;
        }
    }

    void try_prune(BartTree& tree) {
        if (ws.nog.empty()) return;
        const int node_id = ws.nog[rng.below(ws.nog.size())];
        auto& node = tree.nodes[node_id];

        const std::vector<int>& lrows = ws.rows[node.left];
        const std::vector<int>& rrows = ws.rows[node.right];
        NodeStats left = stats_for(lrows, resid);
        NodeStats right = stats_for(rrows, resid);
        const NodeStats merged{left.n + right.n, left.sum + right.sum, left.sum2 + right.sum2};

        // growable count after pruning
        auto growable = [&](std::size_t rows) {
            return rows >= static_cast<std::size_t>(2 * cfg.min_node);
        };
        int growable_after = 0;
        for (int leaf : ws.leaves)
            if (leaf != node.left && leaf != node.right && growable(ws.rows[leaf].size()))
                growable_after += 1;
        if (growable(merged.n)) growable_after += 1;
        if (growable_after == 0) return;  // reverse grow impossible

        const bool prunes_to_stump = node_id == 0;
        const double p_grow_reverse = prunes_to_stump ? 1.0 : cfg.p_grow;
        const int d = ws.depth[node_id];

        const double log_prior = std::log(p_split(d)) + 2.0 * std::log1p(-p_split(d + 1)) -
                                 std::log1p(-p_split(d));
        const double log_proposal = std::log(p_grow_reverse) - std::log(cfg.p_prune) +
                                    std::log(static_cast<double>(ws.nog.size())) -
                                    std::log(static_cast<double>(growable_after));
        const double log_lik = left.log_marginal(sigma2, tau2) +
                               right.log_marginal(sigma2, tau2) -
                               merged.log_marginal(sigma2, tau2);

        if (std::log(std::max(rng.uniform(), 1e-300)) <
            log_proposal - log_prior - log_lik) {
            node.var = -1;
            node.left = -1;
            node.right = -1;
        }
    }

    void try_change(BartTree& tree) {
        if (ws.nog.empty()) return;
        const int node_id = ws.nog[rng.below(ws.nog.size())];
        auto& node = tree.nodes[node_id];

        std::vector<int> rows = ws.rows[node.left];
        rows.insert(rows.end(), ws.rows[node.right].begin(), ws.rows[node.right].end());

        const int var = static_cast<int>(rng.below(p));
        double split = 0.0;
        if (!draw_split(xs, p, rows, var, cfg.min_node, rng, split)) return;

        NodeStats new_left, new_right;
        for (int i : rows) {
            if (xs[i * p + var] <= split)
                new_left.add(resid[i]);
            else
                new_right.add(resid[i]);
        }
        const NodeStats old_left = stats_for(ws.rows[node.left], resid);
        const NodeStats old_right = stats_for(ws.rows[node.right], resid);

        const double log_lik = new_left.log_marginal(sigma2, tau2) +
                               new_right.log_marginal(sigma2, tau2) -
                               old_left.log_marginal(sigma2, tau2) -
                               old_right.log_marginal(sigma2, tau2);
        if (std::log(std::max(rng.uniform(), 1e-300)) < log_lik) {
            node.var = var;
            node.split = split;
        }
    }

    void update_sigma() {
        double sse = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = ys[i] - total_fit[i];
            sse += e * e;
        }
        const double shape_chi = cfg.nu + static_cast<double>(n);
        sigma2 = std::max((cfg.nu * lambda + sse) / rng.chi2(shape_chi), 1e-12);
    }
};

// Copy only the reachable nodes; pruning leaves orphans behind in the
// working vector.
BartTree compact_tree(const BartTree& tree) {
    BartTree out;
    struct Item { int old_id; int new_parent; bool as_left; };
    std::vector<Item> items{{0, -1, false}};
    while (!items.empty()) {
        const Item it = items.back();
        items.pop_back();
        const int new_id = static_cast<int>(out.nodes.size());
        out.nodes.push_back(tree.nodes[it.old_id]);
        out.nodes[new_id].left = -1;
        out.nodes[new_id].right = -1;
        if (it.new_parent >= 0) {
            if (it.as_left)
                out.nodes[it.new_parent].left = new_id;
            else
                out.nodes[it.new_parent].right = new_id;
        }
        const auto& old = tree.nodes[it.old_id];
        if (!old.is_leaf()) {
            items.push_back({old.right, new_id, false});
            items.push_back({old.left, new_id, true});
        }
    }
    return out;
}

} // namespace

BartModel::BartModel(std::span<const double> x_rows, std::size_t n, std::size_t p,
                     std::span<const double> scores, const BartConfig& config,
                     std::uint64_t seed)
    : cfg(config), seed_(seed) {
    scaler = FeatureScaler::fit_raw(x_rows, n, p);
    const std::vector<double> xs = scaler.transform_raw(x_rows, n, p);
    transform = ScoreTransform::resolve(cfg.response, scores);
    std::vector<double> ys(n);
    for (std::size_t i = 0; i < n; ++i) ys[i] = transform.forward(scores[i]);
    normalizer = AffineNormalizer::min_max_center(ys);
    for (double& v : ys) v = normalizer.forward(v);

    const double m = static_cast<double>(cfg.trees);
    const double tau = 0.5 / (cfg.leaf_prior_k * std::sqrt(m));
    const double sigma_hat2 =
        std::max(mathx::variance(std::span<const double>(ys)), 1e-6);
    const double lambda =
        sigma_hat2 * mathx::chi2_quantile(1.0 - cfg.q, cfg.nu) / cfg.nu;

    for (int chain = 0; chain < cfg.chains; ++chain) {
        Rng rng(derive_seed(seed, 0xBA57 + static_cast<std::uint64_t>(chain)));
        Sampler sampler{xs, n, p, ys, cfg, rng, tau * tau, lambda,
                        sigma_hat2, {}, {}, {}, {}, {}};
        sampler.trees.assign(cfg.trees, BartTree{{BartTreeNode{}}});
        sampler.tree_fit.assign(cfg.trees, std::vector<double>(n, 0.0));
        sampler.total_fit.assign(n, 0.0);
        sampler.resid.assign(n, 0.0);

        const int total_iters = cfg.burn_in + cfg.draws;
        for (int iter = 0; iter < total_iters; ++iter) {
            for (int t = 0; t < cfg.trees; ++t) sampler.update_tree(t);
            sampler.update_sigma();
            if (iter >= cfg.burn_in) {
                BartDraw draw;
                draw.sigma = std::sqrt(sampler.sigma2);
                draw.trees.reserve(cfg.trees);
                for (const auto& tree : sampler.trees)
                    draw.trees.push_back(compact_tree(tree));
                draws.push_back(std::move(draw));
            }
        }
    }
}

std::unique_ptr<ConditionalCdf> BartModel::condition(std::span<const double> x) const {
    std::vector<double> q(x.size());
    scaler.apply(x, q);
    auto slice = std::make_unique<MixtureOfNormalsSlice>();
    slice->means.reserve(draws.size());
    slice->sigmas.reserve(draws.size());
    for (const auto& draw : draws) {
        double fit = 0.0;
        for (const auto& tree : draw.trees) fit += tree.eval(q);
        slice->means.push_back(fit);
        slice->sigmas.push_back(draw.sigma);
    }
    slice->nz = &normalizer;
    slice->tr = &transform;
    return slice;
}

void BartModel::save(std::ostream& out) const {
    ModelBlob blob;
    blob.kind = kind_name();
    blob.seed = seed_;
    blob.scalars = {{"trees", static_cast<double>(cfg.trees)},
                    {"draws", static_cast<double>(draws.size())},
                    {"p", static_cast<double>(scaler.mean.size())},
                    {"nz_loc", normalizer.loc},
                    {"nz_scale", normalizer.scale},
                    {"log_scale", transform.log_scale ? 1.0 : 0.0},
                    {"offset", transform.offset}};
    blob.put("scaler", scaler_to_flat(scaler));
    // per draw: sigma, then per tree: node count + 5 doubles per node
    std::vector<double> flat;
    for (const auto& draw : draws) {
        flat.push_back(draw.sigma);
        for (const auto& tree : draw.trees) {
            flat.push_back(static_cast<double>(tree.nodes.size()));
            for (const auto& node : tree.nodes) {
                flat.push_back(static_cast<double>(node.var));
                flat.push_back(node.split);
                flat.push_back(static_cast<double>(node.left));
                flat.push_back(static_cast<double>(node.right));
                flat.push_back(node.leaf);
            }
        }
    }
    blob.put("forest", std::move(flat));
    blob.write(out);
}

BartModel::BartModel(const ModelBlob& blob) {
    seed_ = blob.seed;
    cfg.trees = static_cast<int>(blob.scalar("trees"));
    normalizer.loc = blob.scalar("nz_loc");
    normalizer.scale = blob.scalar("nz_scale");
    transform.log_scale = blob.scalar("log_scale") != 0.0;
    transform.offset = blob.scalar("offset");
    scaler = scaler_from_flat(blob.arr("scaler"));
    const auto n_draws = static_cast<std::size_t>(blob.scalar("draws"));
    const std::vector<double>& flat = blob.arr("forest");
    std::size_t pos = 0;
    for (std::size_t d = 0; d < n_draws; ++d) {
        BartDraw draw;
        draw.sigma = flat[pos++];
        for (int t = 0; t < cfg.trees; ++t) {
            BartTree tree;
            const auto count = static_cast<std::size_t>(flat[pos++]);
            tree.nodes.resize(count);
            for (auto& node : tree.nodes) {
                node.var = static_cast<int>(flat[pos++]);
                node.split = flat[pos++];
                node.left = static_cast<int>(flat[pos++]);
                node.right = static_cast<int>(flat[pos++]);
                node.leaf = flat[pos++];
            }
            draw.trees.push_back(std::move(tree));
        }
        draws.push_back(std::move(draw));
    }
}

} // namespace detail
} // namespace epic
