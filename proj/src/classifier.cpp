#include "robofp/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "robofp/parallel.hpp"
#include "robofp/rng.hpp"

namespace robofp {

namespace {

constexpr const char *kModelFormat = "robofp-gbdt-v1";
constexpr double kMinGain = 1e-6;
constexpr std::uint64_t kFoldStream = 77;

struct Split {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
};

class TreeBuilder {
public:
    TreeBuilder(const std::vector<const double *> &x, std::size_t num_features,
                const std::vector<std::vector<std::uint32_t>> &order, const GbdtParams &p)
        : x_{x}, num_features_{num_features}, order_{order}, p_{p} {}

    // Grows one tree on (g, h); writes the leaf value reached by each sample into `leaf_value`.
    Tree build(const std::vector<double> &g, const std::vector<double> &h, std::vector<double> &leaf_value) {
        const std::size_t n = x_.size();
        Tree tree;
        tree.nodes.emplace_back();
        node_of_.assign(n, 0);
        std::vector<int> frontier{0};
        std::vector<double> node_g{0.0}, node_h{0.0};
        for (std::size_t i = 0; i < n; ++i) {
            node_g[0] += g[i];
            node_h[0] += h[i];
        }

        for (int depth = 0; depth < p_.max_depth && !frontier.empty(); ++depth) {
            const auto splits = find_splits(frontier, node_g, node_h, g, h, tree.nodes.size());
            std::vector<int> next;
            for (std::size_t s = 0; s < frontier.size(); ++s) {
                if (splits[s].feature < 0) {
                    continue;
                }
                const int id = frontier[s];
                const int left = static_cast<int>(tree.nodes.size());
                tree.nodes.emplace_back();
                tree.nodes.emplace_back();
                auto &node = tree.nodes[static_cast<std::size_t>(id)];
                node.feature = splits[s].feature;
                node.threshold = splits[s].threshold;
                node.gain = splits[s].gain;
                node.left = left;
                node.right = left + 1;
                next.push_back(left);
                next.push_back(left + 1);
            }
            node_g.assign(tree.nodes.size(), 0.0);
            node_h.assign(tree.nodes.size(), 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                const auto &node = tree.nodes[static_cast<std::size_t>(node_of_[i])];
                if (node.feature >= 0) {
                    node_of_[i] = x_[i][node.feature] < node.threshold ? node.left : node.right;
                }
                node_g[static_cast<std::size_t>(node_of_[i])] += g[i];
                node_h[static_cast<std::size_t>(node_of_[i])] += h[i];
            }
            frontier = std::move(next);
        }

        node_g.assign(tree.nodes.size(), 0.0);
        node_h.assign(tree.nodes.size(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            node_g[static_cast<std::size_t>(node_of_[i])] += g[i];
            node_h[static_cast<std::size_t>(node_of_[i])] += h[i];
        }
        for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
            auto &node = tree.nodes[id];
            if (node.feature < 0) {
                node.value = -node_g[id] / (node_h[id] + p_.lambda) * p_.eta;
            }
        }
        leaf_value.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            leaf_value[i] = tree.nodes[static_cast<std::size_t>(node_of_[i])].value;
        }
        return tree;
    }

private:
    std::vector<Split> find_splits(const std::vector<int> &frontier, const std::vector<double> &node_g,
                                   const std::vector<double> &node_h, const std::vector<double> &g,
                                   const std::vector<double> &h, std::size_t num_nodes) {
        std::vector<int> slot(num_nodes, -1);
        for (std::size_t s = 0; s < frontier.size(); ++s) {
            slot[static_cast<std::size_t>(frontier[s])] = static_cast<int>(s);
        }
        const std::size_t m = frontier.size();
        std::vector<Split> best(m);
        std::vector<double> gl(m), hl(m), last(m), parent_score(m);
        std::vector<char> seen(m);
        for (std::size_t s = 0; s < m; ++s) {
            const auto id = static_cast<std::size_t>(frontier[s]);
            parent_score[s] = node_g[id] * node_g[id] / (node_h[id] + p_.lambda);
        }

        for (std::size_t f = 0; f < num_features_; ++f) {
            std::fill(gl.begin(), gl.end(), 0.0);
            std::fill(hl.begin(), hl.end(), 0.0);
            std::fill(seen.begin(), seen.end(), 0);
            for (std::uint32_t i : order_[f]) {
                const int s = slot[static_cast<std::size_t>(node_of_[i])];
                if (s < 0) {
                    continue;
                }
                const auto u = static_cast<std::size_t>(s);
                const double v = x_[i][f];
                if (seen[u] && v != last[u]) {
                    const auto id = static_cast<std::size_t>(frontier[u]);
                    const double gr = node_g[id] - gl[u];
                    const double hr = node_h[id] - hl[u];
                    if (hl[u] >= p_.min_child_weight && hr >= p_.min_child_weight) {
                        const double gain = gl[u] * gl[u] / (hl[u] + p_.lambda) + gr * gr / (hr + p_.lambda) -
                                            parent_score[u];
                        if (gain - p_.gamma > kMinGain && gain > best[u].gain) {
                            double thr = last[u] + (v - last[u]) / 2.0;
                            if (!(thr > last[u])) {
                                thr = v;
                            }
                            best[u] = {gain, static_cast<int>(f), thr};
                        }
                    }
                }
                gl[u] += g[i];
                hl[u] += h[i];
                last[u] = v;
                seen[u] = 1;
            }
        }
        return best;
    }

    const std::vector<const double *> &x_;
    std::size_t num_features_;
    const std::vector<std::vector<std::uint32_t>> &order_;
    const GbdtParams &p_;
    std::vector<int> node_of_;
};

std::array<double, kNumActions> softmax(const double *margin) {
    std::array<double, kNumActions> p{};
    const double mx = *std::max_element(margin, margin + kNumActions);
    double sum = 0.0;
    for (std::size_t c = 0; c < kNumActions; ++c) {
        p[c] = std::exp(margin[c] - mx);
        sum += p[c];
    }
    for (double &v : p) {
        v /= sum;
    }
    return p;
}

FeatureMatrix subset(const FeatureMatrix &m, const std::vector<std::size_t> &rows) {
    FeatureMatrix out;
    out.schema = m.schema;
    out.rows.reserve(rows.size());
    for (std::size_t r : rows) {
        out.rows.push_back(m.rows[r]);
    }
    return out;
}

} // namespace

ClassifierError::ClassifierError(ClassifierErrorKind kind, const std::string &detail)
    : std::runtime_error{detail}, kind_{kind} {}

nlohmann::json to_json(const GbdtParams &p) {
    return {
        {"rounds", p.rounds},
        {"max_depth", p.max_depth},
        {"eta", p.eta},
        {"lambda", p.lambda},
        {"gamma", p.gamma},
        {"min_child_weight", p.min_child_weight},
        {"base_score", p.base_score},
        {"seed", p.seed},
        {"objective", "multi:softprob"},
    };
}

GbdtParams gbdt_params_from_json(const nlohmann::json &j) {
    GbdtParams p;
    p.rounds = j.value("rounds", p.rounds);
    p.max_depth = j.value("max_depth", p.max_depth);
    p.eta = j.value("eta", p.eta);
    p.lambda = j.value("lambda", p.lambda);
    p.gamma = j.value("gamma", p.gamma);
    p.min_child_weight = j.value("min_child_weight", p.min_child_weight);
    p.base_score = j.value("base_score", p.base_score);
    p.seed = j.value("seed", p.seed);
    if (p.rounds < 1 || p.max_depth < 1 || !(p.eta > 0.0) || p.lambda < 0.0 || p.gamma < 0.0 ||
        p.min_child_weight < 0.0) {
        throw ClassifierError{ClassifierErrorKind::InvalidArgument, "invalid classifier hyperparameters"};
    }
    return p;
}

double Tree::predict(std::span<const double> x) const {
    std::size_t id = 0;
    while (nodes[id].feature >= 0) {
        const auto &n = nodes[id];
        id = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right);
    }
    return nodes[id].value;
}

Prediction Model::predict(std::span<const double> values, std::string_view fingerprint) const {
    if (fingerprint != schema_.fingerprint || values.size() != schema_.size()) {
        throw ClassifierError{ClassifierErrorKind::SchemaMismatch,
                              "feature vector does not match the model schema (" + std::to_string(values.size()) +
                                  " values, fingerprint " + std::string{fingerprint} + " vs " +
                                  schema_.fingerprint + ")"};
    }
    std::array<double, kNumActions> margin;
    margin.fill(params_.base_score);
    for (std::size_t t = 0; t < trees_.size(); ++t) {
        margin[t % kNumActions] += trees_[t].predict(values);
    }
    Prediction out;
    out.scores = softmax(margin.data());
    const auto best = std::max_element(out.scores.begin(), out.scores.end());
    out.label = kAllActions[static_cast<std::size_t>(best - out.scores.begin())];
    return out;
}

Prediction Model::predict(const FeatureVector &v, const FeatureSchema &schema) const {
    return predict(v.values, schema.fingerprint);
}

Model train(const FeatureMatrix &matrix, const GbdtParams &params) {
    const std::size_t n = matrix.rows.size();
    const std::size_t nf = matrix.schema.size();
    std::vector<const double *> x(n);
    std::vector<std::size_t> y(n);
    std::array<std::size_t, kNumActions> counts{};
    for (std::size_t i = 0; i < n; ++i) {
        const auto &row = matrix.rows[i];
        if (row.values.size() != nf) {
            throw ClassifierError{ClassifierErrorKind::SchemaMismatch,
                                  "row '" + row.trace_id + "' has " + std::to_string(row.values.size()) +
                                      " values, schema has " + std::to_string(nf)};
        }
        if (!row.label) {
            throw ClassifierError{ClassifierErrorKind::MissingLabel, "row '" + row.trace_id + "' has no label"};
        }
        for (double v : row.values) {
            if (std::isnan(v)) {
                throw ClassifierError{ClassifierErrorKind::InvalidArgument, "NaN in row '" + row.trace_id + "'"};
            }
        }
        x[i] = row.values.data();
        y[i] = index_of(*row.label);
        ++counts[y[i]];
    }
    if (std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) < 2) {
        throw ClassifierError{ClassifierErrorKind::SingleClass, "training needs at least two classes"};
    }

    std::vector<std::vector<std::uint32_t>> order(nf, std::vector<std::uint32_t>(n));
    for (std::size_t f = 0; f < nf; ++f) {
        std::iota(order[f].begin(), order[f].end(), 0u);
        std::stable_sort(order[f].begin(), order[f].end(),
                         [&](std::uint32_t a, std::uint32_t b) { return x[a][f] < x[b][f]; });
    }

    Model model;
    model.params_ = params;
    model.schema_ = matrix.schema;
    model.trees_.reserve(static_cast<std::size_t>(params.rounds) * kNumActions);

    TreeBuilder builder{x, nf, order, params};
    std::vector<double> margin(n * kNumActions, params.base_score);
    std::vector<double> g(n), h(n), leaf;
    std::vector<std::array<double, kNumActions>> prob(n);
    for (int round = 0; round < params.rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) {
            prob[i] = softmax(&margin[i * kNumActions]);
        }
        for (std::size_t c = 0; c < kNumActions; ++c) {
            for (std::size_t i = 0; i < n; ++i) {
                const double p = prob[i][c];
                g[i] = p - (y[i] == c ? 1.0 : 0.0);
                h[i] = std::max(2.0 * p * (1.0 - p), 1e-16);
            }
            model.trees_.push_back(builder.build(g, h, leaf));
            for (std::size_t i = 0; i < n; ++i) {
                margin[i * kNumActions + c] += leaf[i];
            }
        }
    }
    return model;
}

nlohmann::json Model::to_json() const {
    nlohmann::json classes = nlohmann::json::array();
    for (auto a : kAllActions) {
        classes.push_back(std::string{robofp::to_string(a)});
    }
    nlohmann::json trees = nlohmann::json::array();
    for (const auto &t : trees_) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto &nd : t.nodes) {
            nodes.push_back({{"feature", nd.feature},
                             {"threshold", nd.threshold},
                             {"left", nd.left},
                             {"right", nd.right},
                             {"value", nd.value},
                             {"gain", nd.gain}});
        }
        trees.push_back({{"nodes", std::move(nodes)}});
    }
    return {
        {"format", kModelFormat},
        {"params", robofp::to_json(params_)},
        {"schema", robofp::to_json(schema_)},
        {"classes", std::move(classes)},
        {"trees", std::move(trees)},
    };
}

Model Model::from_json(const nlohmann::json &j) {
    if (j.value("format", std::string{}) != kModelFormat) {
        throw ClassifierError{ClassifierErrorKind::InvalidArgument, "not a robofp model file"};
    }
    Model m;
    m.params_ = gbdt_params_from_json(j.at("params"));
    m.schema_ = feature_schema_from_json(j.at("schema"));
    const auto nf = static_cast<int>(m.schema_.size());
    for (const auto &jt : j.at("trees")) {
        Tree t;
        for (const auto &jn : jt.at("nodes")) {
            TreeNode nd;
            nd.feature = jn.at("feature").get<int>();
            nd.threshold = jn.at("threshold").get<double>();
            nd.left = jn.at("left").get<int>();
            nd.right = jn.at("right").get<int>();
            nd.value = jn.at("value").get<double>();
            nd.gain = jn.value("gain", 0.0);
            t.nodes.push_back(nd);
        }
        const auto count = static_cast<int>(t.nodes.size());
        for (const auto &nd : t.nodes) {
            if (nd.feature >= nf || (nd.feature >= 0 && (nd.left <= 0 || nd.left >= count || nd.right <= 0 ||
                                                         nd.right >= count))) {
                throw ClassifierError{ClassifierErrorKind::InvalidArgument, "model tree is malformed"};
            }
        }
        if (t.nodes.empty()) {
            throw ClassifierError{ClassifierErrorKind::InvalidArgument, "model tree is empty"};
        }
        m.trees_.push_back(std::move(t));
    }
    if (m.trees_.size() % kNumActions != 0) {
        throw ClassifierError{ClassifierErrorKind::InvalidArgument, "tree count is not a multiple of the classes"};
    }
    return m;
}

void save_model(const std::filesystem::path &path, const Model &model) {
    write_text_file(path, model.to_json().dump() + "\n");
}

Model load_model(const std::filesystem::path &path) { return Model::from_json(nlohmann::json::parse(read_text_file(path))); }

ImportanceReport feature_importance(const Model &model, std::size_t top_n) {
    const auto &names = model.schema().names;
    std::vector<double> sum(names.size(), 0.0);
    std::vector<std::size_t> uses(names.size(), 0);
    for (const auto &t : model.trees()) {
        for (const auto &nd : t.nodes) {
            if (nd.feature >= 0) {
                sum[static_cast<std::size_t>(nd.feature)] += nd.gain;
                ++uses[static_cast<std::size_t>(nd.feature)];
            }
        }
    }
    ImportanceReport report;
    for (std::size_t f = 0; f < names.size(); ++f) {
        report.push_back({names[f], uses[f] ? sum[f] / static_cast<double>(uses[f]) : 0.0});
    }
    std::stable_sort(report.begin(), report.end(),
                     [](const ImportanceEntry &a, const ImportanceEntry &b) { return a.gain > b.gain; });
    report.resize(std::min(top_n, report.size()));
    return report;
}

nlohmann::json to_json(const ImportanceReport &report) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto &e : report) {
        arr.push_back({{"feature", e.feature}, {"gain", e.gain}});
    }
    return arr;
}

nlohmann::json to_json(const CVReport &r) {
    nlohmann::json cm = nlohmann::json::array();
    for (const auto &row : r.confusion) {
        cm.push_back(row);
    }
    nlohmann::json per_class = nlohmann::json::object();
    for (auto a : kAllActions) {
        per_class[std::string{to_string(a)}] = {{"precision", r.precision[index_of(a)]},
                                               {"recall", r.recall[index_of(a)]}};
    }
    nlohmann::json preds = nlohmann::json::array();
    for (const auto &p : r.predictions) {
        preds.push_back({{"trace_id", p.trace_id},
                         {"true", std::string{to_string(p.truth)}},
                         {"predicted", std::string{to_string(p.predicted)}},
                         {"fold", p.fold}});
    }
    nlohmann::json classes = nlohmann::json::array();
    for (auto a : kAllActions) {
        classes.push_back(std::string{to_string(a)});
    }
    return {
        {"folds", r.folds},
        {"accuracy", r.accuracy},
        {"fold_accuracy", r.fold_accuracy},
        {"classes", std::move(classes)},
        {"confusion_matrix", std::move(cm)},
        {"per_class", std::move(per_class)},
        {"predictions", std::move(preds)},
    };
}

std::vector<int> stratified_folds(const std::vector<ActionLabel> &labels, int k, std::uint64_t seed) {
    if (k < 2) {
        throw ClassifierError{ClassifierErrorKind::InvalidArgument, "cross-validation needs k >= 2"};
    }
    std::vector<int> fold(labels.size(), -1);
    std::size_t offset = 0;
    for (auto cls : kAllActions) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == cls) {
                idx.push_back(i);
            }
        }
        if (idx.empty()) {
            continue;
        }
        if (idx.size() < static_cast<std::size_t>(k)) {
            throw ClassifierError{ClassifierErrorKind::TooFewSamples,
                                  "TooFewSamples: class " + std::string{to_string(cls)} + " has " +
                                      std::to_string(idx.size()) + " samples, need at least " + std::to_string(k)};
        }
        Rng rng{derive_seed(seed, kFoldStream, index_of(cls))};
        for (std::size_t i = idx.size() - 1; i > 0; --i) {
            const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i)));
            std::swap(idx[i], idx[j]);
        }
        for (std::size_t j = 0; j < idx.size(); ++j) {
            fold[idx[j]] = static_cast<int>((offset + j) % static_cast<std::size_t>(k));
        }
        offset += idx.size();
    }
    return fold;
}

CVReport cross_validate(const FeatureMatrix &matrix, int k, const GbdtParams &params) {
    return cross_validate(matrix, matrix, k, params);
}

CVReport cross_validate(const FeatureMatrix &train_matrix, const FeatureMatrix &test_matrix, int k,
                        const GbdtParams &params) {
    const std::size_t n = train_matrix.rows.size();
    if (test_matrix.rows.size() != n) {
        throw ClassifierError{ClassifierErrorKind::SchemaMismatch, "train and test matrices differ in row count"};
    }
    std::vector<ActionLabel> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!train_matrix.rows[i].label) {
            throw ClassifierError{ClassifierErrorKind::MissingLabel,
                                  "row '" + train_matrix.rows[i].trace_id + "' has no label"};
        }
        if (test_matrix.rows[i].trace_id != train_matrix.rows[i].trace_id) {
            throw ClassifierError{ClassifierErrorKind::SchemaMismatch, "train and test matrices list different traces"};
        }
        labels[i] = *train_matrix.rows[i].label;
    }
    const auto fold = stratified_folds(labels, k, params.seed);

    CVReport report;
    report.folds = k;
    std::vector<std::vector<ActionLabel>> fold_pred(static_cast<std::size_t>(k));
    std::vector<std::vector<std::size_t>> held(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < n; ++i) {
        held[static_cast<std::size_t>(fold[i])].push_back(i);
    }
    parallel_for(static_cast<std::size_t>(k), [&](std::size_t f) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < n; ++i) {
            if (static_cast<std::size_t>(fold[i]) != f) {
                rows.push_back(i);
            }
        }
        const Model model = train(subset(train_matrix, rows), params);
        for (std::size_t i : held[f]) {
            fold_pred[f].push_back(model.predict(test_matrix.rows[i], test_matrix.schema).label);
        }
    });

    std::size_t correct = 0;
    for (std::size_t f = 0; f < static_cast<std::size_t>(k); ++f) {
        std::size_t fc = 0;
        for (std::size_t j = 0; j < held[f].size(); ++j) {
            const std::size_t i = held[f][j];
            const ActionLabel p = fold_pred[f][j];
            ++report.confusion[index_of(labels[i])][index_of(p)];
            fc += p == labels[i];
            report.predictions.push_back({i, train_matrix.rows[i].trace_id, labels[i], p, static_cast<int>(f)});
        }
        correct += fc;
        report.fold_accuracy.push_back(held[f].empty() ? 0.0
                                                       : static_cast<double>(fc) / static_cast<double>(held[f].size()));
    }
    std::sort(report.predictions.begin(), report.predictions.end(),
              [](const HeldOutPrediction &a, const HeldOutPrediction &b) { return a.row < b.row; });
    report.accuracy = n ? static_cast<double>(correct) / static_cast<double>(n) : 0.0;
    for (std::size_t c = 0; c < kNumActions; ++c) {
        std::size_t row = 0, col = 0;
        for (std::size_t d = 0; d < kNumActions; ++d) {
            row += report.confusion[c][d];
            col += report.confusion[d][c];
        }
        report.recall[c] = row ? static_cast<double>(report.confusion[c][c]) / static_cast<double>(row) : 0.0;
        report.precision[c] = col ? static_cast<double>(report.confusion[c][c]) / static_cast<double>(col) : 0.0;
    }
    return report;
}

} // namespace robofp
