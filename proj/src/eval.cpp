#include "ssg/eval.hpp"

#include "ssg/error.hpp"

#include <ceres/ceres.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace ssg {

// ---------------------------------------------------------------------------
// Diagnostics

double mean_embedding_norm(const Tensor& h) {
    if (h.rows() == 0) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < h.rows(); ++i) {
        double s = 0.0;
        for (double v : h.row(i)) s += v * v;
        total += std::sqrt(s);
    }
    return total / static_cast<double>(h.rows());
}

double embedding_spread(const Tensor& h) {
    if (h.rows() < 2) throw ShapeError("embedding_spread needs at least two rows");
    const double norm = mean_embedding_norm(h);
    if (norm == 0.0) {
        spdlog::warn("embedding_spread: all-zero embeddings, spread defined as 0");
        return 0.0;
    }
    const double n = static_cast<double>(h.rows());
    double sq = 0.0;
    for (std::size_t j = 0; j < h.cols(); ++j) {
        double mu = 0.0;
        for (std::size_t i = 0; i < h.rows(); ++i) mu += h(i, j);
        mu /= n;
        double var = 0.0;
        for (std::size_t i = 0; i < h.rows(); ++i) var += (h(i, j) - mu) * (h(i, j) - mu);
        sq += var / n;
    }
    return std::sqrt(sq) / norm;
}

// ---------------------------------------------------------------------------
// Frozen evaluation

Tensor embed_frozen(const EncoderConfig& config, const ParamSet& params, const Dataset& dataset) {
    ParamSet enc = params.subset("enc.");
    if (enc.size() == 0) throw StructuralError("checkpoint holds no encoder ('enc.') parameters");
    // First-layer and skip projections read the raw features.
    for (const auto& [name, p] : enc) {
        const bool first_layer = name.rfind("enc.l0.", 0) == 0 && name.size() > 2 && name.substr(name.size() - 2) == ".W";
        if ((first_layer || name.rfind("enc.skip", 0) == 0) && p.value.rows() != dataset.feature_dim())
            throw ShapeError("checkpoint expects feature width " + std::to_string(p.value.rows()) + ", dataset has " +
                             std::to_string(dataset.feature_dim()));
    }
    Tensor h = encode(config, enc, dataset, Mode::eval);
    std::size_t zero_rows = 0;
    for (std::size_t i = 0; i < h.rows(); ++i) {
        double s = 0.0;
        for (double v : h.row(i)) s += v * v;
        if (s == 0.0) {
            ++zero_rows;
            continue;
        }
        const double inv = 1.0 / std::sqrt(s);
        for (double& v : h.row(i)) v *= inv;
    }
    if (zero_rows > 0) spdlog::warn("embed_frozen: {} all-zero embedding rows left unnormalized", zero_rows);
    return h;
}

std::vector<double> ProbeConfig::effective_grid() const {
    if (!grid.empty()) return grid;
    std::vector<double> g;
    const int stride = mode == ProbeMode::grid_full ? 1 : 2;
    for (int e = -10; e <= 10; e += stride) g.push_back(std::ldexp(1.0, e));
    return g;
}

std::vector<int> LinearClassifier::predict(const Tensor& x) const {
    Tensor logits = matmul(x, weights);
    std::vector<int> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto r = logits.row(i);
        std::size_t best = 0;
        for (std::size_t c = 0; c < r.size(); ++c)
            if (r[c] + bias[c] > r[best] + bias[best]) best = c;
        out[i] = static_cast<int>(best);
    }
    return out;
}

double LinearClassifier::accuracy(const Tensor& x, std::span<const int> labels, std::span<const NodeId> rows) const {
    if (rows.empty()) return 0.0;
    const auto pred = predict(x);
    std::size_t hit = 0;
    for (NodeId r : rows) hit += pred[r] == labels[r] ? 1 : 0;
    return static_cast<double>(hit) / static_cast<double>(rows.size());
}

namespace {

/// Mean cross-entropy over `rows` plus 0.5·l2·‖W‖², with gradient, for flat [W (D×C) | b (C)].
double logistic_objective(const Tensor& x, std::span<const int> labels, std::span<const NodeId> rows,
                          std::size_t classes, double l2, const double* theta, double* grad) {
    const std::size_t d = x.cols();
    const double* w = theta;
    const double* b = theta + d * classes;
    if (grad) std::fill(grad, grad + d * classes + classes, 0.0);
    std::vector<double> logit(classes);
    double loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(rows.size());
    for (NodeId r : rows) {
        const auto xi = x.row(r);
        for (std::size_t c = 0; c < classes; ++c) logit[c] = b[c];
        for (std::size_t j = 0; j < d; ++j) {
            if (xi[j] == 0.0) continue;
            for (std::size_t c = 0; c < classes; ++c) logit[c] += xi[j] * w[j * classes + c];
        }
        const double mx = *std::max_element(logit.begin(), logit.end());
        double z = 0.0;
        for (double l : logit) z += std::exp(l - mx);
        const int y = labels[r];
        loss += (mx + std::log(z) - logit[static_cast<std::size_t>(y)]) * inv_n;
        if (!grad) continue;
        for (std::size_t c = 0; c < classes; ++c) {
            const double delta = (std::exp(logit[c] - mx) / z - (static_cast<int>(c) == y ? 1.0 : 0.0)) * inv_n;
            grad[d * classes + c] += delta;
            for (std::size_t j = 0; j < d; ++j) grad[j * classes + c] += delta * xi[j];
        }
    }
    for (std::size_t k = 0; k < d * classes; ++k) {
        loss += 0.5 * l2 * w[k] * w[k];
        if (grad) grad[k] += l2 * w[k];
    }
    return loss;
}

class LogisticCost final : public ceres::FirstOrderFunction {
public:
    LogisticCost(const Tensor& x, std::span<const int> labels, std::span<const NodeId> rows, std::size_t classes,
                 double l2)
        : x_(x), labels_(labels), rows_(rows), classes_(classes), l2_(l2) {}

    bool Evaluate(const double* parameters, double* cost, double* gradient) const override {
        cost[0] = logistic_objective(x_, labels_, rows_, classes_, l2_, parameters, gradient);
        return std::isfinite(cost[0]);
    }
    int NumParameters() const override { return static_cast<int>((x_.cols() + 1) * classes_); }

private:
    const Tensor& x_;
    std::span<const int> labels_;
    std::span<const NodeId> rows_;
    std::size_t classes_;
    double l2_;
};

LinearClassifier unpack(const std::vector<double>& theta, std::size_t d, std::size_t classes) {
    LinearClassifier m{Tensor(d, classes), Tensor(1, classes)};
    std::copy(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(d * classes), m.weights.data());
    std::copy(theta.begin() + static_cast<std::ptrdiff_t>(d * classes), theta.end(), m.bias.data());
    return m;
}

void check_rows(std::span<const int> labels, std::span<const NodeId> rows, int num_classes) {
    if (rows.empty()) throw DegenerateError("no training rows for the linear classifier");
    for (NodeId r : rows)
        if (r >= labels.size() || labels[r] < 0 || labels[r] >= num_classes)
            throw IndexError("training row without a valid label");
}

}  // namespace

LinearClassifier fit_logistic(const Tensor& x, std::span<const int> labels, std::span<const NodeId> rows,
                              int num_classes, double inverse_reg, double gradient_tolerance, int max_iterations) {
    check_rows(labels, rows, num_classes);
    if (!(inverse_reg > 0.0)) throw ConfigError("inverse regularization must be > 0");
    const std::size_t classes = static_cast<std::size_t>(num_classes);
    const double l2 = 1.0 / (inverse_reg * static_cast<double>(rows.size()));
    std::vector<double> theta((x.cols() + 1) * classes, 0.0);
    ceres::GradientProblem problem(new LogisticCost(x, labels, rows, classes, l2));
    ceres::GradientProblemSolver::Options options;
    options.line_search_direction_type = ceres::LBFGS;
    options.logging_type = ceres::SILENT;
    options.gradient_tolerance = gradient_tolerance;
    options.function_tolerance = 1e-14;
    options.parameter_tolerance = 1e-14;
    options.max_num_iterations = max_iterations;
    ceres::GradientProblemSolver::Summary summary;
    ceres::Solve(options, problem, theta.data(), &summary);
    return unpack(theta, x.cols(), classes);
}

LinearClassifier fit_logistic_gd(const Tensor& x, std::span<const int> labels, std::span<const NodeId> rows,
                                 int num_classes, double weight_decay, int steps, double lr) {
    check_rows(labels, rows, num_classes);
    const std::size_t classes = static_cast<std::size_t>(num_classes);
    const std::size_t d = x.cols();
    const std::size_t np = (d + 1) * classes;
    std::vector<double> theta(np, 0.0), grad(np), m(np, 0.0), v(np, 0.0);
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    for (int t = 1; t <= steps; ++t) {
        logistic_objective(x, labels, rows, classes, 0.0, theta.data(), grad.data());
        const double bc1 = 1.0 - std::pow(b1, t), bc2 = 1.0 - std::pow(b2, t);
        for (std::size_t k = 0; k < np; ++k) {
            if (k < d * classes) theta[k] -= lr * weight_decay * theta[k];
            m[k] = b1 * m[k] + (1 - b1) * grad[k];
            v[k] = b2 * v[k] + (1 - b2) * grad[k] * grad[k];
            theta[k] -= lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + eps);
        }
    }
    return unpack(theta, d, classes);
}

ProbeResult linear_probe(const Tensor& embeddings, std::span<const int> labels, const SplitMask& splits,
                         const ProbeConfig& config) {
    if (labels.size() != embeddings.rows() || splits.size() != embeddings.rows())
        throw ShapeError("linear_probe: embeddings, labels and splits disagree on N");
    auto labeled = [&](const std::vector<NodeId>& nodes) {
        std::vector<NodeId> out;
        for (NodeId v : nodes)
            if (labels[v] >= 0) out.push_back(v);
        return out;
    };
    const auto train = labeled(splits.train_nodes());
    const auto val = labeled(splits.val_nodes());
    const auto test = labeled(splits.test_nodes());
    std::set<int> classes_seen;
    int num_classes = 0;
    for (int y : labels) num_classes = std::max(num_classes, y + 1);
    for (NodeId v : train) classes_seen.insert(labels[v]);
    if (classes_seen.size() < 2) throw DegenerateError("linear probe needs at least two classes in the train split");

    ProbeResult best;
    bool have = false;
    for (double reg : config.effective_grid()) {
        const LinearClassifier clf =
            config.mode == ProbeMode::grid_full
                ? fit_logistic(embeddings, labels, train, num_classes, reg, config.gradient_tolerance,
                               config.max_iterations)
                : fit_logistic_gd(embeddings, labels, train, num_classes, reg, config.gd_steps, config.gd_lr);
        ProbeResult r{clf.accuracy(embeddings, labels, train), clf.accuracy(embeddings, labels, val),
                      clf.accuracy(embeddings, labels, test), reg};
        if (!have || r.val_accuracy > best.val_accuracy) {
            best = r;
            have = true;
        }
    }
    return best;
}

ProbeResult random_init_baseline(const EncoderConfig& config, const Dataset& dataset, const ProbeConfig& probe,
                                 std::uint64_t seed) {
    const ParamSet params = glorot_init(config, dataset.feature_dim(), seed);
    return linear_probe(embed_frozen(config, params, dataset), dataset.labels, dataset.splits, probe);
}

// ---------------------------------------------------------------------------
// Attention

AttentionEntropy attention_entropy_from_trace(const AttentionTrace& trace, const NormalizedGraph& adj,
                                              std::span<const NodeId> nodes, std::size_t bins) {
    AttentionEntropy out;
    out.nodes.assign(nodes.begin(), nodes.end());
    std::size_t maps = 0;
    for (const auto& l : trace) maps += l.size();
    if (maps == 0) throw KindError("attention trace is empty");
    for (NodeId i : nodes) {
        const std::size_t b = adj.row_offsets[i], e = adj.row_offsets[i + 1];
        double mean_h = 0.0;
        for (const auto& l : trace)
            for (const auto& alpha : l) {
                double h = 0.0;
                for (std::size_t k = b; k < e; ++k)
                    if (alpha[k] > 0.0) h -= alpha[k] * std::log(alpha[k]);
                mean_h += h;
            }
        mean_h /= static_cast<double>(maps);
        out.values.push_back(std::min(0.0, mean_h - std::log(static_cast<double>(e - b))));
    }
    out.counts.assign(bins, 0);
    if (out.values.empty() || bins == 0) return out;
    out.lo = *std::min_element(out.values.begin(), out.values.end());
    out.hi = 0.0;
    if (out.lo == out.hi) out.lo = -1.0;
    const double width = (out.hi - out.lo) / static_cast<double>(bins);
    for (double v : out.values) {
        auto bin = static_cast<std::size_t>((v - out.lo) / width);
        out.counts[std::min(bin, bins - 1)]++;
    }
    return out;
}

AttentionEntropy attention_entropy_histogram(const EncoderConfig& config, const ParamSet& params,
                                             const Dataset& dataset, std::span<const NodeId> nodes, std::size_t bins) {
    if (config.kind != EncoderKind::gat) throw KindError("attention entropy requires a GAT encoder");
    ParamSet enc = params.subset("enc.");
    AttentionTrace trace;
    encode(config, enc, dataset, Mode::eval, &trace);
    const auto adj = normalize(dataset.graph, config.graph_norm());
    std::vector<NodeId> chosen(nodes.begin(), nodes.end());
    if (chosen.empty()) chosen = dataset.splits.train_nodes();
    return attention_entropy_from_trace(trace, adj, chosen, bins);
}

// ---------------------------------------------------------------------------
// Cost model

double predict_cost(CostMethod method, double n, double m, const CostModel& c) {
    switch (method) {
        case CostMethod::bgrl:
            return 6.0 * c.c_encoder * (m + n) + 4.0 * c.c_prediction * n + c.c_method * n;
        case CostMethod::grace:
            return 4.0 * c.c_encoder * (m + n) + 4.0 * c.c_projection * n + c.c_method * n * n;
    }
    return 0.0;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw ShapeError("loglog_slope needs two or more paired points");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace ssg
