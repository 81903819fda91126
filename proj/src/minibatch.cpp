#include "ssg/minibatch.hpp"

#include "ssg/error.hpp"
#include "ssg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace ssg {

void FanoutSpec::validate() const {
    for (auto c : caps)
        if (c < 1) throw ConfigError("fanout caps must be >= 1");
}

std::size_t FanoutSpec::node_budget(std::size_t seeds) const {
    std::size_t b = seeds;
    for (auto c : caps) b *= c + 1;
    return b;
}

void BatchSpec::validate() const {
    if (labeled_batch < 1) throw ConfigError("batch.labeled must be >= 1");
    if (!(unlabeled_ratio >= 0.0)) throw ConfigError("batch.ratio must be >= 0");
    if (!(aux_weight >= 0.0)) throw ConfigError("batch.aux-weight must be >= 0");
}

namespace {

/// First `k` entries of `pool` after a partial Fisher–Yates shuffle.
std::vector<NodeId> choose(std::vector<NodeId> pool, std::size_t k, Rng& rng) {
    k = std::min(k, pool.size());
    for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + uniform_index(rng, pool.size() - i)]);
    pool.resize(k);
    return pool;
}

}  // namespace

Subgraph sample_neighborhood(const Graph& graph, std::span<const NodeId> seeds, const FanoutSpec& fanout, Rng& rng) {
    fanout.validate();
    Subgraph sg;
    std::unordered_map<NodeId, NodeId> local;
    auto visit = [&](NodeId v) {
        if (v >= graph.num_nodes()) throw IndexError("seed node out of range");
        if (local.emplace(v, static_cast<NodeId>(sg.nodes.size())).second) {
            sg.nodes.push_back(v);
            return true;
        }
        return false;
    };
    std::vector<NodeId> frontier;
    for (NodeId s : seeds)
        if (visit(s)) frontier.push_back(s);
    sg.num_central = sg.nodes.size();

    for (std::size_t cap : fanout.caps) {
        std::vector<NodeId> next;
        for (NodeId u : frontier) {
            auto nb = graph.neighbors(u);
            std::vector<NodeId> picked =
                nb.size() <= cap ? std::vector<NodeId>(nb.begin(), nb.end())
                                 : choose(std::vector<NodeId>(nb.begin(), nb.end()), cap, rng);
            for (NodeId v : picked)
                if (visit(v)) next.push_back(v);
        }
        frontier = std::move(next);
    }

    std::vector<std::size_t> offsets(sg.nodes.size() + 1, 0);
    std::vector<NodeId> cols;
    for (std::size_t k = 0; k < sg.nodes.size(); ++k) {
        std::vector<NodeId> row;
        for (NodeId g : graph.neighbors(sg.nodes[k]))
            if (auto it = local.find(g); it != local.end()) row.push_back(it->second);
        std::sort(row.begin(), row.end());
        cols.insert(cols.end(), row.begin(), row.end());
        offsets[k + 1] = cols.size();
    }
    sg.graph = Graph::from_csr(std::move(offsets), std::move(cols));
    sg.central.assign(sg.nodes.size(), false);
    std::fill(sg.central.begin(), sg.central.begin() + static_cast<std::ptrdiff_t>(sg.num_central), true);
    return sg;
}

SemisupState init_semisup(const SemisupConfig& cfg, std::size_t in_dim, int num_classes, std::uint64_t seed) {
    cfg.batch.validate();
    cfg.fanout.validate();
    if (num_classes < 2) throw ConfigError("semi-supervised training needs at least two classes");
    SemisupState s{init_bgrl(cfg.bgrl, in_dim, seed), num_classes};
    Rng rng = make_rng({seed, 0x4ead});
    s.core.online.add("head.W", glorot_uniform(cfg.bgrl.encoder.output_dim(), static_cast<std::size_t>(num_classes), rng));
    s.core.online.add("head.b", Tensor(1, static_cast<std::size_t>(num_classes)));
    return s;
}

namespace {

MetricsRecord minibatch_step(SemisupState& state, const SemisupConfig& cfg, const Dataset& dataset, Rng& rng,
                             std::uint64_t seed, bool supervised_only) {
    std::vector<NodeId> labeled_pool, unlabeled_pool;
    for (NodeId v = 0; v < dataset.num_nodes(); ++v) {
        if (dataset.splits.train[v] && dataset.labels[v] >= 0) labeled_pool.push_back(v);
        else if (!dataset.splits.train[v]) unlabeled_pool.push_back(v);
    }
    if (labeled_pool.empty()) throw ConfigError("no labeled training nodes for the supervised loss");

    auto centrals = choose(labeled_pool, cfg.batch.labeled_batch, rng);
    const std::size_t n_labeled = centrals.size();
    if (!supervised_only && cfg.batch.unlabeled_ratio > 0.0) {
        const auto n_unl = static_cast<std::size_t>(std::llround(cfg.batch.unlabeled_ratio * static_cast<double>(n_labeled)));
        auto extra = choose(unlabeled_pool, n_unl, rng);
        centrals.insert(centrals.end(), extra.begin(), extra.end());
    }
    const Subgraph sg = sample_neighborhood(dataset.graph, centrals, cfg.fanout, rng);
    const Dataset sub = induced_dataset(dataset, sg.nodes);

    std::vector<NodeId> labeled_rows(n_labeled), central_rows(sg.num_central);
    std::vector<int> targets(n_labeled);
    for (std::size_t k = 0; k < n_labeled; ++k) {
        labeled_rows[k] = static_cast<NodeId>(k);
        targets[k] = sub.labels[k];
    }
    for (std::size_t k = 0; k < sg.num_central; ++k) central_rows[k] = static_cast<NodeId>(k);

    const auto& enc = cfg.bgrl.encoder;
    const bool with_aux = !supervised_only && cfg.batch.aux_weight > 0.0;
    MetricsRecord rec;
    rec.step = state.core.step;
    rec.peak_bytes = measure_peak_activation([&] {
        ag::Tape tape;
        Binding online(tape, state.core.online, true);
        Binding target(tape, state.core.target, false);
        const auto adj = normalize(sub.graph, enc.graph_norm());
        auto h = encoder_forward(enc, online, adj, tape.constant(to_tensor(sub.features)), Mode::train);
        auto logits = ag::add_bias(ag::matmul(ag::gather_rows(h, labeled_rows), online("head.W")), online("head.b"));
        auto loss = ag::softmax_cross_entropy(logits, targets);
        rec.ce = loss.value().item();

        // Views and normalized graphs must outlive backward().
        std::optional<std::pair<View, View>> views;
        std::optional<NormalizedGraph> adj1, adj2;
        if (with_aux) {
            views = make_views(sub, cfg.bgrl.augment, seed, state.core.step);
            adj1 = normalize(views->first.graph, enc.graph_norm());
            adj2 = normalize(views->second.graph, enc.graph_norm());
            ViewInput in1{&*adj1, tape.constant(to_tensor(views->first.features))};
            ViewInput in2{&*adj2, tape.constant(to_tensor(views->second.features))};
            auto terms = bgrl_objective(cfg.bgrl, online, target, in1, in2, central_rows);
            loss = ag::add(loss, ag::scale(terms.loss, cfg.batch.aux_weight));
        }
        rec.loss = loss.value().item();
        if (!std::isfinite(rec.loss)) throw NumericError("non-finite loss at step " + std::to_string(state.core.step));
        tape.backward(loss);
        online.accumulate_grads();
        rec.norm = mean_embedding_norm(h.value());
        rec.spread = h.rows() >= 2 ? embedding_spread(h.value()) : 0.0;
    });
    rec.lr = learning_rate_at(state.core.step, cfg.bgrl.schedule);
    rec.tau = tau_at(state.core.step, cfg.bgrl.schedule);
    state.core.optimizer.step(state.core.online, rec.lr, cfg.bgrl.schedule.weight_decay);
    ema_update(state.core.target, state.core.online, rec.tau);
    ++state.core.step;
    return rec;
}

}  // namespace

MetricsRecord semisup_step(SemisupState& state, const SemisupConfig& cfg, const Dataset& dataset, Rng& rng,
                           std::uint64_t seed) {
    return minibatch_step(state, cfg, dataset, rng, seed, false);
}

MetricsRecord supervised_step(SemisupState& state, const SemisupConfig& cfg, const Dataset& dataset, Rng& rng,
                              std::uint64_t seed) {
    return minibatch_step(state, cfg, dataset, rng, seed, true);
}

double classifier_accuracy(SemisupState& state, const SemisupConfig& cfg, const Dataset& dataset,
                           std::span<const NodeId> nodes) {
    ParamSet enc = state.core.online.subset("enc.");
    Tensor h = encode(cfg.bgrl.encoder, enc, dataset, Mode::eval);
    LinearClassifier head{state.core.online.value("head.W"), state.core.online.value("head.b")};
    std::vector<NodeId> labeled;
    for (NodeId v : nodes)
        if (dataset.labels[v] >= 0) labeled.push_back(v);
    return head.accuracy(h, dataset.labels, labeled);
}

SemisupRun train_semisup(const Dataset& dataset, const SemisupConfig& cfg, std::uint64_t seed, bool supervised_only,
                         std::uint64_t eval_every) {
    SemisupRun run{init_semisup(cfg, dataset.feature_dim(), dataset.num_classes(), seed), {}, {}, 0.0, 0.0};
    Rng rng = make_rng({seed, 0xba7c});
    const auto val = dataset.splits.val_nodes();
    const auto total = cfg.bgrl.schedule.n_total;
    for (std::uint64_t i = 0; i < total; ++i) {
        auto rec = supervised_only ? supervised_step(run.state, cfg, dataset, rng, seed)
                                   : semisup_step(run.state, cfg, dataset, rng, seed);
        if (eval_every > 0 && ((i + 1) % eval_every == 0 || i + 1 == total)) {
            rec.val_accuracy = classifier_accuracy(run.state, cfg, dataset, val);
            run.val_curve.push_back(rec.val_accuracy);
        }
        if (i % cfg.bgrl.metrics_every == 0 || i + 1 == total) run.log.push_back(rec);
    }
    run.final_val_accuracy = classifier_accuracy(run.state, cfg, dataset, val);
    run.final_test_accuracy = classifier_accuracy(run.state, cfg, dataset, dataset.splits.test_nodes());
    return run;
}

}  // namespace ssg
