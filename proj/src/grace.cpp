#include "ssg/grace.hpp"

#include "ssg/bgrl.hpp"
#include "ssg/error.hpp"
#include "ssg/eval.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ssg {

void GraceConfig::validate() const {
    if (k && *k < 2) throw ConfigError("grace.k must be >= 2 or 'all'");
    if (!(temperature > 0.0)) throw ConfigError("grace.temperature must be > 0");
    if (projector_hidden == 0) throw ConfigError("grace projector width must be positive");
}

MlpConfig grace_projector_config(const GraceTrainConfig& cfg) {
    const auto d = cfg.encoder.output_dim();
    return MlpConfig{d, cfg.grace.projector_hidden, d, Activation::elu, NormType::none, cfg.encoder.norm_decay};
}

GraceState init_grace(const GraceTrainConfig& cfg, std::size_t in_dim, std::uint64_t seed) {
    cfg.grace.validate();
    cfg.augment.validate();
    cfg.schedule.validate();
    GraceState s;
    s.params = glorot_init(cfg.encoder, in_dim, derive_seed({seed, 1}));
    init_mlp(s.params, "proj.", grace_projector_config(cfg), derive_seed({seed, 3}));
    return s;
}

std::size_t effective_k(const GraceConfig& cfg, std::size_t n) {
    const std::size_t others = n == 0 ? 0 : n - 1;
    if (!cfg.k) return others;
    if (*cfg.k > others) {
        spdlog::warn("grace: k={} exceeds N-1={}, clamping", *cfg.k, others);
        return others;
    }
    return *cfg.k;
}

NegativeTable sample_negatives(std::size_t n, std::size_t k, Rng& rng) {
    if (n > 0 && k > n - 1) throw ConfigError("cannot sample more negatives than N-1");
    NegativeTable table(n * k);
    std::vector<NodeId> picked;
    picked.reserve(k);
    std::vector<char> taken(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        // Floyd's algorithm over the n-1 candidates; index x maps to node x (x < i) or x+1.
        picked.clear();
        const std::size_t m = n - 1;
        for (std::size_t j = m - k; j < m; ++j) {
            const auto t = static_cast<NodeId>(uniform_index(rng, j + 1));
            const NodeId chosen = taken[t] ? static_cast<NodeId>(j) : t;
            taken[chosen] = 1;
            picked.push_back(chosen);
        }
        for (std::size_t q = 0; q < k; ++q) {
            const NodeId x = picked[q];
            taken[x] = 0;
            table[i * k + q] = x < i ? x : x + 1;
        }
    }
    return table;
}

NegativeTable all_negatives(std::size_t n) {
    const std::size_t k = n == 0 ? 0 : n - 1;
    NegativeTable table(n * k);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t x = 0; x < k; ++x) table[i * k + x] = static_cast<NodeId>(x < i ? x : x + 1);
    return table;
}

ag::Var grace_objective(ag::Var u, ag::Var v, const NegativeTable& negatives, std::size_t k, double temperature) {
    auto un = ag::row_normalize(u, kCosineEps);
    auto vn = ag::row_normalize(v, kCosineEps);
    auto a = ag::info_nce(un, vn, negatives, k, temperature);
    auto b = ag::info_nce(vn, un, negatives, k, temperature);
    return ag::scale(ag::add(a, b), 0.5);
}

double grace_loss(const Tensor& u, const Tensor& v, const GraceConfig& cfg, Rng& rng) {
    cfg.validate();
    const std::size_t k = effective_k(cfg, u.rows());
    const NegativeTable neg = cfg.k ? sample_negatives(u.rows(), k, rng) : all_negatives(u.rows());
    ag::Tape tape;
    return grace_objective(tape.constant(u), tape.constant(v), neg, k, cfg.temperature).value().item();
}

MetricsRecord grace_update_step(GraceState& state, const GraceTrainConfig& cfg, const Dataset& dataset,
                                std::uint64_t seed) {
    const std::size_t n = dataset.num_nodes();
    if (!cfg.grace.k && n > cfg.grace.memory_cap)
        throw RefusedError("grace with k=all on N=" + std::to_string(n) + " exceeds the memory cap of " +
                           std::to_string(cfg.grace.memory_cap) + " nodes (quadratic negatives); use a finite k");
    MetricsRecord rec;
    rec.step = state.step;
    const auto proj = grace_projector_config(cfg);
    rec.peak_bytes = measure_peak_activation([&] {
        auto [view1, view2] = make_views(dataset, cfg.augment, seed, state.step);
        const auto adj1 = normalize(view1.graph, cfg.encoder.graph_norm());
        const auto adj2 = normalize(view2.graph, cfg.encoder.graph_norm());
        const std::size_t k = effective_k(cfg.grace, n);
        Rng neg_rng = make_rng({seed, state.step, 0x9e9});
        const NegativeTable neg = cfg.grace.k ? sample_negatives(n, k, neg_rng) : all_negatives(n);

        ag::Tape tape;
        Binding params(tape, state.params, true);
        auto h1 = encoder_forward(cfg.encoder, params, adj1, tape.constant(to_tensor(view1.features)), Mode::train);
        auto h2 = encoder_forward(cfg.encoder, params, adj2, tape.constant(to_tensor(view2.features)), Mode::train);
        auto u = mlp_forward(proj, params, "proj.", h1, Mode::train);
        auto v = mlp_forward(proj, params, "proj.", h2, Mode::train);
        auto loss = grace_objective(u, v, neg, k, cfg.grace.temperature);
        rec.loss = loss.value().item();
        if (!std::isfinite(rec.loss)) throw NumericError("non-finite GRACE loss at step " + std::to_string(state.step));
        tape.backward(loss);
        params.accumulate_grads();
        rec.norm = mean_embedding_norm(h1.value());
        rec.spread = n >= 2 ? embedding_spread(h1.value()) : 0.0;
    });
    rec.lr = learning_rate_at(state.step, cfg.schedule);
    state.optimizer.step(state.params, rec.lr, cfg.schedule.weight_decay);
    ++state.step;
    state.params.step = state.step;
    return rec;
}

GraceRun train_grace(const Dataset& dataset, const GraceTrainConfig& cfg, std::uint64_t seed) {
    GraceRun run{init_grace(cfg, dataset.feature_dim(), seed), {}};
    const auto total = cfg.schedule.n_total;
    for (std::uint64_t i = 0; i < total; ++i) {
        auto rec = grace_update_step(run.state, cfg, dataset, seed);
        if (i % cfg.metrics_every == 0 || i + 1 == total) run.log.push_back(rec);
    }
    return run;
}

}  // namespace ssg
