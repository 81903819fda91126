#include "ssg/bgrl.hpp"

#include "ssg/error.hpp"
#include "ssg/eval.hpp"

#include <cmath>

namespace ssg {

void BgrlConfig::validate() const {
    encoder.validate();
    augment.validate();
    schedule.validate();
    if (predictor_hidden == 0) throw ConfigError("predictor hidden width must be positive");
    if (projector && projector_hidden == 0) throw ConfigError("projector hidden width must be positive");
    if (metrics_every == 0) throw ConfigError("metrics_every must be positive");
}

MlpConfig predictor_config(const BgrlConfig& cfg) {
    const auto d = cfg.encoder.output_dim();
    return MlpConfig{d, cfg.predictor_hidden, d, Activation::prelu, cfg.encoder.norm, cfg.encoder.norm_decay};
}

MlpConfig projector_config(const BgrlConfig& cfg) {
    const auto d = cfg.encoder.output_dim();
    return MlpConfig{d, cfg.projector_hidden, d, Activation::prelu, cfg.encoder.norm, cfg.encoder.norm_decay};
}

BgrlState init_bgrl(const BgrlConfig& cfg, std::size_t in_dim, std::uint64_t seed) {
    cfg.validate();
    BgrlState s;
    s.online = glorot_init(cfg.encoder, in_dim, derive_seed({seed, 1}));
    s.target = glorot_init(cfg.encoder, in_dim, derive_seed({seed, 2}));
    if (cfg.projector) {
        init_mlp(s.online, "proj.", projector_config(cfg), derive_seed({seed, 3}));
        init_mlp(s.target, "proj.", projector_config(cfg), derive_seed({seed, 4}));
    }
    init_mlp(s.online, "pred.", predictor_config(cfg), derive_seed({seed, 5}));
    return s;
}

double bgrl_loss(const Tensor& z, const Tensor& h) {
    ag::Tape tape;
    return ag::bgrl_cosine_loss(tape.constant(z), tape.constant(h), kCosineEps).value().item();
}

void ema_update(ParamSet& target, const ParamSet& online, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in [0, 1]");
    for (const auto& [name, p] : target) {
        if (!online.contains(name)) throw StructuralError("EMA: online set lacks '" + name + "'");
        if (!online.at(name).value.same_shape(p.value)) throw StructuralError("EMA: shape mismatch for '" + name + "'");
    }
    for (auto& [name, p] : target) {
        const Tensor& theta = online.at(name).value;
        for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] = tau * p.value[i] + (1.0 - tau) * theta[i];
    }
}

BgrlTerms bgrl_objective(const BgrlConfig& cfg, Binding& online, Binding& target, const ViewInput& v1,
                         const ViewInput& v2, std::span<const NodeId> rows) {
    const auto pred_cfg = predictor_config(cfg);
    const auto proj_cfg = projector_config(cfg);
    auto represent = [&](Binding& b, const ViewInput& v, Mode mode) {
        auto h = encoder_forward(cfg.encoder, b, *v.adj, v.x, mode);
        auto p = cfg.projector ? mlp_forward(proj_cfg, b, "proj.", h, mode) : h;
        return std::pair{h, p};
    };
    auto select = [&](ag::Var m) { return rows.empty() ? m : ag::gather_rows(m, rows); };

    auto [h1, p1] = represent(online, v1, Mode::train);
    auto [h2, p2] = represent(online, v2, Mode::train);
    auto z1 = mlp_forward(pred_cfg, online, "pred.", p1, Mode::train);
    auto z2 = mlp_forward(pred_cfg, online, "pred.", p2, Mode::train);
    // Target side runs its norms in eval mode and is bound as constants.
    auto t1 = represent(target, v1, Mode::eval).second;
    auto t2 = represent(target, v2, Mode::eval).second;

    auto a = ag::bgrl_cosine_loss(select(z1), select(t2), kCosineEps);
    auto b = ag::bgrl_cosine_loss(select(z2), select(t1), kCosineEps);
    return {ag::scale(ag::add(a, b), 0.5), h1};
}

MetricsRecord bgrl_update_step(BgrlState& state, const BgrlConfig& cfg, const Dataset& dataset, std::uint64_t seed) {
    if (state.step >= cfg.schedule.n_total && cfg.schedule.n_total > 0)
        throw ConfigError("bgrl_update_step past n_total");
    MetricsRecord rec;
    rec.step = state.step;
    rec.peak_bytes = measure_peak_activation([&] {
        auto [view1, view2] = make_views(dataset, cfg.augment, seed, state.step);
        const auto adj1 = normalize(view1.graph, cfg.encoder.graph_norm());
        const auto adj2 = normalize(view2.graph, cfg.encoder.graph_norm());
        ag::Tape tape;
        Binding online(tape, state.online, true);
        Binding target(tape, state.target, false);
        ViewInput in1{&adj1, tape.constant(to_tensor(view1.features))};
        ViewInput in2{&adj2, tape.constant(to_tensor(view2.features))};
        auto terms = bgrl_objective(cfg, online, target, in1, in2);
        rec.loss = terms.loss.value().item();
        if (!std::isfinite(rec.loss))
            throw NumericError("non-finite BGRL loss at step " + std::to_string(state.step));
        tape.backward(terms.loss);
        online.accumulate_grads();
        target.accumulate_grads();
        const Tensor& h = terms.online_h.value();
        rec.norm = mean_embedding_norm(h);
        rec.spread = h.rows() >= 2 ? embedding_spread(h) : 0.0;
    });
    rec.lr = learning_rate_at(state.step, cfg.schedule);
    rec.tau = tau_at(state.step, cfg.schedule);
    state.optimizer.step(state.online, rec.lr, cfg.schedule.weight_decay);
    ema_update(state.target, state.online, rec.tau);
    ++state.step;
    state.online.step = state.target.step = state.step;
    return rec;
}

BgrlRun train_bgrl(const Dataset& dataset, const BgrlConfig& cfg, std::uint64_t seed, const MetricsSink& sink) {
    BgrlRun run{init_bgrl(cfg, dataset.feature_dim(), seed), {}};
    const auto total = cfg.schedule.n_total;
    for (std::uint64_t i = 0; i < total; ++i) {
        auto rec = bgrl_update_step(run.state, cfg, dataset, seed);
        if (i % cfg.metrics_every == 0 || i + 1 == total) {
            run.log.push_back(rec);
            if (sink) sink(rec);
        }
    }
    return run;
}

}  // namespace ssg
