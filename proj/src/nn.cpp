#include "ssg/nn.hpp"

#include "ssg/error.hpp"

#include <cmath>

namespace ssg {

namespace {

std::string layer(const std::string& prefix, std::size_t l) { return prefix + "l" + std::to_string(l); }

bool has_slope(Activation a) { return a == Activation::prelu; }

void add_norm_params(ParamSet& ps, NormType type, const std::string& name, std::size_t width) {
    if (type == NormType::none) return;
    ps.add(name + ".gamma", Tensor(1, width, 1.0));
    ps.add(name + ".beta", Tensor(1, width, 0.0));
    if (type == NormType::batch) {
        ps.add(name + ".running_mean", Tensor(1, width, 0.0));
        ps.add(name + ".running_var", Tensor(1, width, 1.0));
    }
}

void add_post_params(ParamSet& ps, const EncoderConfig& cfg, const std::string& name, std::size_t width) {
    add_norm_params(ps, cfg.norm, name + ".norm", width);
    if (has_slope(cfg.activation)) ps.add(name + ".prelu", Tensor::scalar(kPreluInit));
}

ag::Var weight(const EncoderConfig& cfg, Binding& params, const std::string& name) {
    ag::Var w = params(name);
    return cfg.weight_standardization ? ag::weight_standardize(w, kNormEps) : w;
}

/// Norm then activation, the ordering used at every layer including the last.
ag::Var post(const EncoderConfig& cfg, Binding& params, const std::string& name, ag::Var h, Mode mode) {
    h = apply_norm(cfg.norm, cfg.norm_decay, params, name + ".norm", h, mode);
    return apply_activation(cfg.activation, params, name, h);
}

void require_norm(const NormalizedGraph& adj, NormKind kind, const char* who) {
    if (adj.kind != kind)
        throw ConfigError(std::string(who) + " expects a " + (kind == NormKind::symmetric ? "symmetric" : "row") +
                          "-normalized graph");
}

}  // namespace

void EncoderConfig::validate() const {
    if (layer_sizes.empty()) throw ConfigError("encoder needs at least one layer");
    for (auto w : layer_sizes)
        if (w == 0) throw ConfigError("encoder layer width must be positive");
    if (!(norm_decay >= 0.0 && norm_decay <= 1.0)) throw ConfigError("norm_decay must lie in [0, 1]");
    if (kind == EncoderKind::gat && gat_heads.size() != layer_sizes.size())
        throw ConfigError("gat_heads must list one head count per layer");
    if (kind == EncoderKind::gat)
        for (auto h : gat_heads)
            if (h == 0) throw ConfigError("gat head count must be positive");
    if (kind == EncoderKind::meanpool_skip) {
        if (layer_sizes.size() != 3) throw ConfigError("meanpool_skip encoder needs exactly 3 layers");
        if (layer_sizes[0] != layer_sizes[1]) throw ConfigError("meanpool_skip hidden layers must share a width");
    }
}

std::size_t EncoderConfig::output_dim() const { return layer_sizes.back(); }

NormKind EncoderConfig::graph_norm() const {
    return kind == EncoderKind::meanpool_skip ? NormKind::row : NormKind::symmetric;
}

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor w(fan_in, fan_out);
    for (auto& v : w.flat()) v = (2.0 * uniform01(rng) - 1.0) * s;
    return w;
}

ParamSet glorot_init(const EncoderConfig& cfg, std::size_t in_dim, std::uint64_t seed, const std::string& prefix) {
    cfg.validate();
    if (in_dim == 0) throw ConfigError("encoder input width must be positive");
    Rng rng = make_rng({seed, 0x9107});
    ParamSet ps;
    const std::size_t layers = cfg.layer_sizes.size();
    switch (cfg.kind) {
        case EncoderKind::gcn: {
            std::size_t in = in_dim;
            for (std::size_t l = 0; l < layers; ++l) {
                const auto out = cfg.layer_sizes[l];
                const auto name = layer(prefix, l);
                ps.add(name + ".W", glorot_uniform(in, out, rng));
                ps.add(name + ".b", Tensor(1, out));
                add_post_params(ps, cfg, name, out);
                in = out;
            }
            break;
        }
        case EncoderKind::meanpool_skip: {
            const auto hidden = cfg.layer_sizes[0];
            std::size_t in = in_dim;
            for (std::size_t l = 0; l < 3; ++l) {
                const auto out = cfg.layer_sizes[l];
                const auto name = layer(prefix, l);
                ps.add(name + ".W", glorot_uniform(in, out, rng));
                ps.add(name + ".b", Tensor(1, out));
                add_post_params(ps, cfg, name, out);
                in = out;
            }
            ps.add(prefix + "skip1.W", glorot_uniform(in_dim, hidden, rng));
            ps.add(prefix + "skip2.W", glorot_uniform(in_dim, hidden, rng));
            break;
        }
        case EncoderKind::gat: {
            std::size_t in = in_dim;
            for (std::size_t l = 0; l < layers; ++l) {
                const auto size = cfg.layer_sizes[l];
                const auto heads = cfg.gat_heads[l];
                const bool last = l + 1 == layers;
                const auto width = last ? size : heads * size;
                const auto name = layer(prefix, l);
                for (std::size_t h = 0; h < heads; ++h) {
                    const auto hn = name + ".h" + std::to_string(h);
                    ps.add(hn + ".W", glorot_uniform(in, size, rng));
                    ps.add(hn + ".a_dst", glorot_uniform(size, 1, rng));
                    ps.add(hn + ".a_src", glorot_uniform(size, 1, rng));
                }
                if (!last) ps.add(name + ".skip.W", glorot_uniform(in, width, rng));
                ps.add(name + ".b", Tensor(1, width));
                add_post_params(ps, cfg, name, width);
                in = width;
            }
            break;
        }
    }
    return ps;
}

void init_mlp(ParamSet& ps, const std::string& prefix, const MlpConfig& cfg, std::uint64_t seed) {
    if (cfg.in == 0 || cfg.hidden == 0 || cfg.out == 0) throw ConfigError("MLP widths must be positive");
    Rng rng = make_rng({seed, 0x31f});
    ps.add(prefix + "l0.W", glorot_uniform(cfg.in, cfg.hidden, rng));
    ps.add(prefix + "l0.b", Tensor(1, cfg.hidden));
    add_norm_params(ps, cfg.norm, prefix + "l0.norm", cfg.hidden);
    if (has_slope(cfg.activation)) ps.add(prefix + "l0.prelu", Tensor::scalar(kPreluInit));
    ps.add(prefix + "l1.W", glorot_uniform(cfg.hidden, cfg.out, rng));
    ps.add(prefix + "l1.b", Tensor(1, cfg.out));
}

Tensor to_tensor(const FeatureMatrix& f) {
    Tensor t(f.rows, f.cols);
    for (std::size_t i = 0; i < f.values.size(); ++i) t[i] = f.values[i];
    return t;
}

ag::Var apply_norm(NormType type, double decay, Binding& params, const std::string& prefix, ag::Var x, Mode mode) {
    switch (type) {
        case NormType::none:
            return x;
        case NormType::layer:
            return ag::layer_norm(x, params(prefix + ".gamma"), params(prefix + ".beta"), kNormEps);
        case NormType::batch: {
            ParamSet& ps = params.params();
            if (mode == Mode::eval)
                return ag::normalize_fixed(x, ps.value(prefix + ".running_mean"), ps.value(prefix + ".running_var"),
                                           params(prefix + ".gamma"), params(prefix + ".beta"), kNormEps);
            ag::BatchStats stats;
            auto y = ag::batch_norm(x, params(prefix + ".gamma"), params(prefix + ".beta"), kNormEps, &stats);
            Tensor& rm = ps.value(prefix + ".running_mean");
            Tensor& rv = ps.value(prefix + ".running_var");
            for (std::size_t j = 0; j < rm.size(); ++j) {
                rm[j] = decay * rm[j] + (1.0 - decay) * stats.mean[j];
                rv[j] = decay * rv[j] + (1.0 - decay) * stats.var[j];
            }
            return y;
        }
    }
    return x;
}

ag::Var apply_activation(Activation act, Binding& params, const std::string& prefix, ag::Var x) {
    switch (act) {
        case Activation::prelu:
            return ag::prelu(x, params(prefix + ".prelu"));
        case Activation::elu:
            return ag::elu(x);
        case Activation::relu:
            return ag::relu(x);
        case Activation::linear:
            return x;
    }
    return x;
}

ag::Var gcn_forward(const EncoderConfig& cfg, Binding& params, const NormalizedGraph& adj, ag::Var x, Mode mode,
                    const std::string& prefix) {
    require_norm(adj, NormKind::symmetric, "gcn encoder");
    ag::Var h = x;
    for (std::size_t l = 0; l < cfg.layer_sizes.size(); ++l) {
        const auto name = layer(prefix, l);
        h = ag::spmm(adj, h);
        h = ag::add_bias(ag::matmul(h, weight(cfg, params, name + ".W")), params(name + ".b"));
        h = post(cfg, params, name, h, mode);
    }
    return h;
}

ag::Var meanpool_skip_forward(const EncoderConfig& cfg, Binding& params, const NormalizedGraph& adj, ag::Var x,
                              Mode mode, const std::string& prefix) {
    require_norm(adj, NormKind::row, "meanpool_skip encoder");
    if (cfg.layer_sizes.size() != 3) throw ConfigError("meanpool_skip encoder needs exactly 3 layers");
    auto mp = [&](std::size_t l, ag::Var in) {
        const auto name = layer(prefix, l);
        auto h = ag::add_bias(ag::matmul(ag::spmm(adj, in), weight(cfg, params, name + ".W")), params(name + ".b"));
        return post(cfg, params, name, h, mode);
    };
    auto h1 = mp(0, x);
    auto skip1 = ag::matmul(x, weight(cfg, params, prefix + "skip1.W"));
    auto h2 = mp(1, ag::add(h1, skip1));
    auto skip2 = ag::matmul(x, weight(cfg, params, prefix + "skip2.W"));
    return mp(2, ag::add(ag::add(h2, h1), skip2));
}

ag::Var gat_forward(const EncoderConfig& cfg, Binding& params, const NormalizedGraph& adj, ag::Var x, Mode mode,
                    const std::string& prefix, AttentionTrace* trace) {
    if (cfg.kind != EncoderKind::gat) throw KindError("gat_forward called with a non-GAT config");
    if (trace) trace->clear();
    ag::Var h = x;
    const std::size_t layers = cfg.layer_sizes.size();
    for (std::size_t l = 0; l < layers; ++l) {
        const auto name = layer(prefix, l);
        const bool last = l + 1 == layers;
        std::vector<ag::Var> heads;
        if (trace) trace->emplace_back();
        for (std::size_t hd = 0; hd < cfg.gat_heads[l]; ++hd) {
            const auto hn = name + ".h" + std::to_string(hd);
            auto wh = ag::matmul(h, weight(cfg, params, hn + ".W"));
            auto e = ag::arc_scores(adj, ag::matmul(wh, params(hn + ".a_dst")), ag::matmul(wh, params(hn + ".a_src")));
            auto alpha = ag::edge_softmax(adj, ag::leaky_relu(e, kGatLeakySlope));
            if (trace) trace->back().push_back(alpha.value());
            heads.push_back(ag::spmm_arcs(adj, alpha, wh));
        }
        ag::Var out = last ? ag::mean_of(heads) : ag::concat_cols(heads);
        if (!last) out = ag::add(out, ag::matmul(h, weight(cfg, params, name + ".skip.W")));
        out = ag::add_bias(out, params(name + ".b"));
        h = post(cfg, params, name, out, mode);
    }
    return h;
}

ag::Var encoder_forward(const EncoderConfig& cfg, Binding& params, const NormalizedGraph& adj, ag::Var x, Mode mode,
                        const std::string& prefix, AttentionTrace* trace) {
    switch (cfg.kind) {
        case EncoderKind::gcn:
            return gcn_forward(cfg, params, adj, x, mode, prefix);
        case EncoderKind::meanpool_skip:
            return meanpool_skip_forward(cfg, params, adj, x, mode, prefix);
        case EncoderKind::gat:
            return gat_forward(cfg, params, adj, x, mode, prefix, trace);
    }
    throw KindError("unknown encoder kind");
}

ag::Var mlp_forward(const MlpConfig& cfg, Binding& params, const std::string& prefix, ag::Var x, Mode mode) {
    auto h = ag::add_bias(ag::matmul(x, params(prefix + "l0.W")), params(prefix + "l0.b"));
    h = apply_norm(cfg.norm, cfg.norm_decay, params, prefix + "l0.norm", h, mode);
    h = apply_activation(cfg.activation, params, prefix + "l0", h);
    return ag::add_bias(ag::matmul(h, params(prefix + "l1.W")), params(prefix + "l1.b"));
}

Tensor encode(const EncoderConfig& cfg, ParamSet& params, const Dataset& dataset, Mode mode, AttentionTrace* trace) {
    ag::Tape tape;
    Binding bind(tape, params, false);
    const auto adj = normalize(dataset.graph, cfg.graph_norm());
    auto x = tape.constant(to_tensor(dataset.features));
    return encoder_forward(cfg, bind, adj, x, mode, "enc.", trace).value();
}

}  // namespace ssg
