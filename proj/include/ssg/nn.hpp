#pragma once

#include "ssg/autograd.hpp"
#include "ssg/graph.hpp"
#include "ssg/params.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ssg {

enum class EncoderKind { gcn, meanpool_skip, gat };
enum class Activation { prelu, elu, relu, linear };
enum class NormType { none, batch, layer };
enum class Mode { train, eval };

inline constexpr double kNormEps = 1e-5;
inline constexpr double kPreluInit = 0.25;
inline constexpr double kGatLeakySlope = 0.2;

struct EncoderConfig {
    EncoderKind kind = EncoderKind::gcn;
    /// Per-layer output widths. For GAT, the per-head width of each layer.
    std::vector<std::size_t> layer_sizes{64, 32};
    Activation activation = Activation::prelu;
    NormType norm = NormType::batch;
    double norm_decay = 0.99;
    std::vector<std::size_t> gat_heads;
    bool weight_standardization = false;

    void validate() const;
    std::size_t output_dim() const;
    /// Normalization the encoder expects from its input graph.
    NormKind graph_norm() const;

    bool operator==(const EncoderConfig&) const = default;
};

struct MlpConfig {
    std::size_t in = 0;
    std::size_t hidden = 0;
    std::size_t out = 0;
    Activation activation = Activation::prelu;
    NormType norm = NormType::none;
    double norm_decay = 0.99;
};

/// Attention coefficients recorded by a GAT forward pass: [layer][head] → (arcs × 1).
using AttentionTrace = std::vector<std::vector<Tensor>>;

/// Glorot-uniform weights, zero biases, PReLU slopes 0.25, unit/zero norm affine terms.
/// All names are prefixed with `prefix` (for instance "enc.").
ParamSet glorot_init(const EncoderConfig& config, std::size_t in_dim, std::uint64_t seed,
                     const std::string& prefix = "enc.");
/// Uniform(−s, s) with s = √(6 / (fan_in + fan_out)).
Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);
void init_mlp(ParamSet& params, const std::string& prefix, const MlpConfig& config, std::uint64_t seed);

Tensor to_tensor(const FeatureMatrix& features);

/// Dispatches on config.kind. `adj` must carry config.graph_norm() weights.
ag::Var encoder_forward(const EncoderConfig& config, Binding& params, const NormalizedGraph& adj, ag::Var x,
                        Mode mode, const std::string& prefix = "enc.", AttentionTrace* trace = nullptr);

ag::Var gcn_forward(const EncoderConfig& config, Binding& params, const NormalizedGraph& adj, ag::Var x, Mode mode,
                    const std::string& prefix = "enc.");
ag::Var meanpool_skip_forward(const EncoderConfig& config, Binding& params, const NormalizedGraph& adj, ag::Var x,
                              Mode mode, const std::string& prefix = "enc.");
ag::Var gat_forward(const EncoderConfig& config, Binding& params, const NormalizedGraph& adj, ag::Var x, Mode mode,
                    const std::string& prefix = "enc.", AttentionTrace* trace = nullptr);

/// Linear → [norm] → activation → Linear. Used for the predictor, projector and nothing else.
ag::Var mlp_forward(const MlpConfig& config, Binding& params, const std::string& prefix, ag::Var x, Mode mode);

/// Norm layer named `prefix` (".gamma", ".beta", ".running_mean", ".running_var").
/// Train-mode batch norm folds batch statistics into the running buffers with `decay`.
ag::Var apply_norm(NormType type, double decay, Binding& params, const std::string& prefix, ag::Var x, Mode mode);
ag::Var apply_activation(Activation act, Binding& params, const std::string& prefix, ag::Var x);

/// Convenience: one full eval-mode forward without gradients.
Tensor encode(const EncoderConfig& config, ParamSet& params, const Dataset& dataset, Mode mode = Mode::eval,
              AttentionTrace* trace = nullptr);

}  // namespace ssg
