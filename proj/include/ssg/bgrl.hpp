#pragma once

#include "ssg/augment.hpp"
#include "ssg/graph.hpp"
#include "ssg/metrics.hpp"
#include "ssg/nn.hpp"
#include "ssg/optim.hpp"
#include "ssg/params.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace ssg {

struct BgrlConfig {
    EncoderConfig encoder;
    std::size_t predictor_hidden = 512;
    /// Optional projector between encoder and predictor (off by default).
    bool projector = false;
    std::size_t projector_hidden = 512;
    AugmentationConfig augment;
    ScheduleConfig schedule;
    std::uint64_t metrics_every = 50;

    void validate() const;
};

MlpConfig predictor_config(const BgrlConfig& cfg);
MlpConfig projector_config(const BgrlConfig& cfg);

/// Online parameters hold "enc.", "pred." (and "proj."); the target holds the same
/// "enc." (and "proj.") names and never accumulates gradient.
struct BgrlState {
    ParamSet online;
    ParamSet target;
    AdamW optimizer;
    std::uint64_t step = 0;
};

/// Online and target encoders come from independent draws keyed off `seed`.
BgrlState init_bgrl(const BgrlConfig& cfg, std::size_t in_dim, std::uint64_t seed);

inline constexpr double kCosineEps = 1e-8;

/// -(2/N) Σ_i cos(z_i, h_i), with norms floored at 1e-8. Range [-2, 2].
double bgrl_loss(const Tensor& z, const Tensor& h);

/// φ ← τφ + (1-τ)θ over every target entry (running statistics included).
void ema_update(ParamSet& target, const ParamSet& online, double tau);

struct ViewInput {
    const NormalizedGraph* adj = nullptr;
    ag::Var x;
};

struct BgrlTerms {
    ag::Var loss;      // symmetrized: mean of the two directional losses
    ag::Var online_h;  // online embedding of the first view
};

/// Records the symmetrized cross-view prediction loss on `online`'s tape.
/// When `rows` is non-empty the loss only covers those rows.
BgrlTerms bgrl_objective(const BgrlConfig& cfg, Binding& online, Binding& target, const ViewInput& v1,
                         const ViewInput& v2, std::span<const NodeId> rows = {});

/// One full-graph update: views, loss, AdamW with η(step), EMA with τ(step), step += 1.
MetricsRecord bgrl_update_step(BgrlState& state, const BgrlConfig& cfg, const Dataset& dataset, std::uint64_t seed);

using MetricsSink = std::function<void(const MetricsRecord&)>;

struct BgrlRun {
    BgrlState state;
    std::vector<MetricsRecord> log;
};

/// Runs schedule.n_total steps; logs every metrics_every steps and at the last step.
BgrlRun train_bgrl(const Dataset& dataset, const BgrlConfig& cfg, std::uint64_t seed, const MetricsSink& sink = {});

}  // namespace ssg
