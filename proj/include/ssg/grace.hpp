#pragma once

#include "ssg/augment.hpp"
#include "ssg/metrics.hpp"
#include "ssg/nn.hpp"
#include "ssg/optim.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace ssg {

struct GraceConfig {
    /// Negatives per node; std::nullopt means every other node (the exact objective).
    std::optional<std::size_t> k;
    double temperature = 0.5;
    std::size_t projector_hidden = 128;
    /// Largest N allowed with k = all before the step is refused.
    std::size_t memory_cap = 20'000;

    void validate() const;
    bool operator==(const GraceConfig&) const = default;
};

struct GraceTrainConfig {
    EncoderConfig encoder;
    GraceConfig grace;
    AugmentationConfig augment;
    ScheduleConfig schedule;
    std::uint64_t metrics_every = 50;
};

MlpConfig grace_projector_config(const GraceTrainConfig& cfg);

/// A single shared encoder ("enc.") plus the projector ("proj.").
struct GraceState {
    ParamSet params;
    AdamW optimizer;
    std::uint64_t step = 0;
};

GraceState init_grace(const GraceTrainConfig& cfg, std::size_t in_dim, std::uint64_t seed);

using NegativeTable = std::vector<NodeId, TrackingAllocator<NodeId>>;

/// Effective k for `n` nodes: all others for nullopt, otherwise min(k, n - 1) (warns on clamp).
std::size_t effective_k(const GraceConfig& cfg, std::size_t n);

/// Row i lists k distinct nodes j != i, uniform without replacement. n*k entries.
NegativeTable sample_negatives(std::size_t n, std::size_t k, Rng& rng);

/// All j != i for every i, in increasing order.
NegativeTable all_negatives(std::size_t n);

/// Symmetrized InfoNCE over cosine similarities, (L(U,V) + L(V,U)) / 2, on the given tape.
/// `negatives` must stay alive until backward() has run.
ag::Var grace_objective(ag::Var u, ag::Var v, const NegativeTable& negatives, std::size_t k, double temperature);

/// Scalar loss for fixed embeddings; negatives drawn from `rng` unless k is all.
double grace_loss(const Tensor& u, const Tensor& v, const GraceConfig& cfg, Rng& rng);

/// Both views through the shared encoder and projector, InfoNCE, one AdamW step.
/// Throws RefusedError when k is all and N exceeds memory_cap.
MetricsRecord grace_update_step(GraceState& state, const GraceTrainConfig& cfg, const Dataset& dataset,
                                std::uint64_t seed);

struct GraceRun {
    GraceState state;
    std::vector<MetricsRecord> log;
};

GraceRun train_grace(const Dataset& dataset, const GraceTrainConfig& cfg, std::uint64_t seed);

}  // namespace ssg
