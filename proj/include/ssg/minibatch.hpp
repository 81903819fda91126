#pragma once

#include "ssg/bgrl.hpp"
#include "ssg/graph.hpp"
#include "ssg/metrics.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace ssg {

struct FanoutSpec {
    /// Neighbor cap per hop; depth is caps.size().
    std::vector<std::size_t> caps{10, 5};

    void validate() const;
    /// seeds · Π(cap + 1): hard upper bound on sampled nodes.
    std::size_t node_budget(std::size_t seeds) const;
    bool operator==(const FanoutSpec&) const = default;
};

struct BatchSpec {
    std::size_t labeled_batch = 256;
    double unlabeled_ratio = 0.0;
    double aux_weight = 1.0;

    void validate() const;
    bool operator==(const BatchSpec&) const = default;
};

/// Node-induced sample around central nodes. Local ids: centrals first, in seed order.
struct Subgraph {
    std::vector<NodeId> nodes;  // local → global
    Graph graph;
    std::vector<bool> central;
    std::size_t num_central = 0;
};

/// Hop-by-hop expansion: every frontier node keeps min(degree, cap) neighbors drawn
/// uniformly without replacement; the union of all reached nodes induces the subgraph.
Subgraph sample_neighborhood(const Graph& graph, std::span<const NodeId> seeds, const FanoutSpec& fanout, Rng& rng);

struct SemisupConfig {
    BgrlConfig bgrl;
    BatchSpec batch;
    FanoutSpec fanout;
};

/// BGRL state whose online set also carries the classifier head ("head.W", "head.b").
struct SemisupState {
    BgrlState core;
    int num_classes = 0;
};

SemisupState init_semisup(const SemisupConfig& cfg, std::size_t in_dim, int num_classes, std::uint64_t seed);

/// Cross-entropy on labeled centrals + aux_weight · BGRL loss over every central node.
/// Centrals are drawn from `rng`; augmentation streams are keyed by (seed, step).
MetricsRecord semisup_step(SemisupState& state, const SemisupConfig& cfg, const Dataset& dataset, Rng& rng,
                           std::uint64_t seed);

/// Cross-entropy only; no unlabeled centrals and no auxiliary term.
MetricsRecord supervised_step(SemisupState& state, const SemisupConfig& cfg, const Dataset& dataset, Rng& rng,
                              std::uint64_t seed);

/// Full-graph eval-mode forward through encoder and head; accuracy on `nodes` (labeled ones only).
double classifier_accuracy(SemisupState& state, const SemisupConfig& cfg, const Dataset& dataset,
                           std::span<const NodeId> nodes);

struct SemisupRun {
    SemisupState state;
    std::vector<MetricsRecord> log;
    std::vector<double> val_curve;
    double final_val_accuracy = 0.0;
    double final_test_accuracy = 0.0;
};

/// n_total steps of semisup_step (or supervised_step), measuring validation accuracy every `eval_every`.
SemisupRun train_semisup(const Dataset& dataset, const SemisupConfig& cfg, std::uint64_t seed, bool supervised_only,
                         std::uint64_t eval_every = 0);

}  // namespace ssg
