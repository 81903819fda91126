#pragma once

#include "ssg/graph.hpp"

#include <cstdint>
#include <utility>

namespace ssg {

struct AugmentationConfig {
    double p_f1 = 0.0;
    double p_f2 = 0.0;
    double p_e1 = 0.0;
    double p_e2 = 0.0;

    void validate() const;
    bool operator==(const AugmentationConfig&) const = default;
};

/// An augmented copy of a dataset's graph and features.
struct View {
    Graph graph;
    FeatureMatrix features;
    std::uint64_t feature_seed = 0;
    std::uint64_t edge_seed = 0;
};

/// Zeroes whole feature columns: one Bernoulli(1 - p_f) keep draw per column, shared by all nodes.
FeatureMatrix mask_features(const FeatureMatrix& features, double p_f, Rng& rng);

/// Drops each undirected edge with probability p_e; both arcs go together.
Graph mask_edges(const Graph& graph, double p_e, Rng& rng);

/// View i draws from the stream keyed by (seed, step, i).
std::pair<View, View> make_views(const Dataset& dataset, const AugmentationConfig& config, std::uint64_t seed,
                                 std::uint64_t step);

}  // namespace ssg
