#include "ssg/augment.hpp"

#include "ssg/error.hpp"

namespace ssg {

void AugmentationConfig::validate() const {
    for (double p : {p_f1, p_f2, p_e1, p_e2})
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("augmentation probabilities must lie in [0, 1]");
}

FeatureMatrix mask_features(const FeatureMatrix& features, double p_f, Rng& rng) {
    if (!(p_f >= 0.0 && p_f <= 1.0)) throw ConfigError("p_f must lie in [0, 1]");
    std::vector<bool> keep(features.cols);
    for (std::size_t f = 0; f < features.cols; ++f) keep[f] = bernoulli(rng, 1.0 - p_f);
    FeatureMatrix out = features;
    for (std::size_t i = 0; i < out.rows; ++i)
        for (std::size_t f = 0; f < out.cols; ++f)
            if (!keep[f]) out(i, f) = 0.0f;
    return out;
}

Graph mask_edges(const Graph& graph, double p_e, Rng& rng) {
    if (!(p_e >= 0.0 && p_e <= 1.0)) throw ConfigError("p_e must lie in [0, 1]");
    std::vector<Edge> kept;
    for (const auto& e : graph.undirected_edges())
        if (bernoulli(rng, 1.0 - p_e)) kept.push_back(e);
    return Graph::from_edges(graph.num_nodes(), kept);
}

std::pair<View, View> make_views(const Dataset& dataset, const AugmentationConfig& config, std::uint64_t seed,
                                 std::uint64_t step) {
    config.validate();
    auto build = [&](std::uint64_t index, double p_f, double p_e) {
        View v;
        v.feature_seed = derive_seed({seed, step, index, 0xf});
        v.edge_seed = derive_seed({seed, step, index, 0xe});
        Rng frng(v.feature_seed);
        Rng erng(v.edge_seed);
        v.features = p_f == 0.0 ? dataset.features : mask_features(dataset.features, p_f, frng);
        v.graph = p_e == 0.0 ? dataset.graph : mask_edges(dataset.graph, p_e, erng);
        return v;
    };
    return {build(1, config.p_f1, config.p_e1), build(2, config.p_f2, config.p_e2)};
}

}  // namespace ssg
