#pragma once

#include "ssg/graph.hpp"
#include "ssg/rng.hpp"
#include "ssg/tensor.hpp"

#include <algorithm>
#include <random>
#include <vector>

namespace ssg::testing {

inline Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Tensor t(r, c);
    for (auto& v : t.flat()) v = n(rng);
    return t;
}

/// Erdős–Rényi graph; when `connected`, a random spanning path is added first.
inline Graph random_graph(std::size_t n, double p, Rng& rng, bool connected = false) {
    std::vector<Edge> edges;
    if (connected) {
        std::vector<NodeId> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<NodeId>(i);
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t i = 1; i < n; ++i) edges.emplace_back(order[i - 1], order[i]);
    }
    for (NodeId i = 0; i < n; ++i)
        for (NodeId j = i + 1; j < n; ++j)
            if (bernoulli(rng, p)) edges.emplace_back(i, j);
    return Graph::from_edges(n, edges);
}

inline FeatureMatrix random_features(std::size_t n, std::size_t f, Rng& rng) {
    std::normal_distribution<float> g(0.0f, 1.0f);
    FeatureMatrix x(n, f);
    for (auto& v : x.values) v = g(rng);
    return x;
}

/// Dense Â (with self-loops) from a Graph.
inline std::vector<std::vector<double>> dense_adjacency_hat(const Graph& g) {
    const auto n = g.num_nodes();
    std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
    for (NodeId i = 0; i < n; ++i) {
        a[i][i] = 1.0;
        for (NodeId j : g.neighbors(i)) a[i][j] = 1.0;
    }
    return a;
}

}  // namespace ssg::testing
