#pragma once

#include "ssg/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace ssg {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

/// Immutable symmetric CSR adjacency without self-loops or duplicate arcs.
class Graph {
public:
    Graph() : row_offsets_(1, 0) {}

    /// Symmetrizes, drops self-loops and duplicates. Throws IndexError for ids >= num_nodes.
    static Graph from_edges(std::size_t num_nodes, std::span<const Edge> edges);

    /// Adopts CSR arrays after validating every Graph invariant.
    static Graph from_csr(std::vector<std::size_t> row_offsets, std::vector<NodeId> col_indices);

    std::size_t num_nodes() const { return row_offsets_.size() - 1; }
    /// Directed arc count (each undirected edge counted twice).
    std::size_t num_edges() const { return col_indices_.size(); }
    std::size_t degree(NodeId v) const { return row_offsets_[v + 1] - row_offsets_[v]; }
    std::span<const NodeId> neighbors(NodeId v) const {
        return {col_indices_.data() + row_offsets_[v], degree(v)};
    }
    const std::vector<std::size_t>& row_offsets() const { return row_offsets_; }
    const std::vector<NodeId>& col_indices() const { return col_indices_; }

    /// Undirected edges {i, j} with i < j, in CSR order.
    std::vector<Edge> undirected_edges() const;
    bool is_symmetric() const;

    bool operator==(const Graph&) const = default;

private:
    std::vector<std::size_t> row_offsets_;
    std::vector<NodeId> col_indices_;
};

enum class NormKind { symmetric, row };

/// Â = A + I with per-arc propagation weights. Each row lists the base arcs then its self-loop.
struct NormalizedGraph {
    Graph base;
    NormKind kind = NormKind::symmetric;
    bool self_loops_added = true;
    std::vector<std::size_t> row_offsets;  // over Â, length N+1
    std::vector<NodeId> col_indices;       // length M+N
    std::vector<double> weights;           // length M+N

    std::size_t num_nodes() const { return base.num_nodes(); }
    std::size_t num_arcs() const { return col_indices.size(); }
    std::size_t degree_hat(NodeId v) const { return row_offsets[v + 1] - row_offsets[v]; }
};

NormalizedGraph normalize(const Graph& graph, NormKind kind);

/// Dense row-major float32 node features.
struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> values;

    FeatureMatrix() = default;
    FeatureMatrix(std::size_t r, std::size_t c, float fill = 0.0f) : rows(r), cols(c), values(r * c, fill) {}

    float& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    float operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    std::span<const float> row(std::size_t r) const { return {values.data() + r * cols, cols}; }

    bool operator==(const FeatureMatrix&) const = default;
};

struct SplitMask {
    std::vector<bool> train, val, test;

    std::size_t size() const { return train.size(); }
    std::vector<NodeId> train_nodes() const;
    std::vector<NodeId> val_nodes() const;
    std::vector<NodeId> test_nodes() const;
    bool disjoint() const;

    bool operator==(const SplitMask&) const = default;
};

inline constexpr int kUnlabeled = -1;

struct Dataset {
    Graph graph;
    FeatureMatrix features;
    std::vector<int> labels;
    SplitMask splits;

    std::size_t num_nodes() const { return graph.num_nodes(); }
    std::size_t feature_dim() const { return features.cols; }
    /// 1 + largest label, 0 when nothing is labeled.
    int num_classes() const;
    /// Throws on non-finite features, out-of-range labels, overlapping splits or size mismatch.
    void validate() const;

    bool operator==(const Dataset&) const = default;
};

// File formats.
FeatureMatrix read_features(const std::filesystem::path& path);
void write_features(const std::filesystem::path& path, const FeatureMatrix& features);
std::vector<Edge> read_edges(const std::filesystem::path& path);
void write_edges(const std::filesystem::path& path, const Graph& graph);
std::vector<int> read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, std::span<const int> labels);
SplitMask read_splits(const std::filesystem::path& path);
void write_splits(const std::filesystem::path& path, const SplitMask& splits);

/// Loads the three required files; when `split_path` is absent a seed-0 10/10/80 split is drawn.
Dataset load_dataset(const std::filesystem::path& edge_path, const std::filesystem::path& feature_path,
                     const std::filesystem::path& label_path,
                     const std::optional<std::filesystem::path>& split_path = std::nullopt);

/// Directory layout used by the CLI: edges.txt, features.bin, labels.txt, splits.txt (optional).
Dataset load_dataset_dir(const std::filesystem::path& dir);
void save_dataset_dir(const std::filesystem::path& dir, const Dataset& dataset);

struct SbmParams {
    std::size_t blocks = 4;
    std::size_t nodes_per_block = 100;
    double p_in = 0.1;
    double p_out = 0.01;
    std::size_t feature_dim = 32;
    double signal = 0.5;
    std::uint64_t seed = 0;
    double train_fraction = 0.1;
    double val_fraction = 0.1;

    bool operator==(const SbmParams&) const = default;
};

Dataset generate_sbm(const SbmParams& params);

/// floor(fraction * n) train and val nodes, remainder test, keyed by seed.
SplitMask random_split(std::size_t n, std::pair<double, double> fractions, std::uint64_t seed);

/// Copy of `dataset` restricted to `nodes` (in that order), with an induced graph.
Dataset induced_dataset(const Dataset& dataset, std::span<const NodeId> nodes);

}  // namespace ssg
