#include "ssg/graph.hpp"

#include "ssg/error.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>

namespace ssg {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Graph

Graph Graph::from_edges(std::size_t num_nodes, std::span<const Edge> edges) {
    std::vector<std::vector<NodeId>> adj(num_nodes);
    for (const auto& [u, v] : edges) {
        if (u >= num_nodes || v >= num_nodes)
            throw IndexError("edge (" + std::to_string(u) + ", " + std::to_string(v) + ") references node >= N=" +
                             std::to_string(num_nodes));
        if (u == v) continue;
        adj[u].push_back(v);
        adj[v].push_back(u);
    }
    Graph g;
    g.row_offsets_.assign(num_nodes + 1, 0);
    for (std::size_t i = 0; i < num_nodes; ++i) {
        auto& row = adj[i];
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
        g.row_offsets_[i + 1] = g.row_offsets_[i] + row.size();
    }
    g.col_indices_.reserve(g.row_offsets_.back());
    for (const auto& row : adj) g.col_indices_.insert(g.col_indices_.end(), row.begin(), row.end());
    return g;
}

Graph Graph::from_csr(std::vector<std::size_t> row_offsets, std::vector<NodeId> col_indices) {
    if (row_offsets.empty() || row_offsets.front() != 0 || row_offsets.back() != col_indices.size())
        throw StructuralError("row_offsets must start at 0 and end at the arc count");
    const std::size_t n = row_offsets.size() - 1;
    for (std::size_t i = 0; i < n; ++i) {
        if (row_offsets[i + 1] < row_offsets[i]) throw StructuralError("row_offsets not monotone");
        for (std::size_t k = row_offsets[i]; k < row_offsets[i + 1]; ++k) {
            if (col_indices[k] >= n) throw IndexError("column index out of range");
            if (col_indices[k] == i) throw StructuralError("self-loop in base graph");
            if (k > row_offsets[i] && col_indices[k] <= col_indices[k - 1])
                throw StructuralError("row not strictly sorted (duplicate arc)");
        }
    }
    Graph g;
    g.row_offsets_ = std::move(row_offsets);
    g.col_indices_ = std::move(col_indices);
    if (!g.is_symmetric()) throw StructuralError("adjacency is not symmetric");
    return g;
}

std::vector<Edge> Graph::undirected_edges() const {
    std::vector<Edge> out;
    out.reserve(num_edges() / 2);
    for (NodeId i = 0; i < num_nodes(); ++i)
        for (NodeId j : neighbors(i))
            if (i < j) out.emplace_back(i, j);
    return out;
}

bool Graph::is_symmetric() const {
    for (NodeId i = 0; i < num_nodes(); ++i) {
        for (NodeId j : neighbors(i)) {
            auto nb = neighbors(j);
            if (!std::binary_search(nb.begin(), nb.end(), i)) return false;
        }
    }
    return true;
}

NormalizedGraph normalize(const Graph& graph, NormKind kind) {
    NormalizedGraph out;
    out.base = graph;
    out.kind = kind;
    const std::size_t n = graph.num_nodes();
    out.row_offsets.assign(n + 1, 0);
    out.col_indices.reserve(graph.num_edges() + n);
    out.weights.reserve(graph.num_edges() + n);
    for (NodeId i = 0; i < n; ++i) {
        for (NodeId j : graph.neighbors(i)) out.col_indices.push_back(j);
        out.col_indices.push_back(i);
        out.row_offsets[i + 1] = out.col_indices.size();
    }
    for (NodeId i = 0; i < n; ++i) {
        const double di = static_cast<double>(graph.degree(i) + 1);
        for (std::size_t k = out.row_offsets[i]; k < out.row_offsets[i + 1]; ++k) {
            const double dj = static_cast<double>(graph.degree(out.col_indices[k]) + 1);
            out.weights.push_back(kind == NormKind::symmetric ? 1.0 / std::sqrt(di * dj) : 1.0 / di);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// SplitMask / Dataset

namespace {

std::vector<NodeId> mask_nodes(const std::vector<bool>& mask) {
    std::vector<NodeId> out;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) out.push_back(static_cast<NodeId>(i));
    return out;
}

}  // namespace

std::vector<NodeId> SplitMask::train_nodes() const { return mask_nodes(train); }
std::vector<NodeId> SplitMask::val_nodes() const { return mask_nodes(val); }
std::vector<NodeId> SplitMask::test_nodes() const { return mask_nodes(test); }

bool SplitMask::disjoint() const {
    if (val.size() != train.size() || test.size() != train.size()) return false;
    for (std::size_t i = 0; i < train.size(); ++i)
        if (int(train[i]) + int(val[i]) + int(test[i]) > 1) return false;
    return true;
}

int Dataset::num_classes() const {
    int c = 0;
    for (int y : labels) c = std::max(c, y + 1);
    return c;
}

void Dataset::validate() const {
    const std::size_t n = num_nodes();
    if (features.rows != n) throw ShapeError("feature rows " + std::to_string(features.rows) + " != N " + std::to_string(n));
    if (labels.size() != n) throw ShapeError("label rows " + std::to_string(labels.size()) + " != N " + std::to_string(n));
    if (splits.size() != n) throw ShapeError("split rows " + std::to_string(splits.size()) + " != N " + std::to_string(n));
    if (!splits.disjoint()) throw ConfigError("split masks overlap");
    for (float v : features.values)
        if (!std::isfinite(v)) throw NumericError("non-finite feature value");
    for (int y : labels)
        if (y < kUnlabeled) throw ConfigError("label below -1");
}

// ---------------------------------------------------------------------------
// File formats

namespace {

constexpr char kFeatureMagic[8] = {'S', 'S', 'G', 'F', 'E', 'A', 'T', '1'};

template <typename T>
void write_le(std::ostream& os, T v) {
    static_assert(std::endian::native == std::endian::little, "big-endian hosts unsupported");
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::istream& is, const fs::path& path) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw ParseError("truncated binary file " + path.string(), 0);
    return v;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
    std::ifstream in(path, mode);
    if (!in) throw Error("cannot open " + path.string());
    return in;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream out(path, mode | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

template <typename Int>
bool parse_int(std::string_view tok, Int& out) {
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return ec == std::errc{} && p == tok.data() + tok.size();
}

}  // namespace

FeatureMatrix read_features(const fs::path& path) {
    auto in = open_in(path, std::ios::binary);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kFeatureMagic, 8) != 0) throw ParseError("bad feature magic in " + path.string(), 0);
    const auto n = read_le<std::uint64_t>(in, path);
    const auto f = read_le<std::uint64_t>(in, path);
    FeatureMatrix m(n, f);
    in.read(reinterpret_cast<char*>(m.values.data()), static_cast<std::streamsize>(n * f * sizeof(float)));
    if (!in) throw ParseError("truncated feature payload in " + path.string(), 0);
    return m;
}

void write_features(const fs::path& path, const FeatureMatrix& features) {
    auto out = open_out(path, std::ios::binary);
    out.write(kFeatureMagic, 8);
    write_le<std::uint64_t>(out, features.rows);
    write_le<std::uint64_t>(out, features.cols);
    out.write(reinterpret_cast<const char*>(features.values.data()),
              static_cast<std::streamsize>(features.values.size() * sizeof(float)));
}

std::vector<Edge> read_edges(const fs::path& path) {
    auto in = open_in(path);
    std::vector<Edge> edges;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto s = trim(line);
        if (s.empty() || s.front() == '#') continue;
        std::istringstream ss{std::string(s)};
        std::string a, b, extra;
        NodeId u = 0, v = 0;
        if (!(ss >> a >> b) || (ss >> extra) || !parse_int(a, u) || !parse_int(b, v))
            throw ParseError("malformed edge line '" + std::string(s) + "' in " + path.string(), lineno);
        edges.emplace_back(u, v);
    }
    return edges;
}

void write_edges(const fs::path& path, const Graph& graph) {
    auto out = open_out(path);
    out << "# undirected edges, N=" << graph.num_nodes() << "\n";
    for (const auto& [u, v] : graph.undirected_edges()) out << u << ' ' << v << '\n';
}

std::vector<int> read_labels(const fs::path& path) {
    auto in = open_in(path);
    std::vector<int> labels;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto s = trim(line);
        if (s.empty()) continue;
        int y = 0;
        if (!parse_int(s, y) || y < kUnlabeled)
            throw ParseError("malformed label '" + std::string(s) + "' in " + path.string(), lineno);
        labels.push_back(y);
    }
    return labels;
}

void write_labels(const fs::path& path, std::span<const int> labels) {
    auto out = open_out(path);
    for (int y : labels) out << y << '\n';
}

SplitMask read_splits(const fs::path& path) {
    auto in = open_in(path);
    SplitMask m;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto s = trim(line);
        if (s.empty()) continue;
        const bool tr = s == "train", va = s == "val", te = s == "test";
        if (!tr && !va && !te && s != "none")
            throw ParseError("unknown split tag '" + std::string(s) + "' in " + path.string(), lineno);
        m.train.push_back(tr);
        m.val.push_back(va);
        m.test.push_back(te);
    }
    return m;
}

void write_splits(const fs::path& path, const SplitMask& splits) {
    auto out = open_out(path);
    for (std::size_t i = 0; i < splits.size(); ++i)
        out << (splits.train[i] ? "train" : splits.val[i] ? "val" : splits.test[i] ? "test" : "none") << '\n';
}

Dataset load_dataset(const fs::path& edge_path, const fs::path& feature_path, const fs::path& label_path,
                     const std::optional<fs::path>& split_path) {
    Dataset ds;
    ds.features = read_features(feature_path);
    const std::size_t n = ds.features.rows;
    const auto edges = read_edges(edge_path);
    ds.graph = Graph::from_edges(n, edges);
    ds.labels = read_labels(label_path);
    if (ds.labels.size() != n)
        throw ShapeError("label file has " + std::to_string(ds.labels.size()) + " rows, feature file has " +
                         std::to_string(n));
    if (split_path) {
        ds.splits = read_splits(*split_path);
        if (ds.splits.size() != n)
            throw ShapeError("split file has " + std::to_string(ds.splits.size()) + " rows, expected " +
                             std::to_string(n));
    } else {
        ds.splits = random_split(n, {0.1, 0.1}, 0);
    }
    ds.validate();
    return ds;
}

Dataset load_dataset_dir(const fs::path& dir) {
    std::optional<fs::path> splits;
    if (fs::exists(dir / "splits.txt")) splits = dir / "splits.txt";
    return load_dataset(dir / "edges.txt", dir / "features.bin", dir / "labels.txt", splits);
}

void save_dataset_dir(const fs::path& dir, const Dataset& dataset) {
    fs::create_directories(dir);
    write_edges(dir / "edges.txt", dataset.graph);
    write_features(dir / "features.bin", dataset.features);
    write_labels(dir / "labels.txt", dataset.labels);
    write_splits(dir / "splits.txt", dataset.splits);
}

// ---------------------------------------------------------------------------
// Synthetic data and splits

Dataset generate_sbm(const SbmParams& p) {
    auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (!in_unit(p.p_in) || !in_unit(p.p_out)) throw ConfigError("SBM probabilities must lie in [0, 1]");
    if (!in_unit(p.signal)) throw ConfigError("SBM signal must lie in [0, 1]");
    if (p.blocks == 0 || p.nodes_per_block == 0) throw ConfigError("SBM needs at least one block and node");
    if (p.feature_dim < p.blocks) throw ConfigError("SBM feature_dim must be >= blocks");

    const std::size_t n = p.blocks * p.nodes_per_block;
    Rng edge_rng = make_rng({p.seed, 0x5b3});
    std::vector<Edge> edges;
    for (NodeId i = 0; i < n; ++i) {
        const std::size_t bi = i / p.nodes_per_block;
        for (NodeId j = i + 1; j < n; ++j) {
            const double prob = (j / p.nodes_per_block == bi) ? p.p_in : p.p_out;
            if (bernoulli(edge_rng, prob)) edges.emplace_back(i, j);
        }
    }

    Dataset ds;
    ds.graph = Graph::from_edges(n, edges);
    ds.features = FeatureMatrix(n, p.feature_dim);
    ds.labels.resize(n);
    Rng feat_rng = make_rng({p.seed, 0xfea7});
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const int block = static_cast<int>(i / p.nodes_per_block);
        ds.labels[i] = block;
        for (std::size_t f = 0; f < p.feature_dim; ++f) {
            const double onehot = (f == static_cast<std::size_t>(block)) ? 1.0 : 0.0;
            ds.features(i, f) = static_cast<float>(p.signal * onehot + (1.0 - p.signal) * gauss(feat_rng));
        }
    }
    ds.splits = random_split(n, {p.train_fraction, p.val_fraction}, derive_seed({p.seed, 0x5b117}));
    return ds;
}

SplitMask random_split(std::size_t n, std::pair<double, double> fractions, std::uint64_t seed) {
    const auto [ft, fv] = fractions;
    if (ft < 0.0 || fv < 0.0 || ft + fv > 1.0 + 1e-12) throw ConfigError("split fractions must be >= 0 and sum to <= 1");
    std::vector<NodeId> perm(n);
    std::iota(perm.begin(), perm.end(), NodeId{0});
    Rng rng = make_rng({seed, 0x5917});
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[uniform_index(rng, i)]);

    // The small slack keeps e.g. 0.1 * 10 from flooring to 0 under rounding.
    const auto n_train = std::min(n, static_cast<std::size_t>(std::floor(ft * static_cast<double>(n) + 1e-9)));
    const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::floor(fv * static_cast<double>(n) + 1e-9)));
    SplitMask m;
    m.train.assign(n, false);
    m.val.assign(n, false);
    m.test.assign(n, false);
    for (std::size_t k = 0; k < n; ++k) {
        if (k < n_train) m.train[perm[k]] = true;
        else if (k < n_train + n_val) m.val[perm[k]] = true;
        else m.test[perm[k]] = true;
    }
    return m;
}

Dataset induced_dataset(const Dataset& dataset, std::span<const NodeId> nodes) {
    std::unordered_map<NodeId, NodeId> local;
    local.reserve(nodes.size() * 2);
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        if (nodes[k] >= dataset.num_nodes()) throw IndexError("induced_dataset: node out of range");
        if (!local.emplace(nodes[k], static_cast<NodeId>(k)).second) throw StructuralError("induced_dataset: duplicate node");
    }
    std::vector<std::size_t> offsets(nodes.size() + 1, 0);
    std::vector<NodeId> cols;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        std::vector<NodeId> row;
        for (NodeId g : dataset.graph.neighbors(nodes[k]))
            if (auto it = local.find(g); it != local.end()) row.push_back(it->second);
        std::sort(row.begin(), row.end());
        cols.insert(cols.end(), row.begin(), row.end());
        offsets[k + 1] = cols.size();
    }
    Dataset out;
    out.graph = Graph::from_csr(std::move(offsets), std::move(cols));
    out.features = FeatureMatrix(nodes.size(), dataset.feature_dim());
    out.labels.resize(nodes.size());
    out.splits.train.resize(nodes.size());
    out.splits.val.resize(nodes.size());
    out.splits.test.resize(nodes.size());
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        const auto src = dataset.features.row(nodes[k]);
        std::copy(src.begin(), src.end(), out.features.values.begin() + static_cast<std::ptrdiff_t>(k * out.features.cols));
        out.labels[k] = dataset.labels[nodes[k]];
        out.splits.train[k] = dataset.splits.train[nodes[k]];
        out.splits.val[k] = dataset.splits.val[nodes[k]];
        out.splits.test[k] = dataset.splits.test[nodes[k]];
    }
    return out;
}

}  // namespace ssg
