#pragma once

#include "ssg/graph.hpp"
#include "ssg/tensor.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

// Recorded-operation reverse-mode differentiation over a fixed op vocabulary.
//
// A Tape owns every intermediate value created during a forward pass. Ops whose
// inputs all lack requires_grad are recorded as constants, which is how
// stop-gradient is expressed: bind a parameter with `constant()` and nothing
// downstream of it will ever send gradient back.
//
// Graph-structured ops keep a pointer to the NormalizedGraph they were given;
// that graph must outlive the call to backward().
namespace ssg::ag {

class Tape;

struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
    bool requires_grad() const;
};

class Tape {
public:
    using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    Var variable(Tensor value);

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    /// Gradient reaching `v` in the last backward(); empty when none did.
    const Tensor& grad(Var v) const;

    /// Seeds d(loss)/d(loss) = 1 and runs every recorded backward function in reverse.
    void backward(Var loss);

    std::size_t size() const { return nodes_.size(); }

    // Used by op implementations.
    Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
    Var record(Tensor value, std::span<const Var> inputs, BackwardFn fn);
    /// Zero-initialized on first access.
    Tensor& grad_buffer(std::size_t id);

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        BackwardFn backward;
    };
    void check_owned(Var v) const;

    std::vector<Node> nodes_;
};

// Dense algebra.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var add_bias(Var x, Var bias);  // bias is 1×cols, broadcast over rows
Var scale(Var x, double c);
Var concat_cols(std::span<const Var> parts);
Var mean_of(std::span<const Var> parts);
Var sum(Var x);
Var gather_rows(Var x, std::span<const NodeId> rows);

// Activations.
Var relu(Var x);
Var elu(Var x);
Var leaky_relu(Var x, double slope);
Var prelu(Var x, Var slope);  // slope is 1×1

// Sparse propagation over Â.
Var spmm(const NormalizedGraph& adj, Var x);                 // fixed arc weights
Var spmm_arcs(const NormalizedGraph& adj, Var w, Var x);     // w is (arcs)×1
Var arc_scores(const NormalizedGraph& adj, Var s_dst, Var s_src);  // e_ij = s_dst[i] + s_src[j]
Var edge_softmax(const NormalizedGraph& adj, Var e);        // softmax over each row's arcs

// Normalization.
struct BatchStats {
    Tensor mean;
    Tensor var;
};
/// Standardizes each column over rows with batch statistics; fills `stats` when non-null.
Var batch_norm(Var x, Var gamma, Var beta, double eps, BatchStats* stats = nullptr);
/// (x - mean) / sqrt(var + eps) * gamma + beta with fixed mean/var (eval-mode batch norm).
Var normalize_fixed(Var x, const Tensor& mean, const Tensor& var, Var gamma, Var beta, double eps);
Var layer_norm(Var x, Var gamma, Var beta, double eps);
/// Standardizes each output column of a (fan_in × fan_out) weight matrix.
Var weight_standardize(Var w, double eps);
/// Divides every row by max(‖row‖, eps).
Var row_normalize(Var x, double eps);

// Losses (all return 1×1).
/// -(2/N) Σ cos(z_i, h_i). `h` never receives gradient.
Var bgrl_cosine_loss(Var z, Var h, double eps = 1e-8);

/// Mean over anchors i of -log softmax at the positive (a_i·b_i) among
/// {a_i·b_i} ∪ {a_i·b_j} ∪ {a_i·a_j}, j over row i of `negatives`, all scaled by 1/temperature.
/// Inputs are expected row-normalized so dot products are cosines.
Var info_nce(Var anchors, Var others, std::span<const NodeId> negatives, std::size_t k, double temperature);

/// Mean softmax cross-entropy of `logits` rows against `labels`.
Var softmax_cross_entropy(Var logits, std::span<const int> labels);

}  // namespace ssg::ag
