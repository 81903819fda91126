#pragma once

#include "ssg/graph.hpp"
#include "ssg/nn.hpp"
#include "ssg/params.hpp"
#include "ssg/tensor.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace ssg {

// ---------------------------------------------------------------------------
// Non-collapse diagnostics

/// ‖per-dimension population std‖₂ / mean row norm. 0 (with a warning) for all-zero input.
double embedding_spread(const Tensor& h);
double mean_embedding_norm(const Tensor& h);

// ---------------------------------------------------------------------------
// Frozen evaluation

/// Eval-mode forward on the unaugmented graph followed by row-wise ℓ2 normalization.
/// `params` must hold the "enc." entries of a checkpoint; zero rows stay zero.
Tensor embed_frozen(const EncoderConfig& config, const ParamSet& params, const Dataset& dataset);

enum class ProbeMode { grid_full, gd_fast };

struct ProbeConfig {
    ProbeMode mode = ProbeMode::grid_full;
    /// Empty means the mode's default grid: 2^-10..2^10 step 1 (inverse regularization C)
    /// for grid_full, 2^-10..2^10 step 2 (weight decay) for gd_fast.
    std::vector<double> grid;
    int gd_steps = 100;
    double gd_lr = 0.01;
    double gradient_tolerance = 1e-6;
    int max_iterations = 1000;

    std::vector<double> effective_grid() const;
};

struct ProbeResult {
    double train_accuracy = 0.0;
    double val_accuracy = 0.0;
    double test_accuracy = 0.0;
    double regularizer = 0.0;
};

/// Multinomial logistic regression weights (D × C) and unpenalized bias (1 × C).
struct LinearClassifier {
    Tensor weights;
    Tensor bias;

    std::vector<int> predict(const Tensor& x) const;
    double accuracy(const Tensor& x, std::span<const int> labels, std::span<const NodeId> rows) const;
};

/// Minimizes (1/n)·Σ CE + ‖W‖² / (2·C·n) over `rows` by L-BFGS, i.e. the usual
/// C·Σ CE + ½‖W‖² objective rescaled by 1/(C·n).
LinearClassifier fit_logistic(const Tensor& x, std::span<const int> labels, std::span<const NodeId> rows,
                              int num_classes, double inverse_reg, double gradient_tolerance, int max_iterations);

/// `steps` AdamW iterations on the mean cross-entropy with decoupled weight decay.
LinearClassifier fit_logistic_gd(const Tensor& x, std::span<const int> labels, std::span<const NodeId> rows,
                                 int num_classes, double weight_decay, int steps, double lr);

/// Fits on the train split for each grid value, keeps the best validation accuracy.
/// Throws DegenerateError when the train split holds fewer than two classes.
ProbeResult linear_probe(const Tensor& embeddings, std::span<const int> labels, const SplitMask& splits,
                         const ProbeConfig& config);

/// Untrained encoder: glorot_init → embed_frozen → linear_probe.
ProbeResult random_init_baseline(const EncoderConfig& config, const Dataset& dataset, const ProbeConfig& probe,
                                 std::uint64_t seed);

// ---------------------------------------------------------------------------
// Attention diagnostics

struct AttentionEntropy {
    std::vector<NodeId> nodes;
    /// Mean entropy over layers × heads minus log(deĝ), one per node. Always <= 0.
    std::vector<double> values;
    double lo = 0.0;
    double hi = 0.0;
    std::vector<std::size_t> counts;
};

/// Runs an eval-mode GAT forward and summarizes attention at `nodes` (all train nodes when empty).
AttentionEntropy attention_entropy_histogram(const EncoderConfig& config, const ParamSet& params,
                                             const Dataset& dataset, std::span<const NodeId> nodes = {},
                                             std::size_t bins = 20);

/// Same summary from a precomputed trace over `adj`.
AttentionEntropy attention_entropy_from_trace(const AttentionTrace& trace, const NormalizedGraph& adj,
                                              std::span<const NodeId> nodes, std::size_t bins = 20);

// ---------------------------------------------------------------------------
// Cost model

enum class CostMethod { bgrl, grace };

struct CostModel {
    double c_encoder = 1.0;
    double c_prediction = 1.0;
    double c_projection = 1.0;
    double c_method = 1.0;
};

/// BGRL: 6·C_enc·(M+N) + 4·C_pred·N + C_method·N.
/// GRACE: 4·C_enc·(M+N) + 4·C_proj·N + C_method·N².
double predict_cost(CostMethod method, double n, double m, const CostModel& model);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace ssg
