#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "fedmr/data.hpp"
#include "fedmr/model.hpp"

// Self-contained differentiable MLP: ReLU hidden layers, softmax
// cross-entropy head, SGD with momentum, optional proximal term.

namespace fedmr {

/// Dense-layer chain. Each layer contributes two consecutive LayerBlocks:
/// weight (out x in, row-major) then bias (out).
struct ArchitectureSpec {
    std::vector<std::pair<int, int>> layer_dims;  // (in, out) per dense layer

    static ArchitectureSpec mlp(int input_dim, const std::vector<int>& hidden,
                                int num_classes);

    void validate() const;
    int input_dim() const { return layer_dims.front().first; }
    int output_dim() const { return layer_dims.back().second; }
    int block_count() const { return 2 * static_cast<int>(layer_dims.size()); }
    uint64_t fingerprint() const;
};

/// Weights uniform in +-sqrt(6/(fan_in+fan_out)), biases zero; deterministic
/// under a fixed seed.
LayeredModel init_model(const ArchitectureSpec& arch, uint64_t seed);

struct ForwardResult {
    std::vector<double> logits;  // row-major, count x classes
    double loss = 0.0;           // mean softmax cross-entropy
};

ForwardResult forward(const LayeredModel& model, const DataView& batch);

/// Analytic gradient of forward()'s mean loss; same block structure as the
/// model.
LayeredModel backward(const LayeredModel& model, const DataView& batch);

struct LocalTrainConfig {
    int epochs = 5;
    int batch_size = 50;
    double lr = 0.01;
    double momentum = 0.9;
    double prox_mu = 0.0;  // FedProx weight; 0 disables the proximal term
    uint64_t seed = 0;

    void validate() const;
};

/// Local SGD iterations one round performs: epochs * ceil(n / batch).
int local_iteration_count(int shard_size, const LocalTrainConfig& cfg);

/// Mini-batch SGD with momentum on the shard; batch order is reshuffled each
/// epoch from cfg.seed, the velocity starts at zero, and the input model is
/// left untouched. With prox_mu > 0 the gradient gains mu * (w - global_ref).
LayeredModel client_update(const LayeredModel& model, const ClientShard& shard,
                           const LocalTrainConfig& cfg,
                           const LayeredModel* global_ref = nullptr);

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
};

/// Argmax accuracy; ties break toward the lowest class index.
EvalResult evaluate(const LayeredModel& model, const DataView& dataset);

}  // namespace fedmr
