#include "fedmr/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "fedmr/error.hpp"
#include "fedmr/rng.hpp"

namespace fedmr {

ArchitectureSpec ArchitectureSpec::mlp(int input_dim, const std::vector<int>& hidden,
                                       int num_classes) {
    ArchitectureSpec arch;
    int in = input_dim;
    for (int width : hidden) {
        arch.layer_dims.emplace_back(in, width);
        in = width;
    }
    arch.layer_dims.emplace_back(in, num_classes);
    arch.validate();
    return arch;
}

void ArchitectureSpec::validate() const {
    if (layer_dims.empty()) {
        throw Error(ErrorKind::InvalidArchitecture, "architecture has no layers");
    }
    for (size_t i = 0; i < layer_dims.size(); ++i) {
        const auto [in, out] = layer_dims[i];
        if (in < 1 || out < 1) {
            throw Error(ErrorKind::InvalidArchitecture,
                        "layer " + std::to_string(i) + " has non-positive dims");
        }
        if (i > 0 && layer_dims[i - 1].second != in) {
            throw Error(ErrorKind::InvalidArchitecture,
                        "layer " + std::to_string(i) + " input does not chain");
        }
    }
}

uint64_t ArchitectureSpec::fingerprint() const {
    uint64_t hash = 0xcbf29ce484222325ULL;
    auto mix = [&hash](uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            hash ^= (v >> (8 * i)) & 0xff;
            hash *= 0x100000001b3ULL;
        }
    };
    mix(layer_dims.size());
    for (const auto& [in, out] : layer_dims) {
        mix(static_cast<uint64_t>(in));
        mix(static_cast<uint64_t>(out));
    }
    return hash;
}

LayeredModel init_model(const ArchitectureSpec& arch, uint64_t seed) {
    arch.validate();
    LayeredModel model;
    model.arch_id = arch.fingerprint();
    model.layers.reserve(static_cast<size_t>(arch.block_count()));
    Rng rng(seed);
    int index = 0;
    for (const auto& [in, out] : arch.layer_dims) {
        const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
        LayerBlock weight;
        weight.layer_index = index++;
        weight.shape = {out, in};
        weight.values.resize(static_cast<size_t>(out) * static_cast<size_t>(in));
        for (auto& v : weight.values) v = (2.0 * rng.uniform() - 1.0) * bound;
        model.layers.push_back(std::move(weight));

        LayerBlock bias;
        bias.layer_index = index++;
        bias.shape = {out};
        bias.values.assign(static_cast<size_t>(out), 0.0);
        model.layers.push_back(std::move(bias));
    }
    return model;
}

namespace {

struct DenseLayerView {
    const double* w = nullptr;
    const double* b = nullptr;
    int in = 0;
    int out = 0;
};

// Recovers the dense-layer chain from the block structure; rejects anything
// that is not an alternating weight/bias stack.
std::vector<DenseLayerView> mlp_view(const LayeredModel& model) {
    if (model.layers.empty() || model.layers.size() % 2 != 0) {
        throw Error(ErrorKind::InvalidArchitecture,
                    "model is not a weight/bias block stack");
    }
    std::vector<DenseLayerView> view;
    view.reserve(model.layers.size() / 2);
    for (size_t i = 0; i < model.layers.size(); i += 2) {
        const auto& wb = model.layers[i];
        const auto& bb = model.layers[i + 1];
        if (wb.shape.size() != 2 || bb.shape.size() != 1 || wb.shape[0] != bb.shape[0]) {
            throw Error(ErrorKind::InvalidArchitecture,
                        "block pair " + std::to_string(i / 2) + " is not dense-shaped");
        }
        DenseLayerView layer{wb.values.data(), bb.values.data(), wb.shape[1],
                             wb.shape[0]};
        if (!view.empty() && view.back().out != layer.in) {
            throw Error(ErrorKind::InvalidArchitecture, "dense layers do not chain");
        }
        view.push_back(layer);
    }
    return view;
}

void check_batch(const std::vector<DenseLayerView>& net, const DataView& batch) {
    if (batch.count < 1) throw Error(ErrorKind::EmptyBatch, "batch has no samples");
    if (batch.dim != net.front().in) {
        throw Error(ErrorKind::ShapeMismatch,
                    "feature width " + std::to_string(batch.dim) +
                        " does not match layer 0 input " +
                        std::to_string(net.front().in));
    }
    const int classes = net.back().out;
    for (int i = 0; i < batch.count; ++i) {
        if (batch.y[i] < 0 || batch.y[i] >= classes) {
            throw Error(ErrorKind::InvalidLabel,
                        "label " + std::to_string(batch.y[i]) + " outside [0, " +
                            std::to_string(classes) + ")");
        }
    }
    const size_t n = static_cast<size_t>(batch.count) * static_cast<size_t>(batch.dim);
    for (size_t i = 0; i < n; ++i) {
        if (!std::isfinite(batch.x[i])) {
            throw Error(ErrorKind::NumericInput, "non-finite input feature");
        }
    }
}

// z = h * W^T + b for one row-major batch.
void dense_forward(const DenseLayerView& layer, const double* h, int count, double* z) {
    for (int i = 0; i < count; ++i) {
        const double* hi = h + static_cast<size_t>(i) * layer.in;
        double* zi = z + static_cast<size_t>(i) * layer.out;
        for (int o = 0; o < layer.out; ++o) {
            const double* wo = layer.w + static_cast<size_t>(o) * layer.in;
            double acc = layer.b[o];
            for (int j = 0; j < layer.in; ++j) acc += wo[j] * hi[j];
            zi[o] = acc;
        }
    }
}

struct ForwardTrace {
    // activations[l] feeds layer l; activations[0] is the input batch.
    std::vector<std::vector<double>> activations;
    std::vector<std::vector<double>> pre_activations;  // z per layer
    double loss = 0.0;
};

ForwardTrace forward_trace(const std::vector<DenseLayerView>& net,
                           const DataView& batch) {
    ForwardTrace trace;
    const int count = batch.count;
    trace.activations.resize(net.size() + 1);
    trace.pre_activations.resize(net.size());
    trace.activations[0].assign(
        batch.x, batch.x + static_cast<size_t>(count) * static_cast<size_t>(batch.dim));
    for (size_t l = 0; l < net.size(); ++l) {
        const auto& layer = net[l];
        auto& z = trace.pre_activations[l];
        z.resize(static_cast<size_t>(count) * static_cast<size_t>(layer.out));
        dense_forward(layer, trace.activations[l].data(), count, z.data());
        if (l + 1 < net.size()) {
            auto& h = trace.activations[l + 1];
            h.resize(z.size());
            for (size_t i = 0; i < z.size(); ++i) h[i] = z[i] > 0.0 ? z[i] : 0.0;
        } else {
            trace.activations[l + 1] = z;
        }
    }

    const int classes = net.back().out;
    const auto& logits = trace.pre_activations.back();
    NeumaierSum loss_sum;
    for (int i = 0; i < count; ++i) {
        const double* row = logits.data() + static_cast<size_t>(i) * classes;
        double m = row[0];
        for (int c = 1; c < classes; ++c) m = std::max(m, row[c]);
        NeumaierSum exp_sum;
        for (int c = 0; c < classes; ++c) exp_sum.add(std::exp(row[c] - m));
        loss_sum.add(m + std::log(exp_sum.value()) - row[batch.y[i]]);
    }
    trace.loss = loss_sum.value() / static_cast<double>(count);
    return trace;
}

}  // namespace

ForwardResult forward(const LayeredModel& model, const DataView& batch) {
    const auto net = mlp_view(model);
    check_batch(net, batch);
    auto trace = forward_trace(net, batch);
    return {std::move(trace.pre_activations.back()), trace.loss};
}

LayeredModel backward(const LayeredModel& model, const DataView& batch) {
    const auto net = mlp_view(model);
    check_batch(net, batch);
    const auto trace = forward_trace(net, batch);
    const int count = batch.count;
    const int classes = net.back().out;

    LayeredModel grad = model;
    for (auto& layer : grad.layers) {
        std::fill(layer.values.begin(), layer.values.end(), 0.0);
    }

    // dZ of the head: (softmax - onehot) / count.
    const auto& logits = trace.pre_activations.back();
    std::vector<double> delta(logits.size());
    for (int i = 0; i < count; ++i) {
        const double* row = logits.data() + static_cast<size_t>(i) * classes;
        double* drow = delta.data() + static_cast<size_t>(i) * classes;
        double m = row[0];
        for (int c = 1; c < classes; ++c) m = std::max(m, row[c]);
        double denom = 0.0;
        for (int c = 0; c < classes; ++c) {
            drow[c] = std::exp(row[c] - m);
            denom += drow[c];
        }
        for (int c = 0; c < classes; ++c) {
            drow[c] = (drow[c] / denom - (batch.y[i] == c ? 1.0 : 0.0)) /
                      static_cast<double>(count);
        }
    }

    for (size_t l = net.size(); l-- > 0;) {
        const auto& layer = net[l];
        double* wg = grad.layers[2 * l].values.data();
        double* bg = grad.layers[2 * l + 1].values.data();
        const double* h = trace.activations[l].data();
        for (int i = 0; i < count; ++i) {
            const double* di = delta.data() + static_cast<size_t>(i) * layer.out;
            const double* hi = h + static_cast<size_t>(i) * layer.in;
            for (int o = 0; o < layer.out; ++o) {
                const double d = di[o];
                bg[o] += d;
                double* wrow = wg + static_cast<size_t>(o) * layer.in;
                for (int j = 0; j < layer.in; ++j) wrow[j] += d * hi[j];
            }
        }
        if (l == 0) break;

        // Propagate: dH = dZ * W, then gate by ReLU'.
        std::vector<double> prev(static_cast<size_t>(count) *
                                 static_cast<size_t>(layer.in));
        for (int i = 0; i < count; ++i) {
            const double* di = delta.data() + static_cast<size_t>(i) * layer.out;
            double* pi = prev.data() + static_cast<size_t>(i) * layer.in;
            for (int o = 0; o < layer.out; ++o) {
                const double d = di[o];
                const double* wrow = layer.w + static_cast<size_t>(o) * layer.in;
                for (int j = 0; j < layer.in; ++j) pi[j] += d * wrow[j];
            }
        }
        const auto& z_prev = trace.pre_activations[l - 1];
        for (size_t i = 0; i < prev.size(); ++i) {
            if (z_prev[i] <= 0.0) prev[i] = 0.0;
        }
        delta = std::move(prev);
    }
    return grad;
}

void LocalTrainConfig::validate() const {
    if (epochs < 0) throw Error(ErrorKind::InvalidConfig, "epochs must be >= 0");
    if (batch_size < 1) throw Error(ErrorKind::InvalidConfig, "batch_size must be >= 1");
    if (!(lr >= 0.0)) throw Error(ErrorKind::InvalidConfig, "lr must be >= 0");
    if (!(momentum >= 0.0) || momentum >= 1.0) {
        throw Error(ErrorKind::InvalidConfig, "momentum must lie in [0, 1)");
    }
    if (!(prox_mu >= 0.0)) throw Error(ErrorKind::InvalidConfig, "prox_mu must be >= 0");
}

int local_iteration_count(int shard_size, const LocalTrainConfig& cfg) {
    const int batches = (shard_size + cfg.batch_size - 1) / cfg.batch_size;
    return cfg.epochs * batches;
}

LayeredModel client_update(const LayeredModel& model, const ClientShard& shard,
                           const LocalTrainConfig& cfg,
                           const LayeredModel* global_ref) {
    cfg.validate();
    if (shard.size() == 0) {
        throw Error(ErrorKind::EmptyShard,
                    "client " + std::to_string(shard.client_id) + " has no samples");
    }
    if (cfg.prox_mu > 0.0 && global_ref == nullptr) {
        throw Error(ErrorKind::MissingReference,
                    "proximal term requires the dispatched global model");
    }
    if (global_ref != nullptr) check_same_arch(model, *global_ref);

    LayeredModel weights = model;
    std::vector<std::vector<double>> velocity;
    velocity.reserve(weights.layers.size());
    for (const auto& layer : weights.layers) {
        velocity.emplace_back(layer.size(), 0.0);
    }

    Rng rng(cfg.seed);
    const int n = shard.size();
    const int dim = shard.feature_dim;
    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    std::vector<double> batch_x(static_cast<size_t>(cfg.batch_size) *
                                static_cast<size_t>(dim));
    std::vector<int> batch_y(static_cast<size_t>(cfg.batch_size));

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (int start = 0; start < n; start += cfg.batch_size) {
            const int b = std::min(cfg.batch_size, n - start);
            for (int i = 0; i < b; ++i) {
                const int src = order[static_cast<size_t>(start + i)];
                std::memcpy(batch_x.data() + static_cast<size_t>(i) * dim,
                            shard.features.data() + static_cast<size_t>(src) * dim,
                            sizeof(double) * static_cast<size_t>(dim));
                batch_y[static_cast<size_t>(i)] = shard.labels[static_cast<size_t>(src)];
            }
            const DataView batch{batch_x.data(), batch_y.data(), b, dim};
            LayeredModel grad = backward(weights, batch);
            for (size_t li = 0; li < weights.layers.size(); ++li) {
                auto& wv = weights.layers[li].values;
                const auto& gv = grad.layers[li].values;
                auto& vel = velocity[li];
                const double* ref = global_ref != nullptr
                                        ? global_ref->layers[li].values.data()
                                        : nullptr;
                for (size_t e = 0; e < wv.size(); ++e) {
                    double g = gv[e];
                    if (cfg.prox_mu > 0.0) g += cfg.prox_mu * (wv[e] - ref[e]);
                    vel[e] = cfg.momentum * vel[e] + g;
                    wv[e] -= cfg.lr * vel[e];
                }
            }
        }
    }
    return weights;
}

EvalResult evaluate(const LayeredModel& model, const DataView& dataset) {
    if (dataset.count < 1) {
        throw Error(ErrorKind::EmptyEval, "evaluation set is empty");
    }
    const auto result = forward(model, dataset);
    const auto net = mlp_view(model);
    const int classes = net.back().out;
    int correct = 0;
    for (int i = 0; i < dataset.count; ++i) {
        const double* row = result.logits.data() + static_cast<size_t>(i) * classes;
        int best = 0;
        for (int c = 1; c < classes; ++c) {
            if (row[c] > row[best]) best = c;  // ties stay at the lowest index
        }
        if (best == dataset.y[i]) ++correct;
    }
    return {result.loss, static_cast<double>(correct) / dataset.count};
}

}  // namespace fedmr
