#include "fedmr/model.hpp"

#include <cmath>
#include <cstring>

#include "fedmr/error.hpp"

namespace fedmr {

namespace {

uint64_t fnv1a(uint64_t hash, const void* data, size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < bytes; ++i) {
        hash ^= p[i];
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

}  // namespace

size_t LayeredModel::parameter_count() const {
    size_t total = 0;
    for (const auto& layer : layers) total += layer.size();
    return total;
}

std::vector<double> LayeredModel::flatten() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    for (const auto& layer : layers) {
        flat.insert(flat.end(), layer.values.begin(), layer.values.end());
    }
    return flat;
}

uint64_t compute_arch_id(const LayeredModel& model) {
    uint64_t hash = 0xcbf29ce484222325ULL;
    for (const auto& layer : model.layers) {
        const int32_t index = layer.layer_index;
        hash = fnv1a(hash, &index, sizeof(index));
        for (int dim : layer.shape) {
            const int32_t d = dim;
            hash = fnv1a(hash, &d, sizeof(d));
        }
    }
    return hash;
}

LayeredModel unflatten_like(const LayeredModel& like, std::span<const double> flat) {
    if (flat.size() != like.parameter_count()) {
        throw Error(ErrorKind::ShapeMismatch,
                    "flat vector length does not match the model's parameter count");
    }
    LayeredModel out;
    out.arch_id = like.arch_id;
    out.layers.reserve(like.layers.size());
    size_t offset = 0;
    for (const auto& layer : like.layers) {
        LayerBlock block;
        block.layer_index = layer.layer_index;
        block.shape = layer.shape;
        block.values.assign(flat.begin() + static_cast<ptrdiff_t>(offset),
                            flat.begin() + static_cast<ptrdiff_t>(offset + layer.size()));
        offset += layer.size();
        out.layers.push_back(std::move(block));
    }
    return out;
}

void check_same_arch(const LayeredModel& a, const LayeredModel& b) {
    if (a.arch_id != b.arch_id || a.layers.size() != b.layers.size()) {
        throw Error(ErrorKind::ShapeMismatch, "models have different architectures");
    }
    for (size_t i = 0; i < a.layers.size(); ++i) {
        if (!a.layers[i].same_shape(b.layers[i]) ||
            a.layers[i].size() != b.layers[i].size()) {
            throw Error(ErrorKind::ShapeMismatch, "layer " + std::to_string(i) +
                                                      " shapes differ between models");
        }
    }
}

void check_same_arch(const ModelList& models) {
    if (models.empty()) {
        throw Error(ErrorKind::EmptyAggregate, "model list is empty");
    }
    for (size_t k = 1; k < models.size(); ++k) {
        check_same_arch(models.front(), models[k]);
    }
}

LayeredModel aggregate_mean(const ModelList& models) {
    check_same_arch(models);
    const double k = static_cast<double>(models.size());
    LayeredModel out = models.front();
    for (size_t li = 0; li < out.layers.size(); ++li) {
        auto& values = out.layers[li].values;
        for (size_t e = 0; e < values.size(); ++e) {
            NeumaierSum acc;
            for (const auto& model : models) acc.add(model.layers[li].values[e]);
            values[e] = acc.value() / k;
        }
    }
    return out;
}

LayeredModel sum_models(const ModelList& models) {
    check_same_arch(models);
    LayeredModel out = models.front();
    for (size_t li = 0; li < out.layers.size(); ++li) {
        auto& values = out.layers[li].values;
        for (size_t e = 0; e < values.size(); ++e) {
            NeumaierSum acc;
            for (const auto& model : models) acc.add(model.layers[li].values[e]);
            values[e] = acc.value();
        }
    }
    return out;
}

double sq_distance_sum(const ModelList& models, const LayeredModel& x) {
    check_same_arch(models);
    check_same_arch(models.front(), x);
    NeumaierSum total;
    for (const auto& model : models) {
        NeumaierSum per_model;
        for (size_t li = 0; li < model.layers.size(); ++li) {
            const auto& mv = model.layers[li].values;
            const auto& xv = x.layers[li].values;
            for (size_t e = 0; e < mv.size(); ++e) {
                const double d = mv[e] - xv[e];
                per_model.add(d * d);
            }
        }
        total.add(per_model.value());
    }
    return total.value();
}

namespace {

double dot_flat(const LayeredModel& a, const LayeredModel& b) {
    NeumaierSum acc;
    for (size_t li = 0; li < a.layers.size(); ++li) {
        const auto& av = a.layers[li].values;
        const auto& bv = b.layers[li].values;
        for (size_t e = 0; e < av.size(); ++e) acc.add(av[e] * bv[e]);
    }
    return acc.value();
}

}  // namespace

double pairwise_cosine_mean(const ModelList& models) {
    check_same_arch(models);
    const size_t k = models.size();
    if (k < 2) {
        throw Error(ErrorKind::EmptyAggregate,
                    "pairwise cosine needs at least two models");
    }
    std::vector<double> norms(k);
    for (size_t i = 0; i < k; ++i) {
        norms[i] = std::sqrt(dot_flat(models[i], models[i]));
        if (norms[i] == 0.0) {
            throw Error(ErrorKind::DegenerateNorm,
                        "model " + std::to_string(i) + " has zero norm");
        }
    }
    NeumaierSum acc;
    for (size_t i = 0; i < k; ++i) {
        for (size_t j = i + 1; j < k; ++j) {
            acc.add(dot_flat(models[i], models[j]) / (norms[i] * norms[j]));
        }
    }
    return acc.value() / (static_cast<double>(k) * static_cast<double>(k - 1) / 2.0);
}

double max_abs_difference(const LayeredModel& a, const LayeredModel& b) {
    check_same_arch(a, b);
    double gap = 0.0;
    for (size_t li = 0; li < a.layers.size(); ++li) {
        const auto& av = a.layers[li].values;
        const auto& bv = b.layers[li].values;
        for (size_t e = 0; e < av.size(); ++e) {
            gap = std::max(gap, std::abs(av[e] - bv[e]));
        }
    }
    return gap;
}

}  // namespace fedmr
