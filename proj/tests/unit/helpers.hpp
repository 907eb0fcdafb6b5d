#pragma once

#include <vector>

#include "fedmr/model.hpp"
#include "fedmr/rng.hpp"

namespace fedmr::test {

/// Model with the given layer shapes and standard-normal values.
inline LayeredModel random_model(Rng& rng, const std::vector<std::vector<int>>& shapes) {
    LayeredModel model;
    int index = 0;
    for (const auto& shape : shapes) {
        LayerBlock block;
        block.layer_index = index++;
        block.shape = shape;
        size_t n = 1;
        for (int d : shape) n *= static_cast<size_t>(d);
        block.values.resize(n);
        for (auto& v : block.values) v = rng.normal();
        model.layers.push_back(std::move(block));
    }
    model.arch_id = compute_arch_id(model);
    return model;
}

/// K models sharing one random block structure.
inline ModelList random_list(Rng& rng, int k, int n_layers, int max_dim = 5) {
    std::vector<std::vector<int>> shapes;
    for (int i = 0; i < n_layers; ++i) {
        shapes.push_back({1 + static_cast<int>(rng.uniform_index(max_dim)),
                          1 + static_cast<int>(rng.uniform_index(max_dim))});
    }
    ModelList models;
    for (int i = 0; i < k; ++i) models.push_back(random_model(rng, shapes));
    for (auto& m : models) {
        for (size_t li = 0; li < m.layers.size(); ++li) {
            m.layers[li].layer_index = static_cast<int>(li);
        }
        m.arch_id = compute_arch_id(m);
    }
    return models;
}

/// Single-layer model around a plain vector.
inline LayeredModel vector_model(const std::vector<double>& values) {
    LayeredModel model;
    LayerBlock block;
    block.layer_index = 0;
    block.shape = {static_cast<int>(values.size())};
    block.values = values;
    model.layers.push_back(std::move(block));
    model.arch_id = compute_arch_id(model);
    return model;
}

inline bool bitwise_equal(const LayeredModel& a, const LayeredModel& b) {
    if (a.arch_id != b.arch_id || a.layers.size() != b.layers.size()) return false;
    for (size_t li = 0; li < a.layers.size(); ++li) {
        if (a.layers[li].shape != b.layers[li].shape) return false;
        if (a.layers[li].values != b.layers[li].values) return false;
    }
    return true;
}

}  // namespace fedmr::test
