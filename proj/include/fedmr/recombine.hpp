#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedmr/model.hpp"

// Model recombination: per layer-group shuffling of which client's block
// occupies each slot. Blocks move verbatim; nothing is averaged or dropped.

namespace fedmr {

/// Half-open range of layer indices forming one shuffle group.
struct LayerRange {
    int begin = 0;
    int end = 0;

    int size() const { return end - begin; }
    bool operator==(const LayerRange&) const = default;
};

/// One permutation of [0..K) per layer-group. Output model j receives group g
/// from input model permutations[g][j].
struct RecombinationPlan {
    std::vector<LayerRange> groups;
    std::vector<std::vector<int>> permutations;

    int group_count() const { return static_cast<int>(groups.size()); }
    int population() const {
        return permutations.empty() ? 0 : static_cast<int>(permutations.front().size());
    }
};

/// Each layer its own group.
std::vector<LayerRange> per_layer_groups(int n_layers);

/// ceil(1/x) contiguous segments covering [0..n_layers), balanced to within
/// one layer (leading segments take the remainder). Falls back to per-layer
/// grouping when ceil(1/x) exceeds the layer count. x must lie in (0, 1].
std::vector<LayerRange> segment_groups(int n_layers, double x);

/// Independent uniform permutations (Fisher-Yates), one per group.
RecombinationPlan sample_plan(int population, const std::vector<LayerRange>& groups,
                              uint64_t seed);
/// Convenience overload: per-layer groups over n_groups layers.
RecombinationPlan sample_plan(int population, int n_groups, uint64_t seed);

/// Apply the plan. Every input block lands in exactly one output model,
/// bitwise intact.
ModelList recombine(const ModelList& models, const RecombinationPlan& plan);

/// Plan equivalent to applying `first` and then `second` (same groups).
RecombinationPlan compose_plans(const RecombinationPlan& first,
                                const RecombinationPlan& second);

struct Lemma1Report {
    double sum_gap = 0.0;     // max-abs elementwise gap between model sums
    double sqdist_gap = 0.0;  // relative gap of squared-distance sums to x
};

/// Conservation check: sums and squared-distance sums must survive any
/// recombination (up to summation order).
Lemma1Report check_lemma1(const ModelList& before, const ModelList& after,
                          const LayeredModel& x);

/// JSON round-trip for audit replay.
std::string plan_to_json(const RecombinationPlan& plan);
RecombinationPlan plan_from_json(const std::string& text);

}  // namespace fedmr
