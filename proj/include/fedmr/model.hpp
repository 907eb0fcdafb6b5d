#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

// Layered parameter containers and the arithmetic shared by every strategy.
// All values are 64-bit; reductions use Neumaier-compensated summation in a
// fixed iteration order so repeated runs produce identical bits.

namespace fedmr {

/// One parameter tensor: flat values plus its logical shape.
struct LayerBlock {
    int layer_index = 0;
    std::vector<int> shape;
    std::vector<double> values;

    size_t size() const { return values.size(); }
    bool same_shape(const LayerBlock& other) const {
        return layer_index == other.layer_index && shape == other.shape;
    }
};

/// Ordered layer blocks; the unit that is trained, shuffled and aggregated.
struct LayeredModel {
    uint64_t arch_id = 0;
    std::vector<LayerBlock> layers;

    int layer_count() const { return static_cast<int>(layers.size()); }
    size_t parameter_count() const;
    std::vector<double> flatten() const;
};

using ModelList = std::vector<LayeredModel>;

/// Fingerprint over (layer_index, shape) pairs; models built by hand call this
/// so that shape-compatible models compare equal on arch_id.
uint64_t compute_arch_id(const LayeredModel& model);

/// Rebuild a model with the block structure of `like` from a flat vector.
LayeredModel unflatten_like(const LayeredModel& like, std::span<const double> flat);

/// Throws EmptyAggregate / ShapeMismatch unless all members share one arch.
void check_same_arch(const ModelList& models);
void check_same_arch(const LayeredModel& a, const LayeredModel& b);

/// Elementwise mean across the list.
LayeredModel aggregate_mean(const ModelList& models);

/// Elementwise sum across the list.
LayeredModel sum_models(const ModelList& models);

/// Sum over models of the squared L2 distance to reference x.
double sq_distance_sum(const ModelList& models, const LayeredModel& x);

/// Mean cosine similarity over all unordered pairs; requires K >= 2 and no
/// zero-norm member.
double pairwise_cosine_mean(const ModelList& models);

/// Largest absolute elementwise difference; models must share an arch.
double max_abs_difference(const LayeredModel& a, const LayeredModel& b);

/// Compensated (Neumaier) accumulator.
class NeumaierSum {
public:
    void add(double v) {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v)) {
            comp_ += (sum_ - t) + v;
        } else {
            comp_ += (v - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

}  // namespace fedmr
