#pragma once

#include <cstdint>
#include <vector>

// Synthetic labeled data and IID / Dirichlet non-IID partitioning.

namespace fedmr {

/// Borrowed view over row-major samples.
struct DataView {
    const double* x = nullptr;
    const int* y = nullptr;
    int count = 0;
    int dim = 0;
};

struct Dataset {
    int feature_dim = 0;
    int num_classes = 0;
    std::vector<double> train_x;  // row-major, train_size x feature_dim
    std::vector<int> train_y;
    std::vector<double> test_x;
    std::vector<int> test_y;

    int train_size() const { return static_cast<int>(train_y.size()); }
    int test_size() const { return static_cast<int>(test_y.size()); }
    DataView train_view() const {
        return {train_x.data(), train_y.data(), train_size(), feature_dim};
    }
    DataView test_view() const {
        return {test_x.data(), test_y.data(), test_size(), feature_dim};
    }
    /// Content hash; compare runs only when fingerprints match.
    uint64_t fingerprint() const;
};

/// Unit-norm vertices of a regular simplex embedded in dim-space
/// (pairwise dot -1/(C-1)); requires dim >= num_classes - 1.
std::vector<std::vector<double>> simplex_centers(int num_classes, int dim);

/// Gaussian blobs: class c is isotropic around 4*spread * mu_c with standard
/// deviation `spread`, balanced classes, stratified 80/20 train/test split.
Dataset make_blobs(int num_classes, int dim, int per_class, double spread,
                   uint64_t seed);

struct ClientShard {
    int client_id = 0;
    int feature_dim = 0;
    std::vector<double> features;  // row-major
    std::vector<int> labels;
    std::vector<int> sample_indices;  // positions in the train split
    std::vector<int> class_histogram;

    int size() const { return static_cast<int>(labels.size()); }
    DataView view() const {
        return {features.data(), labels.data(), size(), feature_dim};
    }
};

enum class PartitionMode { Iid, Dirichlet };

struct PartitionSpec {
    int num_clients = 1;
    PartitionMode mode = PartitionMode::Iid;
    double alpha = 1.0;       // Dirichlet concentration; smaller = more skew
    int min_shard_size = 1;   // rebalanced up to this floor where feasible
    uint64_t seed = 0;
};

/// Disjoint shards covering the train split exactly. Dirichlet mode draws one
/// proportion vector per class and allocates by largest-remainder rounding;
/// IID mode assigns each sample to a uniform client. Shards below the size
/// floor are topped up by stealing uniformly from the largest shard. The
/// floor is clamped to train_size / num_clients so rebalancing always
/// terminates.
std::vector<ClientShard> partition(const Dataset& dataset, const PartitionSpec& spec);

struct HeterogeneityReport {
    std::vector<double> entropy;  // per-client label entropy (nats)
    std::vector<double> emd;      // per-client earth-mover distance to the
                                  // global label distribution (unit spacing)
    double mean_entropy = 0.0;
    double mean_emd = 0.0;
};

HeterogeneityReport heterogeneity_report(const std::vector<ClientShard>& shards);

}  // namespace fedmr
