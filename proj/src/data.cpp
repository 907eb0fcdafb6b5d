#include "fedmr/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "fedmr/error.hpp"
#include "fedmr/model.hpp"
#include "fedmr/rng.hpp"

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

uint64_t Dataset::fingerprint() const {
    uint64_t hash = 0xcbf29ce484222325ULL;
    const int32_t meta[2] = {feature_dim, num_classes};
    hash = fnv1a(hash, meta, sizeof(meta));
    hash = fnv1a(hash, train_x.data(), train_x.size() * sizeof(double));
    hash = fnv1a(hash, train_y.data(), train_y.size() * sizeof(int));
    hash = fnv1a(hash, test_x.data(), test_x.size() * sizeof(double));
    hash = fnv1a(hash, test_y.data(), test_y.size() * sizeof(int));
    return hash;
}

std::vector<std::vector<double>> simplex_centers(int num_classes, int dim) {
    if (num_classes < 1 || dim < 1) {
        throw Error(ErrorKind::InfeasibleCenters, "need at least one class and one dim");
    }
    if (dim < num_classes - 1) {
        throw Error(ErrorKind::InfeasibleCenters,
                    "regular simplex with " + std::to_string(num_classes) +
                        " vertices needs dim >= " + std::to_string(num_classes - 1));
    }
    std::vector<std::vector<double>> centers(
        static_cast<size_t>(num_classes), std::vector<double>(static_cast<size_t>(dim), 0.0));
    if (num_classes == 1) {
        centers[0][0] = 1.0;
        return centers;
    }
    // Unit vertices with pairwise dot -1/(C-1), built coordinate by coordinate.
    const double target = -1.0 / static_cast<double>(num_classes - 1);
    for (int i = 0; i < num_classes - 1; ++i) {
        double sq = 0.0;
        for (int j = 0; j < i; ++j) sq += centers[i][j] * centers[i][j];
        centers[i][i] = std::sqrt(std::max(0.0, 1.0 - sq));
        for (int k = i + 1; k < num_classes; ++k) {
            double dot = 0.0;
            for (int j = 0; j < i; ++j) dot += centers[i][j] * centers[k][j];
            centers[k][i] = (target - dot) / centers[i][i];
        }
    }
    return centers;
}

Dataset make_blobs(int num_classes, int dim, int per_class, double spread,
                   uint64_t seed) {
    if (num_classes < 1 || dim < 1 || per_class < 1) {
        throw Error(ErrorKind::InvalidConfig, "counts must be >= 1");
    }
    if (!(spread > 0.0)) {
        throw Error(ErrorKind::InvalidConfig, "spread must be > 0");
    }
    const auto centers = simplex_centers(num_classes, dim);
    const double scale = 4.0 * spread;

    Dataset ds;
    ds.feature_dim = dim;
    ds.num_classes = num_classes;
    const int test_per_class = per_class / 5;  // 80/20, stratified
    const int train_per_class = per_class - test_per_class;
    ds.train_x.reserve(static_cast<size_t>(train_per_class) * num_classes * dim);
    ds.test_x.reserve(static_cast<size_t>(test_per_class) * num_classes * dim);

    Rng rng(derive_seed(seed, 0x5b0b5));
    std::vector<double> sample(static_cast<size_t>(dim));
    for (int c = 0; c < num_classes; ++c) {
        for (int i = 0; i < per_class; ++i) {
            for (int j = 0; j < dim; ++j) {
                sample[static_cast<size_t>(j)] =
                    scale * centers[static_cast<size_t>(c)][static_cast<size_t>(j)] +
                    spread * rng.normal();
            }
            const bool is_test = i < test_per_class;
            auto& xs = is_test ? ds.test_x : ds.train_x;
            auto& ys = is_test ? ds.test_y : ds.train_y;
            xs.insert(xs.end(), sample.begin(), sample.end());
            ys.push_back(c);
        }
    }

    // Interleave classes in the train split so shard index ranges are not
    // class-sorted.
    Rng order_rng(derive_seed(seed, 0x0bdeb));
    const auto perm = order_rng.permutation(ds.train_size());
    std::vector<double> shuffled_x(ds.train_x.size());
    std::vector<int> shuffled_y(ds.train_y.size());
    for (int i = 0; i < ds.train_size(); ++i) {
        const int src = perm[static_cast<size_t>(i)];
        std::memcpy(shuffled_x.data() + static_cast<size_t>(i) * dim,
                    ds.train_x.data() + static_cast<size_t>(src) * dim,
                    sizeof(double) * static_cast<size_t>(dim));
        shuffled_y[static_cast<size_t>(i)] = ds.train_y[static_cast<size_t>(src)];
    }
    ds.train_x = std::move(shuffled_x);
    ds.train_y = std::move(shuffled_y);
    return ds;
}

namespace {

std::vector<int> largest_remainder_counts(const std::vector<double>& proportions,
                                          int total) {
    const int n = static_cast<int>(proportions.size());
    std::vector<int> counts(static_cast<size_t>(n), 0);
    std::vector<std::pair<double, int>> remainders;
    remainders.reserve(static_cast<size_t>(n));
    int assigned = 0;
    for (int i = 0; i < n; ++i) {
        const double exact = proportions[static_cast<size_t>(i)] * total;
        const int floor_count = static_cast<int>(std::floor(exact));
        counts[static_cast<size_t>(i)] = floor_count;
        assigned += floor_count;
        remainders.emplace_back(exact - floor_count, i);
    }
    // Hand the leftovers to the largest fractional parts; ties go to the
    // lower client id so the result is deterministic.
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (int i = 0; i < total - assigned; ++i) {
        counts[static_cast<size_t>(remainders[static_cast<size_t>(i)].second)]++;
    }
    return counts;
}

}  // namespace

std::vector<ClientShard> partition(const Dataset& dataset, const PartitionSpec& spec) {
    if (spec.num_clients < 1) {
        throw Error(ErrorKind::InvalidConfig, "num_clients must be >= 1");
    }
    if (spec.mode == PartitionMode::Dirichlet && !(spec.alpha > 0.0)) {
        throw Error(ErrorKind::InvalidConfig, "dirichlet alpha must be > 0");
    }
    const int train = dataset.train_size();
    if (train == 0) {
        throw Error(ErrorKind::InfeasiblePartition, "dataset has no train samples");
    }
    if (spec.num_clients > train) {
        throw Error(ErrorKind::InfeasiblePartition,
                    "more clients than train samples (" + std::to_string(spec.num_clients) +
                        " > " + std::to_string(train) + ")");
    }

    const int n_clients = spec.num_clients;
    std::vector<std::vector<int>> assigned(static_cast<size_t>(n_clients));
    Rng rng(derive_seed(spec.seed, 0xd15c0));

    if (spec.mode == PartitionMode::Iid) {
        for (int i = 0; i < train; ++i) {
            const auto client = rng.uniform_index(static_cast<uint64_t>(n_clients));
            assigned[client].push_back(i);
        }
    } else {
        // Per class: proportions ~ Dir(alpha * 1_N), counts by largest
        // remainder, samples assigned in shuffled order.
        std::vector<std::vector<int>> by_class(static_cast<size_t>(dataset.num_classes));
        for (int i = 0; i < train; ++i) {
            by_class[static_cast<size_t>(dataset.train_y[static_cast<size_t>(i)])]
                .push_back(i);
        }
        for (auto& members : by_class) {
            if (members.empty()) continue;
            rng.shuffle(members);
            const auto proportions = rng.dirichlet(spec.alpha, n_clients);
            const auto counts =
                largest_remainder_counts(proportions, static_cast<int>(members.size()));
            size_t cursor = 0;
            for (int c = 0; c < n_clients; ++c) {
                for (int k = 0; k < counts[static_cast<size_t>(c)]; ++k) {
                    assigned[static_cast<size_t>(c)].push_back(members[cursor++]);
                }
            }
        }
    }

    // Top up undersized shards from the largest one. The floor is clamped to
    // the equal share so the loop always terminates.
    const int floor_size =
        std::max(1, std::min(spec.min_shard_size, train / n_clients));
    for (;;) {
        int needy = -1;
        for (int c = 0; c < n_clients; ++c) {
            if (static_cast<int>(assigned[static_cast<size_t>(c)].size()) < floor_size) {
                needy = c;
                break;
            }
        }
        if (needy < 0) break;
        int donor = 0;
        for (int c = 1; c < n_clients; ++c) {
            if (assigned[static_cast<size_t>(c)].size() >
                assigned[static_cast<size_t>(donor)].size()) {
                donor = c;
            }
        }
        auto& from = assigned[static_cast<size_t>(donor)];
        const auto pick = rng.uniform_index(from.size());
        assigned[static_cast<size_t>(needy)].push_back(from[pick]);
        from.erase(from.begin() + static_cast<ptrdiff_t>(pick));
    }

    std::vector<ClientShard> shards;
    shards.reserve(static_cast<size_t>(n_clients));
    const int dim = dataset.feature_dim;
    for (int c = 0; c < n_clients; ++c) {
        auto& indices = assigned[static_cast<size_t>(c)];
        std::sort(indices.begin(), indices.end());
        ClientShard shard;
        shard.client_id = c;
        shard.feature_dim = dim;
        shard.sample_indices = indices;
        shard.class_histogram.assign(static_cast<size_t>(dataset.num_classes), 0);
        shard.features.reserve(indices.size() * static_cast<size_t>(dim));
        shard.labels.reserve(indices.size());
        for (int idx : indices) {
            shard.features.insert(
                shard.features.end(),
                dataset.train_x.begin() + static_cast<ptrdiff_t>(idx) * dim,
                dataset.train_x.begin() + static_cast<ptrdiff_t>(idx + 1) * dim);
            const int label = dataset.train_y[static_cast<size_t>(idx)];
            shard.labels.push_back(label);
            shard.class_histogram[static_cast<size_t>(label)]++;
        }
        shards.push_back(std::move(shard));
    }
    return shards;
}

HeterogeneityReport heterogeneity_report(const std::vector<ClientShard>& shards) {
    if (shards.empty()) {
        throw Error(ErrorKind::InfeasiblePartition, "no shards to report on");
    }
    const size_t classes = shards.front().class_histogram.size();
    std::vector<double> global(classes, 0.0);
    double total = 0.0;
    for (const auto& shard : shards) {
        for (size_t c = 0; c < classes; ++c) {
            global[c] += shard.class_histogram[c];
            total += shard.class_histogram[c];
        }
    }
    for (auto& g : global) g /= total;

    HeterogeneityReport report;
    NeumaierSum entropy_sum;
    NeumaierSum emd_sum;
    for (const auto& shard : shards) {
        const double n = shard.size();
        double entropy = 0.0;
        double emd = 0.0;
        double cum_diff = 0.0;
        for (size_t c = 0; c < classes; ++c) {
            const double p = shard.class_histogram[c] / n;
            if (p > 0.0) entropy -= p * std::log(p);
            // 1-D Wasserstein over class indices with unit spacing.
            cum_diff += p - global[c];
            emd += std::abs(cum_diff);
        }
        report.entropy.push_back(entropy);
        report.emd.push_back(emd);
        entropy_sum.add(entropy);
        emd_sum.add(emd);
    }
    report.mean_entropy = entropy_sum.value() / static_cast<double>(shards.size());
    report.mean_emd = emd_sum.value() / static_cast<double>(shards.size());
    return report;
}

}  // namespace fedmr
