#include "fedmr/recombine.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "fedmr/error.hpp"
#include "fedmr/rng.hpp"

namespace fedmr {

std::vector<LayerRange> per_layer_groups(int n_layers) {
    std::vector<LayerRange> groups;
    groups.reserve(static_cast<size_t>(n_layers));
    for (int i = 0; i < n_layers; ++i) groups.push_back({i, i + 1});
    return groups;
}

std::vector<LayerRange> segment_groups(int n_layers, double x) {
    if (!(x > 0.0) || x > 1.0) {
        throw Error(ErrorKind::InvalidGranularity,
                    "segment fraction must lie in (0, 1]");
    }
    const int wanted = static_cast<int>(std::ceil(1.0 / x));
    if (wanted > n_layers) return per_layer_groups(n_layers);
    // Balanced contiguous split; the first (n mod wanted) segments take one
    // extra layer.
    std::vector<LayerRange> groups;
    groups.reserve(static_cast<size_t>(wanted));
    const int base = n_layers / wanted;
    const int extra = n_layers % wanted;
    int cursor = 0;
    for (int g = 0; g < wanted; ++g) {
        const int len = base + (g < extra ? 1 : 0);
        groups.push_back({cursor, cursor + len});
        cursor += len;
    }
    return groups;
}

RecombinationPlan sample_plan(int population, const std::vector<LayerRange>& groups,
                              uint64_t seed) {
    if (population < 1) {
        throw Error(ErrorKind::EmptyPopulation, "plan needs at least one model");
    }
    RecombinationPlan plan;
    plan.groups = groups;
    plan.permutations.reserve(groups.size());
    Rng rng(seed);
    for (size_t g = 0; g < groups.size(); ++g) {
        plan.permutations.push_back(rng.permutation(population));
    }
    return plan;
}

RecombinationPlan sample_plan(int population, int n_groups, uint64_t seed) {
    return sample_plan(population, per_layer_groups(n_groups), seed);
}

namespace {

void check_plan(const ModelList& models, const RecombinationPlan& plan) {
    check_same_arch(models);
    const int k = static_cast<int>(models.size());
    const int n_layers = models.front().layer_count();
    if (plan.permutations.size() != plan.groups.size()) {
        throw Error(ErrorKind::PlanShape, "one permutation per group required");
    }
    int covered = 0;
    for (const auto& range : plan.groups) {
        if (range.begin != covered || range.end <= range.begin) {
            throw Error(ErrorKind::PlanShape, "groups must tile the layer range");
        }
        covered = range.end;
    }
    if (covered != n_layers) {
        throw Error(ErrorKind::PlanShape, "groups cover " + std::to_string(covered) +
                                              " layers, models have " +
                                              std::to_string(n_layers));
    }
    for (const auto& perm : plan.permutations) {
        if (static_cast<int>(perm.size()) != k) {
            throw Error(ErrorKind::PlanShape, "permutation length differs from K");
        }
        std::vector<bool> seen(perm.size(), false);
        for (int v : perm) {
            if (v < 0 || v >= k || seen[static_cast<size_t>(v)]) {
                throw Error(ErrorKind::PlanShape, "permutation is not a bijection");
            }
            seen[static_cast<size_t>(v)] = true;
        }
    }
}

}  // namespace

ModelList recombine(const ModelList& models, const RecombinationPlan& plan) {
    check_plan(models, plan);
    const size_t k = models.size();
    ModelList out(k);
    for (size_t j = 0; j < k; ++j) {
        out[j].arch_id = models.front().arch_id;
        out[j].layers.resize(models.front().layers.size());
    }
    for (size_t g = 0; g < plan.groups.size(); ++g) {
        const auto& range = plan.groups[g];
        const auto& perm = plan.permutations[g];
        for (size_t j = 0; j < k; ++j) {
            const auto& source = models[static_cast<size_t>(perm[j])];
            for (int li = range.begin; li < range.end; ++li) {
                out[j].layers[static_cast<size_t>(li)] =
                    source.layers[static_cast<size_t>(li)];
            }
        }
    }
    return out;
}

RecombinationPlan compose_plans(const RecombinationPlan& first,
                                const RecombinationPlan& second) {
    if (first.groups != second.groups ||
        first.permutations.size() != second.permutations.size()) {
        throw Error(ErrorKind::PlanShape, "plans must share the same groups");
    }
    RecombinationPlan out;
    out.groups = first.groups;
    out.permutations.resize(first.permutations.size());
    for (size_t g = 0; g < first.permutations.size(); ++g) {
        const auto& p1 = first.permutations[g];
        const auto& p2 = second.permutations[g];
        auto& q = out.permutations[g];
        q.resize(p1.size());
        // recombine(recombine(L, p1), p2)[j] pulls group g from L[p1[p2[j]]].
        for (size_t j = 0; j < p1.size(); ++j) {
            q[j] = p1[static_cast<size_t>(p2[j])];
        }
    }
    return out;
}

Lemma1Report check_lemma1(const ModelList& before, const ModelList& after,
                          const LayeredModel& x) {
    if (before.size() != after.size()) {
        throw Error(ErrorKind::ShapeMismatch, "before/after lists differ in length");
    }
    Lemma1Report report;
    report.sum_gap = max_abs_difference(sum_models(before), sum_models(after));
    const double d_before = sq_distance_sum(before, x);
    const double d_after = sq_distance_sum(after, x);
    report.sqdist_gap = std::abs(d_before - d_after) / std::max(1.0, d_before);
    return report;
}

std::string plan_to_json(const RecombinationPlan& plan) {
    nlohmann::json j;
    j["groups"] = nlohmann::json::array();
    for (const auto& range : plan.groups) {
        j["groups"].push_back({{"begin", range.begin}, {"end", range.end}});
    }
    j["permutations"] = plan.permutations;
    return j.dump();
}

RecombinationPlan plan_from_json(const std::string& text) {
    RecombinationPlan plan;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
        for (const auto& range : j.at("groups")) {
            plan.groups.push_back(
                {range.at("begin").get<int>(), range.at("end").get<int>()});
        }
        plan.permutations =
            j.at("permutations").get<std::vector<std::vector<int>>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Io, std::string("bad plan JSON: ") + e.what());
    }
    return plan;
}

}  // namespace fedmr
