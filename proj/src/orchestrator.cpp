#include "fedmr/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "fedmr/error.hpp"
#include "fedmr/rng.hpp"
#include "fedmr/serialize.hpp"

namespace fedmr {

namespace {

// Stream tags for seed derivation; fixed so snapshots can replay any stream.
constexpr uint64_t kStreamInit = 1;
constexpr uint64_t kStreamSelect = 2;
constexpr uint64_t kStreamClient = 3;
constexpr uint64_t kStreamPlan = 4;

}  // namespace

const char* strategy_name(Strategy strategy) {
    switch (strategy) {
        case Strategy::FedMr: return "fedmr";
        case Strategy::FedAvg: return "fedavg";
        case Strategy::FedProx: return "fedprox";
        case Strategy::Indep: return "indep";
    }
    return "unknown";
}

std::optional<Strategy> strategy_from_name(const std::string& name) {
    if (name == "fedmr") return Strategy::FedMr;
    if (name == "fedavg") return Strategy::FedAvg;
    if (name == "fedprox") return Strategy::FedProx;
    if (name == "indep") return Strategy::Indep;
    return std::nullopt;
}

void RunConfig::validate() const {
    if (rounds < 0) throw Error(ErrorKind::InvalidConfig, "rounds must be >= 0");
    if (population < 1) throw Error(ErrorKind::InvalidConfig, "population must be >= 1");
    if (active < 1 || active > population) {
        throw Error(ErrorKind::InvalidClientCount,
                    "active clients must lie in [1, population]");
    }
    if (granularity && (!(*granularity > 0.0) || *granularity > 1.0)) {
        throw Error(ErrorKind::InvalidGranularity, "granularity must lie in (0, 1]");
    }
    if (stage_switch < 0 || stage_switch > rounds) {
        throw Error(ErrorKind::InvalidConfig, "stage_switch must lie in [0, rounds]");
    }
    if (eval_every < 1) throw Error(ErrorKind::InvalidConfig, "eval_every must be >= 1");
    if (strategy == Strategy::FedProx && !(local.prox_mu > 0.0)) {
        throw Error(ErrorKind::InvalidConfig, "fedprox requires prox_mu > 0");
    }
    local.validate();
}

std::vector<int> sample_clients(int population, int active, uint64_t seed, int round) {
    if (active > population) {
        throw Error(ErrorKind::InvalidClientCount, "K exceeds the population");
    }
    if (active < 1) {
        throw Error(ErrorKind::InvalidClientCount, "K must be >= 1");
    }
    Rng rng(derive_seed(seed, kStreamSelect, static_cast<uint64_t>(round)));
    return rng.sample_without_replacement(population, active);
}

uint64_t client_stream_seed(uint64_t run_seed, int round) {
    return derive_seed(run_seed, kStreamClient, static_cast<uint64_t>(round));
}

uint64_t init_stream_seed(uint64_t run_seed, int index) {
    return derive_seed(run_seed, kStreamInit, static_cast<uint64_t>(index));
}

uint64_t plan_stream_seed(uint64_t run_seed, int round) {
    return derive_seed(run_seed, kStreamPlan, static_cast<uint64_t>(round));
}

LayeredModel final_global(const ModelList& models) { return aggregate_mean(models); }

namespace {

// Runs fn(0..count) across up to `threads` workers; each index writes only
// its own slot so the schedule cannot change results.
void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
    threads = std::max(1, std::min(threads, count));
    if (threads == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(threads));
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(static_cast<size_t>(threads));
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (;;) {
                    const int i = next.fetch_add(1);
                    if (i >= count) break;
                    fn(i);
                }
            } catch (...) {
                errors[static_cast<size_t>(t)] = std::current_exception();
            }
        });
    }
    for (auto& worker : pool) worker.join();
    for (auto& err : errors) {
        if (err) std::rethrow_exception(err);
    }
}

double safe_cosine_mean(const ModelList& uploads) {
    if (uploads.size() < 2) return 1.0;
    return pairwise_cosine_mean(uploads);
}

double post_shuffle_sum_gap(const ModelList& before, const ModelList& after) {
    return max_abs_difference(sum_models(before), sum_models(after));
}

}  // namespace

RunResult run(const RunConfig& cfg, const ArchitectureSpec& arch,
              const std::vector<ClientShard>& shards, const DataView& test_set,
              int threads, const RoundObserver* observer) {
    cfg.validate();
    arch.validate();
    if (static_cast<int>(shards.size()) != cfg.population) {
        throw Error(ErrorKind::InvalidConfig,
                    "expected one shard per client (" + std::to_string(cfg.population) +
                        "), got " + std::to_string(shards.size()));
    }

    const int k = cfg.active;
    const bool keeps_list = cfg.strategy == Strategy::FedMr ||
                            cfg.strategy == Strategy::Indep;

    // FedAvg-family rounds train from one global; FedMR before the stage
    // switch behaves identically so the two-stage schedule degenerates to
    // FedAvg when stage_switch == rounds.
    LayeredModel global = init_model(arch, init_stream_seed(cfg.seed, 0));
    ModelList model_list;
    if (keeps_list) {
        model_list.reserve(static_cast<size_t>(k));
        for (int i = 0; i < k; ++i) {
            model_list.push_back(init_model(arch, init_stream_seed(cfg.seed, i)));
        }
    }
    bool list_live = cfg.strategy == Strategy::Indep ||
                     (cfg.strategy == Strategy::FedMr && cfg.stage_switch == 0);

    const uint64_t model_bytes = serialized_size(global);
    uint64_t bytes_up = 0;
    uint64_t bytes_down = 0;

    RunResult result;
    for (int round = 1; round <= cfg.rounds; ++round) {
        const bool aggregation_round =
            cfg.strategy == Strategy::FedAvg || cfg.strategy == Strategy::FedProx ||
            (cfg.strategy == Strategy::FedMr && round <= cfg.stage_switch);
        if (cfg.strategy == Strategy::FedMr && !aggregation_round && !list_live) {
            // Stage switch: the pre-trained global seeds all K slots.
            model_list.assign(static_cast<size_t>(k), global);
            list_live = true;
        }

        const auto selected = sample_clients(cfg.population, k, cfg.seed, round);
        ModelList dispatched(static_cast<size_t>(k));
        for (int i = 0; i < k; ++i) {
            dispatched[static_cast<size_t>(i)] =
                aggregation_round ? global : model_list[static_cast<size_t>(i)];
        }
        bytes_down += static_cast<uint64_t>(k) * model_bytes;

        LocalTrainConfig local = cfg.local;
        local.seed = client_stream_seed(cfg.seed, round);
        if (cfg.strategy != Strategy::FedProx) local.prox_mu = 0.0;

        ModelList uploads(static_cast<size_t>(k));
        parallel_for(k, threads, [&](int i) {
            const auto& shard = shards[static_cast<size_t>(selected[static_cast<size_t>(i)])];
            const LayeredModel* ref =
                cfg.strategy == Strategy::FedProx ? &dispatched[static_cast<size_t>(i)]
                                                  : nullptr;
            uploads[static_cast<size_t>(i)] =
                client_update(dispatched[static_cast<size_t>(i)], shard, local, ref);
        });
        bytes_up += static_cast<uint64_t>(k) * model_bytes;

        double sum_gap = 0.0;
        if (aggregation_round) {
            global = aggregate_mean(uploads);
            if (keeps_list) model_list.assign(static_cast<size_t>(k), global);
        } else if (cfg.strategy == Strategy::FedMr) {
            const int n_layers = static_cast<int>(uploads.front().layers.size());
            const auto groups = cfg.granularity
                                    ? segment_groups(n_layers, *cfg.granularity)
                                    : per_layer_groups(n_layers);
            const auto plan =
                sample_plan(k, groups, plan_stream_seed(cfg.seed, round));
            model_list = recombine(uploads, plan);
            sum_gap = post_shuffle_sum_gap(uploads, model_list);
        } else {  // Indep: one whole-model shuffle, no layer mixing
            Rng rng(plan_stream_seed(cfg.seed, round));
            const auto perm = rng.permutation(k);
            model_list.resize(static_cast<size_t>(k));
            for (int j = 0; j < k; ++j) {
                model_list[static_cast<size_t>(j)] =
                    uploads[static_cast<size_t>(perm[static_cast<size_t>(j)])];
            }
            sum_gap = post_shuffle_sum_gap(uploads, model_list);
        }

        if (observer != nullptr && observer->on_round) {
            observer->on_round(round, dispatched, uploads,
                               aggregation_round ? ModelList{global} : model_list);
        }

        if (round % cfg.eval_every == 0 || round == cfg.rounds) {
            // Inference model: mean of the current list (the global itself on
            // aggregation rounds; IndepAggr for the Indep baseline).
            const LayeredModel inference =
                aggregation_round ? global : aggregate_mean(model_list);
            const auto eval = evaluate(inference, test_set);
            RoundRecord record;
            record.round = round;
            record.selected_clients = selected;
            for (int id : selected) {
                record.local_iterations.push_back(
                    local_iteration_count(shards[static_cast<size_t>(id)].size(), local));
            }
            record.global_loss = eval.loss;
            record.global_acc = eval.accuracy;
            record.cosine_mean = safe_cosine_mean(uploads);
            record.lemma1_sum_gap = sum_gap;
            record.bytes_up = bytes_up;
            record.bytes_down = bytes_down;
            result.records.push_back(std::move(record));
        }
    }

    result.final_global = (keeps_list && list_live) ? final_global(model_list) : global;
    return result;
}

}  // namespace fedmr
