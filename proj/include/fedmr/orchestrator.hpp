#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fedmr/data.hpp"
#include "fedmr/net.hpp"
#include "fedmr/recombine.hpp"

// The round loop: FedMR, FedAvg, FedProx and Independent training, plus the
// two-stage schedule (stage_switch rounds of FedAvg before recombination).

namespace fedmr {

enum class Strategy { FedMr, FedAvg, FedProx, Indep };

const char* strategy_name(Strategy strategy);
std::optional<Strategy> strategy_from_name(const std::string& name);

struct RunConfig {
    int rounds = 0;
    int population = 1;     // N
    int active = 1;         // K, clients per round
    Strategy strategy = Strategy::FedAvg;
    std::optional<double> granularity;  // segment fraction x in (0,1];
                                        // absent = per-layer recombination
    int stage_switch = 0;   // FedAvg pre-training rounds before recombining
    LocalTrainConfig local;
    int eval_every = 1;
    uint64_t seed = 0;

    void validate() const;
};

struct RoundRecord {
    int round = 0;
    std::vector<int> selected_clients;
    std::vector<int> local_iterations;  // SGD iterations each client ran
    double global_loss = 0.0;
    double global_acc = 0.0;
    double cosine_mean = 0.0;     // over the K uploaded models (1.0 when K=1)
    double lemma1_sum_gap = 0.0;  // 0 on aggregation rounds
    uint64_t bytes_up = 0;        // cumulative through this round
    uint64_t bytes_down = 0;
};

/// K distinct ids, uniform without replacement, deterministic per (seed, round).
std::vector<int> sample_clients(int population, int active, uint64_t seed, int round);

/// Seed for the local-training RNG of round r. Shared by all K clients of the
/// round so that client results do not depend on slot order or schedule.
uint64_t client_stream_seed(uint64_t run_seed, int round);

/// Seed feeding init_model for model-list slot `index` (slot 0 doubles as the
/// FedAvg global initialization).
uint64_t init_stream_seed(uint64_t run_seed, int index);

/// Seed for round r's recombination / shuffle plan.
uint64_t plan_stream_seed(uint64_t run_seed, int round);

struct RunResult {
    std::vector<RoundRecord> records;
    LayeredModel final_global;
};

/// White-box hook for tests: observes each round's traffic.
struct RoundObserver {
    std::function<void(int round, const ModelList& dispatched,
                       const ModelList& uploaded, const ModelList& next)>
        on_round;
};

RunResult run(const RunConfig& cfg, const ArchitectureSpec& arch,
              const std::vector<ClientShard>& shards, const DataView& test_set,
              int threads = 1, const RoundObserver* observer = nullptr);

/// Final aggregation of the model list (Algorithm-final mean).
LayeredModel final_global(const ModelList& models);

}  // namespace fedmr
