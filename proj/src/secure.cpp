#include "fedmr/secure.hpp"

#include <algorithm>
#include <sstream>

#include <json.hpp>

#include "fedmr/error.hpp"
#include "fedmr/rng.hpp"
#include "fedmr/serialize.hpp"

namespace fedmr {

Sealer Sealer::identity() {
    auto copy = [](std::span<const std::byte> bytes) {
        return std::vector<std::byte>(bytes.begin(), bytes.end());
    };
    return {copy, copy};
}

namespace {

constexpr uint64_t kStreamClient = 11;
constexpr uint64_t kStreamBus = 12;

// In-memory bus; FIFO hands messages out in push order, the fuzz policy pops
// a seeded random element so tests can prove order-insensitivity.
class MessageBus {
public:
    MessageBus(DeliveryPolicy policy, uint64_t seed)
        : policy_(policy), rng_(derive_seed(seed, kStreamBus)) {}

    void push(ProtocolMessage message) { queue_.push_back(std::move(message)); }

    bool empty() const { return queue_.empty(); }

    ProtocolMessage pop() {
        size_t pick = 0;
        if (policy_ == DeliveryPolicy::RandomInterleave && queue_.size() > 1) {
            pick = rng_.uniform_index(queue_.size());
        }
        ProtocolMessage message = std::move(queue_[pick]);
        queue_.erase(queue_.begin() + static_cast<ptrdiff_t>(pick));
        return message;
    }

private:
    DeliveryPolicy policy_;
    Rng rng_;
    std::deque<ProtocolMessage> queue_;
};

void record(std::vector<TraceEvent>& trace, const ProtocolMessage& message) {
    trace.push_back({message.kind, message.from, message.to, message.repetition,
                     message.kind == MessageKind::Send ? 2 : 4,
                     message.layer.layer_index, message.layer.nonce,
                     message.layer.payload.size()});
}

}  // namespace

std::vector<ClientProtocolState> seal_models(const ModelList& models,
                                             const Sealer& sealer) {
    check_same_arch(models);
    const int k = static_cast<int>(models.size());
    const int n_layers = models.front().layer_count();
    uint64_t next_nonce = 1;
    std::vector<ClientProtocolState> states(static_cast<size_t>(k));
    for (int c = 0; c < k; ++c) {
        auto& state = states[static_cast<size_t>(c)];
        state.client_id = c;
        state.arch_id = models.front().arch_id;
        state.layer_buffers.resize(static_cast<size_t>(n_layers));
        for (int li = 0; li < n_layers; ++li) {
            const auto& block = models[static_cast<size_t>(c)].layers[static_cast<size_t>(li)];
            SealedLayer sealed;
            sealed.layer_index = li;
            sealed.nonce = next_nonce++;
            sealed.payload = sealer.seal(layer_to_bytes(block));
            state.layer_buffers[static_cast<size_t>(li)].push_back(std::move(sealed));
        }
    }
    return states;
}

SecureSessionResult secure_round(std::vector<ClientProtocolState> states,
                                 const SecureConfig& cfg, DeliveryPolicy policy,
                                 const Sealer& sealer) {
    const int k = static_cast<int>(states.size());
    if (k == 0) {
        throw Error(ErrorKind::EmptyPopulation, "no client states");
    }
    const int n_layers = static_cast<int>(states.front().layer_buffers.size());
    for (const auto& state : states) {
        if (static_cast<int>(state.layer_buffers.size()) != n_layers) {
            throw Error(ErrorKind::ShapeMismatch,
                        "clients disagree on the layer count");
        }
        for (const auto& buffer : state.layer_buffers) {
            if (buffer.size() != 1) {
                throw Error(ErrorKind::InvalidBounds,
                            "every buffer must start with exactly one layer");
            }
        }
    }
    if (cfg.n_low < 0 || cfg.n_high < cfg.n_low || cfg.n_high > n_layers) {
        throw Error(ErrorKind::InvalidBounds,
                    "need 0 <= n_low <= n_high <= layer count");
    }
    if (cfg.repeats < 1) {
        throw Error(ErrorKind::InvalidBounds, "repeats must be >= 1");
    }

    std::vector<Rng> client_rng;
    client_rng.reserve(static_cast<size_t>(k));
    for (int c = 0; c < k; ++c) {
        client_rng.emplace_back(derive_seed(cfg.seed, kStreamClient, static_cast<uint64_t>(c)));
    }
    MessageBus bus(policy, cfg.seed);

    SecureSessionResult result;
    result.traffic.bytes_per_repetition.assign(static_cast<size_t>(cfg.repeats), 0);
    result.traffic.messages_per_repetition.assign(static_cast<size_t>(cfg.repeats), 0);

    for (int rep = 1; rep <= cfg.repeats; ++rep) {
        uint64_t rep_bytes = 0;
        uint64_t rep_messages = 0;

        // Stage 1: each client picks n distinct layers and scatters them.
        for (int c = 0; c < k && k >= 2; ++c) {
            auto& state = states[static_cast<size_t>(c)];
            auto& rng = client_rng[static_cast<size_t>(c)];
            state.phase = ProtocolPhase::Stage1;
            const int n = cfg.n_low == cfg.n_high
                              ? cfg.n_low
                              : rng.uniform_int(cfg.n_low, cfg.n_high);
            const auto chosen = rng.sample_without_replacement(n_layers, n);
            for (int li : chosen) {
                auto& buffer = state.layer_buffers[static_cast<size_t>(li)];
                // At repetition start each buffer holds exactly one layer.
                if (buffer.size() != 1) {
                    throw Error(ErrorKind::Routing,
                                "buffer not settled before stage 1");
                }
                SealedLayer layer = std::move(buffer.front());
                buffer.erase(buffer.begin());
                const int offset =
                    1 + static_cast<int>(rng.uniform_index(static_cast<uint64_t>(k - 1)));
                const int peer = (c + offset) % k;
                bus.push({MessageKind::Send, c, peer, rep, std::move(layer)});
            }
        }

        // Stage 2: deliver sends; receivers buffer and owe a return.
        while (!bus.empty()) {
            ProtocolMessage message = bus.pop();
            if (message.to < 0 || message.to >= k) {
                throw Error(ErrorKind::Routing,
                            "message addressed to unknown client " +
                                std::to_string(message.to));
            }
            record(result.trace, message);
            rep_bytes += message.layer.payload.size();
            ++rep_messages;
            ++result.traffic.send_messages;
            auto& receiver = states[static_cast<size_t>(message.to)];
            receiver.phase = ProtocolPhase::Stage2;
            receiver.pending_returns.emplace_back(message.from,
                                                  message.layer.layer_index);
            receiver.layer_buffers[static_cast<size_t>(message.layer.layer_index)]
                .push_back(std::move(message.layer));
        }

        // Stage 3: one uniform pick from the buffer per owed return.
        for (int c = 0; c < k; ++c) {
            auto& state = states[static_cast<size_t>(c)];
            auto& rng = client_rng[static_cast<size_t>(c)];
            state.phase = ProtocolPhase::Stage3;
            while (!state.pending_returns.empty()) {
                const auto [peer, li] = state.pending_returns.front();
                state.pending_returns.pop_front();
                auto& buffer = state.layer_buffers[static_cast<size_t>(li)];
                const auto pick = rng.uniform_index(buffer.size());
                SealedLayer layer = std::move(buffer[pick]);
                buffer.erase(buffer.begin() + static_cast<ptrdiff_t>(pick));
                bus.push({MessageKind::Return, c, peer, rep, std::move(layer)});
            }
        }

        // Stage 4: deliver returns; every buffer ends with exactly one layer.
        while (!bus.empty()) {
            ProtocolMessage message = bus.pop();
            if (message.to < 0 || message.to >= k) {
                throw Error(ErrorKind::Routing,
                            "message addressed to unknown client " +
                                std::to_string(message.to));
            }
            record(result.trace, message);
            rep_bytes += message.layer.payload.size();
            ++rep_messages;
            ++result.traffic.return_messages;
            auto& receiver = states[static_cast<size_t>(message.to)];
            receiver.phase = ProtocolPhase::Stage4;
            receiver.layer_buffers[static_cast<size_t>(message.layer.layer_index)]
                .push_back(std::move(message.layer));
        }

        result.traffic.bytes += rep_bytes;
        result.traffic.bytes_per_repetition[static_cast<size_t>(rep - 1)] = rep_bytes;
        result.traffic.messages_per_repetition[static_cast<size_t>(rep - 1)] =
            rep_messages;
    }

    // Materialize the exchanged models.
    result.models.resize(static_cast<size_t>(k));
    for (int c = 0; c < k; ++c) {
        auto& state = states[static_cast<size_t>(c)];
        auto& model = result.models[static_cast<size_t>(c)];
        model.layers.resize(static_cast<size_t>(n_layers));
        for (int li = 0; li < n_layers; ++li) {
            const auto& buffer = state.layer_buffers[static_cast<size_t>(li)];
            if (buffer.size() != 1) {
                throw Error(ErrorKind::Routing,
                            "client " + std::to_string(c) + " buffer " +
                                std::to_string(li) + " holds " +
                                std::to_string(buffer.size()) + " layers");
            }
            model.layers[static_cast<size_t>(li)] =
                layer_from_bytes(sealer.unseal(buffer.front().payload));
        }
        model.arch_id = state.arch_id;
        state.phase = ProtocolPhase::Done;
    }
    result.final_states = std::move(states);
    return result;
}

SecureSessionResult secure_round(const ModelList& models, const SecureConfig& cfg,
                                 DeliveryPolicy policy, const Sealer& sealer) {
    return secure_round(seal_models(models, sealer), cfg, policy, sealer);
}

double expected_overhead(const SecureConfig& cfg, int population,
                         const LayeredModel& model) {
    if (model.layer_count() == 0) return 0.0;
    return static_cast<double>(cfg.n_high + cfg.n_low) * population /
           static_cast<double>(model.layer_count()) *
           static_cast<double>(serialized_size(model));
}

CollusionReport collusion_probe(const std::vector<TraceEvent>& trace,
                                const std::set<int>& colluders, int population) {
    CollusionReport report;
    report.identifiable_per_client.assign(static_cast<size_t>(population), 0);
    for (int c : colluders) {
        if (c >= 0 && c < population) {
            report.identifiable_per_client[static_cast<size_t>(c)] = -1;
        }
    }
    // Only first-repetition stage-2 receipts carry the sender's own layers;
    // later sends may forward someone else's, so they identify nothing.
    std::set<uint64_t> seen;
    for (const auto& event : trace) {
        if (event.kind != MessageKind::Send || event.repetition != 1) continue;
        if (colluders.count(event.to) == 0 || colluders.count(event.from) != 0) continue;
        if (!seen.insert(event.nonce).second) continue;
        auto& count = report.identifiable_per_client[static_cast<size_t>(event.from)];
        ++count;
        report.max_identifiable = std::max(report.max_identifiable, count);
    }
    return report;
}

std::string trace_to_jsonl(const std::vector<TraceEvent>& trace) {
    std::ostringstream out;
    for (const auto& event : trace) {
        nlohmann::json j{{"kind", event.kind == MessageKind::Send ? "send" : "return"},
                         {"from", event.from},
                         {"to", event.to},
                         {"repetition", event.repetition},
                         {"stage", event.stage},
                         {"layer_index", event.layer_index},
                         {"nonce", event.nonce},
                         {"bytes", event.bytes}};
        out << j.dump() << '\n';
    }
    return out.str();
}

std::vector<TraceEvent> trace_from_jsonl(const std::string& text) {
    std::vector<TraceEvent> trace;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::Io, std::string("bad trace line: ") + e.what());
        }
        TraceEvent event;
        event.kind = j.at("kind").get<std::string>() == "send" ? MessageKind::Send
                                                               : MessageKind::Return;
        event.from = j.at("from").get<int>();
        event.to = j.at("to").get<int>();
        event.repetition = j.at("repetition").get<int>();
        event.stage = j.value("stage", event.kind == MessageKind::Send ? 2 : 4);
        event.layer_index = j.at("layer_index").get<int>();
        event.nonce = j.at("nonce").get<uint64_t>();
        event.bytes = j.at("bytes").get<uint64_t>();
        trace.push_back(event);
    }
    return trace;
}

}  // namespace fedmr
