#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "fedmr/model.hpp"

// Secure model recombination: a four-stage peer exchange over a simulated
// message bus. Clients trade sealed layers so that layer provenance is mixed
// before any model leaves the group; the server never sees who trained what.

namespace fedmr {

/// Opaque layer payload with a run-unique nonce. Payloads round-trip to the
/// original block under unseal.
struct SealedLayer {
    int layer_index = 0;
    uint64_t nonce = 0;
    std::vector<std::byte> payload;
};

/// Pluggable payload transform. The default is the identity: the protocol's
/// guarantees come from shuffling, not from the seal, so real cryptography
/// can be slotted in without touching the exchange.
struct Sealer {
    std::function<std::vector<std::byte>(std::span<const std::byte>)> seal;
    std::function<std::vector<std::byte>(std::span<const std::byte>)> unseal;

    static Sealer identity();
};

struct SecureConfig {
    int repeats = 1;   // r_s
    int n_low = 0;     // lower bound of layers sent per repetition
    int n_high = 0;    // upper bound, at most the layer count
    uint64_t seed = 0;
};

enum class MessageKind { Send, Return };

struct ProtocolMessage {
    MessageKind kind = MessageKind::Send;
    int from = 0;
    int to = 0;
    int repetition = 0;  // 1-based
    SealedLayer layer;
};

enum class DeliveryPolicy { Fifo, RandomInterleave };

enum class ProtocolPhase { Stage1, Stage2, Stage3, Stage4, Done };

/// Per-client machine: one buffer per layer index plus the queue of owed
/// returns. At Done every buffer holds exactly one sealed layer.
struct ClientProtocolState {
    int client_id = 0;
    uint64_t arch_id = 0;
    std::vector<std::vector<SealedLayer>> layer_buffers;
    std::deque<std::pair<int, int>> pending_returns;  // (peer, layer index)
    ProtocolPhase phase = ProtocolPhase::Stage1;
};

/// Delivered-message log entry; enough to replay and to feed collusion_probe.
/// Stage is the delivery stage: 2 for sends, 4 for returns.
struct TraceEvent {
    MessageKind kind = MessageKind::Send;
    int from = 0;
    int to = 0;
    int repetition = 0;
    int stage = 2;
    int layer_index = 0;
    uint64_t nonce = 0;
    uint64_t bytes = 0;
};

struct TrafficReport {
    uint64_t send_messages = 0;
    uint64_t return_messages = 0;
    uint64_t bytes = 0;
    std::vector<uint64_t> bytes_per_repetition;
    std::vector<uint64_t> messages_per_repetition;
};

struct SecureSessionResult {
    ModelList models;
    std::vector<ClientProtocolState> final_states;
    TrafficReport traffic;
    std::vector<TraceEvent> trace;
};

/// Seal every layer of every model into per-client protocol states; nonces
/// are assigned sequentially and are unique across the session.
std::vector<ClientProtocolState> seal_models(const ModelList& models,
                                             const Sealer& sealer = Sealer::identity());

/// Run cfg.repeats repetitions of the four-stage exchange. Per repetition
/// each client sends n ~ U[n_low, n_high] distinct layers to uniformly chosen
/// peers, buffers receipts, returns a uniform buffer element for each
/// receipt, and rebuilds its model from the single survivor per buffer. The
/// per-index multiset of sealed layers is conserved exactly.
SecureSessionResult secure_round(std::vector<ClientProtocolState> states,
                                 const SecureConfig& cfg,
                                 DeliveryPolicy policy = DeliveryPolicy::Fifo,
                                 const Sealer& sealer = Sealer::identity());

/// Convenience wrapper: seal, exchange, materialize.
SecureSessionResult secure_round(const ModelList& models, const SecureConfig& cfg,
                                 DeliveryPolicy policy = DeliveryPolicy::Fifo,
                                 const Sealer& sealer = Sealer::identity());

/// Expected traffic in bytes of one repetition:
///   (n_high + n_low) * K / len(w) * size(w).
/// Exact for equal layer sizes; for unequal layers the measured mean is the
/// reference.
double expected_overhead(const SecureConfig& cfg, int population,
                         const LayeredModel& model);

struct CollusionReport {
    std::vector<int> identifiable_per_client;  // indexed by client id;
                                               // colluders entries are -1
    int max_identifiable = 0;
};

/// Counts, per honest client, the layers whose original owner the colluders
/// learned from direct first-repetition receipts.
CollusionReport collusion_probe(const std::vector<TraceEvent>& trace,
                                const std::set<int>& colluders, int population);

/// JSON-lines trace export, one event per line.
std::string trace_to_jsonl(const std::vector<TraceEvent>& trace);
std::vector<TraceEvent> trace_from_jsonl(const std::string& text);

}  // namespace fedmr
