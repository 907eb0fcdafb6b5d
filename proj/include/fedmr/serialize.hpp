#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fedmr/model.hpp"

// Flat binary model container, bit-exact on round-trip. Layout, all little
// endian:
//   magic "FMRM", u32 version,
//   u64 arch_id, u32 layer_count,
//   per layer: u32 layer_index, u32 rank, u64 dim[rank], u64 value_count,
//              f64 values[value_count] (raw IEEE-754 bits).

namespace fedmr {

std::vector<std::byte> model_to_bytes(const LayeredModel& model);
LayeredModel model_from_bytes(std::span<const std::byte> bytes);

void save_model(const LayeredModel& model, const std::filesystem::path& path);
LayeredModel load_model(const std::filesystem::path& path);

/// Single-layer framing, same field layout as the per-layer section above.
/// Also used as the sealed payload in the secure exchange.
std::vector<std::byte> layer_to_bytes(const LayerBlock& block);
LayerBlock layer_from_bytes(std::span<const std::byte> bytes);

/// Serialized payload size of the whole model (sum of layer framings).
uint64_t serialized_size(const LayeredModel& model);

/// Human-readable JSON dump (debug aid, not the interchange format).
std::string model_debug_json(const LayeredModel& model);

}  // namespace fedmr
