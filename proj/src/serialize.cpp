#include "fedmr/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "fedmr/error.hpp"

namespace fedmr {

namespace {

constexpr char kMagic[4] = {'F', 'M', 'R', 'M'};
constexpr uint32_t kVersion = 1;

// Writers emit little-endian regardless of host order.
template <typename T>
void put(std::vector<std::byte>& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::byte raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        for (size_t i = sizeof(T); i > 0; --i) out.push_back(raw[i - 1]);
    } else {
        out.insert(out.end(), raw, raw + sizeof(T));
    }
}

class Reader {
public:
    explicit Reader(std::span<const std::byte> bytes) : bytes_(bytes) {}

    template <typename T>
    T get() {
        static_assert(std::is_trivially_copyable_v<T>);
        if (pos_ + sizeof(T) > bytes_.size()) {
            throw Error(ErrorKind::Io, "truncated model container");
        }
        std::byte raw[sizeof(T)];
        std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        if constexpr (std::endian::native == std::endian::big) {
            for (size_t i = 0; i < sizeof(T) / 2; ++i) {
                std::swap(raw[i], raw[sizeof(T) - 1 - i]);
            }
        }
        T value;
        std::memcpy(&value, raw, sizeof(T));
        return value;
    }

    bool exhausted() const { return pos_ == bytes_.size(); }

private:
    std::span<const std::byte> bytes_;
    size_t pos_ = 0;
};

void put_layer(std::vector<std::byte>& out, const LayerBlock& block) {
    put<uint32_t>(out, static_cast<uint32_t>(block.layer_index));
    put<uint32_t>(out, static_cast<uint32_t>(block.shape.size()));
    for (int dim : block.shape) put<uint64_t>(out, static_cast<uint64_t>(dim));
    put<uint64_t>(out, static_cast<uint64_t>(block.values.size()));
    for (double v : block.values) put<uint64_t>(out, std::bit_cast<uint64_t>(v));
}

LayerBlock get_layer(Reader& reader) {
    LayerBlock block;
    block.layer_index = static_cast<int>(reader.get<uint32_t>());
    const auto rank = reader.get<uint32_t>();
    block.shape.resize(rank);
    size_t expected = 1;
    for (auto& dim : block.shape) {
        dim = static_cast<int>(reader.get<uint64_t>());
        expected *= static_cast<size_t>(dim);
    }
    const auto count = reader.get<uint64_t>();
    if (rank > 0 && count != expected) {
        throw Error(ErrorKind::ShapeMismatch,
                    "layer value count does not match its shape");
    }
    block.values.resize(count);
    for (auto& v : block.values) v = std::bit_cast<double>(reader.get<uint64_t>());
    return block;
}

}  // namespace

std::vector<std::byte> layer_to_bytes(const LayerBlock& block) {
    std::vector<std::byte> out;
    out.reserve(24 + 8 * (block.shape.size() + block.values.size()));
    put_layer(out, block);
    return out;
}

LayerBlock layer_from_bytes(std::span<const std::byte> bytes) {
    Reader reader(bytes);
    LayerBlock block = get_layer(reader);
    if (!reader.exhausted()) {
        throw Error(ErrorKind::Io, "trailing bytes after layer payload");
    }
    return block;
}

std::vector<std::byte> model_to_bytes(const LayeredModel& model) {
    // Header first (fingerprint, layer count, every layer's descriptor),
    // then the raw reals back to back in layer order.
    std::vector<std::byte> out;
    out.insert(out.end(), reinterpret_cast<const std::byte*>(kMagic),
               reinterpret_cast<const std::byte*>(kMagic) + 4);
    put<uint32_t>(out, kVersion);
    put<uint64_t>(out, model.arch_id);
    put<uint32_t>(out, static_cast<uint32_t>(model.layers.size()));
    for (const auto& layer : model.layers) {
        put<uint32_t>(out, static_cast<uint32_t>(layer.layer_index));
        put<uint32_t>(out, static_cast<uint32_t>(layer.shape.size()));
        for (int dim : layer.shape) put<uint64_t>(out, static_cast<uint64_t>(dim));
        put<uint64_t>(out, static_cast<uint64_t>(layer.values.size()));
    }
    for (const auto& layer : model.layers) {
        for (double v : layer.values) put<uint64_t>(out, std::bit_cast<uint64_t>(v));
    }
    return out;
}

LayeredModel model_from_bytes(std::span<const std::byte> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw Error(ErrorKind::Io, "not a model container (bad magic)");
    }
    Reader reader(bytes.subspan(4));
    const auto version = reader.get<uint32_t>();
    if (version != kVersion) {
        throw Error(ErrorKind::Io,
                    "unsupported container version " + std::to_string(version));
    }
    LayeredModel model;
    model.arch_id = reader.get<uint64_t>();
    const auto layer_count = reader.get<uint32_t>();
    model.layers.resize(layer_count);
    for (auto& layer : model.layers) {
        layer.layer_index = static_cast<int>(reader.get<uint32_t>());
        const auto rank = reader.get<uint32_t>();
        layer.shape.resize(rank);
        size_t expected = 1;
        for (auto& dim : layer.shape) {
            dim = static_cast<int>(reader.get<uint64_t>());
            expected *= static_cast<size_t>(dim);
        }
        const auto count = reader.get<uint64_t>();
        if (rank > 0 && count != expected) {
            throw Error(ErrorKind::ShapeMismatch,
                        "layer value count does not match its shape");
        }
        layer.values.resize(count);
    }
    for (auto& layer : model.layers) {
        for (auto& v : layer.values) v = std::bit_cast<double>(reader.get<uint64_t>());
    }
    if (!reader.exhausted()) {
        throw Error(ErrorKind::Io, "trailing bytes after model container");
    }
    return model;
}

void save_model(const LayeredModel& model, const std::filesystem::path& path) {
    const auto bytes = model_to_bytes(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for write");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorKind::Io, "short write to " + path.string());
}

LayeredModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::vector<char> raw((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
    return model_from_bytes(std::as_bytes(std::span<const char>(raw)));
}

uint64_t serialized_size(const LayeredModel& model) {
    uint64_t total = 0;
    for (const auto& layer : model.layers) {
        total += 16 + 8 * (layer.shape.size() + layer.values.size());
    }
    return total;
}

std::string model_debug_json(const LayeredModel& model) {
    nlohmann::json j;
    j["arch_id"] = model.arch_id;
    j["layers"] = nlohmann::json::array();
    for (const auto& layer : model.layers) {
        j["layers"].push_back({{"layer_index", layer.layer_index},
                               {"shape", layer.shape},
                               {"values", layer.values}});
    }
    return j.dump(2);
}

}  // namespace fedmr
