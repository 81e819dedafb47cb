#include "octroi/nn/checkpoint.hpp"

#include <bit>
#include <cstring>

#include <json.hpp>

namespace octroi::nn {

using nlohmann::json;

namespace {

json config_to_json(const ModelConfig& c) {
    return {{"input_size", {c.input_rows, c.input_cols}},
            {"block_channels", c.block_channels},
            {"convs_per_block", c.convs_per_block},
            {"dense_sizes", c.dense_sizes}};
}

void put_u32_le(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void save_checkpoint(const Model<float>& model, const std::filesystem::path& dir) {
    json tensors = json::array();
    for (const auto& b : model.layout())
        tensors.push_back({{"name", b.name}, {"shape", b.shape}, {"offset", b.offset}});
    const json header = {{"format", "octroi-checkpoint"},
                         {"version", kCheckpointVersion},
                         {"dtype", "float32-le"},
                         {"architecture", config_to_json(model.config())},
                         {"param_count", model.param_count()},
                         {"tensors", tensors}};

    std::string blob;
    blob.reserve(model.param_count() * 4);
    for (float v : model.params()) put_u32_le(blob, std::bit_cast<std::uint32_t>(v));

    write_file_atomic(dir / "model.bin", blob);
    write_file_atomic(dir / "model.json", header.dump(2) + "\n");
}

Model<float> load_checkpoint(const std::filesystem::path& dir) {
    json header;
    try {
        header = json::parse(read_file(dir / "model.json"));
    } catch (const json::exception& ex) {
        throw CheckpointError("model.json", std::string("checkpoint header is not valid JSON: ") + ex.what());
    }

    if (!header.contains("version") || !header["version"].is_number_integer())
        throw CheckpointVersionError("version", "checkpoint header has no integer 'version'");
    const int version = header["version"].get<int>();
    if (version != kCheckpointVersion)
        throw CheckpointVersionError("version", "unsupported checkpoint version " + std::to_string(version) +
                                                    " (expected " + std::to_string(kCheckpointVersion) + ")");

    ModelConfig config;
    try {
        const auto& a = header.at("architecture");
        const auto size = a.at("input_size").get<std::vector<int>>();
        if (size.size() != 2) throw CheckpointShapeError("architecture.input_size", "input_size must have 2 entries");
        config.input_rows = size[0];
        config.input_cols = size[1];
        config.block_channels = a.at("block_channels").get<std::vector<int>>();
        config.convs_per_block = a.at("convs_per_block").get<std::vector<int>>();
        config.dense_sizes = a.at("dense_sizes").get<std::vector<int>>();
        config.validate();
    } catch (const json::exception& ex) {
        throw CheckpointError("architecture", std::string("bad architecture in checkpoint: ") + ex.what());
    } catch (const ValidationError& ex) {
        throw CheckpointError("architecture", std::string("bad architecture in checkpoint: ") + ex.what());
    }

    Model<float> model(config, 0);
    const auto& layout = model.layout();
    const auto& tensors = header.at("tensors");
    if (!tensors.is_array() || tensors.size() != layout.size())
        throw CheckpointShapeError("tensors", "checkpoint lists " + std::to_string(tensors.size()) +
                                                  " tensors, architecture needs " + std::to_string(layout.size()));
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const auto shape = tensors[i].at("shape").get<std::vector<int>>();
        if (shape != layout[i].shape)
            throw CheckpointShapeError("tensors[" + std::to_string(i) + "].shape",
                                       "tensor '" + layout[i].name + "' has shape " + Tensor<float>::describe(shape) +
                                           ", architecture needs " + Tensor<float>::describe(layout[i].shape));
    }
    if (header.value("param_count", std::size_t{0}) != model.param_count())
        throw CheckpointShapeError("param_count", "param_count does not match the architecture");

    const std::string blob = read_file(dir / "model.bin");
    if (blob.size() != model.param_count() * 4)
        throw CheckpointShapeError("model.bin", "weight blob holds " + std::to_string(blob.size()) + " bytes, expected " +
                                                    std::to_string(model.param_count() * 4));
    auto params = model.params();
    const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
    for (std::size_t i = 0; i < params.size(); ++i) params[i] = std::bit_cast<float>(get_u32_le(bytes + 4 * i));
    return model;
}

}  // namespace octroi::nn
