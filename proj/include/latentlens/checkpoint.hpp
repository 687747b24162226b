#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "latentlens/nn.hpp"
#include "latentlens/tensor.hpp"

namespace latentlens {

// Binary container of named tensors plus JSON metadata.
//
// Layout (little endian):
//   8 bytes  magic "LLCKPT01"
//   u64      header length
//   header   JSON {"metadata": {...}, "tensors": [{name, shape, dtype, offset, nbytes}]}
//   payload  raw float64 values, concatenated in entry order
//
// Entries keep insertion order and JSON keys are sorted, so
// save -> load -> save reproduces the same bytes.
class CheckpointContainer {
public:
    static constexpr int kSchemaVersion = 1;

    CheckpointContainer();
    explicit CheckpointContainer(std::string kind);

    nlohmann::json& metadata() { return metadata_; }
    const nlohmann::json& metadata() const { return metadata_; }
    std::string kind() const { return metadata_.value("kind", ""); }

    void put(const std::string& name, const Tensor& t);
    bool contains(const std::string& name) const;
    const Tensor& get(const std::string& name) const;
    std::vector<std::string> names() const;
    std::size_t size() const { return entries_.size(); }

    std::vector<std::uint8_t> serialize() const;
    static CheckpointContainer deserialize(std::span<const std::uint8_t> bytes);
    void save(const std::filesystem::path& path) const;
    static CheckpointContainer load(const std::filesystem::path& path);

private:
    nlohmann::json metadata_;
    std::vector<std::pair<std::string, Tensor>> entries_;
};

// Stores every parameter of `layer` (including non-trainable buffers) by name.
void store_parameters(CheckpointContainer& ckpt, nn::Layer& layer);
// Loads parameters by name; throws if one is missing or has a different shape.
void restore_parameters(const CheckpointContainer& ckpt, nn::Layer& layer);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace latentlens
