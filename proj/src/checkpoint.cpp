#include "latentlens/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace latentlens {

namespace {

constexpr char kMagic[8] = {'L', 'L', 'C', 'K', 'P', 'T', '0', '1'};

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

void append_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t read_u64(std::span<const std::uint8_t> in, std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[at + i]) << (8 * i);
    return v;
}

}  // namespace

CheckpointContainer::CheckpointContainer() : CheckpointContainer("") {}

CheckpointContainer::CheckpointContainer(std::string kind) {
    metadata_ = nlohmann::json::object();
    metadata_["schema_version"] = kSchemaVersion;
    metadata_["kind"] = std::move(kind);
}

void CheckpointContainer::put(const std::string& name, const Tensor& t) {
    for (auto& [n, v] : entries_)
        if (n == name) {
            v = t;
            return;
        }
    entries_.emplace_back(name, t);
}

bool CheckpointContainer::contains(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.first == name) return true;
    return false;
}

const Tensor& CheckpointContainer::get(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.first == name) return e.second;
    throw std::out_of_range("checkpoint has no tensor named " + name);
}

std::vector<std::string> CheckpointContainer::names() const {
    std::vector<std::string> out;
    for (const auto& e : entries_) out.push_back(e.first);
    return out;
}

std::vector<std::uint8_t> CheckpointContainer::serialize() const {
    nlohmann::json header;
    header["metadata"] = metadata_;
    header["tensors"] = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, t] : entries_) {
        const std::uint64_t nbytes = t.size() * sizeof(double);
        header["tensors"].push_back({{"name", name}, {"shape", t.shape()}, {"dtype", "f64"},
                                     {"offset", offset}, {"nbytes", nbytes}});
        offset += nbytes;
    }
    const std::string text = header.dump();
    std::vector<std::uint8_t> out(kMagic, kMagic + 8);
    append_u64(out, text.size());
    out.insert(out.end(), text.begin(), text.end());
    out.reserve(out.size() + offset);
    for (const auto& e : entries_) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(e.second.data());
        out.insert(out.end(), p, p + e.second.size() * sizeof(double));
    }
    return out;
}

CheckpointContainer CheckpointContainer::deserialize(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0)
        throw std::runtime_error("not a checkpoint container (bad magic)");
    const std::uint64_t hlen = read_u64(bytes, 8);
    if (16 + hlen > bytes.size()) throw std::runtime_error("truncated checkpoint header");
    const auto header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(hlen));
    CheckpointContainer c;
    c.metadata_ = header.at("metadata");
    if (!c.metadata_.contains("schema_version")) throw std::runtime_error("checkpoint metadata lacks schema_version");
    if (c.metadata_["schema_version"].get<int>() > kSchemaVersion)
        throw std::runtime_error("checkpoint schema version is newer than this build");
    const std::size_t base = 16 + hlen;
    for (const auto& e : header.at("tensors")) {
        if (e.at("dtype") != "f64") throw std::runtime_error("unsupported tensor dtype");
        const auto shape = e.at("shape").get<std::vector<int>>();
        const auto offset = e.at("offset").get<std::uint64_t>();
        const auto nbytes = e.at("nbytes").get<std::uint64_t>();
        if (nbytes != Tensor::count(shape) * sizeof(double) || base + offset + nbytes > bytes.size())
            throw std::runtime_error("corrupt checkpoint entry " + e.at("name").get<std::string>());
        std::vector<double> data(Tensor::count(shape));
        std::memcpy(data.data(), bytes.data() + base + offset, nbytes);
        const auto name = e.at("name").get<std::string>();
        if (c.contains(name)) throw std::runtime_error("duplicate checkpoint entry " + name);
        c.entries_.emplace_back(name, Tensor(shape, std::move(data)));
    }
    return c;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void CheckpointContainer::save(const std::filesystem::path& path) const { write_file(path, serialize()); }

CheckpointContainer CheckpointContainer::load(const std::filesystem::path& path) {
    return deserialize(read_file(path));
}

void store_parameters(CheckpointContainer& ckpt, nn::Layer& layer) {
    for (auto* p : nn::parameters(layer)) ckpt.put(p->name, p->value);
}

void restore_parameters(const CheckpointContainer& ckpt, nn::Layer& layer) {
    for (auto* p : nn::parameters(layer)) {
        const Tensor& t = ckpt.get(p->name);
        if (t.shape() != p->value.shape())
            throw ShapeError("checkpoint tensor " + p->name + " has shape " + t.shape_string() + ", model expects " +
                             p->value.shape_string());
        p->value = t;
    }
}

}  // namespace latentlens
