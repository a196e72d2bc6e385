#include "oasis/io/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace oasis {
namespace {

constexpr char kMagic[8] = {'O', 'A', 'S', 'I', 'S', 'C', 'K', '1'};

template <class T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw InputError("checkpoint: truncated file");
    return v;
}

void write_string(std::ostream& os, const std::string& s) {
    write_pod<uint32_t>(os, (uint32_t)s.size());
    os.write(s.data(), (std::streamsize)s.size());
}

std::string read_string(std::istream& is) {
    const uint32_t n = read_pod<uint32_t>(is);
    std::string s(n, '\0');
    is.read(s.data(), (std::streamsize)n);
    if (!is) throw InputError("checkpoint: truncated string");
    return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const OasisNet& net,
                     const nlohmann::json& meta) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot write checkpoint: " + path.string());
    os.write(kMagic, sizeof(kMagic));
    write_pod<uint32_t>(os, 1);  // format version

    nlohmann::json header;
    header["model_config"] = model_config_to_json(net.cfg);
    header["meta"] = meta;
    write_string(os, header.dump());

    const auto& entries = net.params().entries();
    write_pod<uint32_t>(os, (uint32_t)entries.size());
    for (const auto& e : entries) {
        write_string(os, e.name);
        write_string(os, e.group);
        write_pod<uint32_t>(os, (uint32_t)e.tensor.shape().size());
        for (int d : e.tensor.shape()) write_pod<int32_t>(os, d);
        const uint64_t bytes = (uint64_t)e.tensor.numel() * sizeof(float);
        write_pod<uint64_t>(os, bytes);
        os.write(reinterpret_cast<const char*>(e.tensor.data()),
                 (std::streamsize)bytes);
    }
    if (!os) throw std::runtime_error("checkpoint write failed: " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("cannot open checkpoint: " + path.string());
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw InputError("not an OASIS checkpoint: " + path.string());
    const uint32_t version = read_pod<uint32_t>(is);
    if (version != 1)
        throw InputError("unsupported checkpoint version " + std::to_string(version));

    nlohmann::json header = nlohmann::json::parse(read_string(is));
    LoadedCheckpoint out;
    const ModelConfig cfg = model_config_from_json(header.at("model_config"));
    out.meta = header.value("meta", nlohmann::json::object());
    out.net = std::make_unique<OasisNet>(cfg, /*init_seed=*/0);

    const uint32_t count = read_pod<uint32_t>(is);
    auto& entries = out.net->params().entries();
    if (count != entries.size())
        throw InputError("checkpoint parameter count mismatch (file " +
                         std::to_string(count) + ", model " +
                         std::to_string(entries.size()) + ")");
    for (uint32_t i = 0; i < count; ++i) {
        const std::string name = read_string(is);
        const std::string group = read_string(is);
        const uint32_t ndim = read_pod<uint32_t>(is);
        std::vector<int> shape((size_t)ndim);
        for (auto& d : shape) d = read_pod<int32_t>(is);
        const uint64_t bytes = read_pod<uint64_t>(is);
        auto& e = entries[(size_t)i];
        if (e.name != name || e.group != group || e.tensor.shape() != shape ||
            bytes != (uint64_t)e.tensor.numel() * sizeof(float))
            throw InputError("checkpoint entry '" + name +
                             "' does not match the model built from its config");
        is.read(reinterpret_cast<char*>(e.tensor.data()), (std::streamsize)bytes);
        if (!is) throw InputError("checkpoint: truncated tensor data for " + name);
    }
    return out;
}

}  // namespace oasis
