#pragma once

#include <filesystem>
#include <memory>

#include "oasis/engine/config.hpp"

namespace oasis {

// Single-file binary archive: model config JSON plus every named parameter's
// raw float32 buffer. Round-trips bit-exactly.
void save_checkpoint(const std::filesystem::path& path, const OasisNet& net,
                     const nlohmann::json& meta = {});

struct LoadedCheckpoint {
    std::unique_ptr<OasisNet> net;
    nlohmann::json meta;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace oasis
