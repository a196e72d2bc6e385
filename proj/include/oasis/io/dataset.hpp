#pragma once

#include <filesystem>
#include <optional>

#include "oasis/core/types.hpp"

namespace oasis {

// DAVIS-style tree: JPEGImages/<seq>/<frame>.{jpg,png} and
// Annotations/<seq>/<frame>.png (indexed palette). Frame names are
// zero-padded; lexicographic order is temporal order.
struct DatasetLayout {
    std::filesystem::path root;
    std::optional<std::vector<std::string>> split;  // restrict to these sequences

    std::filesystem::path images_dir(const std::string& seq = "") const;
    std::filesystem::path annotations_dir(const std::string& seq = "") const;
    std::vector<std::string> sequences() const;
    static DatasetLayout at(const std::filesystem::path& root,
                            const std::optional<std::filesystem::path>& split_file = {});
};

struct LoadedSequence {
    std::string name;
    std::vector<FrameTensor> frames;
    std::vector<std::optional<IdMask>> masks;  // frame 0 always present
    std::vector<std::string> frame_names;      // stems, without extension
};

// Missing annotations beyond frame 0 are permitted (inference-only frames).
LoadedSequence load_sequence(const DatasetLayout& layout, const std::string& name);

// Writes indexed-palette PNGs (one per frame) under out_root/<seq>/.
void save_predictions(const std::vector<IdMask>& masks,
                      const std::filesystem::path& out_root, const std::string& seq,
                      const std::vector<std::string>& frame_names);

}  // namespace oasis
