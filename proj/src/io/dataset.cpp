#include "oasis/io/dataset.hpp"

#include <algorithm>
#include <fstream>

#include "oasis/io/png_io.hpp"

namespace oasis {

namespace fs = std::filesystem;

fs::path DatasetLayout::images_dir(const std::string& seq) const {
    return seq.empty() ? root / "JPEGImages" : root / "JPEGImages" / seq;
}

fs::path DatasetLayout::annotations_dir(const std::string& seq) const {
    return seq.empty() ? root / "Annotations" : root / "Annotations" / seq;
}

DatasetLayout DatasetLayout::at(const fs::path& root,
                                const std::optional<fs::path>& split_file) {
    DatasetLayout layout;
    layout.root = root;
    if (!fs::is_directory(root / "JPEGImages"))
        throw InputError("dataset root missing JPEGImages/: " + root.string());
    if (split_file) {
        std::ifstream in(*split_file);
        if (!in) throw InputError("cannot open split file: " + split_file->string());
        std::vector<std::string> names;
        std::string line;
        while (std::getline(in, line)) {
            while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
                line.pop_back();
            if (!line.empty()) names.push_back(line);
        }
        layout.split = std::move(names);
    }
    return layout;
}

std::vector<std::string> DatasetLayout::sequences() const {
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(images_dir()))
        if (entry.is_directory()) names.push_back(entry.path().filename().string());
    std::sort(names.begin(), names.end());
    if (split) {
        std::vector<std::string> filtered;
        for (const auto& n : names)
            if (std::find(split->begin(), split->end(), n) != split->end())
                filtered.push_back(n);
        return filtered;
    }
    return names;
}

LoadedSequence load_sequence(const DatasetLayout& layout, const std::string& name) {
    const fs::path img_dir = layout.images_dir(name);
    if (!fs::is_directory(img_dir))
        throw InputError("sequence not found: " + name + " (" + img_dir.string() + ")");

    std::vector<fs::path> image_files;
    for (const auto& entry : fs::directory_iterator(img_dir)) {
        const auto ext = entry.path().extension().string();
        if (ext == ".jpg" || ext == ".jpeg" || ext == ".png")
            image_files.push_back(entry.path());
    }
    if (image_files.empty()) throw InputError("sequence has no frames: " + name);
    std::sort(image_files.begin(), image_files.end());

    LoadedSequence seq;
    seq.name = name;
    const fs::path ann_dir = layout.annotations_dir(name);
    for (size_t i = 0; i < image_files.size(); ++i) {
        FrameTensor frame;
        frame.pixels = read_image_rgb(image_files[i]);
        frame.frame_index = (int)i;
        frame.source_id = name;
        frame.validate();

        const std::string stem = image_files[i].stem().string();
        seq.frame_names.push_back(stem);
        const fs::path ann = ann_dir / (stem + ".png");
        if (fs::exists(ann)) {
            IdMask mask;
            try {
                mask = read_palette_mask(ann);
            } catch (const InputError& e) {
                throw InputError("sequence '" + name + "': " + e.what());
            }
            if (mask.h != frame.height() || mask.w != frame.width())
                throw InputError("sequence '" + name + "' frame " + stem +
                                 ": annotation size does not match image");
            seq.masks.emplace_back(std::move(mask));
        } else {
            seq.masks.emplace_back(std::nullopt);
        }
        seq.frames.push_back(std::move(frame));
    }
    if (!seq.masks[0].has_value())
        throw InputError("sequence '" + name + "' is missing the frame-0 annotation");
    return seq;
}

void save_predictions(const std::vector<IdMask>& masks, const fs::path& out_root,
                      const std::string& seq, const std::vector<std::string>& frame_names) {
    if (masks.size() != frame_names.size())
        throw InputError("save_predictions: mask/name count mismatch");
    const fs::path dir = out_root / seq;
    fs::create_directories(dir);
    for (size_t i = 0; i < masks.size(); ++i)
        write_palette_mask(dir / (frame_names[i] + ".png"), masks[i]);
}

}  // namespace oasis
